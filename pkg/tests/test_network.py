from __future__ import annotations

import numpy as np
import pytest
from inline_snapshot import snapshot
from numpy.typing import NDArray

from signal_dqn import (
    LossKind,
    NetworkParams,
    NetworkSpec,
    NonFiniteLossError,
    ShapeMismatchError,
    UnsupportedSizeError,
    forward,
    gradients,
    init_params,
)
from signal_dqn._dqn import ConvSpec, DenseSpec, PoolSpec, conv2d

Array = NDArray[np.float64]

POOLED = NetworkSpec(
    input_size=8,
    input_channels=2,
    layers=(
        ConvSpec(kernel=3, stride=1, out_channels=2),
        PoolSpec(size=2),
        ConvSpec(kernel=2, stride=1, out_channels=3),
        DenseSpec(width=4),
    ),
)
STRIDED = NetworkSpec(
    input_size=7,
    input_channels=2,
    layers=(
        ConvSpec(kernel=3, stride=2, out_channels=3),
        ConvSpec(kernel=2, stride=1, out_channels=2),
        DenseSpec(width=3),
    ),
)
DENSE_ONLY = NetworkSpec(input_size=2, input_channels=1, layers=())


def _naive_forward(spec: NetworkSpec, params: NetworkParams, x: Array) -> Array:
    """Loop-by-loop reference evaluation of one frame stack."""
    a = x
    p = 0
    layers = spec.all_layers
    for index, layer in enumerate(layers):
        if isinstance(layer, ConvSpec):
            w, b, s, k = params.weights[p], params.biases[p], layer.stride, layer.kernel
            c_in, h, width = a.shape
            ho, wo = (h - k) // s + 1, (width - k) // s + 1
            out = np.zeros((w.shape[0], ho, wo))
            for o in range(w.shape[0]):
                for i in range(ho):
                    for j in range(wo):
                        total = b[o]
                        for c in range(c_in):
                            for u in range(k):
                                for v in range(k):
                                    total += a[c, i * s + u, j * s + v] * w[o, c, u, v]
                        out[o, i, j] = max(total, 0.0)
            a = out
            p += 1
        elif isinstance(layer, PoolSpec):
            size = layer.size
            c_in, h, width = a.shape
            out = np.zeros((c_in, h // size, width // size))
            for c in range(c_in):
                for i in range(h // size):
                    for j in range(width // size):
                        out[c, i, j] = max(
                            a[c, i * size + u, j * size + v] for u in range(size) for v in range(size)
                        )
            a = out
        else:
            flat = a.reshape(-1)
            w, b = params.weights[p], params.biases[p]
            out = np.array([b[o] + sum(flat[i] * w[i, o] for i in range(len(flat))) for o in range(w.shape[1])])
            a = out if index == len(layers) - 1 else np.maximum(out, 0.0)
            p += 1
    return a


def _numeric_gradients(
    spec: NetworkSpec,
    params: NetworkParams,
    states: Array,
    actions: NDArray[np.intp],
    targets: Array,
    loss: LossKind,
    h: float = 1e-5,
) -> list[Array]:
    out: list[Array] = []
    for array in params.arrays():
        grad = np.zeros_like(array)
        for idx in np.ndindex(array.shape):
            saved = array[idx]
            array[idx] = saved + h
            plus, _ = gradients(spec, params, states, actions, targets, loss)
            array[idx] = saved - h
            minus, _ = gradients(spec, params, states, actions, targets, loss)
            array[idx] = saved
            grad[idx] = (plus - minus) / (2 * h)
        out.append(grad)
    return out


class TestSpec:
    def test_large_shapes(self) -> None:
        assert NetworkSpec.large().layer_shapes() == snapshot(
            [(16, 19, 19), (16, 9, 9), (32, 3, 3), (32, 1, 1), (256,), (5,)]
        )

    def test_small_shapes(self) -> None:
        assert NetworkSpec.small().layer_shapes() == snapshot([(16, 10, 10), (32, 4, 4), (32, 2, 2), (128,), (5,)])

    def test_for_size(self) -> None:
        assert NetworkSpec.for_size(24) == NetworkSpec.small()
        with pytest.raises(UnsupportedSizeError):
            NetworkSpec.for_size(17)

    def test_kernel_too_large(self) -> None:
        with pytest.raises(ShapeMismatchError, match="does not fit"):
            NetworkSpec(input_size=4, layers=(ConvSpec(kernel=5, stride=1, out_channels=1),))

    def test_dict_round_trip(self) -> None:
        spec = NetworkSpec.large()
        assert NetworkSpec.from_dict(spec.to_dict()) == spec

    def test_init_is_seeded(self) -> None:
        a = init_params(POOLED, np.random.default_rng(3))
        b = init_params(POOLED, np.random.default_rng(3))
        assert all(np.array_equal(x, y) for x, y in zip(a.arrays(), b.arrays()))
        fan_in = 2 * 3 * 3
        assert np.abs(a.weights[0]).max() <= 1 / np.sqrt(fan_in)


class TestForward:
    def test_zero_network(self) -> None:
        params = init_params(NetworkSpec.small(), np.random.default_rng(0)).zeros_like()
        q = forward(NetworkSpec.small(), params, np.ones((4, 24, 24)))
        assert q.tolist() == [0.0] * 5

    def test_identity_kernel(self) -> None:
        x = np.arange(9, dtype=np.float64).reshape(1, 1, 3, 3)
        out = conv2d(x, np.ones((1, 1, 1, 1)), np.zeros(1))
        assert np.array_equal(out, x)

    @pytest.mark.parametrize("spec", [POOLED, STRIDED], ids=["pooled", "strided"])
    def test_matches_loop_reference(self, spec: NetworkSpec) -> None:
        rng = np.random.default_rng(7)
        params = init_params(spec, rng)
        x = rng.normal(size=spec.input_shape)
        assert np.max(np.abs(forward(spec, params, x) - _naive_forward(spec, params, x))) < 1e-12

    def test_batch_matches_single(self) -> None:
        rng = np.random.default_rng(1)
        params = init_params(POOLED, rng)
        batch = rng.normal(size=(3, *POOLED.input_shape))
        stacked = forward(POOLED, params, batch)
        assert stacked.shape == (3, 5)
        for i in range(3):
            assert np.allclose(stacked[i], forward(POOLED, params, batch[i]), rtol=0, atol=1e-14)

    def test_wrong_shape(self) -> None:
        params = init_params(POOLED, np.random.default_rng(0))
        with pytest.raises(ShapeMismatchError):
            forward(POOLED, params, np.zeros((2, 7, 7)))


class TestGradients:
    def test_zero_loss(self) -> None:
        rng = np.random.default_rng(2)
        params = init_params(POOLED, rng)
        states = rng.normal(size=(4, *POOLED.input_shape))
        actions = np.array([0, 1, 4, 2])
        targets = forward(POOLED, params, states)[np.arange(4), actions]
        loss, grads = gradients(POOLED, params, states, actions, targets)
        assert loss == 0
        assert all(not g.any() for g in grads.arrays())

    def test_single_dense_layer(self) -> None:
        rng = np.random.default_rng(4)
        params = init_params(DENSE_ONLY, rng)
        x = rng.normal(size=(1, 1, 2, 2))
        pred = forward(DENSE_ONLY, params, x)[0, 3]
        _, grads = gradients(DENSE_ONLY, params, x, np.array([3]), np.array([pred - 0.5]), LossKind.SQUARED)
        expected = np.zeros((4, 5))
        expected[:, 3] = 2 * 0.5 * x.reshape(-1)
        assert np.allclose(grads.weights[0], expected, rtol=0, atol=1e-14)
        assert np.allclose(grads.biases[0], [0, 0, 0, 1.0, 0], rtol=0, atol=1e-14)

    @pytest.mark.parametrize("loss", [LossKind.HUBER, LossKind.SQUARED])
    @pytest.mark.parametrize("spec", [POOLED, STRIDED, DENSE_ONLY], ids=["pooled", "strided", "dense"])
    def test_finite_differences(self, spec: NetworkSpec, loss: LossKind) -> None:
        rng = np.random.default_rng(11)
        params = init_params(spec, rng)
        states = rng.normal(size=(3, *spec.input_shape))
        actions = np.array([0, 3, 4], dtype=np.intp)
        targets = forward(spec, params, states)[np.arange(3), actions] + rng.uniform(-2, 2, size=3)
        _, analytic = gradients(spec, params, states, actions, targets, loss)
        numeric = _numeric_gradients(spec, params, states, actions, targets, loss)
        for a, n in zip(analytic.arrays(), numeric):
            relative = np.abs(a - n) / np.maximum(np.abs(a) + np.abs(n), 1e-6)
            assert relative.max() < 1e-4

    def test_non_finite_loss(self) -> None:
        params = init_params(DENSE_ONLY, np.random.default_rng(0))
        with pytest.raises(NonFiniteLossError, match="non-finite loss"):
            gradients(DENSE_ONLY, params, np.ones((1, 1, 2, 2)), np.array([0]), np.array([np.inf]))

    def test_target_count_mismatch(self) -> None:
        params = init_params(DENSE_ONLY, np.random.default_rng(0))
        with pytest.raises(ShapeMismatchError):
            gradients(DENSE_ONLY, params, np.ones((2, 1, 2, 2)), np.array([0, 1]), np.array([1.0]))
