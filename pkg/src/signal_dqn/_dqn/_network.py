"""Convolutional Q-network in plain numpy: forward pass, exact backpropagation and fan-in initialisation.

Tensors are channel-first, ``(batch, channels, height, width)``, double precision.
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass
from enum import Enum
from typing import Any, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from numpy.typing import NDArray

from .._exceptions import NonFiniteLossError, ShapeMismatchError, UnsupportedSizeError
from .._types import N_ACTIONS

Array = NDArray[np.float64]

# --- Specs ---


@dataclass(frozen=True, slots=True, kw_only=True)
class ConvSpec:
    kernel: int
    stride: int
    out_channels: int


@dataclass(frozen=True, slots=True, kw_only=True)
class PoolSpec:
    size: int = 2


@dataclass(frozen=True, slots=True, kw_only=True)
class DenseSpec:
    width: int


LayerSpec = Union[ConvSpec, PoolSpec, DenseSpec]


class LossKind(str, Enum):
    HUBER = "huber"
    SQUARED = "squared"


@dataclass(frozen=True, slots=True, kw_only=True)
class NetworkSpec:
    """Hidden layers in order; a linear dense head with one output per action is always appended."""

    input_size: int
    input_channels: int = 4
    layers: tuple[LayerSpec, ...]
    n_actions: int = N_ACTIONS

    def __post_init__(self) -> None:
        self.layer_shapes()

    @classmethod
    def large(cls) -> NetworkSpec:
        return cls(
            input_size=80,
            layers=(
                ConvSpec(kernel=8, stride=4, out_channels=16),
                PoolSpec(size=2),
                ConvSpec(kernel=4, stride=2, out_channels=32),
                ConvSpec(kernel=3, stride=1, out_channels=32),
                DenseSpec(width=256),
            ),
        )

    @classmethod
    def small(cls) -> NetworkSpec:
        return cls(
            input_size=24,
            layers=(
                ConvSpec(kernel=6, stride=2, out_channels=16),
                ConvSpec(kernel=4, stride=2, out_channels=32),
                ConvSpec(kernel=3, stride=1, out_channels=32),
                DenseSpec(width=128),
            ),
        )

    @classmethod
    def for_size(cls, size: int) -> NetworkSpec:
        match size:
            case 80:
                return cls.large()
            case 24:
                return cls.small()
            case _:
                raise UnsupportedSizeError(f"no network defined for a {size}x{size} input")

    @property
    def all_layers(self) -> tuple[LayerSpec, ...]:
        return (*self.layers, DenseSpec(width=self.n_actions))

    @property
    def input_shape(self) -> tuple[int, int, int]:
        return (self.input_channels, self.input_size, self.input_size)

    def layer_shapes(self) -> list[tuple[int, ...]]:
        """Output shape of every layer, without the batch axis."""
        shape: tuple[int, ...] = self.input_shape
        shapes: list[tuple[int, ...]] = []
        for layer in self.all_layers:
            match layer:
                case ConvSpec(kernel=k, stride=s, out_channels=o):
                    if len(shape) != 3:
                        raise ShapeMismatchError("convolution after a dense layer")
                    _, h, w = shape
                    if k > h or k > w or s < 1:
                        raise ShapeMismatchError(f"{k}x{k} kernel does not fit a {h}x{w} map")
                    shape = (o, (h - k) // s + 1, (w - k) // s + 1)
                case PoolSpec(size=p):
                    if len(shape) != 3 or shape[1] // p < 1 or shape[2] // p < 1:
                        raise ShapeMismatchError(f"{p}x{p} pooling does not fit shape {shape}")
                    shape = (shape[0], shape[1] // p, shape[2] // p)
                case DenseSpec(width=width):
                    if width < 1:
                        raise ShapeMismatchError("dense width must be positive")
                    shape = (width,)
            shapes.append(shape)
        return shapes

    def to_dict(self) -> dict[str, Any]:
        layers: list[dict[str, Any]] = []
        for layer in self.layers:
            match layer:
                case ConvSpec(kernel=k, stride=s, out_channels=o):
                    layers.append({"kind": "conv", "kernel": k, "stride": s, "out_channels": o})
                case PoolSpec(size=p):
                    layers.append({"kind": "pool", "size": p})
                case DenseSpec(width=width):
                    layers.append({"kind": "dense", "width": width})
        return {
            "input_size": self.input_size,
            "input_channels": self.input_channels,
            "n_actions": self.n_actions,
            "layers": layers,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> NetworkSpec:
        layers: list[LayerSpec] = []
        for raw in data["layers"]:
            item = dict(raw)
            match item.pop("kind"):
                case "conv":
                    layers.append(ConvSpec(**item))
                case "pool":
                    layers.append(PoolSpec(**item))
                case "dense":
                    layers.append(DenseSpec(**item))
                case other:
                    raise ShapeMismatchError(f"unknown layer kind {other!r}")
        return cls(
            input_size=int(data["input_size"]),
            input_channels=int(data["input_channels"]),
            n_actions=int(data["n_actions"]),
            layers=tuple(layers),
        )


# --- Parameters ---


@dataclass(frozen=True, slots=True)
class NetworkParams:
    """Weights and biases of every convolution and dense layer, in layer order.

    Convolution weights are ``(out, in, k, k)``; dense weights are ``(fan_in, width)``.
    """

    weights: tuple[Array, ...]
    biases: tuple[Array, ...]

    def arrays(self) -> list[Array]:
        return [*self.weights, *self.biases]

    def map(self, fn: Callable[[Array], Array]) -> NetworkParams:
        return NetworkParams(tuple(fn(w) for w in self.weights), tuple(fn(b) for b in self.biases))

    def zip_map(self, other: NetworkParams, fn: Callable[[Array, Array], Array]) -> NetworkParams:
        return NetworkParams(
            tuple(fn(a, b) for a, b in zip(self.weights, other.weights)),
            tuple(fn(a, b) for a, b in zip(self.biases, other.biases)),
        )

    def zeros_like(self) -> NetworkParams:
        return self.map(np.zeros_like)

    def is_finite(self) -> bool:
        return all(bool(np.isfinite(a).all()) for a in self.arrays())


def param_shapes(spec: NetworkSpec) -> list[tuple[tuple[int, ...], tuple[int, ...]]]:
    shape: tuple[int, ...] = spec.input_shape
    out: list[tuple[tuple[int, ...], tuple[int, ...]]] = []
    for layer, next_shape in zip(spec.all_layers, spec.layer_shapes()):
        match layer:
            case ConvSpec(kernel=k, out_channels=o):
                out.append(((o, shape[0], k, k), (o,)))
            case DenseSpec(width=width):
                out.append(((int(np.prod(shape)), width), (width,)))
            case PoolSpec():
                pass
        shape = next_shape
    return out


def init_params(spec: NetworkSpec, rng: np.random.Generator) -> NetworkParams:
    """Uniform in ``±1/sqrt(fan_in)`` for weights and biases alike."""
    weights: list[Array] = []
    biases: list[Array] = []
    for w_shape, b_shape in param_shapes(spec):
        fan_in = int(np.prod(w_shape[1:])) if len(w_shape) == 4 else w_shape[0]
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=w_shape))
        biases.append(rng.uniform(-bound, bound, size=b_shape))
    return NetworkParams(tuple(weights), tuple(biases))


def check_params(spec: NetworkSpec, params: NetworkParams) -> None:
    expected = param_shapes(spec)
    if len(expected) != len(params.weights) or len(expected) != len(params.biases):
        raise ShapeMismatchError(f"spec has {len(expected)} parametric layers, params have {len(params.weights)}")
    for i, ((w_shape, b_shape), w, b) in enumerate(zip(expected, params.weights, params.biases)):
        if w.shape != w_shape or b.shape != b_shape:
            raise ShapeMismatchError(f"layer {i}: expected {w_shape}/{b_shape}, got {w.shape}/{b.shape}")


# --- Layer primitives ---


def _windows(x: Array, kernel: int, stride: int) -> Array:
    """(N, C, Ho, Wo, k, k) view of every receptive field."""
    return sliding_window_view(x, (kernel, kernel), axis=(2, 3))[:, :, ::stride, ::stride]


def conv2d(x: Array, w: Array, b: Array, stride: int = 1) -> Array:
    """Strided cross-correlation without padding."""
    return _conv_from_windows(_windows(x, w.shape[-1], stride), w, b)


def _conv_from_windows(windows: Array, w: Array, b: Array) -> Array:
    out = np.tensordot(windows, w, axes=([1, 4, 5], [1, 2, 3]))  # (N, Ho, Wo, O)
    return out.transpose(0, 3, 1, 2) + b[None, :, None, None]


def _conv_backward(
    dout: Array, windows: Array, w: Array, input_shape: tuple[int, ...], stride: int, need_dx: bool
) -> tuple[Array, Array, Array | None]:
    dw = np.tensordot(dout, windows, axes=([0, 2, 3], [0, 2, 3]))
    db = dout.sum(axis=(0, 2, 3))
    if not need_dx:
        return dw, db, None
    dx = np.zeros(input_shape, dtype=np.float64)
    k = w.shape[-1]
    ho, wo = dout.shape[2], dout.shape[3]
    for i in range(k):
        for j in range(k):
            contribution = np.tensordot(dout, w[:, :, i, j], axes=([1], [0])).transpose(0, 3, 1, 2)
            dx[:, :, i : i + stride * ho : stride, j : j + stride * wo : stride] += contribution
    return dw, db, dx


def _pool_forward(x: Array, p: int) -> tuple[Array, NDArray[np.intp]]:
    n, c, h, w = x.shape
    ho, wo = h // p, w // p
    blocks = x[:, :, : ho * p, : wo * p].reshape(n, c, ho, p, wo, p).transpose(0, 1, 2, 4, 3, 5)
    blocks = blocks.reshape(n, c, ho, wo, p * p)
    argmax = blocks.argmax(axis=-1)
    return np.take_along_axis(blocks, argmax[..., None], axis=-1)[..., 0], argmax


def _pool_backward(dout: Array, argmax: NDArray[np.intp], input_shape: tuple[int, ...], p: int) -> Array:
    n, c, ho, wo = dout.shape
    blocks = np.zeros((n, c, ho, wo, p * p), dtype=np.float64)
    np.put_along_axis(blocks, argmax[..., None], dout[..., None], axis=-1)
    dx = np.zeros(input_shape, dtype=np.float64)
    dx[:, :, : ho * p, : wo * p] = blocks.reshape(n, c, ho, wo, p, p).transpose(0, 1, 2, 4, 3, 5).reshape(
        n, c, ho * p, wo * p
    )
    return dx


# --- Forward / backward ---


@dataclass(frozen=True, slots=True)
class _ConvCache:
    input_shape: tuple[int, ...]
    windows: Array
    pre: Array
    stride: int


@dataclass(frozen=True, slots=True)
class _PoolCache:
    input_shape: tuple[int, ...]
    argmax: NDArray[np.intp]
    size: int


@dataclass(frozen=True, slots=True)
class _DenseCache:
    input_shape: tuple[int, ...]
    flat: Array
    pre: Array
    linear: bool


_Cache = Union[_ConvCache, _PoolCache, _DenseCache]


def _as_batch(spec: NetworkSpec, x: NDArray[np.generic]) -> tuple[Array, bool]:
    arr = np.asarray(x, dtype=np.float64)
    single = arr.ndim == 3
    if single:
        arr = arr[None]
    if arr.ndim != 4 or arr.shape[1:] != spec.input_shape:
        raise ShapeMismatchError(f"expected input of shape (N, {spec.input_shape}), got {np.shape(x)}")
    return arr, single


def _forward(spec: NetworkSpec, params: NetworkParams, x: Array) -> tuple[Array, list[_Cache]]:
    caches: list[_Cache] = []
    a = x
    p = 0
    layers = spec.all_layers
    for index, layer in enumerate(layers):
        match layer:
            case ConvSpec(kernel=k, stride=s):
                windows = _windows(a, k, s)
                pre = _conv_from_windows(windows, params.weights[p], params.biases[p])
                caches.append(_ConvCache(a.shape, windows, pre, s))
                a = np.maximum(pre, 0.0)
                p += 1
            case PoolSpec(size=size):
                out, argmax = _pool_forward(a, size)
                caches.append(_PoolCache(a.shape, argmax, size))
                a = out
            case DenseSpec():
                flat = a.reshape(a.shape[0], -1)
                pre = flat @ params.weights[p] + params.biases[p]
                linear = index == len(layers) - 1
                caches.append(_DenseCache(a.shape, flat, pre, linear))
                a = pre if linear else np.maximum(pre, 0.0)
                p += 1
    return a, caches


def forward(spec: NetworkSpec, params: NetworkParams, x: NDArray[np.generic]) -> Array:
    """Q-values: ``(n_actions,)`` for one frame stack, ``(N, n_actions)`` for a batch."""
    batch, single = _as_batch(spec, x)
    q, _ = _forward(spec, params, batch)
    return q[0] if single else q


def _backward(params: NetworkParams, caches: list[_Cache], dq: Array) -> NetworkParams:
    n_param = len(params.weights)
    dws: list[Array] = [np.empty(0)] * n_param
    dbs: list[Array] = [np.empty(0)] * n_param
    p = n_param
    grad = dq
    for index in range(len(caches) - 1, -1, -1):
        cache = caches[index]
        match cache:
            case _DenseCache(input_shape=shape, flat=flat, pre=pre, linear=linear):
                p -= 1
                if not linear:
                    grad = grad * (pre > 0)
                dws[p] = flat.T @ grad
                dbs[p] = grad.sum(axis=0)
                grad = (grad @ params.weights[p].T).reshape(shape)
            case _PoolCache(input_shape=shape, argmax=argmax, size=size):
                grad = _pool_backward(grad, argmax, shape, size)
            case _ConvCache(input_shape=shape, windows=windows, pre=pre, stride=stride):
                p -= 1
                grad = grad * (pre > 0)
                dw, db, dx = _conv_backward(grad, windows, params.weights[p], shape, stride, need_dx=index > 0)
                dws[p], dbs[p] = dw, db
                if dx is not None:
                    grad = dx
    return NetworkParams(tuple(dws), tuple(dbs))


def loss_and_slope(errors: Array, kind: LossKind, delta: float = 1.0) -> tuple[Array, Array]:
    """Per-sample loss and its derivative with respect to the error."""
    match kind:
        case LossKind.HUBER:
            absolute = np.abs(errors)
            quadratic = absolute <= delta
            loss = np.where(quadratic, 0.5 * errors**2, delta * (absolute - 0.5 * delta))
            return loss, np.clip(errors, -delta, delta)
        case LossKind.SQUARED:
            return errors**2, 2.0 * errors


def gradients(
    spec: NetworkSpec,
    params: NetworkParams,
    states: NDArray[np.generic],
    actions: NDArray[np.integer],
    targets: Array,
    loss: LossKind = LossKind.HUBER,
) -> tuple[float, NetworkParams]:
    """Mean loss over the minibatch of ``Q(s, a) - target`` and its gradient for every parameter."""
    batch, _ = _as_batch(spec, states)
    actions = np.asarray(actions, dtype=np.intp)
    targets = np.asarray(targets, dtype=np.float64)
    if actions.shape != (batch.shape[0],) or targets.shape != (batch.shape[0],):
        raise ShapeMismatchError("actions and targets need one entry per state")
    q, caches = _forward(spec, params, batch)
    rows = np.arange(batch.shape[0])
    errors = q[rows, actions] - targets
    per_sample, slope = loss_and_slope(errors, loss)
    value = float(per_sample.mean())
    if not np.isfinite(value):
        detail = f"max |Q|={np.abs(q).max()!r}, max |target|={np.abs(targets).max()!r}"
        raise NonFiniteLossError(loss=value, detail=detail)
    dq = np.zeros_like(q)
    dq[rows, actions] = slope / batch.shape[0]
    return value, _backward(params, caches, dq)
