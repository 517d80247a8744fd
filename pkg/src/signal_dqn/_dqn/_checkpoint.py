from __future__ import annotations

import json
import logging
import zipfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .._exceptions import CheckpointError, ShapeMismatchError
from ._network import NetworkParams, NetworkSpec, check_params

logger = logging.getLogger(__name__)


@dataclass(frozen=True, slots=True, kw_only=True)
class Checkpoint:
    spec: NetworkSpec
    params: NetworkParams
    step: int = 0


def save_checkpoint(path: Path, spec: NetworkSpec, params: NetworkParams, step: int = 0) -> None:
    """Write spec (as JSON), step counter and every weight array to one ``.npz`` file."""
    check_params(spec, params)
    arrays = {f"w{i}": w for i, w in enumerate(params.weights)}
    arrays.update({f"b{i}": b for i, b in enumerate(params.biases)})
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as f:
        np.savez(f, spec=np.array(json.dumps(spec.to_dict(), sort_keys=True)), step=np.array(step), **arrays)
    logger.debug("saved checkpoint %s (step %d)", path, step)


def load_checkpoint(path: Path) -> Checkpoint:
    if not path.is_file():
        raise CheckpointError(f"checkpoint {path} does not exist")
    try:
        with np.load(path, allow_pickle=False) as data:
            spec = NetworkSpec.from_dict(json.loads(str(data["spec"][()])))
            n_layers = sum(1 for key in data.files if key.startswith("w"))
            params = NetworkParams(
                tuple(np.array(data[f"w{i}"], dtype=np.float64) for i in range(n_layers)),
                tuple(np.array(data[f"b{i}"], dtype=np.float64) for i in range(n_layers)),
            )
            step = int(data["step"][()])
    except (OSError, KeyError, ValueError, zipfile.BadZipFile, json.JSONDecodeError) as exc:
        raise CheckpointError(f"checkpoint {path} is unreadable: {exc}") from exc
    try:
        check_params(spec, params)
    except ShapeMismatchError as exc:
        raise CheckpointError(f"checkpoint {path} does not match its own spec: {exc}") from exc
    logger.debug("loaded checkpoint %s (step %d)", path, step)
    return Checkpoint(spec=spec, params=params, step=step)
