"""Checkpoint serialization: one .npz per checkpoint.

The archive holds one float64 array per parameter path plus a
``__meta__`` entry containing a JSON header: format version, model
config, init seed, epoch counter, and optionally the run configuration
that produced the checkpoint. float64 in, float64 out, so restoring a
checkpoint reproduces evaluation results bit for bit on one platform.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .model import GNetConfig, GNetModel

CHECKPOINT_VERSION = 1
_META_KEY = "__meta__"


class CheckpointError(ValueError):
    """Checkpoint file is missing, malformed, or from an unknown version."""


@dataclass(frozen=True)
class CheckpointState:
    """In-memory form of a checkpoint file."""

    config: GNetConfig
    seed: int
    epoch: int
    arrays: dict[str, np.ndarray]
    run_config: dict | None = None


def save_state(
    path,
    config: GNetConfig,
    seed: int,
    epoch: int,
    arrays: dict[str, np.ndarray],
    run_config: dict | None = None,
) -> None:
    meta = {
        "version": CHECKPOINT_VERSION,
        "config": config.to_dict(),
        "seed": int(seed),
        "epoch": int(epoch),
        "run_config": run_config,
    }
    payload = {_META_KEY: np.array(json.dumps(meta))}
    for name, arr in arrays.items():
        if name == _META_KEY:
            raise CheckpointError(f"parameter path collides with reserved key {_META_KEY!r}")
        payload[name] = np.asarray(arr, dtype=np.float64)
    with open(path, "wb") as fh:
        np.savez(fh, **payload)


def save_checkpoint(path, model: GNetModel, epoch: int = 0, run_config: dict | None = None) -> None:
    save_state(path, model.config, model.seed, epoch, model.params.arrays(), run_config)


def load_checkpoint(path) -> CheckpointState:
    try:
        archive = np.load(path, allow_pickle=False)
    except FileNotFoundError:
        raise CheckpointError(f"checkpoint file not found: {path}") from None
    except Exception as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    with archive:
        if _META_KEY not in archive.files:
            raise CheckpointError(f"checkpoint {path} has no {_META_KEY} entry")
        try:
            meta = json.loads(str(archive[_META_KEY]))
        except json.JSONDecodeError as exc:
            raise CheckpointError(f"checkpoint {path} has a malformed header: {exc}") from exc
        version = meta.get("version")
        if version != CHECKPOINT_VERSION:
            raise CheckpointError(
                f"checkpoint {path} has version {version!r}, expected {CHECKPOINT_VERSION}"
            )
        arrays = {name: archive[name] for name in archive.files if name != _META_KEY}
    return CheckpointState(
        config=GNetConfig.from_dict(meta["config"]),
        seed=int(meta["seed"]),
        epoch=int(meta["epoch"]),
        arrays=arrays,
        run_config=meta.get("run_config"),
    )


def restore_model(state: CheckpointState) -> GNetModel:
    """Rebuild the model a checkpoint describes and load its weights."""
    model = GNetModel(state.config, seed=state.seed)
    model.params.load_arrays(state.arrays)
    return model
