"""Named-tensor checkpoints as ``.npz`` with a versioned header."""
from __future__ import annotations

import json

import numpy as np

FORMAT = "infomotif-checkpoint"
VERSION = 1


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, tensors: dict, metadata=None) -> None:
    header = {"format": FORMAT, "version": VERSION,
              "shapes": {k: list(np.shape(v)) for k, v in tensors.items()},
              "metadata": metadata or {}}
    arrays = {f"t/{k}": np.asarray(v) for k, v in tensors.items()}
    with open(path, "wb") as fh:
        np.savez(fh, __header__=np.frombuffer(json.dumps(header).encode(), dtype=np.uint8),
                 **arrays)


def load_checkpoint(path):
    """Return ``(tensors, metadata)``."""
    with np.load(path, allow_pickle=False) as z:
        if "__header__" not in z:
            raise CheckpointError(f"{path}: missing header")
        header = json.loads(z["__header__"].tobytes().decode())
        if header.get("format") != FORMAT:
            raise CheckpointError(f"{path}: not an {FORMAT} file")
        if header.get("version", 0) > VERSION:
            raise CheckpointError(f"{path}: unsupported version {header['version']}")
        tensors = {k[2:]: z[k] for k in z.files if k.startswith("t/")}
    for k, shape in header["shapes"].items():
        if list(tensors[k].shape) != shape:
            raise CheckpointError(f"{path}: tensor {k!r} has shape {tensors[k].shape}, header says {shape}")
    return tensors, header["metadata"]
