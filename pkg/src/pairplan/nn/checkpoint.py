"""Binary checkpoint files.

Layout: an 8-byte little-endian header length, a UTF-8 JSON header, then the
flat parameters as little-endian float64, optionally followed by the two
optimizer moment arrays.
"""

from dataclasses import dataclass, field
import json
import logging
import os
from pathlib import Path
import struct
import tempfile
from typing import Any

import numpy as np

from pairplan.const import CHECKPOINT_FORMAT
from pairplan.exceptions import PairPlanIOError

from .exceptions import CheckpointFormatError
from .optim import OptimizerState
from .params import Manifest, ParameterSet

log = logging.getLogger(__name__)

HEADER_LENGTH = struct.Struct("<Q")
FLOAT = np.dtype("<f8")


@dataclass
class Checkpoint:
    """Parameters plus the metadata needed to resume or reproduce them."""

    role: str
    params: ParameterSet
    rng_seed: int = 0
    step: int = 0
    metadata: dict[str, Any] = field(default_factory=dict)
    optimizer: OptimizerState | None = None


def save_checkpoint(path: Path | str, checkpoint: Checkpoint) -> Path:
    """Write a checkpoint atomically."""
    path = Path(path)
    optimizer = checkpoint.optimizer
    header: dict[str, Any] = {
        "format": CHECKPOINT_FORMAT,
        "role": checkpoint.role,
        "manifest": checkpoint.params.manifest.as_list(),
        "rng_seed": checkpoint.rng_seed,
        "step": checkpoint.step,
        "metadata": checkpoint.metadata,
        "optimizer": None,
    }
    arrays = [checkpoint.params.values]
    if optimizer is not None:
        header["optimizer"] = {
            "step": optimizer.step,
            "lr": optimizer.lr,
            "weight_decay": optimizer.weight_decay,
            "schedule": optimizer.schedule,
            "total_steps": optimizer.total_steps,
            "min_lr": optimizer.min_lr,
            "skipped": optimizer.skipped,
        }
        arrays += [optimizer.m, optimizer.v]
    encoded = json.dumps(header, sort_keys=True).encode("utf-8")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
        with os.fdopen(fd, "wb") as handle:
            handle.write(HEADER_LENGTH.pack(len(encoded)))
            handle.write(encoded)
            for array in arrays:
                handle.write(np.ascontiguousarray(array, dtype=FLOAT).tobytes())
        os.replace(tmp, path)
    except OSError as err:
        raise PairPlanIOError("Cannot write checkpoint", path) from err
    log.info("Saved %s checkpoint (%d parameters) to %s", checkpoint.role, len(checkpoint.params), path)
    return path


def load_checkpoint(path: Path | str, role: str | None = None) -> Checkpoint:
    """Read a checkpoint.

    Raises:
        PairPlanIOError: If the file cannot be read.
        CheckpointFormatError: If it is truncated, has another format version
            or another role than requested.

    """
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as err:
        raise PairPlanIOError("Cannot read checkpoint", path) from err
    if len(raw) < HEADER_LENGTH.size:
        raise CheckpointFormatError(f"Checkpoint {path} is truncated")
    (length,) = HEADER_LENGTH.unpack_from(raw)
    body_start = HEADER_LENGTH.size + length
    try:
        header = json.loads(raw[HEADER_LENGTH.size : body_start].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as err:
        raise CheckpointFormatError(f"Checkpoint {path} has an unreadable header") from err
    if header.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointFormatError(
            f"Checkpoint {path} has an unsupported format",
            expected=CHECKPOINT_FORMAT,
            found=header.get("format"),
        )
    if role is not None and header.get("role") != role:
        raise CheckpointFormatError(
            f"Checkpoint {path} has the wrong role", expected=role, found=header.get("role")
        )

    manifest = Manifest.from_list(header["manifest"])
    optimizer_header = header.get("optimizer")
    count = manifest.size * (3 if optimizer_header else 1)
    expected_bytes = body_start + count * FLOAT.itemsize
    if len(raw) != expected_bytes:
        raise CheckpointFormatError(
            f"Checkpoint {path} has {len(raw)} bytes, expected {expected_bytes}"
        )
    body = np.frombuffer(raw, dtype=FLOAT, count=count, offset=body_start).astype(np.float64)
    params = ParameterSet(manifest, body[: manifest.size])
    optimizer = None
    if optimizer_header:
        optimizer = OptimizerState(
            m=body[manifest.size : 2 * manifest.size].copy(),
            v=body[2 * manifest.size :].copy(),
            **optimizer_header,
        )
    return Checkpoint(
        role=header["role"],
        params=params,
        rng_seed=header.get("rng_seed", 0),
        step=header.get("step", 0),
        metadata=header.get("metadata", {}),
        optimizer=optimizer,
    )
