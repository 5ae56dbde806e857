"""Versioned binary container for trained models.

Layout (all integers little-endian):

    bytes 0..3    magic "ECGL"
    bytes 4..7    format version (u32)
    bytes 8..15   header length H (u64)
    bytes 16..    UTF-8 JSON header of length H
    remainder     concatenated tensor payloads

The JSON header holds the architecture tag, the model description, training
history, free-form metadata, and a tensor manifest (name, little-endian dtype,
shape, byte offset into the payload).  Saving then loading reproduces the
original bit for bit; wrong magic, unknown versions, and truncated files are
rejected with :class:`CheckpointError`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = ["Checkpoint", "CheckpointError", "save_checkpoint", "load_checkpoint"]

MAGIC = b"ECGL"
VERSION = 1


class CheckpointError(Exception):
    """Raised for unreadable, corrupt, or mismatched checkpoint files."""


@dataclass
class Checkpoint:
    architecture: str
    model_spec: dict
    tensors: dict[str, np.ndarray]
    history: list[dict] = field(default_factory=list)
    meta: dict = field(default_factory=dict)


def _le_dtype(arr: np.ndarray) -> np.dtype:
    dt = arr.dtype.newbyteorder("<")
    if dt.kind not in "fiu":
        raise CheckpointError(f"unsupported tensor dtype {arr.dtype}")
    return dt


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    manifest = []
    payload = bytearray()
    for name in sorted(ckpt.tensors):
        arr = np.ascontiguousarray(ckpt.tensors[name])
        dt = _le_dtype(arr)
        data = arr.astype(dt, copy=False).tobytes()
        manifest.append({
            "name": name,
            "dtype": dt.str,
            "shape": list(arr.shape),
            "offset": len(payload),
            "nbytes": len(data),
        })
        payload.extend(data)
    header = json.dumps({
        "architecture": ckpt.architecture,
        "model_spec": ckpt.model_spec,
        "history": ckpt.history,
        "meta": ckpt.meta,
        "tensors": manifest,
    }, sort_keys=True, separators=(",", ":")).encode("utf-8")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as fh:
        fh.write(MAGIC)
        fh.write(VERSION.to_bytes(4, "little"))
        fh.write(len(header).to_bytes(8, "little"))
        fh.write(header)
        fh.write(bytes(payload))


def load_checkpoint(path, expect_architecture: str | None = None) -> Checkpoint:
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"checkpoint file not found: {path}")
    blob = path.read_bytes()
    if len(blob) < 16:
        raise CheckpointError(f"{path}: truncated (only {len(blob)} bytes)")
    if blob[:4] != MAGIC:
        raise CheckpointError(f"{path}: bad magic {blob[:4]!r}, expected {MAGIC!r}")
    version = int.from_bytes(blob[4:8], "little")
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported format version {version}")
    header_len = int.from_bytes(blob[8:16], "little")
    if len(blob) < 16 + header_len:
        raise CheckpointError(f"{path}: truncated header")
    try:
        header = json.loads(blob[16:16 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: corrupt header: {exc}") from None
    payload = blob[16 + header_len:]
    tensors: dict[str, np.ndarray] = {}
    for entry in header["tensors"]:
        start, nbytes = entry["offset"], entry["nbytes"]
        if start + nbytes > len(payload):
            raise CheckpointError(
                f"{path}: truncated payload for tensor {entry['name']!r}")
        arr = np.frombuffer(payload[start:start + nbytes], dtype=entry["dtype"])
        tensors[entry["name"]] = arr.reshape(entry["shape"]).copy()
    ckpt = Checkpoint(
        architecture=header["architecture"],
        model_spec=header["model_spec"],
        tensors=tensors,
        history=header["history"],
        meta=header["meta"],
    )
    if expect_architecture is not None and ckpt.architecture != expect_architecture:
        raise CheckpointError(
            f"{path}: holds a {ckpt.architecture!r} model, "
            f"but a {expect_architecture!r} model was requested")
    return ckpt
