"""Deterministic binary checkpoint container.

Layout: a magic line, a JSON header line describing every tensor (group,
name, shape, dtype, byte offset), then the concatenated raw little-endian
array bytes. Tensors are serialized in sorted (group, name) order and the
header carries no timestamps, so identical parameters always produce
identical files and round-trips are bit-exact.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

__all__ = ["save_checkpoint", "load_checkpoint"]

_MAGIC = b"flatckpt 1\n"


def save_checkpoint(
    path: str | Path,
    groups: dict[str, dict[str, np.ndarray]],
    meta: dict | None = None,
) -> None:
    """Write named parameter groups to ``path``.

    ``groups`` maps group name -> {tensor name -> array}. ``meta`` must be
    JSON-serializable; it is stored verbatim in the header.
    """
    entries = []
    blobs = []
    offset = 0
    for gname in sorted(groups):
        tensors = groups[gname]
        for tname in sorted(tensors):
            arr = np.ascontiguousarray(tensors[tname])
            if arr.dtype.byteorder not in ("=", "<", "|"):
                arr = arr.astype(arr.dtype.newbyteorder("<"))
            raw = arr.tobytes()
            entries.append(
                {
                    "group": gname,
                    "name": tname,
                    "shape": list(arr.shape),
                    "dtype": arr.dtype.name,
                    "offset": offset,
                    "nbytes": len(raw),
                }
            )
            blobs.append(raw)
            offset += len(raw)
    header = json.dumps({"tensors": entries, "meta": meta or {}}, sort_keys=True)
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(header.encode("utf-8"))
        fh.write(b"\n")
        for raw in blobs:
            fh.write(raw)


def load_checkpoint(path: str | Path) -> tuple[dict[str, dict[str, np.ndarray]], dict]:
    """Read a checkpoint written by :func:`save_checkpoint`.

    Returns (groups, meta) with freshly allocated arrays.
    """
    with open(path, "rb") as fh:
        magic = fh.read(len(_MAGIC))
        if magic != _MAGIC:
            raise ValueError(f"{path}: not a checkpoint file (bad magic {magic!r})")
        header = json.loads(fh.readline().decode("utf-8"))
        payload = fh.read()
    groups: dict[str, dict[str, np.ndarray]] = {}
    for ent in header["tensors"]:
        raw = payload[ent["offset"] : ent["offset"] + ent["nbytes"]]
        arr = np.frombuffer(raw, dtype=np.dtype(ent["dtype"])).reshape(ent["shape"]).copy()
        groups.setdefault(ent["group"], {})[ent["name"]] = arr
    return groups, header["meta"]
