"""Flat binary container shared by persisted models and indexes.

Layout: one ASCII magic line "SEMSEARCH-<KIND> v1\\n", one JSON metadata
line, then the raw bytes of each declared array back to back.  The metadata
records each array's name, dtype, and shape under "arrays" (order matters);
everything else in the metadata dict belongs to the caller.  Arrays are
little-endian, C order.
"""

from __future__ import annotations

import json

import numpy as np

from .errors import FormatError

_VERSION = 1


def _magic(kind: str) -> bytes:
    return f"SEMSEARCH-{kind} v{_VERSION}\n".encode("ascii")


def write_container(path, kind: str, meta: dict, arrays: dict[str, np.ndarray]) -> None:
    """Write a container.  ``meta`` must be JSON-serializable; "arrays" is reserved."""
    if "arrays" in meta:
        raise ValueError("'arrays' metadata key is reserved")
    manifest = []
    blocks = []
    for name, arr in arrays.items():
        arr = np.ascontiguousarray(arr)
        dtype = arr.dtype.newbyteorder("<")
        blocks.append(arr.astype(dtype, copy=False).tobytes())
        manifest.append({"name": name, "dtype": dtype.str, "shape": list(arr.shape)})
    header = dict(meta)
    header["arrays"] = manifest
    with open(path, "wb") as fh:
        fh.write(_magic(kind))
        fh.write(json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8"))
        fh.write(b"\n")
        for block in blocks:
            fh.write(block)


def read_container(path, kind: str) -> tuple[dict, dict[str, np.ndarray]]:
    """Read a container written by :func:`write_container`."""
    with open(path, "rb") as fh:
        magic = fh.readline()
        if magic != _magic(kind):
            raise FormatError(
                f"{path}: expected {_magic(kind)!r} header, found {magic[:40]!r}"
            )
        try:
            meta = json.loads(fh.readline().decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise FormatError(f"{path}: unreadable metadata line ({exc})") from None
        manifest = meta.pop("arrays", None)
        if manifest is None:
            raise FormatError(f"{path}: metadata lacks the array manifest")
        arrays = {}
        for entry in manifest:
            dtype = np.dtype(entry["dtype"])
            shape = tuple(entry["shape"])
            nbytes = dtype.itemsize * int(np.prod(shape, dtype=np.int64))
            data = fh.read(nbytes)
            if len(data) != nbytes:
                raise FormatError(f"{path}: truncated array block {entry['name']!r}")
            arrays[entry["name"]] = np.frombuffer(data, dtype=dtype).reshape(shape).copy()
        return meta, arrays
