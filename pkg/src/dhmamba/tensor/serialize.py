"""Named-array container: text manifest followed by little-endian float64 blobs.

Layout::

    DHMAMBA-TENSORS 1\\n
    <manifest byte length>\\n
    <manifest JSON: {"meta": {...}, "entries": [{name, dtype, shape, offset}, ...]}>
    <raw data, row-major '<f8', entries concatenated in manifest order>

Writes go to a temporary file in the target directory and are renamed into
place, so readers never see a partial file.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path
from typing import Mapping

import numpy as np

MAGIC = b"DHMAMBA-TENSORS 1\n"
DTYPE = "<f8"


def atomic_write_bytes(path, payload: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def dumps(arrays: Mapping[str, np.ndarray], meta: dict | None = None) -> bytes:
    entries = []
    blobs = []
    offset = 0
    for name, arr in arrays.items():
        a = np.ascontiguousarray(np.asarray(arr, dtype=DTYPE))
        entries.append({"name": name, "dtype": DTYPE, "shape": list(a.shape), "offset": offset})
        raw = a.tobytes(order="C")
        blobs.append(raw)
        offset += len(raw)
    manifest = json.dumps({"meta": meta or {}, "entries": entries}, indent=1).encode("utf-8")
    return MAGIC + f"{len(manifest)}\n".encode() + manifest + b"".join(blobs)


def loads(payload: bytes) -> tuple[dict[str, np.ndarray], dict]:
    if not payload.startswith(MAGIC):
        raise ValueError("not a tensor container (bad magic line)")
    rest = payload[len(MAGIC) :]
    nl = rest.index(b"\n")
    n = int(rest[:nl])
    manifest = json.loads(rest[nl + 1 : nl + 1 + n])
    data = rest[nl + 1 + n :]
    arrays = {}
    for e in manifest["entries"]:
        if e["dtype"] != DTYPE:
            raise ValueError(f"unsupported dtype {e['dtype']!r} for {e['name']}")
        count = int(np.prod(e["shape"], dtype=np.int64))
        arr = np.frombuffer(data, dtype=DTYPE, count=count, offset=e["offset"])
        arrays[e["name"]] = arr.reshape(e["shape"]).astype(np.float64)
    return arrays, manifest.get("meta", {})


def save(path, arrays: Mapping[str, np.ndarray], meta: dict | None = None) -> None:
    atomic_write_bytes(path, dumps(arrays, meta))


def load(path) -> tuple[dict[str, np.ndarray], dict]:
    return loads(Path(path).read_bytes())


def save_complex(path, arrays: Mapping[str, np.ndarray], meta: dict | None = None) -> None:
    """Store complex arrays as ``<name>.re`` / ``<name>.im`` pairs."""
    flat = {}
    for name, z in arrays.items():
        z = np.asarray(z)
        flat[f"{name}.re"] = np.real(z)
        flat[f"{name}.im"] = np.imag(z)
    save(path, flat, meta)


def load_complex(path) -> tuple[dict[str, np.ndarray], dict]:
    flat, meta = load(path)
    out = {}
    for key in flat:
        if key.endswith(".re"):
            base = key[:-3]
            out[base] = flat[key] + 1j * flat[f"{base}.im"]
    return out, meta
