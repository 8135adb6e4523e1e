"""Parameter snapshot file format.

Layout: one JSON manifest line (a list of {"name", "shape", "dtype":
"f64"} entries), a newline, then the raw little-endian float64 buffers
concatenated in manifest order. Round-trips are bit-exact; the file
hash therefore identifies the parameter state.
"""

import hashlib
import json

import numpy as np


def save_store(path, arrays):
    """Write name -> ndarray in iteration order."""
    manifest = [
        {"name": name, "shape": list(arr.shape), "dtype": "f64"}
        for name, arr in arrays.items()
    ]
    with open(path, "wb") as f:
        f.write(json.dumps(manifest, separators=(",", ":")).encode("utf-8"))
        f.write(b"\n")
        for arr in arrays.values():
            f.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_store(path):
    """Read a snapshot back into an ordered name -> ndarray dict."""
    with open(path, "rb") as f:
        header = f.readline()
        if not header.endswith(b"\n"):
            raise ValueError("snapshot corrupt: missing manifest line")
        try:
            manifest = json.loads(header.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise ValueError(f"snapshot corrupt: bad manifest: {e}") from e
        out = {}
        offset = len(header)
        for entry in manifest:
            shape = tuple(entry["shape"])
            if entry.get("dtype") != "f64":
                raise ValueError(f"unsupported dtype for {entry['name']!r}")
            nbytes = int(np.prod(shape, dtype=np.int64)) * 8
            raw = f.read(nbytes)
            if len(raw) != nbytes:
                raise ValueError(
                    f"snapshot truncated reading {entry['name']!r}: "
                    f"needed {nbytes} bytes at offset {offset}, got {len(raw)}"
                )
            arr = np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(shape)
            out[entry["name"]] = np.ascontiguousarray(arr)
            offset += nbytes
        if f.read(1):
            raise ValueError(f"snapshot has trailing bytes at offset {offset}")
    return out


def file_hash(path):
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def inspect_report(path):
    """Per-namespace listing: (name, shape, sha256 of the raw values)."""
    arrays = load_store(path)
    namespaces = {}
    for name, arr in arrays.items():
        ns = name.split("/", 1)[0] + "/"
        digest = hashlib.sha256(np.ascontiguousarray(arr, dtype="<f8").tobytes()).hexdigest()
        namespaces.setdefault(ns, []).append((name, tuple(arr.shape), digest))
    return namespaces
