"""Checkpoint container.

Layout::

    FLOWSCHED-CKPT 1\\n
    <one line of JSON: meta, array directory, sha256 of the payload>\\n
    <payload: raw little-endian array bytes, concatenated in directory order>

The directory lists ``name``, ``dtype``, ``shape``, ``offset`` and ``nbytes``
for every array. Loading recomputes the SHA-256 of the payload and refuses a
mismatch, so a round trip is either bit-exact or an error.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile

import numpy as np

MAGIC = b"FLOWSCHED-CKPT"
VERSION = 1


class CheckpointError(ValueError):
    pass


def save_arrays(path, arrays: dict[str, np.ndarray], meta: dict) -> None:
    directory = []
    chunks = []
    offset = 0
    for name, arr in arrays.items():
        arr = np.ascontiguousarray(arr)
        le = arr.astype(arr.dtype.newbyteorder("<"), copy=False)
        raw = le.tobytes()
        directory.append({"name": name, "dtype": le.dtype.str, "shape": list(arr.shape),
                          "offset": offset, "nbytes": len(raw)})
        chunks.append(raw)
        offset += len(raw)
    payload = b"".join(chunks)
    header = {"meta": meta, "arrays": directory, "sha256": hashlib.sha256(payload).hexdigest()}
    blob = MAGIC + b" " + str(VERSION).encode() + b"\n" + json.dumps(header, sort_keys=True).encode() + b"\n" + payload
    folder = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=folder, prefix=".ckpt-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(blob)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_arrays(path) -> tuple[dict[str, np.ndarray], dict]:
    with open(path, "rb") as fh:
        blob = fh.read()
    first, _, rest = blob.partition(b"\n")
    parts = first.split(b" ")
    if len(parts) != 2 or parts[0] != MAGIC:
        raise CheckpointError(f"{path}: not a flowsched checkpoint")
    if parts[1] != str(VERSION).encode():
        raise CheckpointError(f"{path}: unsupported checkpoint version {parts[1].decode()}")
    line, _, payload = rest.partition(b"\n")
    try:
        header = json.loads(line)
    except json.JSONDecodeError as e:
        raise CheckpointError(f"{path}: corrupt header ({e})") from None
    if hashlib.sha256(payload).hexdigest() != header["sha256"]:
        raise CheckpointError(f"{path}: checksum mismatch")
    arrays = {}
    for d in header["arrays"]:
        raw = payload[d["offset"]:d["offset"] + d["nbytes"]]
        dt = np.dtype(d["dtype"])
        arrays[d["name"]] = np.frombuffer(raw, dtype=dt).reshape(d["shape"]).astype(dt.newbyteorder("="))
    return arrays, header["meta"]


def save_policy(path, params, extra_meta: dict | None = None) -> None:
    meta = {"kind": "policy", "n_features": params.n_features, "hidden": params.hidden,
            "widths": list(params.widths)}
    if extra_meta:
        meta.update(extra_meta)
    save_arrays(path, params.arrays, meta)


def load_policy(path):
    from .neural import PolicyParams

    arrays, meta = load_arrays(path)
    if meta.get("kind") not in ("policy", "training"):
        raise CheckpointError(f"{path}: not a policy checkpoint")
    names = PolicyParams.shapes(meta["n_features"], meta["hidden"], meta["widths"])
    prefix = "best/" if meta.get("kind") == "training" else ""
    params = PolicyParams(meta["n_features"], meta["hidden"], tuple(meta["widths"]),
                          {k: arrays[prefix + k] for k in names})
    params.check()
    return params, meta
