"""Checkpoint file: one JSON header line, then raw little-endian float32.

The header carries the model config, codec, step counter, optimizer
scalars, and a tensor directory (name/shape/offset, offsets in floats
from the start of the binary section).  Parameters come first, then Adam
first/second moments under m./v. prefixes.  load(save(x)) is bit-exact.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .. import ctc as ctc_mod
from .. import diffcore as dc
from .network import Model, ModelConfig

FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


def save(path, model: Model, state: dc.AdamState, step: int) -> None:
    if model.store.dtype != np.float32:
        raise CheckpointError("checkpoints are float32-only")
    tensors: list[tuple[str, np.ndarray]] = []
    for name, p in model.params.items():
        tensors.append((name, p.data))
    for name, p in model.params.items():
        m = state.m.get(name)
        v = state.v.get(name)
        tensors.append((f"m.{name}", m if m is not None else np.zeros_like(p.data)))
        tensors.append((f"v.{name}", v if v is not None else np.zeros_like(p.data)))
    directory = []
    offset = 0
    for name, arr in tensors:
        directory.append({"name": name, "shape": list(arr.shape), "offset": offset})
        offset += arr.size
    header = {
        "version": FORMAT_VERSION,
        "config": model.config.to_json(),
        "codec": model.codec.alphabet,
        "step": int(step),
        "optimizer": {"lr": state.lr, "beta1": state.beta1, "beta2": state.beta2,
                      "eps": state.eps, "t": state.t},
        "tensors": directory,
        "total_floats": offset,
    }
    with open(path, "wb") as f:
        f.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        for _, arr in tensors:
            f.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def load(path) -> tuple[Model, dc.AdamState, int]:
    with open(path, "rb") as f:
        header_line = f.readline()
        blob = f.read()
    header = json.loads(header_line)
    if header.get("version") != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {header.get('version')}")
    flat = np.frombuffer(blob, dtype="<f4")
    if flat.size != header["total_floats"]:
        raise CheckpointError("checkpoint truncated: float count mismatch")
    config = ModelConfig.from_json(header["config"])
    codec = ctc_mod.Codec(header["codec"])
    model = Model(config, codec, np.random.default_rng(0), dtype=np.float32)
    opt = header["optimizer"]
    state = dc.AdamState(lr=opt["lr"], beta1=opt["beta1"], beta2=opt["beta2"],
                         eps=opt["eps"], t=opt["t"])
    entries = {e["name"]: e for e in header["tensors"]}
    missing = set(model.params) - set(entries)
    if missing:
        raise CheckpointError(f"checkpoint missing tensors: {sorted(missing)[:4]}")

    def read(name, like):
        e = entries[name]
        shape = tuple(e["shape"])
        if shape != like.shape:
            raise CheckpointError(f"shape mismatch for {name!r}: {shape} vs {like.shape}")
        lo = e["offset"]
        return flat[lo : lo + like.size].reshape(shape).copy()

    for name, p in model.params.items():
        p.data = read(name, p.data)
        state.m[name] = read(f"m.{name}", p.data)
        state.v[name] = read(f"v.{name}", p.data)
    return model, state, int(header["step"])
