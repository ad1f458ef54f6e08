"""Versioned JSON checkpoint container with bit-exact array payloads.

Arrays are stored as shape + little-endian raw bytes (base64). Training
runs float32 end to end, so shipped checkpoints carry '<f4' payloads;
any little-endian float dtype round-trips unchanged.
"""
from __future__ import annotations

import base64
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .optim import AdamState

FORMAT_VERSION = 1
KIND = "progct-checkpoint"


class CheckpointError(ValueError):
    pass


def _encode_array(a: np.ndarray) -> dict:
    a = np.ascontiguousarray(a)
    if a.dtype.byteorder == ">":
        a = a.astype(a.dtype.newbyteorder("<"))
    dt = a.dtype.newbyteorder("<") if a.dtype.byteorder == "=" or a.dtype.byteorder == "|" else a.dtype
    return {
        "shape": list(a.shape),
        "dtype": dt.str,
        "data": base64.b64encode(a.tobytes()).decode("ascii"),
    }


def _decode_array(d: dict) -> np.ndarray:
    raw = base64.b64decode(d["data"])
    return np.frombuffer(raw, dtype=np.dtype(d["dtype"])).reshape(d["shape"]).copy()


def _encode_map(arrays: dict[str, np.ndarray]) -> dict:
    return {k: _encode_array(v) for k, v in arrays.items()}


def _decode_map(d: dict) -> dict[str, np.ndarray]:
    return {k: _decode_array(v) for k, v in d.items()}


def _encode_adam(s: AdamState | None):
    if s is None:
        return None
    return {
        "m": _encode_map(s.m), "v": _encode_map(s.v), "step": s.step,
        "lr0": s.lr0, "beta1": s.beta1, "beta2": s.beta2, "epsilon": s.epsilon,
    }


def _decode_adam(d) -> AdamState | None:
    if d is None:
        return None
    return AdamState(m=_decode_map(d["m"]), v=_decode_map(d["v"]), step=d["step"],
                     lr0=d["lr0"], beta1=d["beta1"], beta2=d["beta2"], epsilon=d["epsilon"])


@dataclass
class Checkpoint:
    generator: dict[str, np.ndarray]
    critic: dict[str, np.ndarray] | None = None
    train_depth: int = 1
    seed: int = 0
    meta: dict = field(default_factory=dict)
    adam_gen: AdamState | None = None
    adam_critic: AdamState | None = None
    rng_states: dict | None = None
    epoch: int = 0


def save_checkpoint(path, ckpt: Checkpoint):
    doc = {
        "version": FORMAT_VERSION,
        "kind": KIND,
        "train_depth": ckpt.train_depth,
        "seed": ckpt.seed,
        "meta": ckpt.meta,
        "epoch": ckpt.epoch,
        "generator": _encode_map(ckpt.generator),
        "critic": None if ckpt.critic is None else _encode_map(ckpt.critic),
        "adam_gen": _encode_adam(ckpt.adam_gen),
        "adam_critic": _encode_adam(ckpt.adam_critic),
        "rng_states": ckpt.rng_states,
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(doc, f)


def load_checkpoint(path) -> Checkpoint:
    with open(path) as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as e:
            raise CheckpointError(f"corrupt checkpoint {path}: {e}") from e
    if doc.get("kind") != KIND:
        raise CheckpointError(f"{path} is not a checkpoint file")
    if doc.get("version") != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {doc.get('version')}")
    return Checkpoint(
        generator=_decode_map(doc["generator"]),
        critic=None if doc.get("critic") is None else _decode_map(doc["critic"]),
        train_depth=doc["train_depth"],
        seed=doc["seed"],
        meta=doc.get("meta", {}),
        adam_gen=_decode_adam(doc.get("adam_gen")),
        adam_critic=_decode_adam(doc.get("adam_critic")),
        rng_states=doc.get("rng_states"),
        epoch=doc.get("epoch", 0),
    )
