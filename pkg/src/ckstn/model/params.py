"""Learnable weights, addressable by path, plus checkpoint serialization.

Checkpoint layout: ``manifest.json`` describing config, parameter paths,
shapes and byte offsets, next to ``weights.bin`` holding raw little-endian
float64 segments (one per path, parameters first, then the common-unit
state arrays).
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..errors import IoError, ValidationError
from ..tensor import Tensor
from .config import ModelConfig
from .units import CommonUnits, init_units

CHECKPOINT_FORMAT = "CKPT1"


def _xavier(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


class CkstnParams:
    """Ordered path -> Tensor map covering every trainable weight."""

    def __init__(self, cfg: ModelConfig):
        self.cfg = cfg
        self._params: dict[str, Tensor] = {}

    def _add(self, path: str, data: np.ndarray) -> None:
        if path in self._params:
            raise ValidationError(f"duplicate parameter path {path}")
        self._params[path] = Tensor(data, requires_grad=True)

    def __getitem__(self, path: str) -> Tensor:
        return self._params[path]

    def __contains__(self, path: str) -> bool:
        return path in self._params

    def items(self):
        return self._params.items()

    def paths(self) -> list[str]:
        return list(self._params)

    def param_count(self) -> tuple[dict[str, int], int]:
        per_path = {p: t.data.size for p, t in self._params.items()}
        return per_path, sum(per_path.values())

    # -- construction ---------------------------------------------------------

    @classmethod
    def initialize(cls, cfg: ModelConfig, seed: int) -> "CkstnParams":
        """Seeded init: uniform +-sqrt(6/(fan_in+fan_out)) weights, zero biases,
        unit layer-norm gains."""
        rng = np.random.default_rng(seed)
        p = cls(cfg)
        for side, d_in in (("visual", cfg.dv), ("textual", cfg.dt)):
            if d_in != cfg.d_e:
                p._add(f"{side}.proj", _xavier(rng, d_in, cfg.d_e))
            d_prev = d_in
            for j in range(cfg.L):
                base = f"{side}.layers.{j}"
                for name in ("t_q", "t_k", "t_v"):
                    p._add(f"{base}.{name}", _xavier(rng, d_prev, cfg.d_e))
                p._add(f"{base}.norm1.gain", np.ones((1, cfg.d_e)))
                p._add(f"{base}.norm1.bias", np.zeros((1, cfg.d_e)))
                p._add(f"{base}.ffn.w1", _xavier(rng, cfg.d_e, cfg.d_f))
                p._add(f"{base}.ffn.b1", np.zeros((1, cfg.d_f)))
                p._add(f"{base}.ffn.w2", _xavier(rng, cfg.d_f, cfg.d_e))
                p._add(f"{base}.ffn.b2", np.zeros((1, cfg.d_e)))
                p._add(f"{base}.norm2.gain", np.ones((1, cfg.d_e)))
                p._add(f"{base}.norm2.bias", np.zeros((1, cfg.d_e)))
                d_prev = cfg.d_e
            if cfg.has_adapter:
                d_m = cfg.d_m
                for i in range(cfg.m):
                    base = f"{side}.see.{i}"
                    p._add(f"{base}.w1", _xavier(rng, 2 * d_m, d_m))
                    p._add(f"{base}.b1", np.zeros((1, d_m)))
                    p._add(f"{base}.w2", _xavier(rng, d_m, d_m))
                    p._add(f"{base}.b2", np.zeros((1, d_m)))
                    p._add(f"{base}.w3", _xavier(rng, d_m, d_m))
                    p._add(f"{base}.b3", np.zeros((1, d_m)))
        if cfg.has_adapter:
            p._add("shared.w_o", _xavier(rng, cfg.n, cfg.n))
            p._add("shared.b_o", np.zeros((1, cfg.d_m)))
            p._add("shared.w_g", _xavier(rng, cfg.n, cfg.n))
            p._add("shared.p_gate", _xavier(rng, cfg.d_m, cfg.d_e))
        p._add("shared.geom.w", _xavier(rng, 5, cfg.dv))
        p._add("shared.geom.b", np.zeros((1, cfg.dv)))
        return p

    def init_common_units(self, seed: int) -> CommonUnits:
        if not self.cfg.has_adapter:
            raise ValidationError("no common units without the adapter (m=0)")
        return init_units(self.cfg.k, self.cfg.n, self.cfg.d_m, seed)

    def zero_grads(self) -> None:
        for t in self._params.values():
            t.zero_grad()

    # -- checkpointing ---------------------------------------------------------

    def save(self, path: str | Path, units: CommonUnits | None) -> None:
        out = Path(path)
        out.mkdir(parents=True, exist_ok=True)
        entries = []
        blobs = []
        offset = 0

        def push(name: str, arr: np.ndarray) -> None:
            nonlocal offset
            raw = np.ascontiguousarray(arr, dtype="<f8").tobytes()
            entries.append({"path": name, "rows": int(arr.shape[0]),
                            "cols": int(arr.shape[1]), "offset": offset})
            blobs.append(raw)
            offset += len(raw)

        for name, t in self._params.items():
            push(name, t.data)
        state = {"present": units is not None}
        if units is not None:
            state["k"] = units.k
            state["t"] = units.t
            for i, u in enumerate(units.units):
                push(f"state.units.{i}", u)
            push("state.s_t", units.s_t)
        manifest = {
            "format": CHECKPOINT_FORMAT,
            "endianness": "little",
            "dtype": "f8",
            "model_config": self.cfg.model_dump(),
            "params": entries,
            "state": state,
            "blob_bytes": offset,
        }
        (out / "manifest.json").write_text(
            json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        (out / "weights.bin").write_bytes(b"".join(blobs))

    @classmethod
    def load(cls, path: str | Path) -> tuple["CkstnParams", CommonUnits | None]:
        src = Path(path)
        try:
            manifest = json.loads((src / "manifest.json").read_text())
            blob = (src / "weights.bin").read_bytes()
        except (OSError, json.JSONDecodeError) as e:
            raise IoError(f"cannot read checkpoint at {src}: {e}") from e
        if manifest.get("format") != CHECKPOINT_FORMAT:
            raise IoError(f"unknown checkpoint format {manifest.get('format')!r}")
        if manifest["blob_bytes"] != len(blob):
            raise IoError(
                f"weights.bin is {len(blob)} bytes, manifest says {manifest['blob_bytes']}")
        cfg = ModelConfig(**manifest["model_config"])
        p = cls(cfg)
        arrays: dict[str, np.ndarray] = {}
        for e in manifest["params"]:
            n = e["rows"] * e["cols"] * 8
            seg = blob[e["offset"]:e["offset"] + n]
            if len(seg) != n:
                raise IoError(f"truncated segment for {e['path']}")
            arrays[e["path"]] = np.frombuffer(seg, dtype="<f8").reshape(
                e["rows"], e["cols"]).astype(np.float64)
        for name, arr in arrays.items():
            if name.startswith("state."):
                continue
            p._add(name, arr)
        units = None
        if manifest["state"]["present"]:
            k = manifest["state"]["k"]
            units = CommonUnits(
                units=[arrays[f"state.units.{i}"] for i in range(k)],
                s_t=arrays["state.s_t"],
                t=manifest["state"]["t"],
            )
        return p, units
