"""Forward pipeline: projection + geometry fusion, lightweight transformer
stack, style embedding extractor, common-knowledge attention with memory
gates and sequential state update, and the final feature adjustment.

Orientation convention: items are row-major token matrices (n x d), weights
multiply on the right except the token-mixing gates W_o and W_g, which act
on the token axis from the left.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, NumericError, ValidationError
from .. import tensor as tk
from ..tensor import Tensor
from .config import ModelConfig
from .params import CkstnParams
from .units import CommonUnits, update_state


def _finite(tag: str, t: Tensor) -> Tensor:
    if not np.isfinite(t.data).all():
        raise NumericError(f"non-finite value at {tag}")
    return t


def validate_boxes(boxes: np.ndarray) -> None:
    """Boxes are rows (x1, y1, x2, y2, area), all normalized to [0, 1]."""
    if boxes.ndim != 2 or boxes.shape[1] != 5:
        raise ValidationError(f"boxes must be n x 5, got {boxes.shape}")
    if boxes.size == 0:
        return
    if boxes.min() < 0.0 or boxes.max() > 1.0:
        raise ValidationError("box coordinates must lie in [0, 1]")
    if (boxes[:, 2] < boxes[:, 0]).any() or (boxes[:, 3] < boxes[:, 1]).any():
        raise ValidationError("boxes need x2 >= x1 and y2 >= y1")


def fuse_geometry(features: Tensor, boxes: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """features + FC(boxes); the FC output matches the feature width."""
    validate_boxes(boxes.data)
    if boxes.rows != features.rows:
        raise ValidationError(
            f"boxes rows {boxes.rows} != feature rows {features.rows}")
    return _finite("fuse_geometry", features + (boxes @ w + b))


def _gate_fn(x: Tensor, normalizer: str) -> Tensor:
    if normalizer == "paper-sigmoid":
        return tk.paper_sigmoid(x)
    if normalizer == "softmax-rows":
        return tk.softmax_rows(x)
    raise ConfigError(f"unknown gate normalizer {normalizer!r}")


def lightweight_layer(e: Tensor, params: CkstnParams, base: str,
                      cfg: ModelConfig, proj: Tensor | None) -> Tensor:
    """One lightweight transformer layer.

    Attention scores are (E T_Q)(E T_K)^T / sqrt(d_e); with
    attention_normalizer="literal-eq1" they weight E T_V unnormalized, with
    "softmax" a row softmax is applied first. The residual for the first
    sub-block uses E itself, or E @ proj when the input width differs from
    d_e. The feed-forward is the d_e -> d_e/4 -> d_e bottleneck with GELU
    after both layers.
    """
    q = e @ params[f"{base}.t_q"]
    key = e @ params[f"{base}.t_k"]
    v = e @ params[f"{base}.t_v"]
    scores = tk.scale(q @ tk.transpose(key), 1.0 / np.sqrt(cfg.d_e))
    if cfg.attention_normalizer == "softmax":
        scores = tk.softmax_rows(scores)
    elif cfg.attention_normalizer != "literal-eq1":
        raise ConfigError(f"unknown attention normalizer {cfg.attention_normalizer!r}")
    attended = _finite(f"{base}.attention", scores @ v)

    if e.cols == cfg.d_e:
        residual = e
    else:
        if proj is None:
            raise ValidationError(f"{base}: input width {e.cols} needs a projection")
        residual = e @ proj
    p = tk.layer_norm(attended + residual,
                      params[f"{base}.norm1.gain"], params[f"{base}.norm1.bias"])
    _finite(f"{base}.norm1", p)

    h = tk.gelu(p @ params[f"{base}.ffn.w1"] + params[f"{base}.ffn.b1"])
    h = tk.gelu(h @ params[f"{base}.ffn.w2"] + params[f"{base}.ffn.b2"])
    out = tk.layer_norm(h + p,
                        params[f"{base}.norm2.gain"], params[f"{base}.norm2.bias"])
    return _finite(f"{base}.norm2", out)


def run_transformer(e: Tensor, params: CkstnParams, side: str,
                    cfg: ModelConfig) -> Tensor:
    proj = params[f"{side}.proj"] if f"{side}.proj" in params else None
    out = e
    for j in range(cfg.L):
        out = lightweight_layer(out, params, f"{side}.layers.{j}", cfg,
                                proj if j == 0 else None)
    return out


def _see_mlp(r: Tensor, params: CkstnParams, base: str) -> Tensor:
    """3-layer MLP, 2*d_m -> d_m -> d_m -> d_m, GELU on the hidden layers."""
    h = tk.gelu(r @ params[f"{base}.w1"] + params[f"{base}.b1"])
    h = tk.gelu(h @ params[f"{base}.w2"] + params[f"{base}.b2"])
    return h @ params[f"{base}.w3"] + params[f"{base}.b3"]


def see_forward(e: Tensor, params: CkstnParams, side: str,
                cfg: ModelConfig) -> tuple[Tensor, list[Tensor]]:
    """Style embedding recurrence over feature chunks.

    Seeds the recurrence with a zero tensor, then for chunk i interleaves
    clip_chunk(e, i, m) with the previous stage output and applies the MLP.
    Returns the final style embedding and all intermediates.
    """
    if not cfg.has_adapter:
        raise ConfigError("see_forward requires m >= 1")
    if e.cols != cfg.d_e:
        raise ValidationError(f"see_forward: expected width {cfg.d_e}, got {e.cols}")
    state = tk.zeros(e.rows, cfg.d_m)
    stages: list[Tensor] = []
    for i in range(1, cfg.m + 1):
        r = tk.concat_shuffle(tk.clip_chunk(e, i, cfg.m), state)
        state = _finite(f"{side}.see.{i - 1}", _see_mlp(r, params, f"{side}.see.{i - 1}"))
        stages.append(state)
    return state, stages


def cko_attend(m_c: Tensor, units: CommonUnits, normalizer: str) -> Tensor:
    """Sum over units of gate(S_i @ M_c^T) @ M_c.

    The n x n score of each unit against the style embedding is squashed by
    the gate normalizer (the logistic function by default) and re-applied to
    the style embedding; contributions from all k units are summed.
    """
    if units.k == 0:
        raise ConfigError("cko_attend: no common units (k=0)")
    if m_c.shape != units.shape:
        raise ValidationError(f"cko_attend: {m_c.shape} vs units {units.shape}")
    m_t = tk.transpose(m_c)
    total: Tensor | None = None
    for u in units.units:
        score = Tensor(u) @ m_t
        term = _gate_fn(score, normalizer) @ m_c
        total = term if total is None else total + term
    return _finite("cko_attend", total)


def memory_gate(s_o: Tensor, w_o: Tensor, b_o: Tensor, clamp: bool) -> Tensor:
    """ReLU(W_o @ S_o + b_o), optionally capped at 1 elementwise."""
    if w_o.rows != w_o.cols or w_o.cols != s_o.rows:
        raise ValidationError(f"memory_gate: W_o {w_o.shape} vs S_o {s_o.shape}")
    g = tk.relu(w_o @ s_o + b_o)
    if clamp:
        g = tk.clamp_max(g, 1.0)
    return _finite("memory_gate", g)


def update_common_units(units: CommonUnits, g_vis: Tensor, g_tex: Tensor,
                        s_ovis: Tensor, s_otex: Tensor) -> CommonUnits:
    """Blend the running state with the fused cross-modal product.

    z = g_vis * g_tex and fused = s_ovis * s_otex elementwise; the new state
    is z * s_prev + (1 - z) * fused. Detached from any gradient graph.
    """
    z = g_vis.data * g_tex.data
    fused = s_ovis.data * s_otex.data
    return update_state(units, z, fused)


def adjust_features(g: Tensor, e_hat: Tensor, w_g: Tensor, p_gate: Tensor,
                    normalizer: str) -> Tensor:
    """gate(W_g @ G @ P) * E_hat; P lifts the gate width from d_m to d_e."""
    lifted = (w_g @ g) @ p_gate
    return _finite("adjust_features", _gate_fn(lifted, normalizer) * e_hat)


@dataclass
class PairOutput:
    """Everything the losses and the evaluator need from one (image, text) pair."""

    y_vis: Tensor
    y_tex: Tensor
    g_vis: Tensor
    g_tex: Tensor
    s_o_vis: Tensor | None
    s_o_tex: Tensor | None
    valid_vis: int
    valid_tex: int
    units: CommonUnits


def pad_tokens(features: np.ndarray, n: int) -> tuple[np.ndarray, int]:
    """Pad with zero rows or truncate to exactly n rows; returns valid count."""
    t, d = features.shape
    if t >= n:
        return features[:n].copy(), n
    out = np.zeros((n, d))
    out[:t] = features
    return out, t


def _pipeline(features: np.ndarray, boxes: np.ndarray | None, side: str,
              params: CkstnParams, units: CommonUnits | None,
              cfg: ModelConfig) -> dict:
    e = Tensor(features)
    if boxes is not None:
        e = fuse_geometry(e, Tensor(boxes), params["shared.geom.w"],
                          params["shared.geom.b"])
    e_hat = run_transformer(e, params, side, cfg)
    if not cfg.has_adapter:
        return {"e_hat": e_hat, "y": e_hat, "g": e_hat, "s_o": None}
    see_src = e_hat if cfg.see_input == "transformer" else e
    if cfg.see_input == "extractor" and e.cols != cfg.d_e:
        raise ConfigError("see_input=extractor requires d_in == d_e")
    style, _ = see_forward(see_src, params, side, cfg)
    if cfg.use_cko:
        s_o = cko_attend(style, units, cfg.gate_normalizer)
    else:
        s_o = style
    g = memory_gate(s_o, params["shared.w_o"], params["shared.b_o"], cfg.gate_clamp)
    y = adjust_features(g, e_hat, params["shared.w_g"], params["shared.p_gate"],
                        cfg.gate_normalizer)
    return {"e_hat": e_hat, "y": y, "g": g, "s_o": s_o}


def forward_pair(visual_features: np.ndarray, visual_boxes: np.ndarray | None,
                 textual_features: np.ndarray, params: CkstnParams,
                 units: CommonUnits | None, cfg: ModelConfig,
                 update_units: bool = False) -> PairOutput:
    """Run both pipelines on one matched pair.

    Token counts are padded/truncated to cfg.n (zero rows, valid counts
    recorded). When update_units is set and the adapter is active with CKO,
    the common-unit state advances once using both pipelines' gates.
    """
    fv, valid_v = pad_tokens(np.asarray(visual_features, dtype=np.float64), cfg.n)
    ft, valid_t = pad_tokens(np.asarray(textual_features, dtype=np.float64), cfg.n)
    bx = None
    if visual_boxes is not None:
        bx, _ = pad_tokens(np.asarray(visual_boxes, dtype=np.float64), cfg.n)
    if fv.shape[1] != cfg.dv:
        raise ValidationError(f"visual width {fv.shape[1]} != configured {cfg.dv}")
    if ft.shape[1] != cfg.dt:
        raise ValidationError(f"textual width {ft.shape[1]} != configured {cfg.dt}")
    if cfg.has_adapter and cfg.use_cko and units is None:
        raise ValidationError("forward_pair needs common units when CKO is active")

    vis = _pipeline(fv, bx, "visual", params, units, cfg)
    tex = _pipeline(ft, None, "textual", params, units, cfg)

    out_units = units
    if update_units and cfg.has_adapter and cfg.use_cko:
        out_units = update_common_units(units, vis["g"], tex["g"],
                                        vis["s_o"], tex["s_o"])
    return PairOutput(
        y_vis=vis["y"], y_tex=tex["y"], g_vis=vis["g"], g_tex=tex["g"],
        s_o_vis=vis["s_o"], s_o_tex=tex["s_o"],
        valid_vis=valid_v, valid_tex=valid_t, units=out_units,
    )
