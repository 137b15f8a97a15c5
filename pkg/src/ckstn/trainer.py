"""Training loop: Adam with the warm-up/linear-decay schedule, per-batch
common-unit updates, per-epoch metrics and checkpointing.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from .data_io import FeatureSet, make_batches
from .errors import NumericError, ValidationError
from .evaluator import RetrievalReport, evaluate_retrieval
from .losses import (LossValues, contrastive_loss, matching_loss,
                     pairwise_similarity_matrix, total_loss)
from .model.config import ModelConfig
from .model.forward import forward_pair, update_common_units
from .model.params import CkstnParams
from .model.units import CommonUnits, update_state

METRICS_HEADER = "epoch,lr,L_con,L_kl,L_all,R1_i2t,R1_t2i,Rsum"


class AdamConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


class TrainConfig(BaseModel):
    """Optimization schedule and loop controls."""

    model_config = ConfigDict(extra="forbid")

    epochs: int = 30
    batch_size: int = 16
    lr_low: float = 1e-5
    lr_high: float = 1e-4
    warmup_epochs: int = 10
    margin: float = 0.2           # hinge margin for the matching loss
    contrastive_weight: float = 1.0
    adam: AdamConfig = AdamConfig()
    seed: int = 7
    unit_update: Literal["per-batch", "per-pair", "off"] = "per-batch"

    @model_validator(mode="after")
    def _check(self) -> "TrainConfig":
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.lr_low > self.lr_high:
            raise ValueError("lr_low must be <= lr_high")
        if self.epochs > 0 and not (0 <= self.warmup_epochs < self.epochs):
            raise ValueError("warmup_epochs must lie in [0, epochs)")
        if self.margin < 0:
            raise ValueError("margin must be >= 0")
        return self


def lr_at(epoch: float, cfg: TrainConfig) -> float:
    """Piecewise-linear schedule: lr_low -> lr_high over the warm-up epochs,
    then back down to lr_low at the final epoch. Continuous in epoch."""
    if not (0 <= epoch <= cfg.epochs):
        raise ValidationError(f"epoch {epoch} outside [0, {cfg.epochs}]")
    w = cfg.warmup_epochs
    if epoch <= w and w > 0:
        return cfg.lr_low + (cfg.lr_high - cfg.lr_low) * (epoch / w)
    span = cfg.epochs - w
    if span <= 0:
        return cfg.lr_high
    return cfg.lr_high + (cfg.lr_low - cfg.lr_high) * ((epoch - w) / span)


class AdamState:
    """Per-parameter first/second moment estimates and the step counter."""

    def __init__(self, params: CkstnParams):
        self.m = {p: np.zeros_like(t.data) for p, t in params.items()}
        self.v = {p: np.zeros_like(t.data) for p, t in params.items()}
        self.t = 0


def adam_step(params: CkstnParams, state: AdamState, lr: float,
              cfg: AdamConfig) -> None:
    """Standard bias-corrected Adam. Parameters without a gradient are skipped."""
    if lr <= 0:
        raise ValidationError(f"learning rate must be positive, got {lr}")
    state.t += 1
    b1, b2 = cfg.beta1, cfg.beta2
    bc1 = 1.0 - b1 ** state.t
    bc2 = 1.0 - b2 ** state.t
    for path, tensor in params.items():
        g = tensor.grad
        if g is None:
            continue
        if not np.isfinite(g).all():
            raise NumericError(f"non-finite gradient for parameter {path}")
        m = state.m[path]
        v = state.v[path]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        tensor.data -= lr * (m / bc1) / (np.sqrt(v / bc2) + cfg.eps)


@dataclass
class EpochMetrics:
    epoch: int
    lr: float
    l_con: float
    l_kl: float
    l_all: float
    r1_i2t: float
    r1_t2i: float
    rsum: float

    def csv_row(self) -> str:
        return (f"{self.epoch},{self.lr:.10g},{self.l_con:.10g},{self.l_kl:.10g},"
                f"{self.l_all:.10g},{self.r1_i2t:.6g},{self.r1_t2i:.6g},{self.rsum:.6g}")


@dataclass
class TrainResult:
    params: CkstnParams
    units: CommonUnits | None
    metrics: list[EpochMetrics]
    final_checkpoint: Path
    best_checkpoint: Path
    metrics_path: Path
    initial_l_all: float
    final_l_all: float
    best_rsum: float


def batch_losses(pairs: list[tuple[str, str]], fs: FeatureSet,
                 params: CkstnParams, units: CommonUnits | None,
                 cfg: ModelConfig, train_cfg: TrainConfig):
    """Forward a batch and assemble the loss graph. Returns (loss node,
    LossValues, pair outputs)."""
    outputs = []
    for vid, tid in pairs:
        v, t = fs.get(vid), fs.get(tid)
        outputs.append(forward_pair(v.features, v.boxes, t.features,
                                    params, units, cfg, update_units=False))
    l_i2t, l_t2i, l_con = contrastive_loss(
        [o.g_vis for o in outputs], [o.g_tex for o in outputs], cfg.tau)
    sim = pairwise_similarity_matrix(
        [o.y_vis for o in outputs], [o.y_tex for o in outputs],
        [o.valid_vis for o in outputs], [o.valid_tex for o in outputs])
    l_kl = matching_loss(sim, train_cfg.margin)
    l_all = total_loss(l_con, l_kl, train_cfg.contrastive_weight)
    values = LossValues(
        l_i2t=l_i2t.item(), l_t2i=l_t2i.item(), l_con=l_con.item(),
        l_kl=l_kl.item(), l_all=l_all.item())
    return l_all, values, outputs


def _apply_unit_update(units: CommonUnits, outputs, mode: str) -> CommonUnits:
    if mode == "off":
        return units
    if mode == "per-pair":
        for o in outputs:
            units = update_common_units(units, o.g_vis, o.g_tex,
                                        o.s_o_vis, o.s_o_tex)
        return units
    # per-batch: one update from batch-mean gates and attended features
    z = np.mean([o.g_vis.data * o.g_tex.data for o in outputs], axis=0)
    fused = np.mean([o.s_o_vis.data * o.s_o_tex.data for o in outputs], axis=0)
    return update_state(units, z, fused)


def train(train_fs: FeatureSet, heldout_fs: FeatureSet | None,
          model_cfg: ModelConfig, train_cfg: TrainConfig,
          out_dir: str | Path) -> TrainResult:
    """Full training run; writes metrics.csv plus final and best-Rsum
    checkpoints under out_dir. Deterministic given (seed, corpus, configs)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    params = CkstnParams.initialize(model_cfg, train_cfg.seed)
    units = None
    if model_cfg.has_adapter and model_cfg.use_cko:
        units = params.init_common_units(train_cfg.seed + 1000003)
    opt = AdamState(params)
    eval_fs = heldout_fs if heldout_fs is not None else train_fs

    metrics: list[EpochMetrics] = []
    best_rsum = -1.0
    best_dir = out / "checkpoint-best"
    final_dir = out / "checkpoint-final"
    initial_l_all = float("nan")

    for epoch in range(train_cfg.epochs):
        batches = make_batches(train_fs, train_cfg.batch_size,
                               train_cfg.seed, epoch)
        sums = {"l_con": 0.0, "l_kl": 0.0, "l_all": 0.0}
        for b_idx, batch in enumerate(batches):
            lr = lr_at(epoch + b_idx / len(batches), train_cfg)
            params.zero_grads()
            loss, values, outputs = batch_losses(
                batch, train_fs, params, units, model_cfg, train_cfg)
            if not np.isfinite(values.l_all):
                dump = {"epoch": epoch, "batch": b_idx,
                        "pairs": [list(p) for p in batch],
                        "losses": values.__dict__}
                (out / "diagnostic.json").write_text(json.dumps(dump, indent=2))
                raise NumericError(
                    f"non-finite loss at epoch {epoch} batch {b_idx}; "
                    f"diagnostic written to {out / 'diagnostic.json'}")
            loss.backward()
            adam_step(params, opt, lr, train_cfg.adam)
            if units is not None:
                units = _apply_unit_update(units, outputs, train_cfg.unit_update)
            sums["l_con"] += values.l_con
            sums["l_kl"] += values.l_kl
            sums["l_all"] += values.l_all
        nb = len(batches)
        report = evaluate_retrieval(eval_fs, params, units, model_cfg)
        row = EpochMetrics(
            epoch=epoch, lr=lr_at(float(epoch), train_cfg),
            l_con=sums["l_con"] / nb, l_kl=sums["l_kl"] / nb,
            l_all=sums["l_all"] / nb,
            r1_i2t=report.r1_i2t, r1_t2i=report.r1_t2i, rsum=report.rsum)
        metrics.append(row)
        if epoch == 0:
            initial_l_all = row.l_all
        if report.rsum > best_rsum:
            best_rsum = report.rsum
            params.save(best_dir, units)

    params.save(final_dir, units)
    if not best_dir.exists():
        params.save(best_dir, units)  # 0-epoch run: best == final == init
    metrics_path = out / "metrics.csv"
    metrics_path.write_text(
        "\n".join([METRICS_HEADER] + [m.csv_row() for m in metrics]) + "\n")
    final_l_all = metrics[-1].l_all if metrics else float("nan")
    return TrainResult(
        params=params, units=units, metrics=metrics,
        final_checkpoint=final_dir, best_checkpoint=best_dir,
        metrics_path=metrics_path, initial_l_all=initial_l_all,
        final_l_all=final_l_all, best_rsum=best_rsum)
