"""Whole-model gradient verification across seeds and attention variants.

Builds a small synthetic batch, assembles the combined training loss, and
runs grad_check over every parameter tensor. One suite cell = one
(seed, attention_normalizer) pair; the suite passes only if every tensor in
every cell does.
"""
from __future__ import annotations

from dataclasses import dataclass

from .data_io import SynthSpec, synth_generate
from .gradcheck import GradReport, grad_check
from .losses import (contrastive_loss, matching_loss,
                     pairwise_similarity_matrix, total_loss)
from .model.config import ModelConfig
from .model.forward import forward_pair
from .model.params import CkstnParams

DEFAULT_SEEDS = (11, 21, 31, 41, 51)


@dataclass
class SuiteCell:
    seed: int
    attention_normalizer: str
    reports: list[GradReport]

    @property
    def max_rel_err(self) -> float:
        return max(r.max_rel_err for r in self.reports)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.reports)


@dataclass
class SuiteResult:
    cells: list[SuiteCell]
    tol: float

    @property
    def max_rel_err(self) -> float:
        return max(c.max_rel_err for c in self.cells)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.cells)

    def failures(self) -> list[tuple[int, str, GradReport]]:
        return [(c.seed, c.attention_normalizer, r)
                for c in self.cells for r in c.reports if not r.passed]

    def as_dict(self) -> dict:
        return {
            "tol": self.tol,
            "max_rel_err": self.max_rel_err,
            "pass": self.passed,
            "cells": [{
                "seed": c.seed,
                "attention_normalizer": c.attention_normalizer,
                "max_rel_err": c.max_rel_err,
                "pass": c.passed,
                "tensors": len(c.reports),
            } for c in self.cells],
        }


def batch_loss_builder(model_cfg: ModelConfig, params: CkstnParams, units,
                       fs, margin: float = 0.2):
    """Closure computing L_con + L_kl over every pairing in fs."""
    def build():
        outs = [forward_pair(fs.get(v).features, fs.get(v).boxes,
                             fs.get(t).features, params, units, model_cfg)
                for v, t in fs.pairings]
        _, _, l_con = contrastive_loss([o.g_vis for o in outs],
                                       [o.g_tex for o in outs], model_cfg.tau)
        sim = pairwise_similarity_matrix(
            [o.y_vis for o in outs], [o.y_tex for o in outs],
            [o.valid_vis for o in outs], [o.valid_tex for o in outs])
        return total_loss(l_con, matching_loss(sim, margin))
    return build


def run_suite(model_cfg: ModelConfig, seeds=DEFAULT_SEEDS, tol: float = 1e-4,
              max_coords: int | None = 4, pairs: int = 4,
              both_normalizers: bool = True) -> SuiteResult:
    normalizers = ["literal-eq1", "softmax"] if both_normalizers \
        else [model_cfg.attention_normalizer]
    cells: list[SuiteCell] = []
    for seed in seeds:
        for norm in normalizers:
            cfg = ModelConfig(**{**model_cfg.model_dump(),
                                 "attention_normalizer": norm})
            params = CkstnParams.initialize(cfg, seed=seed)
            units = params.init_common_units(seed=seed + 1)
            fs = synth_generate(SynthSpec(
                pairs=pairs, tokens=cfg.n,
                dim_visual=cfg.dv, dim_textual=cfg.dt, seed=seed + 2))
            f = batch_loss_builder(cfg, params, units, fs)
            reports = grad_check(f, list(params.items()), tol=tol,
                                 max_coords=max_coords, coord_seed=seed)
            cells.append(SuiteCell(seed, norm, reports))
    return SuiteResult(cells=cells, tol=tol)
