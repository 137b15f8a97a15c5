"""Retrieval evaluation: recall@K both directions, report assembly, and the
region-word matching export.

Evaluation uses a frozen parameter/state snapshot and a plain-numpy
similarity path (no gradient graphs); tests cross-check it against the
differentiable pooling used by the matching loss.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data_io import FeatureSet
from .errors import ValidationError
from .model.config import ModelConfig
from .model.forward import forward_pair
from .model.params import CkstnParams
from .model.units import CommonUnits
from .tensor import no_grad


@dataclass
class PairEncoding:
    """Post-pipeline features of one pair, detached to numpy."""

    visual_id: str
    textual_id: str
    y_vis: np.ndarray
    y_tex: np.ndarray
    g_vis: np.ndarray
    g_tex: np.ndarray
    valid_vis: int
    valid_tex: int


@dataclass
class RetrievalReport:
    """Six standard recalls, their sum, and the similarity matrix behind them.

    Direction naming: sentence retrieval ranks sentences for an image query
    (rows of the matrix); image retrieval ranks images for a sentence query
    (columns).
    """

    r1_i2t: float
    r5_i2t: float
    r10_i2t: float
    r1_t2i: float
    r5_t2i: float
    r10_t2i: float
    rsum: float
    n: int
    similarity: np.ndarray

    def as_dict(self) -> dict:
        return {
            "sentence_retrieval": {"r1": self.r1_i2t, "r5": self.r5_i2t,
                                   "r10": self.r10_i2t},
            "image_retrieval": {"r1": self.r1_t2i, "r5": self.r5_t2i,
                                "r10": self.r10_t2i},
            "rsum": self.rsum,
            "n": self.n,
        }

    def csv_row(self) -> str:
        vals = [self.r1_i2t, self.r5_i2t, self.r10_i2t,
                self.r1_t2i, self.r5_t2i, self.r10_t2i, self.rsum]
        return ",".join(f"{v:.6g}" for v in vals)


CSV_HEADER = "r1_i2t,r5_i2t,r10_i2t,r1_t2i,r5_t2i,r10_t2i,rsum"


def recall_at_k(sim: np.ndarray, k: int, direction: str) -> float:
    """Percentage of queries whose true match (the diagonal) ranks in top k.

    direction "i2t": image queries over sentence columns (rows of sim);
    "t2i": sentence queries over image rows (columns of sim). Ties rank the
    lower index first.
    """
    sim = np.asarray(sim, dtype=np.float64)
    if sim.ndim != 2 or sim.shape[0] != sim.shape[1] or sim.shape[0] == 0:
        raise ValidationError(f"recall_at_k: need a nonempty square matrix, got {sim.shape}")
    if k < 1:
        raise ValidationError(f"recall_at_k: k must be >= 1, got {k}")
    if direction not in ("i2t", "t2i"):
        raise ValidationError(f"recall_at_k: unknown direction {direction!r}")
    n = sim.shape[0]
    hits = 0
    for q in range(n):
        scores = sim[q, :] if direction == "i2t" else sim[:, q]
        true = scores[q]
        better = int((scores > true).sum())
        tied_lower = int((scores[:q] == true).sum())
        if better + tied_lower + 1 <= k:
            hits += 1
    return 100.0 * hits / n


def _normalize_rows(x: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    return x / np.where(norms > 0, norms, 1.0)


def pooled_similarity_matrix(encodings: list[PairEncoding]) -> np.ndarray:
    """All-pairs pooled similarity: per (image k, sentence l), the mean over
    sentence words of the best-matching image region cosine."""
    n = len(encodings)
    if n == 0:
        raise ValidationError("pooled_similarity_matrix: empty batch")
    tex = [_normalize_rows(e.y_tex[:e.valid_tex]) for e in encodings]
    widths = [t.shape[0] for t in tex]
    stacked = np.vstack(tex)
    bounds = np.cumsum([0] + widths)
    sim = np.zeros((n, n))
    for k, e in enumerate(encodings):
        regions = _normalize_rows(e.y_vis[:e.valid_vis])
        c = regions @ stacked.T
        best = c.max(axis=0)
        for l in range(n):
            sim[k, l] = best[bounds[l]:bounds[l + 1]].mean()
    return sim


def encode_pairs(fs: FeatureSet, params: CkstnParams, units: CommonUnits | None,
                 cfg: ModelConfig,
                 pairings: list[tuple[str, str]] | None = None) -> list[PairEncoding]:
    """Forward every pairing with frozen state, detaching outputs to numpy."""
    out = []
    with no_grad():
        for vid, tid in (pairings if pairings is not None else fs.pairings):
            v, t = fs.get(vid), fs.get(tid)
            po = forward_pair(v.features, v.boxes, t.features, params, units, cfg,
                              update_units=False)
            out.append(PairEncoding(
                visual_id=vid, textual_id=tid,
                y_vis=po.y_vis.data, y_tex=po.y_tex.data,
                g_vis=po.g_vis.data, g_tex=po.g_tex.data,
                valid_vis=po.valid_vis, valid_tex=po.valid_tex))
    return out


def report_from_similarity(sim: np.ndarray) -> RetrievalReport:
    recalls = {}
    for d in ("i2t", "t2i"):
        for k in (1, 5, 10):
            recalls[f"r{k}_{d}"] = recall_at_k(sim, k, d)
    return RetrievalReport(
        r1_i2t=recalls["r1_i2t"], r5_i2t=recalls["r5_i2t"], r10_i2t=recalls["r10_i2t"],
        r1_t2i=recalls["r1_t2i"], r5_t2i=recalls["r5_t2i"], r10_t2i=recalls["r10_t2i"],
        rsum=sum(recalls.values()), n=sim.shape[0], similarity=sim)


def evaluate_retrieval(fs: FeatureSet, params: CkstnParams,
                       units: CommonUnits | None, cfg: ModelConfig) -> RetrievalReport:
    encodings = encode_pairs(fs, params, units, cfg)
    return report_from_similarity(pooled_similarity_matrix(encodings))


def export_matching(y_vis: np.ndarray, y_tex: np.ndarray, words: list[str],
                    region_ids: list[str]) -> list[dict]:
    """Per word: the region with the highest cosine plus the value.

    All-zero word vectors report similarity 0 and are flagged.
    """
    if len(region_ids) != y_vis.shape[0] or len(words) != y_tex.shape[0]:
        raise ValidationError("export_matching: label counts must match rows")
    regions = _normalize_rows(np.asarray(y_vis, dtype=np.float64))
    tokens = np.asarray(y_tex, dtype=np.float64)
    norms = np.linalg.norm(tokens, axis=1)
    tokens_n = _normalize_rows(tokens)
    c = regions @ tokens_n.T  # regions x words
    rows = []
    for w, word in enumerate(words):
        if norms[w] == 0.0:
            rows.append({"word": word, "region_id": region_ids[0] if region_ids else None,
                         "cosine": 0.0, "zero_norm": True})
            continue
        r = int(c[:, w].argmax())
        rows.append({"word": word, "region_id": region_ids[r],
                     "cosine": float(c[r, w]), "zero_norm": False})
    return rows


def write_matching_jsonl(rows: list[dict], path: str | Path) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    with p.open("w") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
    return p
