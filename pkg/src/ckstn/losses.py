"""Training objectives: symmetric InfoNCE over gate embeddings and the
hinge triplet matching loss with in-batch hard negatives over adjusted
features, plus the region-word similarity machinery both share.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ValidationError
from . import tensor as tk
from .tensor import Tensor

log = logging.getLogger(__name__)


@dataclass
class LossValues:
    """Scalar loss terms of one batch. l_con = l_i2t + l_t2i; l_all = l_con + l_kl."""

    l_i2t: float
    l_t2i: float
    l_con: float
    l_kl: float
    l_all: float


def region_word_cosine(y_vis: Tensor, y_tex: Tensor,
                       valid_vis: int | None = None,
                       valid_tex: int | None = None) -> Tensor:
    """Cosine similarity of every (region, word) row pair.

    Padded rows (beyond the valid counts) are sliced off before normalizing.
    All-zero rows get similarity 0 by convention.
    """
    if y_vis.cols != y_tex.cols:
        raise ValidationError(f"cosine: widths differ {y_vis.cols} vs {y_tex.cols}")
    if valid_vis is not None:
        y_vis = tk.slice_rows(y_vis, 0, valid_vis)
    if valid_tex is not None:
        y_tex = tk.slice_rows(y_tex, 0, valid_tex)
    if y_vis.rows == 0 or y_tex.rows == 0:
        raise ValidationError("cosine: no valid rows")
    return tk.row_normalize(y_vis) @ tk.transpose(tk.row_normalize(y_tex))


def pool_pair_similarity(c: Tensor) -> Tensor:
    """Scalar pair similarity: mean over words of the best region per word."""
    if c.rows == 0 or c.cols == 0:
        raise ValidationError("pool_pair_similarity: empty similarity matrix")
    return tk.mean_all(tk.max_over_rows(c))


def contrastive_loss(g_vis: list[Tensor], g_tex: list[Tensor],
                     tau: float) -> tuple[Tensor, Tensor, Tensor]:
    """Symmetric InfoNCE over flattened, L2-normalized gate tensors.

    Returns (l_i2t, l_t2i, l_con) as scalar graph nodes. Each direction is
    the mean cross-entropy of the matched pair against the in-batch
    alternatives at temperature tau.
    """
    if tau <= 0:
        raise ConfigError(f"temperature must be positive, got {tau}")
    if len(g_vis) != len(g_tex) or not g_vis:
        raise ValidationError("contrastive_loss: batches must pair up and be nonempty")
    n = len(g_vis)
    vis = tk.row_normalize(tk.concat_rows(
        [tk.reshape(g, 1, g.data.size) for g in g_vis]))
    tex = tk.row_normalize(tk.concat_rows(
        [tk.reshape(g, 1, g.data.size) for g in g_tex]))
    sims = tk.scale(vis @ tk.transpose(tex), 1.0 / tau)  # n x n, [i,j] = vis_i . tex_j

    diag = np.eye(n)
    pos = tk.sum_cols(tk.mul(sims, Tensor(diag)))        # n x 1 matched logits
    l_i2t = tk.mean_all(tk.logsumexp_rows(sims) - pos)
    l_t2i = tk.mean_all(tk.logsumexp_rows(tk.transpose(sims)) - pos)
    return l_i2t, l_t2i, l_i2t + l_t2i


def pairwise_similarity_matrix(y_vis: list[Tensor], y_tex: list[Tensor],
                               valid_vis: list[int], valid_tex: list[int]) -> Tensor:
    """N x N pooled similarities between all images and all sentences.

    Entry (k, l) is pool_pair_similarity over the region-word cosine of
    image k and sentence l; built as one graph so the matching loss can
    differentiate through it.
    """
    n = len(y_vis)
    if n == 0 or len(y_tex) != n:
        raise ValidationError("similarity matrix needs equal nonempty batches")
    tex_norm = [tk.row_normalize(tk.slice_rows(y, 0, v))
                for y, v in zip(y_tex, valid_tex)]
    widths = [t.rows for t in tex_norm]
    stacked_tex = tk.concat_rows(tex_norm)               # (sum words) x d_e
    stacked_tex_t = tk.transpose(stacked_tex)
    # mean-pool matrix: column block l averages that sentence's word columns
    pool = np.zeros((sum(widths), n))
    off = 0
    for l, w in enumerate(widths):
        pool[off:off + w, l] = 1.0 / w
        off += w
    pool_t = Tensor(pool)

    rows = []
    for k in range(n):
        regions = tk.row_normalize(tk.slice_rows(y_vis[k], 0, valid_vis[k]))
        c_row = regions @ stacked_tex_t                  # regions x (sum words)
        best = tk.max_over_rows(c_row)                   # 1 x (sum words)
        rows.append(best @ pool_t)                       # 1 x n pooled entries
    return tk.concat_rows(rows)


def matching_loss(sim: Tensor, gamma: float) -> Tensor:
    """Hinge triplet loss over the pooled similarity matrix.

    For each positive (k, k): the hardest wrong sentence and hardest wrong
    image inside the batch, margins gamma, averaged over positives.
    N < 2 yields an exact zero (no negatives exist).
    """
    if gamma < 0:
        raise ConfigError(f"margin must be nonnegative, got {gamma}")
    n = sim.rows
    if sim.cols != n:
        raise ValidationError(f"matching_loss: square matrix required, got {sim.shape}")
    if n < 2:
        log.warning("matching_loss: batch of %d has no negatives, loss is 0", n)
        return tk.zeros(1, 1)
    off_diag = 1.0 - np.eye(n)
    neg_inf = np.where(np.eye(n) > 0, -np.inf, 0.0)

    diag = tk.sum_cols(tk.mul(sim, Tensor(np.eye(n))))   # n x 1 positives
    # gamma + C_kl' - C_kk over wrong sentences; diagonal masked to -inf
    spread_rows = sim - diag @ Tensor(np.ones((1, n)))
    hardest_sent = tk.max_over_rows(tk.transpose(tk.add_const(spread_rows, neg_inf)))
    spread_cols = tk.transpose(sim) - diag @ Tensor(np.ones((1, n)))
    hardest_img = tk.max_over_rows(tk.transpose(tk.add_const(spread_cols, neg_inf)))

    per_pos = tk.relu(tk.affine(hardest_sent, 1.0, gamma)) + \
        tk.relu(tk.affine(hardest_img, 1.0, gamma))
    return tk.mean_all(per_pos)


def total_loss(l_con: Tensor, l_kl: Tensor,
               contrastive_weight: float = 1.0) -> Tensor:
    """l_all = l_con + l_kl; the weight exists for the no-contrastive ablation."""
    if contrastive_weight == 0.0:
        return l_kl
    return tk.scale(l_con, contrastive_weight) + l_kl
