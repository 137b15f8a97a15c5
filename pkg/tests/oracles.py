"""Straight-line numpy reference implementations used by the tests.

Everything here is written directly from the target formulas with no calls
into the package, so a test comparing library output against these functions
is an independent check, not a tautology.
"""
from __future__ import annotations

import numpy as np

GELU_C0 = np.sqrt(2.0 / np.pi)
GELU_C1 = 0.044715


def gelu(x: np.ndarray) -> np.ndarray:
    return 0.5 * x * (1.0 + np.tanh(GELU_C0 * (x + GELU_C1 * x ** 3)))


def logistic(x: np.ndarray) -> np.ndarray:
    # stable identity: 1/(1+e^-x) = e^min(x,0) / (1 + e^-|x|)
    return np.exp(np.minimum(x, 0.0)) / (1.0 + np.exp(-np.abs(x)))


def softmax_rows(x: np.ndarray) -> np.ndarray:
    z = np.exp(x - x.max(axis=1, keepdims=True))
    return z / z.sum(axis=1, keepdims=True)


def layer_norm(x: np.ndarray, gain: np.ndarray, bias: np.ndarray,
               eps: float = 1e-5) -> np.ndarray:
    mu = x.mean(axis=1, keepdims=True)
    var = x.var(axis=1, keepdims=True)
    return gain * (x - mu) / np.sqrt(var + eps) + bias


def lightweight_layer(e: np.ndarray, tq: np.ndarray, tk: np.ndarray,
                      tv: np.ndarray, n1_g: np.ndarray, n1_b: np.ndarray,
                      w1: np.ndarray, b1: np.ndarray, w2: np.ndarray,
                      b2: np.ndarray, n2_g: np.ndarray, n2_b: np.ndarray,
                      d_e: int, normalizer: str,
                      proj: np.ndarray | None = None) -> np.ndarray:
    scores = (e @ tq) @ (e @ tk).T / np.sqrt(d_e)
    if normalizer == "softmax":
        scores = softmax_rows(scores)
    attended = scores @ (e @ tv)
    residual = e if e.shape[1] == d_e else e @ proj
    p = layer_norm(attended + residual, n1_g, n1_b)
    h = gelu(gelu(p @ w1 + b1) @ w2 + b2)
    return layer_norm(h + p, n2_g, n2_b)


def clip_chunk(e: np.ndarray, i: int, m: int) -> np.ndarray:
    d_m = e.shape[1] // m
    return e[:, (i - 1) * d_m: i * d_m]


def concat_shuffle(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.empty((a.shape[0], 2 * a.shape[1]))
    out[:, 0::2] = a
    out[:, 1::2] = b
    return out


def see_forward(e: np.ndarray, layers: list[dict], m: int) -> np.ndarray:
    """layers[i] holds w1,b1,w2,b2,w3,b3 for stage i."""
    d_m = e.shape[1] // m
    state = np.zeros((e.shape[0], d_m))
    for i in range(1, m + 1):
        lp = layers[i - 1]
        r = concat_shuffle(clip_chunk(e, i, m), state)
        h = gelu(r @ lp["w1"] + lp["b1"])
        h = gelu(h @ lp["w2"] + lp["b2"])
        state = h @ lp["w3"] + lp["b3"]
    return state


def cko_attend(m_c: np.ndarray, units: list[np.ndarray]) -> np.ndarray:
    total = np.zeros_like(m_c)
    for u in units:
        total += logistic(u @ m_c.T) @ m_c
    return total


def memory_gate(s_o: np.ndarray, w_o: np.ndarray, b_o: np.ndarray,
                clamp: bool) -> np.ndarray:
    g = np.maximum(w_o @ s_o + b_o, 0.0)
    return np.minimum(g, 1.0) if clamp else g


def unit_state_update(s_prev: np.ndarray, g_vis: np.ndarray,
                      g_tex: np.ndarray, s_ovis: np.ndarray,
                      s_otex: np.ndarray) -> np.ndarray:
    z = g_vis * g_tex
    return z * s_prev + (1.0 - z) * (s_ovis * s_otex)


def adjust_features(g: np.ndarray, e_hat: np.ndarray, w_g: np.ndarray,
                    p_gate: np.ndarray) -> np.ndarray:
    return logistic((w_g @ g) @ p_gate) * e_hat


def normalize_rows(x: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    return np.divide(x, norms, out=np.zeros_like(x), where=norms > 0)


def pooled_similarity(y_vis: np.ndarray, y_tex: np.ndarray) -> float:
    """Mean over words of the best-matching region cosine."""
    c = normalize_rows(y_vis) @ normalize_rows(y_tex).T
    return float(c.max(axis=0).mean())


def contrastive(g_vis: np.ndarray, g_tex: np.ndarray,
                tau: float) -> tuple[float, float]:
    """Rows are flattened per-pair gate vectors, L2-normalized."""
    a = normalize_rows(g_vis)
    b = normalize_rows(g_tex)
    sims = a @ b.T / tau
    n = sims.shape[0]
    l_i2t = float(np.mean([np.log(np.sum(np.exp(sims[i]))) - sims[i, i]
                           for i in range(n)]))
    l_t2i = float(np.mean([np.log(np.sum(np.exp(sims[:, j]))) - sims[j, j]
                           for j in range(n)]))
    return l_i2t, l_t2i


def matching(sim: np.ndarray, gamma: float) -> float:
    """Hinge with the hardest in-batch negative in both directions."""
    n = sim.shape[0]
    total = 0.0
    for k in range(n):
        row = [sim[k, l] for l in range(n) if l != k]
        col = [sim[l, k] for l in range(n) if l != k]
        total += max(0.0, gamma + max(row) - sim[k, k])
        total += max(0.0, gamma + max(col) - sim[k, k])
    return total / n


def recall_at_k(sim: np.ndarray, k: int, direction: str) -> float:
    """Exhaustive ranking with ties broken toward the lower index."""
    mat = sim if direction == "i2t" else sim.T
    n = mat.shape[0]
    hits = 0
    for q in range(n):
        row = mat[q]
        better = int(np.sum(row > row[q]))
        tied_lower = int(np.sum((row[:q] == row[q])))
        if better + tied_lower + 1 <= k:
            hits += 1
    return 100.0 * hits / n
