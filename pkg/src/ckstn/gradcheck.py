"""Central-difference verification of analytic gradients.

``grad_check`` perturbs each checked parameter coordinate by
h = 1e-3 * max(1, |theta|) and compares (f(+h) - f(-h)) / 2h against the
gradient from one reverse-mode sweep. The probe evaluations run with graph
recording disabled, so only values are computed.

The loss surface is piecewise smooth (relu, min-clamp, and max pooling all
have kinks). When a kink falls inside the probe interval the nominal-step
estimate is meaningless, so coordinates that miss at the nominal step are
re-probed at progressively smaller steps: a correct gradient converges to
the analytic value as the interval shrinks past the kink, while a wrong
backward stays wrong at every step size.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import NumericError
from .tensor import Tensor, no_grad

REL_STEP = 1e-3
ERR_FLOOR = 1e-8
REFINE_FACTORS = (8.0, 64.0, 512.0)


@dataclass
class GradReport:
    """Outcome of checking one parameter tensor."""

    name: str
    max_rel_err: float
    worst_coord: tuple[int, int]
    passed: bool
    checked_coords: int

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "max_rel_err": self.max_rel_err,
            "worst_coord": list(self.worst_coord),
            "pass": self.passed,
            "checked_coords": self.checked_coords,
        }


def _loss_value(f: Callable[[], Tensor]) -> float:
    with no_grad():
        v = f().item()
    if not np.isfinite(v):
        raise NumericError("grad_check: non-finite loss during probe")
    return v


def grad_check(
    f: Callable[[], Tensor],
    params: Sequence[tuple[str, Tensor]],
    tol: float = 1e-4,
    max_coords: int | None = None,
    coord_seed: int = 0,
) -> list[GradReport]:
    """Compare analytic gradients of the scalar ``f()`` with central differences.

    params is a sequence of (name, tensor) pairs; every tensor must be a leaf
    with requires_grad set. With max_coords given, a seeded subset of
    coordinates is probed per parameter (all coordinates otherwise).
    Relative error per coordinate is |analytic - numeric| divided by
    max(1e-8, |analytic| + |numeric|).
    """
    for _, p in params:
        p.zero_grad()
    out = f()
    if not np.isfinite(out.item()):
        raise NumericError("grad_check: non-finite loss at base point")
    out.backward()
    analytic = {
        name: (p.grad.copy() if p.grad is not None else np.zeros_like(p.data))
        for name, p in params
    }

    rng = np.random.default_rng(coord_seed)
    reports: list[GradReport] = []
    for name, p in params:
        flat = p.data.reshape(-1)
        size = flat.size
        if max_coords is None or max_coords >= size:
            coords = np.arange(size)
        else:
            coords = rng.choice(size, size=max_coords, replace=False)
        worst = (0, 0)
        worst_err = 0.0
        for k in coords:
            theta = flat[k]
            ana = analytic[name].reshape(-1)[k]
            h0 = REL_STEP * max(1.0, abs(theta))
            rel = np.inf
            for factor in (1.0,) + REFINE_FACTORS:
                h = h0 / factor
                flat[k] = theta + h
                f_plus = _loss_value(f)
                flat[k] = theta - h
                f_minus = _loss_value(f)
                flat[k] = theta
                numeric = (f_plus - f_minus) / (2.0 * h)
                rel = abs(ana - numeric) / max(ERR_FLOOR, abs(ana) + abs(numeric))
                if rel < 0.1 * tol:  # refine marginal passes too, not just misses
                    break
            if rel >= worst_err:
                worst_err = rel
                worst = (int(k) // p.cols, int(k) % p.cols)
        reports.append(GradReport(
            name=name,
            max_rel_err=float(worst_err),
            worst_coord=worst,
            passed=bool(worst_err < tol),
            checked_coords=len(coords),
        ))
    return reports
