"""Common feature units: the shared cross-modal memory bank and its state."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import NumericError


@dataclass
class CommonUnits:
    """k unit tensors plus the running state blended across update steps.

    Shapes are fixed at construction (each array is n x d_m). The state is
    running statistics, not a parameter: updates happen outside any gradient
    graph.
    """

    units: list[np.ndarray]
    s_t: np.ndarray
    t: int = 0

    @property
    def k(self) -> int:
        return len(self.units)

    @property
    def shape(self) -> tuple[int, int]:
        return self.s_t.shape  # type: ignore[return-value]

    def copy(self) -> "CommonUnits":
        return CommonUnits([u.copy() for u in self.units], self.s_t.copy(), self.t)


def init_units(k: int, n: int, d_m: int, seed: int) -> CommonUnits:
    """Seeded standard-normal units scaled by 1/sqrt(d_m); state starts at zero."""
    rng = np.random.default_rng(seed)
    units = [rng.standard_normal((n, d_m)) / np.sqrt(d_m) for _ in range(k)]
    return CommonUnits(units=units, s_t=np.zeros((n, d_m)), t=0)


def update_state(units: CommonUnits, z: np.ndarray, fused: np.ndarray) -> CommonUnits:
    """Apply s_t = z * s_{t-1} + (1 - z) * fused and advance the step counter.

    z and fused are elementwise n x d_m arrays (gate product and fused
    attended product). Returns a fresh CommonUnits; the input is untouched.
    """
    if z.shape != units.s_t.shape or fused.shape != units.s_t.shape:
        raise ValueError(
            f"update_state: shapes {z.shape}/{fused.shape} vs state {units.s_t.shape}")
    new_state = z * units.s_t + (1.0 - z) * fused
    if not np.isfinite(new_state).all():
        raise NumericError("common-unit update produced non-finite state")
    return CommonUnits(units=[u.copy() for u in units.units],
                       s_t=new_state, t=units.t + 1)
