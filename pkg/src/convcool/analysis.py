"""Scaling-law transform, gamma-sweep rates and diagnostic norms."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .forward import Discretization, OptState


def scale_solution(state: OptState, kappa: float) -> OptState:
    """Map a solution at diffusivity 1 to the solution at ``kappa``.

    With ``gamma -> gamma / kappa**4`` the fields transform as
    ``T / kappa``, ``q / kappa**2``, ``kappa v`` and ``p / kappa**3``.
    """
    if not kappa > 0:
        raise ValueError(f"kappa must be positive, got {kappa!r}")
    out = state.copy(T=state.T / kappa, q=state.q / kappa**2,
                     v=state.v * kappa, p=state.p / kappa**3)
    out.kappa = state.kappa * kappa
    out.gamma = state.gamma / kappa**4
    return out


@dataclass(frozen=True)
class SweepPoint:
    gamma: float
    J: float
    variance_norm: float  # |T - <T>| in L2
    control_energy: float  # gamma |grad v|^2


def sweep_point(disc: Discretization, state: OptState) -> SweepPoint:
    DT = disc.deviation(state.T)
    variance = math.sqrt(max(float(DT @ (disc.mass @ DT)), 0.0))
    energy = state.gamma * float(state.v @ (disc.laplacian @ state.v))
    J = 0.5 * variance**2 + 0.5 * energy
    return SweepPoint(state.gamma, J, variance, energy)


@dataclass(frozen=True)
class RateRow:
    gamma: float
    J: float
    variance_norm: float
    control_energy: float
    r_J: float | None = None
    r_T: float | None = None
    r_v: float | None = None


@dataclass
class RateTable:
    rows: list[RateRow] = field(default_factory=list)

    def column(self, name: str) -> np.ndarray:
        return np.array([np.nan if getattr(r, name) is None else getattr(r, name)
                         for r in self.rows], dtype=float)

    @property
    def r_J(self) -> np.ndarray:
        return self.column("r_J")[:-1]

    def __len__(self):
        return len(self.rows)


def _slope(a0, a1, g0, g1):
    if a0 <= 0 or a1 <= 0:
        return math.nan
    return math.log(a1 / a0) / math.log(g1 / g0)


def compute_rates(sweep) -> RateTable:
    """Local log-log slopes between consecutive gamma values.

    ``sweep`` holds ``(gamma, J, variance_norm, control_energy)`` tuples or
    :class:`SweepPoint` objects in any order.  Each rate is attached to the
    left endpoint; the largest gamma gets none.  ``r_v`` is NaN where the
    control energy is zero.
    """
    pts = [p if isinstance(p, SweepPoint) else SweepPoint(*map(float, p)) for p in sweep]
    if not pts:
        raise ValueError("sweep is empty")
    for p in pts:
        if not p.gamma > 0:
            raise ValueError(f"gamma must be positive, got {p.gamma!r}")
        if not p.J > 0:
            raise ValueError(f"J must be positive for rates, got {p.J!r} at gamma={p.gamma}")
        if not p.variance_norm > 0:
            raise ValueError(f"variance norm must be positive, got {p.variance_norm!r}")
    pts.sort(key=lambda p: p.gamma)
    gammas = [p.gamma for p in pts]
    if len(set(gammas)) != len(gammas):
        raise ValueError("gamma values must be distinct")

    rows = []
    for i, p in enumerate(pts):
        if i + 1 < len(pts):
            nx = pts[i + 1]
            rates = dict(r_J=_slope(p.J, nx.J, p.gamma, nx.gamma),
                         r_T=_slope(p.variance_norm, nx.variance_norm, p.gamma, nx.gamma),
                         r_v=_slope(p.control_energy, nx.control_energy, p.gamma, nx.gamma))
        else:
            rates = {}
        rows.append(RateRow(p.gamma, p.J, p.variance_norm, p.control_energy, **rates))
    return RateTable(rows)


def divergence_norm(disc: Discretization, v) -> float:
    """Discrete divergence of ``v`` in the P1-mass-weighted norm."""
    return disc.divergence_norm(v)


def rate_invariance_check(reference, scaled, kappa: float, atol: float = 1e-6) -> bool:
    """Do the cost rates of a sweep at ``kappa`` match those at diffusivity 1?

    ``scaled`` must sit on the grid ``gamma / kappa**4`` of ``reference``.
    """
    if not kappa > 0:
        raise ValueError(f"kappa must be positive, got {kappa!r}")
    ref = reference if isinstance(reference, RateTable) else compute_rates(reference)
    sca = scaled if isinstance(scaled, RateTable) else compute_rates(scaled)
    if len(ref) != len(sca):
        raise ValueError(f"sweep lengths differ: {len(ref)} vs {len(sca)}")
    g_ref = ref.column("gamma") / kappa**4
    g_sca = sca.column("gamma")
    if not np.allclose(g_ref, g_sca, rtol=1e-10, atol=0.0):
        raise ValueError("gamma grids do not match under gamma -> gamma / kappa**4")
    return bool(np.all(np.abs(ref.r_J - sca.r_J) <= atol))
