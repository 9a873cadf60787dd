"""Interpolation approximation of mean queue lengths at any load.

``E[L_i] ~ (c0 + rho c1) / (1 - rho)`` with ``c0 = 0`` (empty system in light
traffic) and ``c1`` the heavy-traffic limit of ``(1 - rho) E[L_i]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .branching import BranchingSummary
from .htlimits import arbitrary_time_limit
from .model import require_stable

C0 = 0.0


def c1_coefficient(s: BranchingSummary, i: int) -> float:
    lam_i = s.rates_hat[i]
    load = s.loads_hat
    inner = float(load @ (s.u[: s.n, i] + 0.5 * lam_i * load)) - 0.5 * lam_i * load[i]
    return s.workload_scale * (s.alpha + 1.0) / s.delta * inner


def c1_from_limit(s: BranchingSummary, i: int) -> float:
    """Same constant read off the mean of the arbitrary-time limit (queue + orbit)."""
    mean = arbitrary_time_limit(s).mean()
    return float(mean[i] + mean[s.n + i])


def c1_vector(s: BranchingSummary) -> np.ndarray:
    return np.array([c1_coefficient(s, i) for i in range(s.n)])


def mean_customers_approx(s: BranchingSummary, i: int, rho: float) -> float:
    require_stable(rho)
    return (C0 + rho * c1_coefficient(s, i)) / (1.0 - rho)


@dataclass
class ApproxRow:
    rho: float
    station: str  # 1-based index or "total"
    approx_mean: float
    sim_mean: float | None = None
    pct_error: float | None = None


def approx_table(s: BranchingSummary, rhos) -> list[ApproxRow]:
    c1 = c1_vector(s)
    rows = []
    for rho in rhos:
        require_stable(rho)
        vals = (C0 + rho * c1) / (1.0 - rho)
        rows += [ApproxRow(float(rho), str(i + 1), float(v)) for i, v in enumerate(vals)]
        rows.append(ApproxRow(float(rho), "total", float(vals.sum())))
    return rows


def pct_error(approx: float, exact: float) -> float:
    return (approx - exact) / exact * 100.0
