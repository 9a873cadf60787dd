"""Branching-process constants of the polling system.

The joint queue length at the start of glue periods of station 1 is a
multitype branching process with immigration.  Its mean matrix is the
product of one factor per visit, ``M = M_1 M_2 ... M_N``, where ``M_i`` is
the identity except for row i.  Everything here is a pure function of a
:class:`~gluepoll.model.LoadProfile` and a load ``rho``; hatted quantities
(evaluated at ``rho = 1``) are taken from the profile's base config directly.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .model import LoadProfile, ModelError, PollingConfig


class NoConvergence(ArithmeticError):
    pass


class DegenerateImmigration(ModelError):
    pass


class DomainError(ValueError):
    pass


def _check_index(profile: LoadProfile, i: int) -> None:
    if not 0 <= i < profile.n:
        raise IndexError(f"station index {i} out of range for N={profile.n}")


def _config(profile: LoadProfile, rho: float) -> PollingConfig:
    return profile.base if rho == 1.0 else profile.materialize(rho)


def offspring_rows(config: PollingConfig) -> np.ndarray:
    """Matrix of f_{i,j}: mean type-j offspring of one type-i customer during visit i."""
    f = np.outer(config.stick * config.service_means, config.arrival_rates)
    f[np.diag_indices_from(f)] += config.miss
    return f


def station_matrix(profile: LoadProfile, rho: float, i: int) -> np.ndarray:
    """Mean matrix of what a visit to station ``i`` does to the population."""
    _check_index(profile, i)
    cfg = _config(profile, rho)
    m = np.eye(cfg.n)
    m[i] = offspring_rows(cfg)[i]
    return m


def mean_matrix(profile: LoadProfile, rho: float = 1.0) -> np.ndarray:
    cfg = _config(profile, rho)
    f = offspring_rows(cfg)
    m = np.eye(cfg.n)
    for i in range(cfg.n):
        mi = np.eye(cfg.n)
        mi[i] = f[i]
        m = m @ mi
    return m


def spectral_radius(
    m: np.ndarray,
    start: np.ndarray | None = None,
    tol: float = 1e-13,
    max_iter: int = 100_000,
) -> float:
    """Perron root of a nonnegative primitive matrix by power iteration.

    Iterates until the Collatz-Wielandt bracket
    ``min(Mx/x) <= xi <= max(Mx/x)`` is narrower than ``tol`` (relative to
    the bracket's midpoint); this also bounds successive estimates.
    """
    m = np.asarray(m, dtype=float)
    if (m < 0).any():
        raise DomainError("matrix has negative entries")
    x = np.ones(m.shape[0]) if start is None else np.array(start, dtype=float)
    x /= x.sum()
    prev = np.nan
    for _ in range(max_iter):
        y = m @ x
        if not (x > 0).all():
            raise NoConvergence("iterate lost positivity; matrix is reducible")
        ratios = y / x
        lo, hi = ratios.min(), ratios.max()
        est = 0.5 * (lo + hi)
        if hi - lo <= tol * max(est, 1e-300) and abs(est - prev) <= tol * max(est, 1e-300):
            return float(est)
        prev = est
        s = y.sum()
        if not s > 0:
            raise NoConvergence("iterate collapsed to zero")
        x = y / s
    raise NoConvergence(f"power iteration did not converge in {max_iter} iterations")


def xi(profile: LoadProfile, rho: float) -> float:
    """Spectral radius of the mean matrix at load ``rho``."""
    w = profile.base.service_means / profile.base.b_abs
    return spectral_radius(mean_matrix(profile, rho), start=w)


def u_vectors(profile: LoadProfile) -> np.ndarray:
    """Rows ``u^(1..N+1)`` at unit load; row 0 and row N coincide.

    ``u^(i)`` is the left eigenvector seen from the start of a glue period of
    station i: entry j is lambda_hat_j times the mean number of visits a
    type-j customer present then still "owes" in load units.
    """
    cfg = profile.base
    n = cfg.n
    lam, load = cfg.arrival_rates, cfg.loads
    ratio = cfg.miss / cfg.stick
    # cum[k] = load of stations 0..k-1
    cum = np.concatenate([[0.0], np.cumsum(load)])
    out = np.empty((n + 1, n))
    for i in range(n + 1):
        for j in range(n):
            if i <= j:
                tail = (cum[n] - cum[j]) + cum[i]
            else:
                tail = cum[i] - cum[j]
            out[i, j] = lam[j] * (ratio[j] + tail)
    out[n] = out[0]
    return out


def u_from_exhaustiveness(profile: LoadProfile) -> np.ndarray:
    """Left eigenvector rebuilt from exhaustiveness factors (needs rho_hat_j < 1)."""
    cfg = profile.base
    f = exhaustiveness(cfg)
    load = cfg.loads
    tail = np.concatenate([np.cumsum(load[::-1])[::-1][1:], [0.0]])
    return cfg.arrival_rates * ((1 - load) * (1 - f) / f + tail)


def exhaustiveness(config: PollingConfig) -> np.ndarray:
    """Expected fraction of station-j work present at its glue start cleared in the cycle."""
    return config.stick * (1.0 - config.loads)


@dataclass(frozen=True)
class Eigen:
    w_hat: np.ndarray
    u: np.ndarray  # (N+1, N): u^(1) .. u^(N+1)
    delta: float

    @property
    def u_hat(self) -> np.ndarray:
        return self.u[0]


def left_right_eigenvectors(profile: LoadProfile) -> Eigen:
    cfg = profile.base
    w = cfg.service_means / cfg.b_abs
    u = u_vectors(profile)
    return Eigen(w, u, float(u[0] @ cfg.service_means))


def v_hat(profile: LoadProfile, eig: Eigen | None = None) -> np.ndarray:
    eig = eig or left_right_eigenvectors(profile)
    return profile.base.b_abs * eig.u_hat / eig.delta


def xi_prime_at_1(profile: LoadProfile, h: float = 1e-5) -> tuple[float, float]:
    """``(1/delta, central finite difference of xi at rho = 1)``."""
    analytic = 1.0 / left_right_eigenvectors(profile).delta
    # rho = 1 + h lies outside the stable range but the matrix is still defined
    cfg_hi = profile.base.with_rates([(1 + h) * x for x in profile.rates_hat])
    w = profile.base.service_means / profile.base.b_abs
    hi = spectral_radius(mean_matrix(LoadProfile(cfg_hi, 1.0)), start=w)
    lo = xi(profile, 1 - h)
    return analytic, (hi - lo) / (2 * h)


def second_moment_tensor(profile: LoadProfile) -> np.ndarray:
    """``K[i, j, k]``: second derivatives of the offspring PGFs at z = 1, unit load."""
    cfg = profile.base
    n = cfg.n
    m = mean_matrix(profile, 1.0)
    mean_b, e, stick = cfg.service_means, cfg.miss, cfg.stick
    coef = cfg.service_second_moments / (mean_b**2 * stick)
    k = np.zeros((n, n, n))
    acc = np.zeros((n, n))  # sum_{c > i} lambda_c K^(c)
    for i in range(n - 1, -1, -1):
        a = m[i].copy()
        a[i] -= e[i]
        k[i] = coef[i] * np.outer(a, a) + stick[i] * mean_b[i] * acc
        acc += cfg.arrival_rates[i] * k[i]
    return k


def variance_constant(profile: LoadProfile, eig: Eigen | None = None) -> float:
    cfg = profile.base
    eig = eig or left_right_eigenvectors(profile)
    return cfg.b2 / (2 * eig.delta * cfg.b_abs * cfg.b1)


def variance_constant_from_tensor(profile: LoadProfile, eig: Eigen | None = None) -> float:
    eig = eig or left_right_eigenvectors(profile)
    k = second_moment_tensor(profile)
    w = eig.w_hat
    quad = np.einsum("j,ijk,k->i", w, k, w)
    return 0.5 * float(v_hat(profile, eig) @ quad)


def immigration_vector(profile: LoadProfile, rho: float = 1.0) -> np.ndarray:
    """Mean number of immigrants of each type per cycle (glue-1 to glue-1)."""
    cfg = _config(profile, rho)
    m = mean_matrix(profile, rho)
    lam, e, stick = cfg.arrival_rates, cfg.miss, cfg.stick
    g_, s_ = cfg.glue, cfg.switchover_means
    # idle time (glue + switch) of stations before k, and after
    before = np.concatenate([[0.0], np.cumsum(g_ + s_)[:-1]])
    s_from = np.cumsum(s_[::-1])[::-1]
    g_after = np.concatenate([np.cumsum(g_[::-1])[::-1][1:], [0.0]])
    served = lam * (before * stick + g_)
    # descendants of a customer known to be served at its visit: drop the
    # "missed the glue" branch from the row of M and condition on service
    desc = (m - np.diag(e)) / stick[:, None]
    g = served @ desc + lam * (before * e + s_from + g_after)
    if (g <= 0).any() or not np.isfinite(g).all():
        bad = [int(i) + 1 for i in np.flatnonzero(~(g > 0))]
        raise DegenerateImmigration(f"immigration is zero or undefined for station(s) {bad}")
    return g


def alpha(profile: LoadProfile, eig: Eigen | None = None) -> float:
    cfg = profile.base
    eig = eig or left_right_eigenvectors(profile)
    return 2 * cfg.r * eig.delta * cfg.b1 / cfg.b2


def alpha_from_immigration(profile: LoadProfile, eig: Eigen | None = None) -> float:
    eig = eig or left_right_eigenvectors(profile)
    return float(immigration_vector(profile, 1.0) @ eig.w_hat) / variance_constant(profile, eig)


def pi_limit(x: float) -> float:
    """Limit of the stationary normalization ``sum xi^(r-2)`` for 0 < xi < 1."""
    if not 0.0 < x < 1.0:
        raise DomainError(f"xi must lie in (0, 1), got {x}")
    return 1.0 / (x * (1.0 - x))


@dataclass(frozen=True)
class PiDiagnostic:
    rho: float
    xi: float
    scaled: float  # (1 - rho) * pi(xi(rho))
    rel_gap: float  # |scaled - delta| / delta


def pi_convergence(profile: LoadProfile, rhos=(0.9, 0.99, 0.999)) -> list[PiDiagnostic]:
    """Track ``(1 - rho) pi(xi(rho)) -> delta`` over a load grid."""
    delta = left_right_eigenvectors(profile).delta
    out = []
    for rho in rhos:
        x = xi(profile, rho)
        s = (1 - rho) * pi_limit(x)
        out.append(PiDiagnostic(rho, x, s, abs(s - delta) / delta))
    gaps = [d.rel_gap for d in out]
    if any(b > a for a, b in zip(gaps, gaps[1:])):
        warnings.warn("(1 - rho) pi(xi(rho)) is not approaching delta monotonically on this grid")
    return out


@dataclass(frozen=True)
class BranchingSummary:
    """All constants needed by the heavy-traffic limits, at unit load.

    ``rho``, ``xi`` and ``g`` refer to the load the summary was requested at
    (``rho = 1`` gives the hatted values).
    """

    n: int
    rho: float
    M: np.ndarray
    xi: float
    w_hat: np.ndarray
    u: np.ndarray
    delta: float
    A: float
    alpha: float
    g: np.ndarray
    f_exhaustive: np.ndarray
    rates_hat: np.ndarray
    loads_hat: np.ndarray
    service_means: np.ndarray
    miss: np.ndarray
    stick: np.ndarray
    b1: float
    b2: float
    b_abs: float
    r: float

    @property
    def u_hat(self) -> np.ndarray:
        return self.u[0]

    @property
    def scale(self) -> float:
        """``b2 / (2 b1 delta)``: common factor of every limit vector."""
        return self.b2 / (2 * self.b1 * self.delta)

    @property
    def workload_scale(self) -> float:
        return self.b2 / (2 * self.b1)


def summarize(profile: LoadProfile, rho: float = 1.0) -> BranchingSummary:
    cfg = profile.base
    eig = left_right_eigenvectors(profile)
    m = mean_matrix(profile, rho)
    x = xi(profile, rho)
    return BranchingSummary(
        n=cfg.n,
        rho=float(rho),
        M=m,
        xi=x,
        w_hat=eig.w_hat,
        u=eig.u,
        delta=eig.delta,
        A=variance_constant(profile, eig),
        alpha=alpha(profile, eig),
        g=immigration_vector(profile, rho),
        f_exhaustive=exhaustiveness(cfg),
        rates_hat=cfg.arrival_rates.copy(),
        loads_hat=cfg.loads.copy(),
        service_means=cfg.service_means.copy(),
        miss=cfg.miss.copy(),
        stick=cfg.stick.copy(),
        b1=cfg.b1,
        b2=cfg.b2,
        b_abs=cfg.b_abs,
        r=cfg.r,
    )
