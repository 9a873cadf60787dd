"""Heavy-traffic limit laws of the scaled queue-length vectors.

Every limit has the form ``scale * (c + U d) * Gamma(shape, 1)``, possibly
mixed over a discrete component index.  Limits are stored as coefficients;
sampling is derived from them.

Coordinate labels: ``q{j}`` is the number queued (glued) at station j,
``o{j}`` the number in its orbit, both 1-based.  At glue and switch-over
starts nobody is queued, so those limits only carry orbit coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .branching import BranchingSummary

EPOCHS = ("glue_start", "visit_start", "switch_start")


@dataclass(frozen=True)
class GammaMixtureLimit:
    """Law of ``scale * (base[C] + U * uniform[C]) * Gamma(shape, 1)``.

    ``C`` is drawn with ``probabilities``, ``U ~ Uniform(0, 1)``, all three
    independent.  ``base`` and ``uniform`` have shape (components, coords).
    """

    labels: tuple[str, ...]
    probabilities: np.ndarray
    base: np.ndarray
    uniform: np.ndarray
    shape: float
    scale: float

    def __post_init__(self):
        p = np.atleast_1d(np.asarray(self.probabilities, dtype=float))
        base = np.atleast_2d(np.asarray(self.base, dtype=float))
        uni = np.atleast_2d(np.asarray(self.uniform, dtype=float))
        if base.shape != uni.shape or base.shape != (p.size, len(self.labels)):
            raise ValueError("inconsistent component/coordinate dimensions")
        if not np.isclose(p.sum(), 1.0, rtol=0, atol=1e-12) or (p < 0).any():
            raise ValueError(f"component probabilities must sum to 1, got {p.sum()}")
        object.__setattr__(self, "probabilities", p)
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "uniform", uni)
        object.__setattr__(self, "labels", tuple(self.labels))

    @property
    def components(self) -> int:
        return self.probabilities.size

    def index(self, label: str) -> int:
        return self.labels.index(label)

    def mean(self) -> np.ndarray:
        inner = self.probabilities @ (self.base + 0.5 * self.uniform)
        return self.scale * self.shape * inner

    def second_moment(self) -> np.ndarray:
        b, d = self.base, self.uniform
        inner = self.probabilities @ (b * b + b * d + d * d / 3.0)
        return self.scale**2 * self.shape * (self.shape + 1.0) * inner

    def variance(self) -> np.ndarray:
        return self.second_moment() - self.mean() ** 2

    def project(self, weights, label: str = "projection") -> "GammaMixtureLimit":
        """Law of a linear functional ``sum_k weights[k] * X_k``."""
        w = np.asarray(weights, dtype=float)
        return GammaMixtureLimit(
            (label,),
            self.probabilities,
            (self.base @ w)[:, None],
            (self.uniform @ w)[:, None],
            self.shape,
            self.scale,
        )

    def sample(self, rng: np.random.Generator | int, n: int) -> np.ndarray:
        return sample(self, rng, n)


@dataclass(frozen=True)
class EmbeddedLimit:
    """Scaled queue lengths at the start of a glue, visit or switch-over period.

    The law is ``coefficient * Gamma(shape, 1)``; ``coefficient`` already
    includes the common factor ``b2 / (2 b1 delta)``.
    """

    epoch: str
    station: int
    labels: tuple[str, ...]
    coefficient: np.ndarray
    shape: float

    def __getitem__(self, label: str) -> float:
        return float(self.coefficient[self.labels.index(label)])

    def mean(self) -> np.ndarray:
        return self.coefficient * self.shape

    def variance(self) -> np.ndarray:
        return self.coefficient**2 * self.shape

    def as_mixture(self) -> GammaMixtureLimit:
        c = np.asarray(self.coefficient, dtype=float)
        return GammaMixtureLimit(self.labels, np.ones(1), c[None, :], np.zeros((1, c.size)), self.shape, 1.0)

    def workload_coefficient(self, service_means: np.ndarray) -> float:
        return float(self.coefficient @ self.work_weights(service_means))

    def work_weights(self, service_means: np.ndarray) -> np.ndarray:
        return np.array([service_means[int(lab[1:]) - 1] for lab in self.labels])


def orbit_labels(n: int) -> tuple[str, ...]:
    return tuple(f"o{j + 1}" for j in range(n))


def visit_labels(n: int, i: int) -> tuple[str, ...]:
    """Visited station's queue, its orbit, then the other orbits in order."""
    return (f"q{i + 1}", f"o{i + 1}") + tuple(f"o{j + 1}" for j in range(n) if j != i)


def joint_labels(n: int) -> tuple[str, ...]:
    return tuple(f"q{j + 1}" for j in range(n)) + orbit_labels(n)


def glue_start_limit(s: BranchingSummary, i: int = 0) -> EmbeddedLimit:
    return EmbeddedLimit("glue_start", i, orbit_labels(s.n), s.scale * s.u[i], s.alpha)


def visit_start_limit(s: BranchingSummary, i: int = 0) -> EmbeddedLimit:
    u = s.u[i]
    others = [u[j] for j in range(s.n) if j != i]
    coef = np.array([s.stick[i] * u[i], s.miss[i] * u[i], *others])
    return EmbeddedLimit("visit_start", i, visit_labels(s.n, i), s.scale * coef, s.alpha)


def switch_start_limit(s: BranchingSummary, i: int = 0) -> EmbeddedLimit:
    u = s.u[i]
    served = s.stick[i] * u[i]
    coef = u + served * s.rates_hat * s.service_means[i]
    coef[i] -= served
    return EmbeddedLimit("switch_start", i, orbit_labels(s.n), s.scale * coef, s.alpha)


def embedded_limit(s: BranchingSummary, epoch: str, i: int) -> EmbeddedLimit:
    return {"glue_start": glue_start_limit, "visit_start": visit_start_limit, "switch_start": switch_start_limit}[
        epoch
    ](s, i)


def kappa_gap(s: BranchingSummary) -> np.ndarray:
    """``(1 - e^{-nu_i G_i}) u_i^(i) - lambda_hat_i``; zero up to rounding."""
    diag = np.array([s.u[i, i] for i in range(s.n)])
    return s.stick * diag - s.rates_hat


def _visit_vectors(s: BranchingSummary, i: int) -> tuple[np.ndarray, np.ndarray]:
    """Base and uniform vectors over ``joint_labels`` for a point inside visit i."""
    n = s.n
    u = s.u[i]
    if abs(s.stick[i] * u[i] - s.rates_hat[i]) > 1e-12 * max(1.0, s.rates_hat[i]):
        raise AssertionError(f"queue coefficient of station {i + 1} does not match lambda_hat")
    base = np.zeros(2 * n)
    base[i] = s.stick[i] * u[i]
    base[n:] = u
    base[n + i] = s.miss[i] * u[i]
    uni = np.zeros(2 * n)
    uni[i] = -s.rates_hat[i]
    uni[n:] = s.rates_hat * s.loads_hat[i]
    return base, uni


def visit_arbitrary_limit(s: BranchingSummary, i: int = 0) -> GammaMixtureLimit:
    """Scaled joint queue lengths at a uniformly chosen moment of visit ``i``."""
    base, uni = _visit_vectors(s, i)
    return GammaMixtureLimit(joint_labels(s.n), np.ones(1), base[None], uni[None], s.alpha + 1.0, s.scale)


def arbitrary_time_limit(s: BranchingSummary) -> GammaMixtureLimit:
    """Scaled joint queue lengths at an arbitrary time (visit i w.p. rho_hat_i)."""
    vecs = [_visit_vectors(s, i) for i in range(s.n)]
    base = np.array([b for b, _ in vecs])
    uni = np.array([d for _, d in vecs])
    p = s.loads_hat / s.loads_hat.sum()
    return GammaMixtureLimit(joint_labels(s.n), p, base, uni, s.alpha + 1.0, s.scale)


def workload_limit(s: BranchingSummary, at: str = "arbitrary") -> GammaMixtureLimit:
    """Scaled total workload: shape alpha at cycle starts, alpha + 1 at arbitrary times."""
    if at not in ("cycle_start", "arbitrary"):
        raise ValueError(f"unknown observation point {at!r}")
    shape = s.alpha if at == "cycle_start" else s.alpha + 1.0
    return GammaMixtureLimit(("workload",), np.ones(1), np.ones((1, 1)), np.zeros((1, 1)), shape, s.workload_scale)


def joint_work_weights(s: BranchingSummary) -> np.ndarray:
    return np.concatenate([s.service_means, s.service_means])


def sample(limit: GammaMixtureLimit | EmbeddedLimit, rng: np.random.Generator | int, n: int) -> np.ndarray:
    """``n`` i.i.d. draws, shape (n, coords); deterministic for a given seed."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if isinstance(limit, EmbeddedLimit):
        limit = limit.as_mixture()
    rng = np.random.default_rng(rng)
    comp = rng.choice(limit.components, size=n, p=limit.probabilities)
    u = rng.random(n)
    g = rng.standard_gamma(limit.shape, n)
    vec = limit.base[comp] + u[:, None] * limit.uniform[comp]
    return limit.scale * vec * g[:, None]
