"""Parameterization of the cyclic polling system with retrials and glue periods.

Stations are visited in order 1..N.  Each visit to station i is preceded by a
deterministic glue period ``G_i`` and followed by a switch-over ``S_i`` to the
next station.  Customers of type i that show up (arrive or retry) during the
glue period of station i join its queue; at any other moment they go to the
orbit of station i and retry after Exp(nu_i) intervals.

Loads are scaled with fixed rate ratios: ``lambda_i = rho * lambda_hat_i``
where ``sum(lambda_hat_i * E[B_i]) == 1``.  Python indices are 0-based
throughout; labels printed for humans are 1-based.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import cached_property
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import yaml

FAMILIES = ("exponential", "deterministic", "gamma", "two-point")

# Aliases accepted in config files.
_FAMILY_ALIASES = {
    "exp": "exponential",
    "exponential": "exponential",
    "det": "deterministic",
    "deterministic": "deterministic",
    "constant": "deterministic",
    "gamma": "gamma",
    "gamma-shaped": "gamma",
    "two-point": "two-point",
    "twopoint": "two-point",
    "two_point": "two-point",
}

# Relative slack when checking that moments match a family exactly.
_MOMENT_RTOL = 1e-9


class ModelError(ValueError):
    """Base class for parameterization errors."""


class ZeroLoad(ModelError):
    pass


class UnstableLoad(ModelError):
    pass


@dataclass(frozen=True)
class Violation:
    code: str
    message: str
    station: int | None = None
    line: int | None = None

    def __str__(self) -> str:
        where = []
        if self.line is not None:
            where.append(f"line {self.line}")
        if self.station is not None:
            where.append(f"station {self.station + 1}")
        prefix = f"[{', '.join(where)}] " if where else ""
        return f"{prefix}{self.code}: {self.message}"


class InvalidConfig(ModelError):
    """Raised by :func:`validate`; carries every violated invariant."""

    def __init__(self, violations: Sequence[Violation]):
        self.violations = list(violations)
        super().__init__("\n".join(str(v) for v in self.violations))

    @property
    def codes(self) -> list[str]:
        return [v.code for v in self.violations]


@dataclass(frozen=True)
class ServiceDistribution:
    """Nonnegative random duration described by its first two moments.

    The family fixes how the moments are turned into a sampler:

    * exponential: rate ``1/mean`` (needs ``second_moment == 2 mean^2``)
    * deterministic: constant ``mean`` (needs ``second_moment == mean^2``)
    * gamma: shape ``1/scv``, scale ``mean*scv`` (needs ``scv > 0``)
    * two-point: ``x = second_moment/mean`` with probability ``mean/x``,
      else 0
    """

    family: str
    mean: float
    second_moment: float

    @classmethod
    def from_scv(cls, family: str, mean: float, scv: float | None = None) -> "ServiceDistribution":
        family = _FAMILY_ALIASES.get(str(family).lower(), str(family))
        if scv is None:
            scv = {"exponential": 1.0, "deterministic": 0.0}.get(family, 1.0)
        return cls(family, float(mean), float(mean) ** 2 * (1.0 + float(scv)))

    @classmethod
    def exponential(cls, mean: float) -> "ServiceDistribution":
        return cls("exponential", float(mean), 2.0 * float(mean) ** 2)

    @classmethod
    def deterministic(cls, value: float) -> "ServiceDistribution":
        return cls("deterministic", float(value), float(value) ** 2)

    @property
    def scv(self) -> float:
        return self.second_moment / self.mean**2 - 1.0

    @property
    def variance(self) -> float:
        return self.second_moment - self.mean**2

    def sampler_params(self) -> tuple[int, float, float]:
        """``(family code, a, b)`` as consumed by the simulator kernels."""
        m = self.mean
        if self.family == "exponential":
            return 0, m, 0.0
        if self.family == "deterministic":
            return 1, m, 0.0
        if self.family == "gamma":
            scv = self.scv
            return 2, 1.0 / scv, m * scv
        if self.family == "two-point":
            x = self.second_moment / m
            return 3, x, m / x
        raise ModelError(f"unknown family {self.family!r}")

    def sample(self, rng: np.random.Generator, size: int | None = None):
        code, a, b = self.sampler_params()
        if code == 0:
            return rng.exponential(a, size)
        if code == 1:
            return np.full(size, a) if size is not None else a
        if code == 2:
            return rng.gamma(a, b, size)
        hit = rng.random(size) < b
        return np.where(hit, a, 0.0) if size is not None else (a if hit else 0.0)

    def problems(self, what: str) -> list[str]:
        out = []
        if self.family not in FAMILIES:
            out.append(f"{what}: unknown family {self.family!r}")
            return out
        if not (math.isfinite(self.mean) and self.mean > 0):
            out.append(f"{what}: mean must be > 0, got {self.mean}")
            return out
        m2 = self.mean**2
        if not self.second_moment >= m2 * (1 - _MOMENT_RTOL):
            out.append(f"{what}: second moment {self.second_moment} < mean^2 {m2}")
            return out
        if self.family == "exponential" and not math.isclose(self.second_moment, 2 * m2, rel_tol=_MOMENT_RTOL):
            out.append(f"{what}: exponential requires second moment 2*mean^2 (scv 1), got scv {self.scv:g}")
        elif self.family == "deterministic" and not math.isclose(self.second_moment, m2, rel_tol=_MOMENT_RTOL):
            out.append(f"{what}: deterministic requires scv 0, got scv {self.scv:g}")
        elif self.family == "gamma" and self.second_moment <= m2 * (1 + _MOMENT_RTOL):
            out.append(f"{what}: gamma requires scv > 0")
        return out


@dataclass(frozen=True)
class StationParams:
    arrival_rate: float
    service: ServiceDistribution
    switchover: ServiceDistribution
    glue: float
    retrial_rate: float

    @property
    def stick_probability(self) -> float:
        """Chance that an orbiting customer retries within one glue period."""
        return -math.expm1(-self.retrial_rate * self.glue)

    @property
    def miss_probability(self) -> float:
        return math.exp(-self.retrial_rate * self.glue)


@dataclass(frozen=True)
class PollingConfig:
    stations: tuple[StationParams, ...]

    def __post_init__(self):
        object.__setattr__(self, "stations", tuple(self.stations))

    @property
    def n(self) -> int:
        return len(self.stations)

    # Arrays are rebuilt lazily; the dataclass is frozen so they never go stale.
    @cached_property
    def arrival_rates(self) -> np.ndarray:
        return np.array([s.arrival_rate for s in self.stations], dtype=float)

    @cached_property
    def service_means(self) -> np.ndarray:
        return np.array([s.service.mean for s in self.stations], dtype=float)

    @cached_property
    def service_second_moments(self) -> np.ndarray:
        return np.array([s.service.second_moment for s in self.stations], dtype=float)

    @cached_property
    def switchover_means(self) -> np.ndarray:
        return np.array([s.switchover.mean for s in self.stations], dtype=float)

    @cached_property
    def glue(self) -> np.ndarray:
        return np.array([s.glue for s in self.stations], dtype=float)

    @cached_property
    def retrial_rates(self) -> np.ndarray:
        return np.array([s.retrial_rate for s in self.stations], dtype=float)

    @cached_property
    def miss(self) -> np.ndarray:
        """``exp(-nu_i G_i)`` per station."""
        return np.exp(-self.retrial_rates * self.glue)

    @cached_property
    def stick(self) -> np.ndarray:
        """``1 - exp(-nu_i G_i)`` per station, computed without cancellation."""
        return -np.expm1(-self.retrial_rates * self.glue)

    @cached_property
    def loads(self) -> np.ndarray:
        return self.arrival_rates * self.service_means

    @property
    def rho(self) -> float:
        return float(self.loads.sum())

    @property
    def b1(self) -> float:
        return float(self.arrival_rates @ self.service_means / self.arrival_rates.sum())

    @property
    def b2(self) -> float:
        return float(self.arrival_rates @ self.service_second_moments / self.arrival_rates.sum())

    @property
    def b_abs(self) -> float:
        return float(self.service_means.sum())

    @property
    def r(self) -> float:
        """Mean total non-serving time per cycle: switch-overs plus glue."""
        return float((self.switchover_means + self.glue).sum())

    @property
    def critical(self) -> bool:
        return math.isclose(self.rho, 1.0, rel_tol=1e-12, abs_tol=0.0)

    def with_rates(self, rates: Sequence[float]) -> "PollingConfig":
        if len(rates) != self.n:
            raise ModelError(f"expected {self.n} rates, got {len(rates)}")
        return PollingConfig(tuple(replace(s, arrival_rate=float(x)) for s, x in zip(self.stations, rates)))


def validate(config: PollingConfig) -> PollingConfig:
    """Check every invariant of ``config`` and return it unchanged.

    Raises :class:`InvalidConfig` listing all violations at once.  ``rho == 1``
    is accepted (see :attr:`PollingConfig.critical`); ``rho > 1`` is not.
    """
    out: list[Violation] = []
    if config.n == 0:
        out.append(Violation("EmptySystem", "at least one station is required"))
    for i, s in enumerate(config.stations):
        if not (math.isfinite(s.glue) and s.glue > 0):
            out.append(Violation("NonPositiveGlue", f"glue duration must be > 0, got {s.glue}", i))
        if not (math.isfinite(s.retrial_rate) and s.retrial_rate > 0):
            out.append(Violation("NonPositiveRetrialRate", f"retrial rate must be > 0, got {s.retrial_rate}", i))
        if not (math.isfinite(s.arrival_rate) and s.arrival_rate >= 0):
            out.append(Violation("NegativeRate", f"arrival rate must be >= 0, got {s.arrival_rate}", i))
        for msg in s.service.problems("service") + s.switchover.problems("switchover"):
            out.append(Violation("InvalidMoments", msg, i))
    if not out and config.rho > 1.0 and not config.critical:
        out.append(Violation("Overload", f"total load {config.rho:.6g} exceeds 1"))
    if out:
        raise InvalidConfig(out)
    return config


def require_stable(rho: float) -> float:
    if not 0.0 < rho < 1.0:
        raise UnstableLoad(f"operation needs 0 < rho < 1, got {rho}")
    return rho


@dataclass(frozen=True)
class LoadProfile:
    """Rates normalized to unit load plus a target load.

    ``base`` carries ``lambda_hat`` as its arrival rates, so every "hatted"
    quantity is simply the corresponding quantity of ``base``.
    """

    base: PollingConfig
    target_load: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.target_load <= 1.0:
            raise ModelError(f"target load must lie in (0, 1], got {self.target_load}")

    @property
    def n(self) -> int:
        return self.base.n

    @property
    def rates_hat(self) -> np.ndarray:
        return self.base.arrival_rates

    @property
    def loads_hat(self) -> np.ndarray:
        return self.base.loads

    def materialize(self, rho: float | None = None) -> PollingConfig:
        rho = self.target_load if rho is None else float(rho)
        return self.base.with_rates([rho * x for x in self.base.arrival_rates])

    def at(self, rho: float) -> "LoadProfile":
        return replace(self, target_load=float(rho))


def normalize(config: PollingConfig) -> LoadProfile:
    rho = config.rho
    if rho <= 0:
        raise ZeroLoad("all arrival rates are zero; load cannot be normalized")
    base = config.with_rates([x / rho for x in config.arrival_rates])
    return LoadProfile(base, min(rho, 1.0) if config.critical else rho)


# -- config files -----------------------------------------------------------


def _dist_from_mapping(d: Any, what: str) -> ServiceDistribution:
    if isinstance(d, (int, float)):
        raise ModelError(f"{what}: expected a mapping with family/mean/scv")
    family = d.get("family", "exponential")
    return ServiceDistribution.from_scv(family, float(d["mean"]), d.get("scv"))


def _node_lines(text: str) -> list[int | None]:
    """Source line (1-based) of every entry of the top-level ``stations`` list."""
    try:
        root = yaml.compose(text)
    except yaml.YAMLError:
        return []
    if not isinstance(root, yaml.MappingNode):
        return []
    for key, val in root.value:
        if key.value == "stations" and isinstance(val, yaml.SequenceNode):
            return [item.start_mark.line + 1 for item in val.value]
    return []


def parse_config(text: str) -> LoadProfile:
    """Parse a YAML (or JSON) document into a validated :class:`LoadProfile`.

    Schema::

        stations:
          - lambda_hat: 0.1
            service: {family: exponential, mean: 1.0, scv: 1.0}
            switchover: {family: exponential, mean: 2.0}
            glue: 3.0
            retrial_rate: 5.0

    ``lambda_hat`` values are relative rates; they are rescaled so that the
    profile has unit load.
    """
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise InvalidConfig([Violation("ParseError", str(exc).splitlines()[0], line=line)]) from None
    if not isinstance(doc, dict) or not isinstance(doc.get("stations"), list):
        raise InvalidConfig([Violation("ParseError", "top-level 'stations' list is required")])
    lines = _node_lines(text)
    stations, problems = [], []
    for i, entry in enumerate(doc["stations"]):
        line = lines[i] if i < len(lines) else None
        try:
            stations.append(
                StationParams(
                    arrival_rate=float(entry["lambda_hat"]),
                    service=_dist_from_mapping(entry["service"], "service"),
                    switchover=_dist_from_mapping(entry["switchover"], "switchover"),
                    glue=float(entry["glue"]),
                    retrial_rate=float(entry["retrial_rate"]),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            problems.append(Violation("ParseError", f"bad station entry: {exc}", i, line))
    if problems:
        raise InvalidConfig(problems)
    config = PollingConfig(tuple(stations))
    rho = config.rho
    if math.isfinite(rho) and rho > 0:
        # relative rates: only their ratios matter, so check the unit-load version
        config = config.with_rates([x / rho for x in config.arrival_rates])
    try:
        validate(config)
    except InvalidConfig as exc:
        raise InvalidConfig(
            [replace(v, line=lines[v.station]) if v.station is not None and v.station < len(lines) else v
             for v in exc.violations]
        ) from None
    if config.rho <= 0:
        raise InvalidConfig([Violation("ZeroLoad", "all lambda_hat are zero")])
    return normalize(config).at(1.0)


def load_config(path: str | Path) -> LoadProfile:
    return parse_config(Path(path).read_text())


def five_station_profile() -> LoadProfile:
    """The five-station benchmark: exponential services of mean 1."""
    rates = (0.1, 0.2, 0.3, 0.1, 0.3)
    switch = (2.0, 3.0, 1.0, 5.0, 2.0)
    glue = (3.0, 1.0, 2.0, 1.0, 2.0)
    nu = (5.0, 1.0, 3.0, 2.0, 1.0)
    stations = tuple(
        StationParams(lam, ServiceDistribution.exponential(1.0), ServiceDistribution.exponential(s), g, v)
        for lam, s, g, v in zip(rates, switch, glue, nu)
    )
    return LoadProfile(validate(PollingConfig(stations)), 1.0)
