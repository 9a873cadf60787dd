"""Random valid systems: a hypothesis strategy and a fixed seeded corpus."""

import numpy as np
from hypothesis import strategies as st

from gluepoll.model import LoadProfile, PollingConfig, ServiceDistribution, StationParams, validate

FAMILIES = ("exponential", "deterministic", "gamma", "two-point")


def _service(family: str, mean: float, scv: float) -> ServiceDistribution:
    if family == "exponential":
        return ServiceDistribution.exponential(mean)
    if family == "deterministic":
        return ServiceDistribution.deterministic(mean)
    return ServiceDistribution.from_scv(family, mean, scv)


def build_profile(rows) -> LoadProfile:
    """``rows`` of (rate, family, mean, scv, switch_mean, glue, nu) -> unit-load profile."""
    stations = [
        StationParams(rate, _service(fam, mean, scv), ServiceDistribution.exponential(sw), glue, nu)
        for rate, fam, mean, scv, sw, glue, nu in rows
    ]
    raw = PollingConfig(tuple(stations))
    base = validate(raw.with_rates(raw.arrival_rates / raw.rho))
    return LoadProfile(base, 1.0)


def random_rows(rng: np.random.Generator, n: int):
    return [
        (
            float(rng.uniform(0.05, 1.0)),
            FAMILIES[int(rng.integers(len(FAMILIES)))],
            float(rng.uniform(0.2, 3.0)),
            float(rng.uniform(0.1, 3.0)),
            float(rng.uniform(0.1, 5.0)),
            float(rng.uniform(0.1, 5.0)),
            float(rng.uniform(0.1, 10.0)),
        )
        for _ in range(n)
    ]


def corpus(count: int = 100, seed: int = 20240917, max_n: int = 8) -> list[LoadProfile]:
    """A reproducible list of random valid systems with 2..max_n stations."""
    rng = np.random.default_rng(seed)
    return [build_profile(random_rows(rng, int(rng.integers(2, max_n + 1)))) for _ in range(count)]


_row = st.tuples(
    st.floats(0.05, 1.0),
    st.sampled_from(FAMILIES),
    st.floats(0.2, 3.0),
    st.floats(0.1, 3.0),
    st.floats(0.1, 5.0),
    st.floats(0.1, 5.0),
    st.floats(0.1, 10.0),
)


@st.composite
def profiles(draw, min_n: int = 2, max_n: int = 8) -> LoadProfile:
    n = draw(st.integers(min_n, max_n))
    return build_profile(draw(st.lists(_row, min_size=n, max_size=n)))
