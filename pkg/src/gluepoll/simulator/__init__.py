"""Discrete-event simulation of the polling system.

Two engines produce identical trace layouts:

``glue_coin`` (default)
    compiled period-stepping engine; an orbiting customer joins the glue
    period of its station with probability ``1 - exp(-nu_i G_i)``.
``exact_clocks``
    event calendar with one exponential retrial clock per orbiting customer.

Each replication draws from four independent streams (arrivals, services,
switchovers, retrials) spawned from one root seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..htlimits import orbit_labels, visit_labels
from ..model import LoadProfile, ModelError, PollingConfig, normalize, require_stable
from .clocks import run_clocks
from .estimate import (
    DEFAULT_BATCHES,
    BatchCorrelationWarning,
    EstimateRow,
    RegenerationDiagnostic,
    SimEstimate,
    SimTrace,
    cycle_regeneration_check,
    estimate,
    half_width,
    lag1_autocorrelation,
)

MODES = ("glue_coin", "exact_clocks")
STREAMS = ("arrivals", "services", "switchovers", "retrials")
MIN_POST_WARMUP = 100

__all__ = [
    "MODES",
    "BatchCorrelationWarning",
    "EstimateRow",
    "InsufficientCycles",
    "RegenerationDiagnostic",
    "ScaledSamples",
    "SimEstimate",
    "SimTrace",
    "cycle_regeneration_check",
    "default_warmup",
    "half_width",
    "lag1_autocorrelation",
    "run",
    "scaled_embedded_samples",
    "simulate",
    "streams",
]


class InsufficientCycles(ModelError):
    pass


class GatedDisciplineViolation(AssertionError):
    pass


def streams(seed: int, rep: int = 0) -> dict[str, np.random.Generator]:
    """Named, independent generators for replication ``rep`` of root ``seed``."""
    children = np.random.SeedSequence(seed, spawn_key=(rep,)).spawn(len(STREAMS))
    return {name: np.random.default_rng(ss) for name, ss in zip(STREAMS, children)}


def default_warmup(cycles: int) -> int:
    return cycles // 10


def _as_config(system: PollingConfig | LoadProfile, rho: float) -> PollingConfig:
    if isinstance(system, PollingConfig) and system.rho == 0:
        return system  # empty system: nothing to rescale
    profile = system if isinstance(system, LoadProfile) else normalize(system)
    return profile.materialize(rho)


def _check(rho: float, cycles: int, warmup: int) -> None:
    require_stable(rho)
    if warmup < 0 or cycles < warmup + MIN_POST_WARMUP:
        raise InsufficientCycles(
            f"need at least warmup + {MIN_POST_WARMUP} = {warmup + MIN_POST_WARMUP} cycles, got {cycles}"
        )


def _sampler_arrays(dists):
    params = [d.sampler_params() for d in dists]
    code = np.array([p[0] for p in params], np.int64)
    a = np.array([p[1] for p in params])
    b = np.array([p[2] for p in params])
    return code, a, b


def simulate(config: PollingConfig, cycles: int, seed: int, mode: str = "glue_coin", rep: int = 0) -> SimTrace:
    """One replication; returns the raw per-cycle trace.

    Raises :class:`GatedDisciplineViolation` if any visit serves a number of
    customers different from the queue found at its start.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    trace = SimTrace.allocate(config.n, cycles)
    rngs = streams(seed, rep)
    if config.arrival_rates.sum() == 0:
        # nobody ever arrives: only the server moves, counts stay zero
        trace.cycle_length[:] = config.glue.sum()
        trace.area_sq[:] = 0.0
        for st in config.stations:
            trace.cycle_length[:] += st.switchover.sample(rngs["switchovers"], cycles)
    elif mode == "glue_coin":
        from .coin import run_coin

        srv = _sampler_arrays([st.service for st in config.stations])
        sw = _sampler_arrays([st.switchover for st in config.stations])
        run_coin(
            config.arrival_rates, *srv, *sw, config.glue, config.retrial_rates, config.stick, cycles,
            rngs["arrivals"], rngs["services"], rngs["switchovers"], rngs["retrials"],
            trace.glue, trace.visit_queue, trace.visit, trace.switch, trace.area, trace.area_sq,
            trace.cycle_length, trace.visit_time, trace.served,
        )  # fmt: skip
    else:
        run_clocks(config, cycles, rngs, trace.as_dict())
    bad = np.argwhere(trace.served != trace.visit_queue)
    if bad.size:
        c, i = bad[0]
        raise GatedDisciplineViolation(
            f"cycle {c}, station {i + 1}: served {trace.served[c, i]} but {trace.visit_queue[c, i]} were glued"
        )
    return trace


def run(
    system: PollingConfig | LoadProfile,
    rho: float,
    cycles: int,
    warmup: int | None = None,
    seed: int = 0,
    mode: str = "glue_coin",
    reps: int = 1,
    batches: int = DEFAULT_BATCHES,
) -> SimEstimate:
    """Simulate ``reps`` replications of ``cycles`` cycles each at load ``rho``.

    ``system`` is a configuration (rescaled to load ``rho`` keeping its rate
    ratios) or a load profile.  ``warmup`` defaults to 10% of ``cycles``.
    """
    warmup = default_warmup(cycles) if warmup is None else int(warmup)
    _check(rho, cycles, warmup)
    config = _as_config(system, rho)
    traces = [simulate(config, cycles, seed, mode, rep) for rep in range(reps)]
    return estimate(traces, rho, mode, warmup, batches, service_means=config.service_means)


@dataclass(frozen=True)
class ScaledSamples:
    """``(1 - rho)`` times the embedded vectors, one row per post-warmup cycle."""

    epoch: str
    station: int
    labels: tuple[str, ...]
    values: np.ndarray
    rho: float


def scaled_embedded_samples(
    system: PollingConfig | LoadProfile,
    rho: float,
    epoch: str,
    cycles: int,
    seed: int = 0,
    station: int = 0,
    warmup: int | None = None,
    mode: str = "glue_coin",
    trace: SimTrace | None = None,
) -> ScaledSamples:
    """Scaled vectors at the start of every glue, visit or switch-over period of ``station``.

    Columns follow the labels of the matching limit law.  A precomputed
    ``trace`` may be passed to avoid simulating again.
    """
    warmup = default_warmup(cycles) if warmup is None else int(warmup)
    _check(rho, cycles, warmup)
    if trace is None:
        trace = simulate(_as_config(system, rho), cycles, seed, mode)
    n, i = trace.n, station
    if epoch == "glue_start":
        labels, raw = orbit_labels(n), trace.glue[:, i, :]
    elif epoch == "switch_start":
        labels, raw = orbit_labels(n), trace.switch[:, i, :]
    elif epoch == "visit_start":
        others = [j for j in range(n) if j != i]
        labels = visit_labels(n, i)
        raw = np.column_stack([trace.visit_queue[:, i], trace.visit[:, i, i], trace.visit[:, i, others]])
    else:
        raise ValueError(f"unknown epoch {epoch!r}")
    return ScaledSamples(epoch, i, labels, (1.0 - rho) * raw[warmup:].astype(float), rho)
