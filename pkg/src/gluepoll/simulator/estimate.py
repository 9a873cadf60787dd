"""Batch-means estimation over simulated cycles.

Post-warmup cycles are cut into equal consecutive batches.  Embedded epochs
give one observation per cycle, so a batch value is a plain average.  Time
averages are ratio estimators: total area over total elapsed time.
Replications contribute their batches to a common pool.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

MIN_BATCHES_FOR_CI = 20
DEFAULT_BATCHES = 30


@dataclass(frozen=True)
class SimTrace:
    """Raw per-cycle records of one replication.

    Shapes: ``glue``, ``visit``, ``switch`` are (cycles, N, N) orbit counts
    seen at the start of each period of station i; ``visit_queue`` and
    ``served`` are (cycles, N); ``area`` and ``area_sq`` are (cycles, 3N+1)
    integrals of the coordinates ``q_1..q_N, o_1..o_N, n_1..n_N, total``
    (and their squares) over each cycle.
    """

    glue: np.ndarray
    visit_queue: np.ndarray
    visit: np.ndarray
    switch: np.ndarray
    area: np.ndarray
    area_sq: np.ndarray
    cycle_length: np.ndarray
    visit_time: np.ndarray
    served: np.ndarray

    @classmethod
    def allocate(cls, n: int, cycles: int) -> "SimTrace":
        return cls(
            glue=np.zeros((cycles, n, n), np.int64),
            visit_queue=np.zeros((cycles, n), np.int64),
            visit=np.zeros((cycles, n, n), np.int64),
            switch=np.zeros((cycles, n, n), np.int64),
            area=np.zeros((cycles, 3 * n + 1)),
            area_sq=np.zeros((cycles, 3 * n + 1)),
            cycle_length=np.zeros(cycles),
            visit_time=np.zeros(cycles),
            served=np.zeros((cycles, n), np.int64),
        )

    @property
    def cycles(self) -> int:
        return self.cycle_length.size

    @property
    def n(self) -> int:
        return self.visit_queue.shape[1]

    def as_dict(self) -> dict[str, np.ndarray]:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def time_average_labels(n: int) -> list[str]:
    return (
        [f"q{j + 1}" for j in range(n)]
        + [f"o{j + 1}" for j in range(n)]
        + [f"n{j + 1}" for j in range(n)]
        + ["total"]
    )


def epoch_columns(trace: SimTrace) -> tuple[list[tuple[str, int, str]], np.ndarray]:
    """Per-cycle embedded observations as a (cycles, keys) matrix.

    Keys are ``(epoch, station, coordinate)`` with a 0-based station.
    """
    n = trace.n
    orbit = [f"o{j + 1}" for j in range(n)]
    keys, cols = [], []
    for i in range(n):
        keys += [("glue_start", i, lab) for lab in orbit] + [("glue_start", i, "total")]
        cols += [trace.glue[:, i, :], trace.glue[:, i, :].sum(axis=1, keepdims=True)]
    for i in range(n):
        q = trace.visit_queue[:, i : i + 1]
        keys += [("visit_start", i, f"q{i + 1}")] + [("visit_start", i, lab) for lab in orbit]
        keys += [("visit_start", i, "total")]
        cols += [q, trace.visit[:, i, :], q + trace.visit[:, i, :].sum(axis=1, keepdims=True)]
    for i in range(n):
        keys += [("switch_start", i, lab) for lab in orbit] + [("switch_start", i, "total")]
        cols += [trace.switch[:, i, :], trace.switch[:, i, :].sum(axis=1, keepdims=True)]
    return keys, np.hstack(cols).astype(float)


@dataclass(frozen=True)
class EstimateRow:
    epoch: str
    station: int | None
    coordinate: str
    mean: float
    var: float
    ci95: float | None
    n: int


@dataclass(frozen=True)
class SimEstimate:
    """Point estimates with batch-means confidence intervals."""

    rho: float
    mode: str
    reps: int
    cycles_observed: int
    warmup_cycles_discarded: int
    batches: int
    rows: tuple[EstimateRow, ...]
    batch_values: dict = field(repr=False, compare=False, default_factory=dict)

    def get(self, epoch: str, station: int | None, coordinate: str) -> EstimateRow:
        for row in self.rows:
            if row.epoch == epoch and row.station == station and row.coordinate == coordinate:
                return row
        raise KeyError((epoch, station, coordinate))


def half_width(values: np.ndarray) -> float | None:
    """95% t-interval half-width of the mean of ``values``; None below 20 batches."""
    b = values.size
    if b < MIN_BATCHES_FOR_CI:
        return None
    sd = values.std(ddof=1)
    return float(stats.t.ppf(0.975, b - 1) * sd / math.sqrt(b))


def _batch_slices(cycles: int, warmup: int, batches: int) -> tuple[int, int]:
    post = cycles - warmup
    b = min(batches, post)
    return b, post // b


def _batched(values: np.ndarray, warmup: int, b: int, size: int) -> np.ndarray:
    """Sum of ``values`` over consecutive batches, shape (b, ...)."""
    kept = values[warmup : warmup + b * size]
    return kept.reshape(b, size, *values.shape[1:]).sum(axis=1)


def estimate(
    traces: list[SimTrace],
    rho: float,
    mode: str,
    warmup: int,
    batches: int = DEFAULT_BATCHES,
    service_means: np.ndarray | None = None,
) -> SimEstimate:
    """Pool the batches of every replication into one :class:`SimEstimate`."""
    n = traces[0].n
    cycles = traces[0].cycles
    b, size = _batch_slices(cycles, warmup, batches)
    keys, ep_sum, ep_sq = None, [], []
    area, area_sq, length, vtime = [], [], [], []
    for tr in traces:
        keys, cols = epoch_columns(tr)
        ep_sum.append(_batched(cols, warmup, b, size))
        ep_sq.append(_batched(cols**2, warmup, b, size))
        area.append(_batched(tr.area, warmup, b, size))
        area_sq.append(_batched(tr.area_sq, warmup, b, size))
        length.append(_batched(tr.cycle_length, warmup, b, size))
        vtime.append(_batched(tr.visit_time, warmup, b, size))
    ep_sum, ep_sq = np.vstack(ep_sum), np.vstack(ep_sq)
    area, area_sq = np.vstack(area), np.vstack(area_sq)
    length, vtime = np.concatenate(length), np.concatenate(vtime)
    n_obs = ep_sum.shape[0] * size

    rows, batch_values = [], {}
    ep_means = ep_sum / size
    mean = ep_sum.sum(axis=0) / n_obs
    var = ep_sq.sum(axis=0) / n_obs - mean**2
    var *= n_obs / max(n_obs - 1, 1)
    for k, key in enumerate(keys):
        batch_values[key] = ep_means[:, k]
        rows.append(EstimateRow(*key, float(mean[k]), float(var[k]), half_width(ep_means[:, k]), n_obs))

    labels = time_average_labels(n)
    total_t = length.sum()
    ta_mean = area.sum(axis=0) / total_t
    ta_var = area_sq.sum(axis=0) / total_t - ta_mean**2
    ta_batches = area / length[:, None]
    for k, lab in enumerate(labels):
        batch_values[("time_average", None, lab)] = ta_batches[:, k]
        rows.append(
            EstimateRow("time_average", None, lab, float(ta_mean[k]), float(ta_var[k]), half_width(ta_batches[:, k]), n_obs)
        )
    if service_means is not None:
        # work in system, counting each waiting or orbiting customer by its mean service time
        w = np.asarray(service_means, dtype=float)
        sl = slice(2 * n, 3 * n)
        work_batches = ta_batches[:, sl] @ w
        work_mean = float(ta_mean[sl] @ w)
        batch_values[("time_average", None, "workload")] = work_batches
        rows.append(
            EstimateRow("time_average", None, "workload", work_mean, float("nan"), half_width(work_batches), n_obs)
        )
    frac = vtime / length
    f = float(vtime.sum() / total_t)
    batch_values[("time_average", None, "visit_fraction")] = frac
    rows.append(EstimateRow("time_average", None, "visit_fraction", f, f * (1 - f), half_width(frac), n_obs))

    return SimEstimate(
        rho=rho,
        mode=mode,
        reps=len(traces),
        cycles_observed=n_obs,
        warmup_cycles_discarded=warmup * len(traces),
        batches=ep_sum.shape[0],
        rows=tuple(rows),
        batch_values=batch_values,
    )


@dataclass(frozen=True)
class RegenerationDiagnostic:
    batches: int
    lag1_autocorrelation: float
    ok: bool


def lag1_autocorrelation(values: np.ndarray) -> float:
    v = np.asarray(values, dtype=float)
    d = v - v.mean()
    denom = d @ d
    if v.size < 3 or denom == 0:
        return 0.0
    return float(d[:-1] @ d[1:] / denom)


def cycle_regeneration_check(
    est: SimEstimate | np.ndarray, key: tuple = ("glue_start", 0, "total"), threshold: float = 0.1
) -> RegenerationDiagnostic:
    """Lag-1 autocorrelation of batch means at glue starts of station 1.

    Accepts a :class:`SimEstimate` or a raw array of batch means.  Warns with
    :class:`BatchCorrelationWarning` when the magnitude exceeds ``threshold``.
    """
    values = est.batch_values[key] if isinstance(est, SimEstimate) else np.asarray(est, dtype=float)
    r = lag1_autocorrelation(values)
    ok = abs(r) <= threshold
    if not ok:
        warnings.warn(
            f"lag-1 autocorrelation of batch means is {r:.3f}; batches are too short to be treated as independent",
            BatchCorrelationWarning,
            stacklevel=2,
        )
    return RegenerationDiagnostic(int(values.size), r, ok)


class BatchCorrelationWarning(UserWarning):
    pass
