import warnings

import numpy as np
import pytest

from gluepoll import htlimits
from gluepoll.branching import immigration_vector, mean_matrix, summarize
from gluepoll.model import (
    LoadProfile,
    PollingConfig,
    ServiceDistribution,
    StationParams,
    UnstableLoad,
    five_station_profile,
)
from gluepoll.simulator import (
    BatchCorrelationWarning,
    InsufficientCycles,
    cycle_regeneration_check,
    run,
    scaled_embedded_samples,
    simulate,
    streams,
)
from gluepoll.simulator.estimate import epoch_columns

FIVE = five_station_profile()
MODES = ("glue_coin", "exact_clocks")


def exact_glue_start_mean(profile, rho):
    """Stationary mean of the branching process with immigration: g (I - M)^-1."""
    m = mean_matrix(profile, rho)
    return immigration_vector(profile, rho) @ np.linalg.inv(np.eye(profile.n) - m)


def mixed_profile():
    d = ServiceDistribution
    stations = (
        StationParams(0.3, d.deterministic(1.0), d.deterministic(0.5), 1.0, 2.0),
        StationParams(0.2, d.from_scv("gamma", 0.8, 0.5), d.exponential(1.0), 0.5, 1.0),
        StationParams(0.4, d.from_scv("two-point", 1.2, 1.5), d.from_scv("gamma", 1.0, 2.0), 2.0, 0.5),
    )
    cfg = PollingConfig(stations)
    return LoadProfile(cfg.with_rates(cfg.arrival_rates / cfg.rho), 1.0)


@pytest.mark.parametrize("mode,cycles", [("glue_coin", 40_000), ("exact_clocks", 3_000)])
def test_glue_start_means_match_exact_stationary_mean(mode, cycles):
    est = run(FIVE, 0.5, cycles, seed=5, mode=mode)
    exact = exact_glue_start_mean(FIVE, 0.5)
    for j in range(FIVE.n):
        row = est.get("glue_start", 0, f"o{j + 1}")
        assert abs(row.mean - exact[j]) <= 2.5 * row.ci95, (j, row, exact[j])


@pytest.mark.parametrize("mode,cycles", [("glue_coin", 40_000), ("exact_clocks", 2_000)])
def test_general_families_match_exact_mean_and_visit_fraction(mode, cycles):
    prof = mixed_profile()
    rho = 0.6
    est = run(prof, rho, cycles, seed=8, mode=mode)
    exact = exact_glue_start_mean(prof, rho)
    for j in range(prof.n):
        row = est.get("glue_start", 0, f"o{j + 1}")
        assert abs(row.mean - exact[j]) <= 2.5 * row.ci95, (j, row, exact[j])
    frac = est.get("time_average", None, "visit_fraction")
    assert abs(frac.mean - rho) <= 2.5 * frac.ci95


def test_mean_cycle_length_is_idle_time_over_one_minus_rho():
    tr = simulate(FIVE.materialize(0.7), 30_000, seed=4)
    c = tr.cycle_length[3000:]
    se = c.reshape(30, -1).mean(axis=1).std(ddof=1) / np.sqrt(30)
    assert abs(c.mean() - FIVE.base.r / 0.3) <= 3 * se


@pytest.mark.parametrize("mode", MODES)
def test_trace_invariants(mode):
    tr = simulate(FIVE.materialize(0.6), 400, seed=1, mode=mode)
    n = FIVE.n
    np.testing.assert_array_equal(tr.served, tr.visit_queue)
    # total area splits into per-type areas, which split into queue and orbit
    np.testing.assert_allclose(tr.area[:, 2 * n : 3 * n].sum(axis=1), tr.area[:, -1], rtol=1e-12)
    np.testing.assert_allclose(tr.area[:, :n] + tr.area[:, n : 2 * n], tr.area[:, 2 * n : 3 * n], rtol=1e-12, atol=1e-9)
    assert (tr.area_sq >= 0).all() and (tr.glue >= 0).all()
    # between glue start and visit start of station i, only orbit i can move into the queue
    for i in range(n):
        moved = tr.glue[:, i, i] - tr.visit[:, i, i]
        assert (moved <= tr.visit_queue[:, i]).all()
        others = [j for j in range(n) if j != i]
        assert (tr.visit[:, i, others] >= tr.glue[:, i, others]).all()
    assert (tr.visit_time < tr.cycle_length).all()


@pytest.mark.parametrize("mode", MODES)
def test_same_seed_same_trace(mode):
    a = simulate(FIVE.materialize(0.5), 300, seed=17, mode=mode)
    b = simulate(FIVE.materialize(0.5), 300, seed=17, mode=mode)
    c = simulate(FIVE.materialize(0.5), 300, seed=18, mode=mode)
    for name in ("glue", "visit", "switch", "area", "cycle_length"):
        assert getattr(a, name).tobytes() == getattr(b, name).tobytes()
    assert not np.array_equal(a.glue, c.glue)


def test_streams_are_named_and_independent_per_replication():
    s0, s1 = streams(3, 0), streams(3, 1)
    assert set(s0) == {"arrivals", "services", "switchovers", "retrials"}
    draws = {k: g.random() for k, g in s0.items()}
    assert len(set(draws.values())) == 4
    assert s1["arrivals"].random() != streams(3, 0)["arrivals"].random()


@pytest.mark.parametrize("mode", MODES)
def test_empty_system_stays_empty(mode):
    d = ServiceDistribution
    cfg = PollingConfig(tuple(StationParams(0.0, d.exponential(1.0), d.exponential(1.0), 1.0, 1.0) for _ in range(3)))
    est = run(cfg, 0.5, 200, seed=1, mode=mode)
    for row in est.rows:
        if row.coordinate != "visit_fraction":
            assert row.mean == 0.0
    assert est.get("time_average", None, "visit_fraction").mean == 0.0


def test_single_station_system():
    d = ServiceDistribution
    prof = LoadProfile(PollingConfig((StationParams(1.0, d.exponential(1.0), d.exponential(1.0), 1.0, 1.0),)), 1.0)
    est = run(prof, 0.5, 20_000, seed=2)
    exact = exact_glue_start_mean(prof, 0.5)
    row = est.get("glue_start", 0, "o1")
    assert abs(row.mean - exact[0]) <= 2.5 * row.ci95


def test_preconditions():
    with pytest.raises(UnstableLoad):
        run(FIVE, 1.0, 1000)
    with pytest.raises(InsufficientCycles):
        run(FIVE, 0.5, 150, warmup=60)
    with pytest.raises(ValueError):
        simulate(FIVE.materialize(0.5), 10, seed=0, mode="bogus")


def test_ci_only_with_enough_batches():
    est = run(FIVE, 0.5, 300, seed=1, batches=10)
    assert est.batches == 10
    assert all(r.ci95 is None for r in est.rows)
    est = run(FIVE, 0.5, 300, seed=1, batches=20)
    assert all(r.ci95 is not None for r in est.rows)


def test_replications_pool_batches_and_keep_warmup_count():
    est = run(FIVE, 0.5, 1000, warmup=100, seed=1, reps=3)
    assert est.batches == 90
    assert est.cycles_observed == 3 * 900
    assert est.warmup_cycles_discarded == 300


def test_epoch_columns_cover_every_epoch_and_station():
    tr = simulate(FIVE.materialize(0.5), 120, seed=1)
    keys, cols = epoch_columns(tr)
    assert cols.shape == (120, len(keys))
    epochs = {(k[0], k[1]) for k in keys}
    assert len(epochs) == 3 * FIVE.n


def test_scaled_samples_align_with_limit_labels():
    tr = simulate(FIVE.materialize(0.5), 300, seed=1)
    s = summarize(FIVE)
    for epoch in htlimits.EPOCHS:
        for i in (0, 2):
            ss = scaled_embedded_samples(FIVE, 0.5, epoch, 300, station=i, trace=tr)
            assert ss.labels == htlimits.embedded_limit(s, epoch, i).labels
            assert ss.values.shape == (270, FIVE.n + (epoch == "visit_start"))
    ss = scaled_embedded_samples(FIVE, 0.5, "visit_start", 300, station=2, trace=tr)
    np.testing.assert_allclose(ss.values[:, 0], 0.5 * tr.visit_queue[30:, 2])
    with pytest.raises(ValueError):
        scaled_embedded_samples(FIVE, 0.5, "cycle_end", 300, trace=tr)


def test_regeneration_check_on_iid_input_is_near_zero():
    rng = np.random.default_rng(0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BatchCorrelationWarning)
        rs = [cycle_regeneration_check(rng.normal(size=20)).lag1_autocorrelation for _ in range(2000)]
    # the sample lag-1 autocorrelation of n i.i.d. values has mean close to -1/n
    assert np.mean(rs) == pytest.approx(-1 / 20, abs=0.015)
    assert np.median(np.abs(rs)) < 0.2


def test_regeneration_check_flags_short_batches_in_heavy_traffic():
    # 50 batches of 20 cycles, while the glue-start process decorrelates over ~50 cycles
    est = run(FIVE, 0.95, 1_100, warmup=100, seed=3, batches=50)
    with pytest.warns(BatchCorrelationWarning):
        diag = cycle_regeneration_check(est)
    assert not diag.ok and diag.batches == 50


def test_longer_batches_are_less_correlated():
    tr = simulate(FIVE.materialize(0.95), 40_000, seed=3)
    x = tr.glue[4000:, 0, :].sum(axis=1).astype(float)
    rs = []
    for size in (10, 20, 40):
        b = x[: x.size // size * size].reshape(-1, size).mean(axis=1)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", BatchCorrelationWarning)
            rs.append(abs(cycle_regeneration_check(b).lag1_autocorrelation))
    assert rs[0] > rs[1] > rs[2]
