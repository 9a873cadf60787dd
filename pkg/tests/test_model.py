import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gluepoll.model import (
    InvalidConfig,
    LoadProfile,
    ModelError,
    PollingConfig,
    ServiceDistribution,
    StationParams,
    UnstableLoad,
    ZeroLoad,
    five_station_profile,
    load_config,
    normalize,
    parse_config,
    require_stable,
    validate,
)


def station(rate=0.1, mean=1.0, glue=1.0, nu=1.0, switch=1.0):
    return StationParams(rate, ServiceDistribution.exponential(mean), ServiceDistribution.exponential(switch), glue, nu)


def test_five_station_constants():
    p = five_station_profile()
    cfg = p.base
    assert cfg.rho == pytest.approx(1.0, abs=1e-15)
    assert cfg.b1 == pytest.approx(1.0)
    assert cfg.b2 == pytest.approx(2.0)
    assert cfg.b_abs == pytest.approx(5.0)
    assert cfg.r == pytest.approx(22.0)
    np.testing.assert_allclose(cfg.stick + cfg.miss, 1.0, rtol=0, atol=1e-15)


def test_stick_probability_is_accurate_for_tiny_exponents():
    s = station(glue=1e-12, nu=1.0)
    assert s.stick_probability == pytest.approx(1e-12, rel=1e-9)


def test_materialize_scales_rates_linearly():
    p = five_station_profile()
    for rho in (0.1, 0.5, 0.95):
        cfg = p.materialize(rho)
        assert cfg.rho == pytest.approx(rho, rel=1e-14)
        np.testing.assert_allclose(cfg.arrival_rates, rho * p.rates_hat)


def test_normalize_recovers_ratios_and_load():
    raw = PollingConfig((station(0.2, 1.0), station(0.3, 2.0)))
    prof = normalize(raw)
    assert prof.target_load == pytest.approx(0.8)
    assert prof.base.rho == pytest.approx(1.0)
    np.testing.assert_allclose(prof.materialize().arrival_rates, raw.arrival_rates)


def test_zero_load_cannot_be_normalized():
    with pytest.raises(ZeroLoad):
        normalize(PollingConfig((station(0.0), station(0.0))))


def test_validate_lists_every_violation():
    bad = PollingConfig(
        (
            StationParams(-0.1, ServiceDistribution.exponential(1.0), ServiceDistribution.exponential(1.0), 0.0, 1.0),
            StationParams(0.1, ServiceDistribution("exponential", 1.0, 3.0), ServiceDistribution.exponential(1.0), 1.0, 0.0),
        )
    )
    with pytest.raises(InvalidConfig) as err:
        validate(bad)
    assert set(err.value.codes) == {"NegativeRate", "NonPositiveGlue", "InvalidMoments", "NonPositiveRetrialRate"}


def test_overload_is_rejected_but_unit_load_is_accepted():
    with pytest.raises(InvalidConfig) as err:
        validate(PollingConfig((station(0.7), station(0.7))))
    assert err.value.codes == ["Overload"]
    assert validate(PollingConfig((station(0.5), station(0.5)))).critical


def test_empty_system_is_invalid():
    with pytest.raises(InvalidConfig) as err:
        validate(PollingConfig(()))
    assert err.value.codes == ["EmptySystem"]


@pytest.mark.parametrize("rho", [0.0, 1.0, 1.5, -0.2])
def test_require_stable_rejects_boundary_loads(rho):
    with pytest.raises(UnstableLoad):
        require_stable(rho)


def test_load_profile_rejects_target_outside_unit_interval():
    with pytest.raises(ModelError):
        LoadProfile(five_station_profile().base, 1.2)


@pytest.mark.parametrize(
    "family,scv", [("exponential", 1.0), ("deterministic", 0.0), ("gamma", 0.4), ("gamma", 2.5), ("two-point", 0.7)]
)
def test_samplers_match_declared_moments(family, scv):
    d = ServiceDistribution.from_scv(family, 1.7, scv)
    assert d.problems("service") == []
    x = d.sample(np.random.default_rng(5), 400_000)
    assert (x >= 0).all()
    assert x.mean() == pytest.approx(d.mean, rel=0.01)
    assert (x**2).mean() == pytest.approx(d.second_moment, rel=0.03)


@given(mean=st.floats(0.01, 100.0), scv=st.floats(0.01, 20.0), family=st.sampled_from(["gamma", "two-point"]))
@settings(max_examples=200, deadline=None)
def test_sampler_parameters_reproduce_moments(mean, scv, family):
    d = ServiceDistribution.from_scv(family, mean, scv)
    code, a, b = d.sampler_params()
    if code == 2:
        m1, m2 = a * b, a * (a + 1) * b * b
    else:
        m1, m2 = a * b, a * a * b
    assert m1 == pytest.approx(mean, rel=1e-12)
    assert m2 == pytest.approx(d.second_moment, rel=1e-12)


def test_family_moment_mismatch_is_reported():
    assert ServiceDistribution("deterministic", 1.0, 2.0).problems("service")
    assert ServiceDistribution("gamma", 1.0, 1.0).problems("service")
    assert ServiceDistribution("exponential", 1.0, 0.5).problems("service")


CONFIG = """\
stations:
  - lambda_hat: 1
    service: {family: exponential, mean: 1.0}
    switchover: {family: deterministic, mean: 0.5}
    glue: 1.0
    retrial_rate: 2.0
  - lambda_hat: 3
    service: {family: gamma, mean: 2.0, scv: 0.5}
    switchover: {family: exponential, mean: 1.0}
    glue: 0.5
    retrial_rate: 1.0
"""


def test_parse_config_rescales_to_unit_load():
    prof = parse_config(CONFIG)
    assert prof.base.rho == pytest.approx(1.0)
    assert prof.rates_hat[1] / prof.rates_hat[0] == pytest.approx(3.0)
    assert prof.base.stations[1].service.scv == pytest.approx(0.5)


def test_shipped_config_matches_builtin_benchmark(tmp_path):
    from pathlib import Path

    path = Path(__file__).resolve().parents[1] / "configs" / "five_station.yaml"
    a, b = load_config(path).base, five_station_profile().base
    for name in ("arrival_rates", "service_means", "service_second_moments", "switchover_means", "glue", "retrial_rates"):
        np.testing.assert_allclose(getattr(a, name), getattr(b, name), rtol=1e-14)


def test_parse_errors_carry_line_numbers():
    text = CONFIG.replace("glue: 0.5", "glue: -0.5").replace("retrial_rate: 2.0", "retrial_rate: 0")
    with pytest.raises(InvalidConfig) as err:
        parse_config(text)
    lines = sorted(v.line for v in err.value.violations)
    assert lines == [2, 7]
    assert set(err.value.codes) == {"NonPositiveGlue", "NonPositiveRetrialRate"}


@pytest.mark.parametrize("text", ["stations: 3", "[1, 2]", "stations: [{lambda_hat: 1}]", "a: [unclosed"])
def test_malformed_documents_raise_invalid_config(text):
    with pytest.raises(InvalidConfig):
        parse_config(text)


def test_all_zero_rates_in_file_is_zero_load():
    text = CONFIG.replace("lambda_hat: 1", "lambda_hat: 0").replace("lambda_hat: 3", "lambda_hat: 0")
    with pytest.raises(InvalidConfig) as err:
        parse_config(text)
    assert err.value.codes == ["ZeroLoad"]


def test_miss_probability_is_exp_of_minus_nu_g():
    s = station(glue=2.0, nu=1.5)
    assert s.miss_probability == pytest.approx(math.exp(-3.0))
