import math

import numpy as np
import pytest

from confidence_pricer.errors import MeasureRequiresZeroRho, MissingIncrements, PricerError, TooFewSamples
from confidence_pricer.mc_oracle import (
    AgreementStatus,
    McEstimate,
    compare,
    mc_price,
    mc_price_many,
    mmm_density_path,
    reweighted_price_check,
)
from confidence_pricer.models import Measure, OptionKind, OptionSpec, RatesCurve
from confidence_pricer.pricing import price
from confidence_pricer.simulation import TimeGrid, simulate_paths

WEEK = 5 / 252
QUARTER = 63 / 252
COARSE = TimeGrid.for_delay(QUARTER, WEEK, max_step=1 / 252)


def _call(k: float, maturity: float = QUARTER) -> OptionSpec:
    return OptionSpec(OptionKind.VANILLA_CALL, k, maturity)


def test_forward_is_martingale(table1_params, flat_rates):
    forward = OptionSpec(OptionKind.GENERIC, 1.0, QUARTER, payoff=lambda s: s)
    est = mc_price(table1_params, flat_rates, forward, n_paths=20_000, seed=5, grid=COARSE)
    assert abs(est.mean - 450.0) <= 3 * est.std_error


def test_worthless_contract(table1_params, flat_rates):
    est = mc_price(table1_params, flat_rates, _call(1e6), n_paths=2000, seed=1, grid=COARSE)
    assert est.mean == 0.0 and est.std_error == 0.0
    assert est.n_paths == 2000 and est.seed == 1


def test_agrees_with_quadrature(table1_params, flat_rates):
    specs = [_call(k) for k in (400.0, 450.0, 500.0)]
    estimates = mc_price_many(table1_params, flat_rates, specs, n_paths=20_000, seed=77)
    for spec, est in zip(specs, estimates):
        quad_price = price(table1_params, flat_rates, spec).price
        assert compare(quad_price, est).status != AgreementStatus.BREAKDOWN


def test_priced_together_or_alone_is_the_same(table1_params, flat_rates):
    specs = [_call(425.0), _call(475.0)]
    together = mc_price_many(table1_params, flat_rates, specs, n_paths=2000, seed=3, grid=COARSE)
    alone = mc_price(table1_params, flat_rates, specs[1], n_paths=2000, seed=3, grid=COARSE)
    assert together[1] == alone


def test_contracts_priced_together_share_a_maturity(table1_params, flat_rates):
    with pytest.raises(PricerError):
        mc_price_many(table1_params, flat_rates, [_call(450.0), _call(450.0, 0.5)], n_paths=2000, seed=1)
    assert mc_price_many(table1_params, flat_rates, [], n_paths=2000, seed=1) == []


def test_preconditions(table1_params, flat_rates):
    with pytest.raises(TooFewSamples):
        mc_price(table1_params, flat_rates, _call(450.0), n_paths=999, seed=1)
    with pytest.raises(MeasureRequiresZeroRho):
        mc_price(table1_params.with_changes(rho=0.5), flat_rates, _call(450.0), n_paths=2000, seed=1)
    with pytest.raises(PricerError):
        mc_price(table1_params, flat_rates, _call(450.0), n_paths=2000, seed=1, grid=TimeGrid.for_delay(0.5, WEEK))


def test_standard_error_shrinks_with_paths(table1_params, flat_rates):
    small = mc_price(table1_params, flat_rates, _call(450.0), n_paths=4000, seed=8, grid=COARSE)
    large = mc_price(table1_params, flat_rates, _call(450.0), n_paths=16_000, seed=8, grid=COARSE)
    assert large.std_error / small.std_error == pytest.approx(0.5, rel=0.2)


def test_same_estimate_for_any_worker_count(table1_params, flat_rates):
    one = mc_price(table1_params, flat_rates, _call(450.0), n_paths=5000, seed=12, grid=COARSE)
    many = mc_price(table1_params, flat_rates, _call(450.0), n_paths=5000, seed=12, grid=COARSE, workers=4)
    assert one == many


# change of measure ------------------------------------------------------------------

def test_density_is_one_when_drift_equals_rate(table1_params):
    # before the delay P_lag is the flat history, so mu_S * P_lag is the short rate
    rates = RatesCurve.flat(table1_params.mu_S * 100.0)
    grid = TimeGrid.for_delay(WEEK, WEEK)
    bundle = simulate_paths(table1_params, rates, grid, n_paths=50, seed=4)
    np.testing.assert_allclose(mmm_density_path(table1_params, rates, bundle), 1.0, rtol=1e-12)


def test_density_has_unit_mean(table1_params, flat_rates):
    bundle = simulate_paths(table1_params, flat_rates, COARSE, n_paths=20_000, seed=21)
    weights = mmm_density_path(table1_params, flat_rates, bundle)
    assert np.all(weights > 0.0)
    se = weights.std(ddof=1) / math.sqrt(len(weights))
    assert abs(weights.mean() - 1.0) <= 3 * se


def test_density_needs_physical_paths_with_increments(table1_params, flat_rates):
    bare = simulate_paths(table1_params, flat_rates, COARSE, n_paths=10, seed=1, keep_increments=False)
    with pytest.raises(MissingIncrements):
        mmm_density_path(table1_params, flat_rates, bare)
    risk_neutral = simulate_paths(table1_params, flat_rates, COARSE, n_paths=10, seed=1, measure=Measure.MINIMAL_MARTINGALE)
    with pytest.raises(PricerError):
        mmm_density_path(table1_params, flat_rates, risk_neutral)


def test_reweighted_paths_reproduce_direct_price(table1_params, flat_rates):
    weighted, direct = reweighted_price_check(table1_params, flat_rates, _call(450.0), n_paths=20_000, seed=6, grid=COARSE)
    gap = abs(weighted.mean - direct.mean)
    assert gap <= 3 * math.hypot(weighted.std_error, direct.std_error)


# agreement --------------------------------------------------------------------------

def test_compare_statuses():
    est = McEstimate(mean=10.0, std_error=0.1, n_paths=10_000, seed=0)
    assert compare(10.2, est).status == AgreementStatus.OK
    assert compare(10.35, est).status == AgreementStatus.MODEL_ERROR
    assert compare(11.0, est).status == AgreementStatus.BREAKDOWN
    agreement = compare(10.35, est)
    assert agreement.difference == pytest.approx(0.35)
    assert agreement.se_bound == pytest.approx(0.3)
    assert agreement.allowance == pytest.approx(0.1035)
