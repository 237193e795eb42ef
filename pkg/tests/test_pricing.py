import math

import numpy as np
import pytest
from scipy.stats import norm

from confidence_pricer import pricing
from confidence_pricer.errors import (
    MeasureRequiresZeroRho,
    NonPositiveArgument,
    PayoffNotIntegrable,
    PricerError,
    QuadratureNotConverged,
)
from confidence_pricer.mc_oracle import mc_price
from confidence_pricer.models import OptionKind, OptionSpec, RatesCurve
from confidence_pricer.moments import mean_X
from confidence_pricer.pricing import (
    QuadratureRule,
    QuadratureSettings,
    black_scholes_call,
    bs_price,
    d1,
    d2,
    price,
    price_binary_quadrature,
    price_call_quadrature,
    price_generic_quadrature,
    price_put,
)

QUARTER = 63 / 252
STRIKES = (400.0, 425.0, 450.0, 475.0, 500.0)
GAUSS = QuadratureSettings(rule=QuadratureRule.GAUSS_LEGENDRE, n_nodes=128)


def _call(k: float) -> OptionSpec:
    return OptionSpec(OptionKind.VANILLA_CALL, k, QUARTER)


def _binary(k: float) -> OptionSpec:
    return OptionSpec(OptionKind.CASH_OR_NOTHING_CALL, k, QUARTER, payout=100.0)


# kernel ------------------------------------------------------------------------

def test_d1_d2_at_the_money_without_rates():
    zero = RatesCurve.flat(0.0)
    vol = 0.04 * math.sqrt(25.0)
    assert d1(0.0, 450.0, 25.0, 450.0, zero, 0.04, QUARTER) == pytest.approx(vol / 2)
    assert d2(0.0, 450.0, 25.0, 450.0, zero, 0.04, QUARTER) == pytest.approx(-vol / 2)


def test_d1_minus_d2_is_total_volatility():
    rng = np.random.default_rng(3)
    rates = RatesCurve.flat(0.02)
    for _ in range(100):
        s, k, x = rng.uniform(50, 900), rng.uniform(50, 900), rng.uniform(0.1, 60)
        gap = d1(0.0, s, x, k, rates, 0.04, 0.5) - d2(0.0, s, x, k, rates, 0.04, 0.5)
        assert gap == pytest.approx(0.04 * math.sqrt(x), rel=1e-12)


def test_deep_in_the_money_limit():
    rates = RatesCurve.flat(0.01)
    assert norm.cdf(d1(0.0, 1e9, 25.0, 450.0, rates, 0.04, QUARTER)) == 1.0
    assert norm.cdf(d2(0.0, 1e9, 25.0, 450.0, rates, 0.04, QUARTER)) == 1.0


def test_kernel_rejects_non_positive_arguments():
    rates = RatesCurve.flat(0.01)
    with pytest.raises(NonPositiveArgument):
        d1(0.0, 450.0, 0.0, 450.0, rates, 0.04, QUARTER)
    with pytest.raises(NonPositiveArgument):
        bs_price(0.0, 450.0, 25.0, -1.0, rates, 0.04, QUARTER)


def test_kernel_example_and_limits():
    zero = RatesCurve.flat(0.0)
    x = (0.2004 / 0.04) ** 2
    expected = 450.0 * (norm.cdf(0.1002) - norm.cdf(-0.1002))
    assert bs_price(0.0, 450.0, x, 450.0, zero, 0.04, QUARTER) == pytest.approx(expected, rel=1e-12)
    assert bs_price(0.0, 500.0, 1e-14, 450.0, zero, 0.04, QUARTER) == pytest.approx(50.0, rel=1e-12)
    assert bs_price(0.0, 500.0, 25.0, 1e-12, zero, 0.04, QUARTER) == pytest.approx(500.0, rel=1e-12)


def test_kernel_is_black_scholes_with_effective_volatility():
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        s, k = rng.uniform(50, 1000), rng.uniform(50, 1000)
        x, sigma = rng.uniform(0.1, 50.0), rng.uniform(0.01, 0.1)
        tenor, r = rng.uniform(0.05, 2.0), rng.uniform(0.0, 0.05)
        ours = bs_price(0.0, s, x, k, RatesCurve.flat(r), sigma, tenor)
        classic = black_scholes_call(s, k, r, sigma * math.sqrt(x / tenor), tenor)
        assert ours == pytest.approx(classic, rel=1e-12, abs=1e-10)


# settings ------------------------------------------------------------------------

def test_quadrature_settings_invariants():
    with pytest.raises(PricerError):
        QuadratureSettings(n_nodes=8)
    with pytest.raises(PricerError):
        QuadratureSettings(rel_tol=1e-4)
    assert QuadratureSettings(rule="adaptive_simpson").rule is QuadratureRule.ADAPTIVE
    assert QuadratureSettings(n_nodes=64).doubled().n_nodes == 128


# quadrature pricers ------------------------------------------------------------------

def test_call_decomposition_identity(table1_params, flat_rates):
    disc = math.exp(-0.01 * QUARTER)
    for k in STRIKES:
        res = price_call_quadrature(table1_params, flat_rates, _call(k))
        assert res.price == pytest.approx(450.0 * res.q1 - k * disc * res.q2, rel=1e-10)
        assert 0.0 <= res.q2 <= res.q1 <= 1.0
        assert res.quadrature_error_estimate >= 0.0


def test_call_decreasing_in_strike(table1_params, flat_rates):
    prices = [price_call_quadrature(table1_params, flat_rates, _call(k)).price for k in STRIKES]
    assert all(b < a for a, b in zip(prices, prices[1:]))


def test_rules_agree(table1_params, flat_rates):
    for k in (400.0, 450.0, 500.0):
        adaptive = price_call_quadrature(table1_params, flat_rates, _call(k)).price
        gauss = price_call_quadrature(table1_params, flat_rates, _call(k), GAUSS).price
        assert gauss == pytest.approx(adaptive, rel=1e-7)


def test_doubling_nodes_within_error_estimate(table1_params, flat_rates):
    for spec in [_call(k) for k in STRIKES] + [_binary(k) for k in STRIKES]:
        base = price(table1_params, flat_rates, spec, GAUSS)
        finer = price(table1_params, flat_rates, spec, GAUSS.doubled())
        assert abs(finer.price - base.price) <= base.quadrature_error_estimate


def test_degenerate_density_prices_at_the_point(table1_params, flat_rates):
    params = table1_params.with_changes(sigma_P=0.0)
    x_star = mean_X(params, QUARTER)
    res = price_call_quadrature(params, flat_rates, _call(450.0))
    expected = bs_price(0.0, 450.0, x_star, 450.0, flat_rates, 0.04, QUARTER)
    assert res.price == pytest.approx(expected, rel=1e-10)
    assert res.quadrature_error_estimate == 0.0


def test_binary_price(table1_params, flat_rates):
    res = price_binary_quadrature(table1_params, flat_rates, _binary(450.0))
    assert res.q1 is None
    assert res.price == pytest.approx(100.0 * math.exp(-0.01 * QUARTER) * res.q2, rel=1e-14)
    sure = price_binary_quadrature(table1_params, flat_rates, _binary(1e-6))
    assert sure.price == pytest.approx(100.0 * math.exp(-0.01 * QUARTER), rel=1e-7)


def test_put_call_parity(table1_params, flat_rates, zero_rates):
    at_money = OptionSpec(OptionKind.VANILLA_PUT, 450.0, QUARTER)
    put = price_put(table1_params, zero_rates, at_money)
    call = price_call_quadrature(table1_params, zero_rates, _call(450.0))
    assert put.price == pytest.approx(call.price, rel=1e-12)

    spec = OptionSpec(OptionKind.VANILLA_PUT, 500.0, QUARTER)
    put = price(table1_params, flat_rates, spec)
    call = price_call_quadrature(table1_params, flat_rates, _call(500.0))
    assert put.price == pytest.approx(call.price - 450.0 + 500.0 * math.exp(-0.0025), rel=1e-12)
    assert put.q1 == pytest.approx(1.0 - call.q1)

    tiny = price_put(table1_params, flat_rates, OptionSpec(OptionKind.VANILLA_PUT, 1e-3, QUARTER))
    assert tiny.price == pytest.approx(0.0, abs=1e-4)


def test_generic_payoff_reproduces_specialised_pricers(table1_params, flat_rates):
    for k in (425.0, 450.0, 475.0):
        call_like = OptionSpec(OptionKind.GENERIC, k, QUARTER, payoff=lambda s, k=k: np.maximum(s - k, 0.0), breakpoints=(k,))
        binary_like = OptionSpec(OptionKind.GENERIC, k, QUARTER, payoff=lambda s, k=k: np.where(s > k, 100.0, 0.0), breakpoints=(k,))
        assert price_generic_quadrature(table1_params, flat_rates, call_like) == pytest.approx(
            price_call_quadrature(table1_params, flat_rates, _call(k)).price, rel=1e-6
        )
        assert price_generic_quadrature(table1_params, flat_rates, binary_like) == pytest.approx(
            price_binary_quadrature(table1_params, flat_rates, _binary(k)).price, rel=1e-6
        )


def test_generic_forward_is_martingale(table1_params, zero_rates):
    forward = OptionSpec(OptionKind.GENERIC, 1.0, QUARTER, payoff=lambda s: s)
    assert price_generic_quadrature(table1_params, zero_rates, forward) == pytest.approx(450.0, rel=1e-7)
    res = price(table1_params, zero_rates, forward)
    assert res.q1 is None and res.q2 is None


def test_generic_divergent_payoff(table1_params, flat_rates):
    exploding = OptionSpec(OptionKind.GENERIC, 1.0, QUARTER, payoff=lambda s: np.exp(s))
    with np.errstate(over="ignore"):
        with pytest.raises(PayoffNotIntegrable):
            price_generic_quadrature(table1_params, flat_rates, exploding)


def test_pricing_requires_independent_noise(table1_params, flat_rates):
    with pytest.raises(MeasureRequiresZeroRho):
        price_call_quadrature(table1_params.with_changes(rho=0.5), flat_rates, _call(450.0))


def test_unconverged_quadrature_is_reported(table1_params, flat_rates, monkeypatch):
    monkeypatch.setattr(pricing, "quadpack", lambda *args, **kwargs: (0.5, 1e-3, {}, "roundoff error detected"))
    with pytest.raises(QuadratureNotConverged):
        price_call_quadrature(table1_params, flat_rates, _call(450.0))


def test_monte_carlo_agrees_with_quadrature(table1_params, flat_rates):
    for spec in (_call(450.0), _binary(475.0)):
        quad_price = price(table1_params, flat_rates, spec).price
        est = mc_price(table1_params, flat_rates, spec, n_paths=20_000, seed=99)
        assert abs(quad_price - est.mean) <= 3 * est.std_error + 0.01 * quad_price
