"""quasi-closed pricing under the minimal martingale measure.

with rho = 0, S_T given X_{0,T} = x is log-normal with accumulated variance
sigma_S^2 x, so every european price is a black-scholes style kernel averaged
over the fitted law of X (see approx_dist). the outer average is a
one-dimensional quadrature against pdf_X.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional, Tuple, Union

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from numpy.polynomial.legendre import leggauss
from scipy.integrate import quad as quadpack
from scipy.stats import norm

from .approx_dist import HeadConvention, LogNormalApprox, levy_fit, pdf_X
from .errors import (
    MeasureRequiresZeroRho,
    NonPositiveArgument,
    PayoffNotIntegrable,
    PricerError,
    QuadratureNotConverged,
)
from .models import ModelParams, OptionKind, OptionSpec, RatesCurve, terminal_payoff

logger = logging.getLogger(__name__)

# truncation of the standard normal line for piecewise inner integration
_XI_BOUND = 10.0


class QuadratureRule(str, Enum):
    GAUSS_LEGENDRE = "gauss_legendre"
    ADAPTIVE = "adaptive"

    @classmethod
    def _missing_(cls, value):
        if value == "adaptive_simpson":
            return cls.ADAPTIVE
        return None


@dataclass(frozen=True)
class QuadratureSettings:
    rule: QuadratureRule = QuadratureRule.ADAPTIVE
    n_nodes: int = 128
    rel_tol: float = 1e-8
    hermite_nodes: int = 64
    tail: float = 8.0

    def __post_init__(self):
        object.__setattr__(self, "rule", QuadratureRule(self.rule))
        if self.n_nodes < 16:
            raise PricerError("n_nodes must be at least 16")
        if not (0.0 < self.rel_tol <= 1e-6):
            raise PricerError("rel_tol must lie in (0, 1e-6]")
        if self.hermite_nodes < 8:
            raise PricerError("hermite_nodes must be at least 8")
        if self.tail <= 0.0:
            raise PricerError("tail must be positive")

    def doubled(self) -> "QuadratureSettings":
        return QuadratureSettings(self.rule, 2 * self.n_nodes, self.rel_tol, self.hermite_nodes, self.tail)


@dataclass(frozen=True)
class PriceResult:
    price: float
    q1: Optional[float]
    q2: Optional[float]
    quadrature_error_estimate: float


# black-scholes kernel ----------------------------------------------------------

def _check_positive(**values) -> None:
    for name, value in values.items():
        if np.any(np.asarray(value) <= 0.0):
            raise NonPositiveArgument(f"{name} must be positive")


def d1(t: float, s: float, x, strike: float, rates: RatesCurve, sigma_S: float, maturity: float):
    """d1 with accumulated variance sigma_S^2 x and the rate integrated over [t, maturity]"""
    _check_positive(s=s, x=x, strike=strike)
    x = np.asarray(x, dtype=float)
    vol = sigma_S * np.sqrt(x)
    out = (math.log(s / strike) + rates.integral(t, maturity) + 0.5 * vol * vol) / vol
    return float(out) if out.ndim == 0 else out


def d2(t: float, s: float, x, strike: float, rates: RatesCurve, sigma_S: float, maturity: float):
    out = np.asarray(d1(t, s, x, strike, rates, sigma_S, maturity)) - sigma_S * np.sqrt(np.asarray(x, dtype=float))
    return float(out) if out.ndim == 0 else out


def bs_price(t: float, s: float, x, strike: float, rates: RatesCurve, sigma_S: float, maturity: float):
    a = np.asarray(d1(t, s, x, strike, rates, sigma_S, maturity))
    b = a - sigma_S * np.sqrt(np.asarray(x, dtype=float))
    disc = math.exp(-rates.integral(t, maturity))
    out = s * norm.cdf(a) - strike * disc * norm.cdf(b)
    return float(out) if out.ndim == 0 else out


def black_scholes_call(spot: float, strike: float, rate: float, vol: float, tenor: float) -> float:
    _check_positive(spot=spot, strike=strike, vol=vol, tenor=tenor)
    root = vol * math.sqrt(tenor)
    a = (math.log(spot / strike) + (rate + 0.5 * vol * vol) * tenor) / root
    b = a - root
    return float(spot * norm.cdf(a) - strike * math.exp(-rate * tenor) * norm.cdf(b))


# outer quadrature against the fitted density -------------------------------------

def _integrate(fn: Callable[[np.ndarray], np.ndarray], approx: LogNormalApprox, params: ModelParams, quad: QuadratureSettings) -> Tuple[float, float]:
    """int fn(x) pdf_X(x) dx over the truncated support, with an error estimate"""
    if approx.degenerate:
        return float(fn(np.array([approx.point]))[0]), 0.0
    lo, hi = approx.support(quad.tail)

    def integrand(x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return fn(x) * pdf_X(approx, params, x)

    if quad.rule == QuadratureRule.GAUSS_LEGENDRE:
        full = _gauss_legendre(integrand, lo, hi, quad.n_nodes)
        half = _gauss_legendre(integrand, lo, hi, quad.n_nodes // 2)
        return full, abs(full - half) + 1e-12 * abs(full)

    res = quadpack(
        lambda x: float(integrand(x)[0]), lo, hi,
        epsabs=1e-14, epsrel=quad.rel_tol, limit=200, full_output=1,
    )
    if len(res) > 3:
        raise QuadratureNotConverged(f"adaptive quadrature stopped early: {res[3]}")
    return float(res[0]), float(res[1])


def _gauss_legendre(integrand, lo: float, hi: float, n: int) -> float:
    nodes, weights = leggauss(n)
    half = 0.5 * (hi - lo)
    x = lo + half * (nodes + 1.0)
    return float(half * np.dot(weights, integrand(x)))


def _prepare(params: ModelParams, spec: OptionSpec, head) -> LogNormalApprox:
    if params.rho != 0.0:
        raise MeasureRequiresZeroRho("quadrature pricing assumes independent price and confidence noise")
    return levy_fit(params, spec.maturity, head)


# pricers ---------------------------------------------------------------------------

def price_call_quadrature(
    params: ModelParams,
    rates: RatesCurve,
    spec: OptionSpec,
    quad: QuadratureSettings = QuadratureSettings(),
    *,
    head: Union[HeadConvention, str] = HeadConvention.SHIFTED,
) -> PriceResult:
    approx = _prepare(params, spec, head)
    T, K, s0, sig = spec.maturity, spec.strike, params.s0, params.sigma_S
    disc = math.exp(-rates.integral(0.0, T))

    q1, e1 = _integrate(lambda x: norm.cdf(d1(0.0, s0, x, K, rates, sig, T)), approx, params, quad)
    q2, e2 = _integrate(lambda x: norm.cdf(d2(0.0, s0, x, K, rates, sig, T)), approx, params, quad)
    q1, q2 = min(max(q1, 0.0), 1.0), min(max(q2, 0.0), 1.0)
    price = s0 * q1 - K * disc * q2
    logger.debug("call K=%g T=%g: q1=%.10g q2=%.10g price=%.10g", K, T, q1, q2, price)
    return PriceResult(price=price, q1=q1, q2=q2, quadrature_error_estimate=s0 * e1 + K * disc * e2)


def price_binary_quadrature(
    params: ModelParams,
    rates: RatesCurve,
    spec: OptionSpec,
    quad: QuadratureSettings = QuadratureSettings(),
    *,
    head: Union[HeadConvention, str] = HeadConvention.SHIFTED,
) -> PriceResult:
    approx = _prepare(params, spec, head)
    T, K = spec.maturity, spec.strike
    scale = float(spec.payout) * math.exp(-rates.integral(0.0, T))
    q2, e2 = _integrate(lambda x: norm.cdf(d2(0.0, params.s0, x, K, rates, params.sigma_S, T)), approx, params, quad)
    q2 = min(max(q2, 0.0), 1.0)
    return PriceResult(price=scale * q2, q1=None, q2=q2, quadrature_error_estimate=scale * e2)


def price_put(
    params: ModelParams,
    rates: RatesCurve,
    spec: OptionSpec,
    quad: QuadratureSettings = QuadratureSettings(),
    *,
    head: Union[HeadConvention, str] = HeadConvention.SHIFTED,
) -> PriceResult:
    call = price_call_quadrature(params, rates, spec, quad, head=head)
    disc = math.exp(-rates.integral(0.0, spec.maturity))
    # put-call parity; the weights become those of the complementary event
    return PriceResult(
        price=call.price - params.s0 + spec.strike * disc,
        q1=1.0 - call.q1,
        q2=1.0 - call.q2,
        quadrature_error_estimate=call.quadrature_error_estimate,
    )


def _inner_nodes(quad: QuadratureSettings, cuts: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """nodes and weights for E[f(xi)], xi standard normal"""
    if cuts.size == 0:
        xi, w = hermegauss(quad.hermite_nodes)
        return xi, w / math.sqrt(2.0 * math.pi)
    edges = np.concatenate(([-_XI_BOUND], np.sort(cuts), [_XI_BOUND]))
    nodes, weights = leggauss(quad.hermite_nodes)
    xs, ws = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        if hi <= lo:
            continue
        half = 0.5 * (hi - lo)
        x = lo + half * (nodes + 1.0)
        xs.append(x)
        ws.append(half * weights * norm.pdf(x))
    return np.concatenate(xs), np.concatenate(ws)


def _conditional_payoff(params: ModelParams, rates: RatesCurve, spec: OptionSpec, quad: QuadratureSettings):
    """x -> E[payoff(S_T) | X = x] under the minimal martingale measure"""
    growth = rates.integral(0.0, spec.maturity)
    log_s0, sig = math.log(params.s0), params.sigma_S
    breaks = np.asarray([b for b in spec.breakpoints if b > 0.0], dtype=float)

    def expectation(x: np.ndarray) -> np.ndarray:
        out = np.empty(len(x))
        for i, xi_var in enumerate(x):
            vol = sig * math.sqrt(xi_var)
            centre = log_s0 + growth - 0.5 * vol * vol
            cuts = (np.log(breaks) - centre) / vol if breaks.size else breaks
            cuts = cuts[(cuts > -_XI_BOUND) & (cuts < _XI_BOUND)]
            xi, w = _inner_nodes(quad, cuts)
            values = terminal_payoff(spec, np.exp(centre + vol * xi))
            total = float(np.dot(w, values))
            if not math.isfinite(total):
                raise PayoffNotIntegrable(f"payoff expectation diverges at x={xi_var:g}")
            out[i] = total
        return out

    return expectation


def _generic_result(params, rates, spec, quad, head) -> PriceResult:
    approx = _prepare(params, spec, head)
    disc = math.exp(-rates.integral(0.0, spec.maturity))
    value, err = _integrate(_conditional_payoff(params, rates, spec, quad), approx, params, quad)
    if not math.isfinite(value):
        raise PayoffNotIntegrable("payoff is not integrable against the fitted law of X")
    return PriceResult(price=disc * value, q1=None, q2=None, quadrature_error_estimate=disc * err)


def price_generic_quadrature(
    params: ModelParams,
    rates: RatesCurve,
    spec: OptionSpec,
    quad: QuadratureSettings = QuadratureSettings(),
    *,
    head: Union[HeadConvention, str] = HeadConvention.SHIFTED,
) -> float:
    return _generic_result(params, rates, spec, quad, head).price


def price(
    params: ModelParams,
    rates: RatesCurve,
    spec: OptionSpec,
    quad: QuadratureSettings = QuadratureSettings(),
    *,
    head: Union[HeadConvention, str] = HeadConvention.SHIFTED,
) -> PriceResult:
    if spec.kind == OptionKind.VANILLA_CALL:
        return price_call_quadrature(params, rates, spec, quad, head=head)
    if spec.kind == OptionKind.VANILLA_PUT:
        return price_put(params, rates, spec, quad, head=head)
    if spec.kind == OptionKind.CASH_OR_NOTHING_CALL:
        return price_binary_quadrature(params, rates, spec, quad, head=head)
    return _generic_result(params, rates, spec, quad, head)
