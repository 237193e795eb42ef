from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import trapezoid

from .errors import (
    PricerError,
    TimeBeyondHorizon,
    TimeOutOfRange,
    TimeOutsideHistory,
    ValidationError,
)

ArrayLike = Union[float, Sequence[float], np.ndarray]

# slack for comparing times built from the same fractions of a year
_TIME_TOL = 1e-12


class Issue(str, Enum):
    """every invariant validate() can report"""

    NON_POSITIVE_PHI = "NonPositivePhi"
    DELAY_EXCEEDS_HISTORY = "DelayExceedsHistory"
    NON_POSITIVE_DELAY = "NonPositiveDelay"
    NON_POSITIVE_SIGMA_S = "NonPositiveSigmaS"
    NEGATIVE_SIGMA_P = "NegativeSigmaP"
    ZERO_DRIFT = "ZeroDrift"
    RHO_OUT_OF_RANGE = "RhoOutOfRange"
    NON_POSITIVE_S0 = "NonPositiveS0"
    NON_POSITIVE_HISTORY = "NonPositiveHistory"
    HISTORY_MISMATCH = "HistoryMismatch"
    DEGENERATE_MOMENTS = "DegenerateMoments"
    NON_POSITIVE_STRIKE = "NonPositiveStrike"
    NON_POSITIVE_MATURITY = "NonPositiveMaturity"
    MISSING_PAYOUT = "MissingPayout"
    MISSING_PAYOFF = "MissingPayoff"


class Measure(str, Enum):
    PHYSICAL = "physical"
    MINIMAL_MARTINGALE = "minimal_martingale"


class OptionKind(str, Enum):
    VANILLA_CALL = "vanilla_call"
    VANILLA_PUT = "vanilla_put"
    CASH_OR_NOTHING_CALL = "cash_or_nothing_call"
    GENERIC = "generic"


# initial confidence function ----------------------------------------------

@dataclass(frozen=True)
class InitialConfidence:
    """continuous confidence history on [-L, 0], linear between samples"""

    times: Tuple[float, ...]
    values: Tuple[float, ...]

    def __post_init__(self):
        if len(self.times) < 2 or len(self.times) != len(self.values):
            raise PricerError("initial confidence needs at least two (time, value) samples")

    @classmethod
    def constant(cls, level: float, history: float) -> "InitialConfidence":
        return cls((-float(history), 0.0), (float(level), float(level)))

    @classmethod
    def sampled(cls, times: Sequence[float], values: Sequence[float]) -> "InitialConfidence":
        return cls(tuple(float(t) for t in times), tuple(float(v) for v in values))

    def __call__(self, t: ArrayLike):
        out = np.interp(t, self.times, self.values)
        return float(out) if np.ndim(out) == 0 else out

    def integral(self, a: float, b: float) -> float:
        # exact for the piecewise-linear curve: trapezoid over every breakpoint in (a, b)
        if b <= a:
            return 0.0
        knots = np.asarray(self.times)
        inner = knots[(knots > a) & (knots < b)]
        pts = np.concatenate(([a], inner, [b]))
        return float(trapezoid(np.interp(pts, self.times, self.values), pts))


# parameter containers ------------------------------------------------------

@dataclass(frozen=True)
class ConfidenceParams:
    """gbm confidence index dP = mu_P P dt + sigma_P P dZ started from phi on [-L, 0]"""

    mu_P: float
    sigma_P: float
    phi: InitialConfidence
    L: float

    @classmethod
    def constant(cls, mu_P: float, sigma_P: float, p0: float, L: float) -> "ConfidenceParams":
        return cls(mu_P=float(mu_P), sigma_P=float(sigma_P), phi=InitialConfidence.constant(p0, L), L=float(L))

    @property
    def p0(self) -> float:
        return float(self.phi(0.0))


@dataclass(frozen=True)
class ModelParams:
    """price dS = mu_S P_{t-tau} S dt + sigma_S sqrt(P_{t-tau}) S dW, corr(W, Z) = rho"""

    confidence: ConfidenceParams
    mu_S: float
    sigma_S: float
    tau: float
    rho: float
    s0: float

    @classmethod
    def build(
        cls,
        *,
        mu_P: float,
        sigma_P: float,
        p0: float,
        mu_S: float,
        sigma_S: float,
        tau: float,
        s0: float,
        rho: float = 0.0,
        L: Optional[float] = None,
    ) -> "ModelParams":
        # history defaults to twice the delay (any L > tau works for a constant phi)
        history = float(L) if L is not None else 2.0 * float(tau)
        return cls(
            confidence=ConfidenceParams.constant(mu_P, sigma_P, p0, history),
            mu_S=float(mu_S),
            sigma_S=float(sigma_S),
            tau=float(tau),
            rho=float(rho),
            s0=float(s0),
        )

    def with_changes(self, **changes) -> "ModelParams":
        conf_keys = {"mu_P", "sigma_P", "phi", "L"}
        conf_changes = {k: changes.pop(k) for k in list(changes) if k in conf_keys}
        conf = replace(self.confidence, **conf_changes) if conf_changes else self.confidence
        return replace(self, confidence=conf, **changes)

    @property
    def head(self) -> float:
        """deterministic part of the integrated information, int_{-tau}^0 phi"""
        return self.confidence.phi.integral(-self.tau, 0.0)


# validation ----------------------------------------------------------------

def collect_issues(params: ModelParams) -> List[Issue]:
    # gather every violated invariant instead of stopping at the first
    conf = params.confidence
    issues: List[Issue] = []
    if min(conf.phi.values) <= 0.0:
        issues.append(Issue.NON_POSITIVE_PHI)
    times = conf.phi.times
    if conf.L <= 0.0:
        issues.append(Issue.NON_POSITIVE_HISTORY)
    elif any(b <= a for a, b in zip(times, times[1:])):
        issues.append(Issue.HISTORY_MISMATCH)
    elif abs(conf.phi.times[0] + conf.L) > _TIME_TOL * conf.L or abs(conf.phi.times[-1]) > _TIME_TOL * conf.L:
        issues.append(Issue.HISTORY_MISMATCH)
    if params.tau <= 0.0:
        issues.append(Issue.NON_POSITIVE_DELAY)
    elif params.tau >= conf.L:
        issues.append(Issue.DELAY_EXCEEDS_HISTORY)
    if params.sigma_S <= 0.0:
        issues.append(Issue.NON_POSITIVE_SIGMA_S)
    if conf.sigma_P < 0.0:
        issues.append(Issue.NEGATIVE_SIGMA_P)
    if conf.mu_P == 0.0 or params.mu_S == 0.0:
        issues.append(Issue.ZERO_DRIFT)
    elif conf.mu_P + conf.sigma_P ** 2 == 0.0 or 2.0 * conf.mu_P + conf.sigma_P ** 2 == 0.0:
        issues.append(Issue.DEGENERATE_MOMENTS)
    if not (0.0 <= params.rho <= 1.0):
        issues.append(Issue.RHO_OUT_OF_RANGE)
    if params.s0 <= 0.0:
        issues.append(Issue.NON_POSITIVE_S0)
    return issues


def validate(params: ModelParams) -> ModelParams:
    issues = collect_issues(params)
    if issues:
        raise ValidationError(issues)
    return params


def phi_eval(conf: ConfidenceParams, t: ArrayLike):
    arr = np.asarray(t, dtype=float)
    slack = _TIME_TOL * conf.L
    if np.any(arr < -conf.L - slack) or np.any(arr > slack):
        raise TimeOutsideHistory(f"t must lie in [-{conf.L:g}, 0]")
    return conf.phi(t)


# deterministic rates -------------------------------------------------------

@dataclass(frozen=True)
class RatesCurve:
    """piecewise-constant short rate; segment i covers (end_{i-1}, end_i]"""

    segments: Tuple[Tuple[float, float], ...]

    def __post_init__(self):
        if not self.segments:
            raise PricerError("rates curve needs at least one segment")
        ends = [end for end, _ in self.segments]
        if ends[0] <= 0.0 or any(b <= a for a, b in zip(ends, ends[1:])):
            raise PricerError("rates segment end-times must be positive and strictly increasing")
        if not all(math.isfinite(rate) for _, rate in self.segments):
            raise PricerError("rates must be finite")

    @classmethod
    def flat(cls, rate: float, horizon: float = math.inf) -> "RatesCurve":
        return cls(((float(horizon), float(rate)),))

    @property
    def horizon(self) -> float:
        return self.segments[-1][0]

    def integral(self, t0: float, t1: float) -> float:
        slack = _TIME_TOL * max(1.0, t1 if math.isfinite(t1) else 1.0)
        if t0 < -slack or t1 < t0 - slack or t1 > self.horizon + slack:
            raise TimeOutOfRange(f"need 0 <= t0 <= t1 <= {self.horizon:g}, got ({t0:g}, {t1:g})")
        total = 0.0
        start = 0.0
        for end, rate in self.segments:
            lo, hi = max(t0, start), min(t1, end)
            if hi > lo:
                total += rate * (hi - lo)
            start = end
        return total

    def rate_at(self, t: ArrayLike):
        ends = np.array([end for end, _ in self.segments])
        rates = np.array([rate for _, rate in self.segments])
        idx = np.clip(np.searchsorted(ends, t, side="left"), 0, len(rates) - 1)
        out = rates[idx]
        return float(out) if np.ndim(out) == 0 else out

    def shifted(self, t: float) -> "RatesCurve":
        # the curve seen from time t, re-based so that t becomes 0
        kept = tuple((end - t, rate) for end, rate in self.segments if end > t)
        return RatesCurve(kept)


def discount_factor(rates: RatesCurve, t0: float, t1: float) -> float:
    return math.exp(-rates.integral(t0, t1))


# contracts -----------------------------------------------------------------

@dataclass(frozen=True)
class OptionSpec:
    """european contract on S_T"""

    kind: OptionKind
    strike: float
    maturity: float
    payout: Optional[float] = None  # cash-or-nothing only
    payoff: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, compare=False)
    breakpoints: Tuple[float, ...] = ()  # generic only: prices where the payoff has kinks or jumps

    def __post_init__(self):
        object.__setattr__(self, "kind", OptionKind(self.kind))
        issues: List[Issue] = []
        if self.strike <= 0.0:
            issues.append(Issue.NON_POSITIVE_STRIKE)
        if self.maturity <= 0.0:
            issues.append(Issue.NON_POSITIVE_MATURITY)
        if self.kind == OptionKind.CASH_OR_NOTHING_CALL and (self.payout is None or self.payout <= 0.0):
            issues.append(Issue.MISSING_PAYOUT)
        if self.kind == OptionKind.GENERIC and not callable(self.payoff):
            issues.append(Issue.MISSING_PAYOFF)
        if issues:
            raise ValidationError(issues)


def terminal_payoff(spec: OptionSpec, s: np.ndarray) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    if spec.kind == OptionKind.VANILLA_CALL:
        return np.maximum(s - spec.strike, 0.0)
    if spec.kind == OptionKind.VANILLA_PUT:
        return np.maximum(spec.strike - s, 0.0)
    if spec.kind == OptionKind.CASH_OR_NOTHING_CALL:
        return np.where(s > spec.strike, float(spec.payout), 0.0)
    try:
        values = np.asarray(spec.payoff(s), dtype=float)
    except (TypeError, ValueError):
        values = None
    if values is None or values.shape != s.shape:
        # scalar-only contract function
        values = np.vectorize(spec.payoff, otypes=[float])(s)
    return values


# pricing at t > 0 ------------------------------------------------------------

def roll_forward(
    params: ModelParams,
    rates: RatesCurve,
    times: Sequence[float],
    P_path: Sequence[float],
    s_t: float,
    t: float,
) -> Tuple[ModelParams, RatesCurve]:
    """re-base the model at time t: the observed confidence becomes the initial function"""
    times = np.asarray(times, dtype=float)
    P_path = np.asarray(P_path, dtype=float)
    if t <= 0.0:
        return replace(params, s0=float(s_t)), rates
    if times[0] > _TIME_TOL or times[-1] < t - _TIME_TOL:
        raise TimeBeyondHorizon(f"confidence path must cover [0, {t:g}]")
    conf = params.confidence
    lo = t - conf.L
    knots = [lo, t]
    knots += [u for u in conf.phi.times if lo < u < 0.0]
    knots += [u for u in times if max(lo, 0.0) <= u < t]
    knots = np.unique(np.asarray(knots))

    def confidence_at(u: float) -> float:
        if u < 0.0:
            return float(conf.phi(u))
        return float(np.interp(u, times, P_path))

    values = [confidence_at(u) for u in knots]
    phi = InitialConfidence.sampled(knots - t, values)
    rolled = replace(params, s0=float(s_t), confidence=replace(conf, phi=phi))
    return rolled, rates.shifted(t)
