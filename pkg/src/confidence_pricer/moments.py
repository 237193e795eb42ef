from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

from .errors import DegenerateDenominator
from .models import ConfidenceParams, ModelParams


@dataclass(frozen=True)
class MomentPair:
    mean: float
    variance: float

    def __post_init__(self):
        if self.variance < 0.0:
            raise ValueError("variance must be non-negative")


# helpers -----------------------------------------------------------------

def integrated_gbm_moments(conf: ConfidenceParams, u: float) -> Tuple[float, float]:
    """(E[Pbar], E[Pbar^2]) for Pbar = int_0^u P_s ds"""
    if u <= 0.0:
        return 0.0, 0.0
    a = conf.mu_P
    b = conf.mu_P + conf.sigma_P ** 2
    c = 2.0 * conf.mu_P + conf.sigma_P ** 2
    if b == 0.0 or c == 0.0:
        raise DegenerateDenominator("mu_P + sigma_P^2 and 2 mu_P + sigma_P^2 must be non-zero")
    p0 = conf.p0
    first = p0 / a * math.expm1(a * u)
    if conf.sigma_P == 0.0:
        return first, first * first
    second = 2.0 * p0 * p0 * (math.expm1(c * u) / (b * c) - math.expm1(a * u) / (a * b))
    return first, second


# moments of the integrated information -----------------------------------

def mean_X(params: ModelParams, t: float) -> float:
    tau, phi = params.tau, params.confidence.phi
    if t <= tau:
        return phi.integral(-tau, t - tau)
    first, _ = integrated_gbm_moments(params.confidence, t - tau)
    return params.head + first


def var_X(params: ModelParams, t: float) -> float:
    if t <= params.tau:
        return 0.0
    first, second = integrated_gbm_moments(params.confidence, t - params.tau)
    # clamp rounding noise; the closed form cancels to ~eps * mean^2 when sigma_P is small
    return max(second - first * first, 0.0)


def moments_X(params: ModelParams, t: float) -> MomentPair:
    return MomentPair(mean_X(params, t), var_X(params, t))


def cross_moment_P(params: ModelParams, u: float, v: float) -> float:
    """E[P_u P_v] for u, v >= 0"""
    if u > v:
        u, v = v, u
    conf = params.confidence
    return conf.p0 ** 2 * math.exp(conf.mu_P * (v - u)) * math.exp((2.0 * conf.mu_P + conf.sigma_P ** 2) * u)


def moments_log_S(params: ModelParams, t: float) -> MomentPair:
    drift = params.mu_S - 0.5 * params.sigma_S ** 2
    m = mean_X(params, t)
    v = var_X(params, t)
    return MomentPair(
        mean=math.log(params.s0) + drift * m,
        variance=drift * drift * v + params.sigma_S ** 2 * m,
    )
