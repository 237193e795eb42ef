"""moment-matched log-normal law for the integrated information X_T.

X_T = head + Pbar_{0,T-tau}, where head = int_{-tau}^0 phi is known today and
Pbar is the integral of the confidence gbm. Pbar / u is approximated by a
log-normal whose first two moments equal the exact ones, so
X_T ~ head + u * LN(alpha, nu^2) with u = T - tau.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Tuple, Union

import numpy as np
from scipy.stats import lognorm, norm

from .errors import WindowTooShort
from .models import ModelParams
from .moments import integrated_gbm_moments

logger = logging.getLogger(__name__)

DEFAULT_TAIL = 8.0


class HeadConvention(str, Enum):
    """how the deterministic head int_{-tau}^0 phi enters the fitted law"""

    SHIFTED = "shifted"  # X = head + Pbar; exact in the head
    OMITTED = "omitted"  # X ~ Pbar alone, as in the published tables


@dataclass(frozen=True)
class LogNormalApprox:
    alpha: float
    nu2: float
    window: Tuple[float, float]  # (T, tau)
    shift: float

    def __post_init__(self):
        if self.nu2 < 0.0:
            raise ValueError("nu2 must be non-negative")

    @property
    def tau(self) -> float:
        return self.window[1]

    @property
    def u(self) -> float:
        return self.window[0] - self.window[1]

    @property
    def nu(self) -> float:
        return math.sqrt(self.nu2)

    @property
    def degenerate(self) -> bool:
        return self.nu2 == 0.0

    @property
    def point(self) -> float:
        """the single attainable value when nu2 = 0"""
        return self.shift + self.u * math.exp(self.alpha)

    def mean(self) -> float:
        return self.shift + self.u * math.exp(self.alpha + 0.5 * self.nu2)

    def support(self, tail: float = DEFAULT_TAIL) -> Tuple[float, float]:
        # tail log-deviations each side; the mass outside is below 1e-15 for tail = 8
        return (
            self.shift + self.u * math.exp(self.alpha - tail * self.nu),
            self.shift + self.u * math.exp(self.alpha + tail * self.nu),
        )


def levy_fit(params: ModelParams, T: float, head: Union[HeadConvention, str] = HeadConvention.SHIFTED) -> LogNormalApprox:
    head = HeadConvention(head)
    u = T - params.tau
    if u <= 0.0:
        raise WindowTooShort(f"maturity T={T:g} must exceed the delay tau={params.tau:g}")
    first, second = integrated_gbm_moments(params.confidence, u)
    if params.confidence.sigma_P == 0.0:
        nu2 = 0.0
    else:
        nu2 = max(math.log(second / (first * first)), 0.0)
    alpha = math.log(first / u) - 0.5 * nu2
    shift = params.head if head == HeadConvention.SHIFTED else 0.0
    logger.debug("log-normal fit on u=%.6g: alpha=%.8g nu2=%.8g shift=%.6g", u, alpha, nu2, shift)
    return LogNormalApprox(alpha=alpha, nu2=nu2, window=(float(T), params.tau), shift=shift)


def pdf_X(approx: LogNormalApprox, params: ModelParams, x):
    """density of X_T under the fit; zero at or below the shift (and everywhere when nu2 = 0)"""
    if params.tau != approx.tau:
        raise ValueError("approximation was fitted for a different delay")
    x = np.asarray(x, dtype=float)
    z = (x - approx.shift) / approx.u
    if approx.degenerate:
        out = np.zeros_like(z)
    else:
        inside = z > 0.0
        out = np.where(inside, lognorm.pdf(np.where(inside, z, 1.0), s=approx.nu, scale=math.exp(approx.alpha)), 0.0)
        out = out / approx.u
    return float(out) if out.ndim == 0 else out


def sample_X(approx: LogNormalApprox, params: ModelParams, n: int, seed: int) -> np.ndarray:
    if params.tau != approx.tau:
        raise ValueError("approximation was fitted for a different delay")
    xi = np.random.default_rng(seed).standard_normal(n)
    return approx.shift + approx.u * np.exp(approx.alpha + approx.nu * xi)


def log_average_pdf(approx: LogNormalApprox, y):
    """fitted gaussian density of log(Pbar / u), the log of the window's average confidence"""
    y = np.asarray(y, dtype=float)
    if approx.degenerate:
        out = np.zeros_like(y)
    else:
        out = norm.pdf(y, loc=approx.alpha, scale=approx.nu)
    return float(out) if out.ndim == 0 else out
