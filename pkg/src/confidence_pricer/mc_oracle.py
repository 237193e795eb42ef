"""brute-force monte carlo prices and measure-change diagnostics.

every estimator reduces blocks of paths to partial sums as they are produced,
so memory stays bounded by one block per worker. partial sums are combined
with math.fsum, which makes estimates identical for any worker count.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import MeasureRequiresZeroRho, MissingIncrements, PricerError, TooFewSamples
from .models import Measure, ModelParams, OptionSpec, RatesCurve, terminal_payoff
from .moments import mean_X, moments_log_S
from .simulation import PathBundle, TimeGrid, map_blocks

logger = logging.getLogger(__name__)

MIN_PATHS = 1000
SE_MULTIPLE = 3.0
DEFAULT_ALLOWANCE = 0.01


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_error: float
    n_paths: int
    seed: int


# accumulation --------------------------------------------------------------------

def _partial(values: np.ndarray) -> Tuple[int, float, float]:
    values = np.asarray(values, dtype=float)
    return len(values), math.fsum(values), math.fsum(values * values)


def _combine(parts: Sequence[Tuple[int, float, float]], seed: int) -> McEstimate:
    n = sum(p[0] for p in parts)
    total = math.fsum(p[1] for p in parts)
    squares = math.fsum(p[2] for p in parts)
    mean = total / n
    var = max(squares / n - mean * mean, 0.0) * n / (n - 1)
    return McEstimate(mean=mean, std_error=math.sqrt(var / n), n_paths=n, seed=seed)


def _require_paths(n_paths: int) -> None:
    if n_paths < MIN_PATHS:
        raise TooFewSamples(f"monte carlo estimates need at least {MIN_PATHS} paths, got {n_paths}")


def _require_zero_rho(params: ModelParams) -> None:
    if params.rho != 0.0:
        raise MeasureRequiresZeroRho("monte carlo pricing is only defined for rho = 0")


def _default_grid(params: ModelParams, maturity: float, grid: Optional[TimeGrid]) -> TimeGrid:
    grid = grid if grid is not None else TimeGrid.for_delay(maturity, params.tau)
    if abs(grid.horizon - maturity) > 1e-12 * max(maturity, 1.0):
        raise PricerError(f"grid horizon {grid.horizon:g} differs from maturity {maturity:g}")
    return grid


# pricing -------------------------------------------------------------------------

def mc_price_many(
    params: ModelParams,
    rates: RatesCurve,
    specs: Sequence[OptionSpec],
    n_paths: int,
    seed: int,
    grid: Optional[TimeGrid] = None,
    *,
    workers: int = 1,
) -> List[McEstimate]:
    """price several contracts of one maturity from a single set of paths"""
    if not specs:
        return []
    maturities = {spec.maturity for spec in specs}
    if len(maturities) != 1:
        raise PricerError("contracts priced together must share a maturity")
    _require_zero_rho(params)
    _require_paths(n_paths)
    maturity = specs[0].maturity
    grid = _default_grid(params, maturity, grid)
    disc = math.exp(-rates.integral(0.0, maturity))

    def reduce(bundle: PathBundle):
        s_T = bundle.terminal_S
        return [_partial(disc * terminal_payoff(spec, s_T)) for spec in specs]

    blocks = list(map_blocks(params, rates, grid, n_paths, seed, Measure.MINIMAL_MARTINGALE, reduce, workers=workers))
    estimates = [_combine([block[i] for block in blocks], seed) for i in range(len(specs))]
    logger.debug("priced %d contracts on %d paths (seed %d)", len(specs), n_paths, seed)
    return estimates


def mc_price(
    params: ModelParams,
    rates: RatesCurve,
    spec: OptionSpec,
    n_paths: int,
    seed: int,
    grid: Optional[TimeGrid] = None,
    *,
    workers: int = 1,
) -> McEstimate:
    return mc_price_many(params, rates, [spec], n_paths, seed, grid, workers=workers)[0]


# change of measure ------------------------------------------------------------------

def mmm_density_path(params: ModelParams, rates: RatesCurve, path: PathBundle) -> np.ndarray:
    """terminal radon-nikodym density of the minimal martingale measure, one value per path"""
    if path.dW is None:
        raise MissingIncrements("the path bundle was simulated without keeping its W increments")
    if path.measure != Measure.PHYSICAL:
        raise PricerError("the density is defined on paths simulated under the physical measure")
    _require_zero_rho(params)
    times = path.grid.times
    short_rate = rates.rate_at(times)
    alpha = (params.mu_S * path.P_lag - short_rate) / (params.sigma_S * np.sqrt(path.P_lag))
    stochastic = np.sum(alpha[:, :-1] * path.dW, axis=1)
    a2 = alpha * alpha
    ordinary = np.sum(0.5 * np.diff(times) * (a2[:, :-1] + a2[:, 1:]), axis=1)
    return np.exp(-stochastic - 0.5 * ordinary)


def reweighted_price_check(
    params: ModelParams,
    rates: RatesCurve,
    spec: OptionSpec,
    n_paths: int,
    seed: int,
    grid: Optional[TimeGrid] = None,
    *,
    workers: int = 1,
) -> Tuple[McEstimate, McEstimate]:
    """(physical paths weighted by L_T, direct minimal-martingale simulation)"""
    _require_zero_rho(params)
    _require_paths(n_paths)
    grid = _default_grid(params, spec.maturity, grid)
    disc = math.exp(-rates.integral(0.0, spec.maturity))

    def reduce(bundle: PathBundle):
        weights = mmm_density_path(params, rates, bundle)
        return _partial(weights * disc * terminal_payoff(spec, bundle.terminal_S))

    parts = list(map_blocks(params, rates, grid, n_paths, seed, Measure.PHYSICAL, reduce, keep_increments=True, workers=workers))
    weighted = _combine(parts, seed)
    direct = mc_price(params, rates, spec, n_paths, seed, grid, workers=workers)
    return weighted, direct


# agreement between quadrature and simulation ------------------------------------------

class AgreementStatus(str, Enum):
    OK = "ok"
    MODEL_ERROR = "model_error"
    BREAKDOWN = "breakdown"


@dataclass(frozen=True)
class Agreement:
    status: AgreementStatus
    difference: float
    se_bound: float
    allowance: float


def compare(price: float, estimate: McEstimate, allowance: float = DEFAULT_ALLOWANCE) -> Agreement:
    diff = price - estimate.mean
    se_bound = SE_MULTIPLE * estimate.std_error
    extra = allowance * abs(price)
    if abs(diff) <= se_bound:
        status = AgreementStatus.OK
    elif abs(diff) <= se_bound + extra:
        status = AgreementStatus.MODEL_ERROR
    else:
        status = AgreementStatus.BREAKDOWN
    return Agreement(status=status, difference=diff, se_bound=se_bound, allowance=extra)


# moments along the grid ------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class MomentEstimate:
    """sample mean and variance at every grid point with their standard errors"""

    times: np.ndarray
    mean: np.ndarray
    mean_se: np.ndarray
    variance: np.ndarray
    variance_se: np.ndarray
    n_paths: int


def _power_sums(values: np.ndarray, pivot: np.ndarray) -> np.ndarray:
    dev = values - pivot
    return np.stack([np.sum(dev ** k, axis=0) for k in range(1, 5)])


def _moment_estimate(times: np.ndarray, sums: np.ndarray, pivot: np.ndarray, n: int) -> MomentEstimate:
    m1, m2, m3, m4 = sums / n
    variance = np.maximum(m2 - m1 ** 2, 0.0)
    central4 = m4 - 4.0 * m1 * m3 + 6.0 * m1 ** 2 * m2 - 3.0 * m1 ** 4
    unbiased = variance * n / (n - 1)
    return MomentEstimate(
        times=times,
        mean=pivot + m1,
        mean_se=np.sqrt(unbiased / n),
        variance=unbiased,
        variance_se=np.sqrt(np.maximum(central4 - variance ** 2, 0.0) / n),
        n_paths=n,
    )


def mc_moments(
    params: ModelParams,
    rates: RatesCurve,
    grid: TimeGrid,
    n_paths: int,
    seed: int,
    *,
    workers: int = 1,
) -> Dict[str, MomentEstimate]:
    """monte carlo E/Var of X_t and log S_t on every grid point, physical measure"""
    _require_paths(n_paths)
    times = grid.times
    # centre on the analytic means to keep the power sums well conditioned
    pivot_x = np.array([mean_X(params, t) for t in times])
    pivot_log_s = np.array([moments_log_S(params, t).mean for t in times])

    def reduce(bundle: PathBundle):
        return _power_sums(bundle.X, pivot_x), _power_sums(np.log(bundle.S), pivot_log_s)

    parts = list(map_blocks(params, rates, grid, n_paths, seed, Measure.PHYSICAL, reduce, workers=workers))
    sums_x = np.sum([p[0] for p in parts], axis=0)
    sums_s = np.sum([p[1] for p in parts], axis=0)
    return {
        "X": _moment_estimate(times, sums_x, pivot_x, n_paths),
        "log_S": _moment_estimate(times, sums_s, pivot_log_s, n_paths),
    }
