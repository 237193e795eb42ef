"""path generation for the delayed confidence / price system.

P is simulated exactly (gbm log-increments) on a grid that also contains every
lagged time t_k - tau. given the P path, log S over a step is gaussian with
variance sigma_S^2 * I_k where I_k is the trapezoidal integral of P_{u-tau} over
the step, so S needs no euler discretisation.

paths are produced in fixed-size blocks; block b draws from its own Philox
stream spawned from the master seed, so a path's numbers depend only on
(seed, path index) and never on how many workers run the blocks.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Dict, Iterator, Optional, Sequence, TypeVar

import numpy as np
from scipy.integrate import trapezoid
from scipy.stats import norm

from .errors import (
    DegenerateSample,
    GridTooCoarse,
    MeasureRequiresZeroRho,
    PricerError,
    TimeBeyondHorizon,
    TooFewSamples,
)
from .models import Measure, ModelParams, RatesCurve

logger = logging.getLogger(__name__)

BLOCK_SIZE = 1024
DEFAULT_MAX_STEP = 1.0 / 2520.0
_SNAP = 1e-11

T = TypeVar("T")


@dataclass(frozen=True, eq=False)
class TimeGrid:
    times: np.ndarray
    step: float

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        if times.ndim != 1 or len(times) < 2:
            raise PricerError("a time grid needs at least two points")
        if times[0] != 0.0 or np.any(np.diff(times) <= 0.0):
            raise PricerError("grid times must start at 0 and increase strictly")
        object.__setattr__(self, "times", times)

    @classmethod
    def uniform(cls, horizon: float, step: float) -> "TimeGrid":
        n = max(1, math.ceil(horizon / step - 1e-9))
        return cls(np.linspace(0.0, horizon, n + 1), horizon / n)

    @classmethod
    def for_delay(cls, horizon: float, tau: float, max_step: Optional[float] = None) -> "TimeGrid":
        """uniform grid whose step divides tau, so lagged times land on grid points"""
        max_step = min(tau, DEFAULT_MAX_STEP) if max_step is None else min(tau, max_step)
        step = tau / math.ceil(tau / max_step - 1e-9)
        n = max(1, math.ceil(horizon / step - 1e-9))
        times = step * np.arange(n + 1, dtype=float)
        times[-1] = horizon
        return cls(times, step)

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    @property
    def max_step(self) -> float:
        return float(np.max(np.diff(self.times)))


@dataclass(frozen=True)
class SeedRecord:
    """where a bundle's paths sit in the master stream"""

    seed: int
    block_size: int
    first_path: int
    n_paths: int


@dataclass(eq=False)
class PathBundle:
    """a batch of simulated paths; row i is path seed.first_path + i"""

    grid: TimeGrid
    P: np.ndarray
    S: np.ndarray
    X: np.ndarray
    P_lag: np.ndarray
    seed: SeedRecord
    measure: Measure
    dW: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return self.S.shape[0]

    @property
    def terminal_S(self) -> np.ndarray:
        return self.S[:, -1]

    @classmethod
    def concat(cls, parts: Sequence["PathBundle"]) -> "PathBundle":
        first = parts[0]
        keep = all(p.dW is not None for p in parts)
        return cls(
            grid=first.grid,
            P=np.concatenate([p.P for p in parts]),
            S=np.concatenate([p.S for p in parts]),
            X=np.concatenate([p.X for p in parts]),
            P_lag=np.concatenate([p.P_lag for p in parts]),
            seed=SeedRecord(first.seed.seed, first.seed.block_size, first.seed.first_path, sum(len(p) for p in parts)),
            measure=first.measure,
            dW=np.concatenate([p.dW for p in parts]) if keep else None,
        )


# step plan -------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class _StepPlan:
    merged: np.ndarray       # P grid: grid times plus positive lagged times
    merged_dt: np.ndarray
    main_idx: np.ndarray     # grid times inside merged
    lag_idx: np.ndarray      # lagged grid time inside merged (0 where lag <= 0)
    lag_phi: np.ndarray      # phi(lag) where lag <= 0, nan elsewhere
    head_part: np.ndarray    # exact phi integral of the negative-lag part of each step
    pos_len: np.ndarray      # length of the positive-lag part of each step
    pos_lo: np.ndarray
    pos_hi: np.ndarray
    dt: np.ndarray
    rate_int: np.ndarray


def _plan(params: ModelParams, rates: RatesCurve, grid: TimeGrid) -> _StepPlan:
    times = grid.times
    tol = _SNAP * max(grid.horizon, 1.0)
    lag = times - params.tau
    # snap lagged times onto grid points they coincide with up to rounding
    pos_near = np.clip(np.searchsorted(times, lag), 0, len(times) - 1)
    for cand in (pos_near, np.clip(pos_near - 1, 0, len(times) - 1)):
        close = np.abs(times[cand] - lag) <= tol
        lag = np.where(close, times[cand], lag)
    lag = np.where(np.abs(lag) <= tol, 0.0, lag)

    merged = np.union1d(times, lag[lag > 0.0])
    main_idx = np.searchsorted(merged, times)
    lag_idx = np.where(lag > 0.0, np.searchsorted(merged, np.maximum(lag, 0.0)), 0)

    phi = params.confidence.phi
    lag_phi = np.where(lag <= 0.0, phi(np.minimum(lag, 0.0)), np.nan)

    a, b = lag[:-1], lag[1:]
    head_part = np.array([phi.integral(min(x, 0.0), min(y, 0.0)) for x, y in zip(a, b)])
    pos_len = np.maximum(b, 0.0) - np.maximum(a, 0.0)
    pos_lo = np.where(a > 0.0, lag_idx[:-1], 0)
    pos_hi = np.where(b > 0.0, lag_idx[1:], 0)
    rate_int = np.array([rates.integral(x, y) for x, y in zip(times[:-1], times[1:])])
    return _StepPlan(
        merged=merged,
        merged_dt=np.diff(merged),
        main_idx=main_idx,
        lag_idx=lag_idx,
        lag_phi=lag_phi,
        head_part=head_part,
        pos_len=pos_len,
        pos_lo=pos_lo,
        pos_hi=pos_hi,
        dt=np.diff(times),
        rate_int=rate_int,
    )


def _simulate_block(
    plan: _StepPlan,
    params: ModelParams,
    grid: TimeGrid,
    measure: Measure,
    record: SeedRecord,
    stream: np.random.SeedSequence,
    keep_increments: bool,
) -> PathBundle:
    conf = params.confidence
    rng = np.random.Generator(np.random.Philox(stream))
    size, n_sub = record.n_paths, len(plan.merged_dt)
    w = rng.standard_normal((size, n_sub))
    w_perp = rng.standard_normal((size, n_sub))

    # Z is drawn first so a shared seed gives the same confidence path for every rho
    sqrt_dt = np.sqrt(plan.merged_dt)
    dZ_sub = sqrt_dt * w
    dW_sub = sqrt_dt * (params.rho * w + math.sqrt(1.0 - params.rho ** 2) * w_perp)

    log_inc = (conf.mu_P - 0.5 * conf.sigma_P ** 2) * plan.merged_dt + conf.sigma_P * dZ_sub
    log_P = np.zeros((size, n_sub + 1))
    log_P[:, 1:] = np.cumsum(log_inc, axis=1)
    P_merged = conf.p0 * np.exp(log_P)

    I = plan.head_part + plan.pos_len * 0.5 * (P_merged[:, plan.pos_lo] + P_merged[:, plan.pos_hi])
    dW = np.add.reduceat(dW_sub, plan.main_idx[:-1], axis=1)

    sig2 = params.sigma_S ** 2
    if measure == Measure.MINIMAL_MARTINGALE:
        drift = plan.rate_int - 0.5 * sig2 * I
    else:
        drift = (params.mu_S - 0.5 * sig2) * I
    d_log_S = drift + params.sigma_S * np.sqrt(I / plan.dt) * dW

    log_S = np.zeros((size, len(grid.times)))
    log_S[:, 1:] = np.cumsum(d_log_S, axis=1)
    S = params.s0 * np.exp(log_S)
    X = np.zeros_like(S)
    X[:, 1:] = np.cumsum(I, axis=1)

    P_lag = np.where(np.isnan(plan.lag_phi), P_merged[:, plan.lag_idx], plan.lag_phi)
    return PathBundle(
        grid=grid,
        P=P_merged[:, plan.main_idx],
        S=S,
        X=X,
        P_lag=P_lag,
        seed=record,
        measure=measure,
        dW=dW if keep_increments else None,
    )


# public api ------------------------------------------------------------------

def _check(params: ModelParams, grid: TimeGrid, measure: Measure, n_paths: int) -> None:
    if n_paths < 1:
        raise TooFewSamples("n_paths must be at least 1")
    if grid.max_step > params.tau * (1.0 + 1e-9):
        raise GridTooCoarse(f"grid step {grid.max_step:g} exceeds the delay tau={params.tau:g}")
    if measure == Measure.MINIMAL_MARTINGALE and params.rho != 0.0:
        raise MeasureRequiresZeroRho("the minimal martingale measure is only used with rho = 0")


def map_blocks(
    params: ModelParams,
    rates: RatesCurve,
    grid: TimeGrid,
    n_paths: int,
    seed: int,
    measure: Measure,
    reducer: Callable[[PathBundle], T],
    *,
    keep_increments: bool = False,
    workers: int = 1,
    block_size: int = BLOCK_SIZE,
) -> Iterator[T]:
    """simulate block by block and yield reducer(block) in path order"""
    measure = Measure(measure)
    _check(params, grid, measure, n_paths)
    plan = _plan(params, rates, grid)
    n_blocks = math.ceil(n_paths / block_size)
    streams = np.random.SeedSequence(seed).spawn(n_blocks)
    logger.debug(
        "simulating %d paths in %d blocks on %d grid points (%d with lags), measure=%s",
        n_paths, n_blocks, len(grid.times), len(plan.merged), measure.value,
    )

    def job(b: int) -> T:
        first = b * block_size
        record = SeedRecord(seed, block_size, first, min(block_size, n_paths - first))
        return reducer(_simulate_block(plan, params, grid, measure, record, streams[b], keep_increments))

    if workers <= 1:
        for b in range(n_blocks):
            yield job(b)
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        yield from pool.map(job, range(n_blocks))


def simulate_paths(
    params: ModelParams,
    rates: RatesCurve,
    grid: TimeGrid,
    n_paths: int,
    seed: int,
    measure: Measure = Measure.PHYSICAL,
    *,
    keep_increments: bool = True,
    workers: int = 1,
) -> PathBundle:
    blocks = list(
        map_blocks(params, rates, grid, n_paths, seed, measure, lambda b: b, keep_increments=keep_increments, workers=workers)
    )
    return PathBundle.concat(blocks)


def integrated_info(params: ModelParams, times: Sequence[float], P: Sequence[float], t: float) -> float:
    """X_t = int_0^t P_{u-tau} du along one sampled confidence path"""
    times = np.asarray(times, dtype=float)
    P = np.asarray(P, dtype=float)
    if t < 0.0 or t > times[-1] * (1.0 + 1e-12):
        raise TimeBeyondHorizon(f"t={t:g} outside the path horizon [0, {times[-1]:g}]")
    phi, tau = params.confidence.phi, params.tau
    if t <= tau:
        return phi.integral(-tau, t - tau)
    end = t - tau
    inner = times < end
    pts = np.concatenate((times[inner], [end]))
    vals = np.concatenate((P[inner], [np.interp(end, times, P)]))
    return phi.integral(-tau, 0.0) + float(trapezoid(vals, pts))


def long_rows(bundle: PathBundle, **labels) -> Iterator[Dict[str, object]]:
    # one row per (path, grid point) for csv export
    times = bundle.grid.times
    for i in range(len(bundle)):
        path_id = bundle.seed.first_path + i
        for k, t in enumerate(times):
            yield {
                **labels,
                "path_id": path_id,
                "t": t,
                "P": bundle.P[i, k],
                "S": bundle.S[i, k],
                "X": bundle.X[i, k],
            }


# kernel density ----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DensityCurve:
    x: np.ndarray
    f: np.ndarray
    bandwidth: float


def silverman_bandwidth(samples: np.ndarray) -> float:
    samples = np.asarray(samples, dtype=float)
    spread = float(np.std(samples, ddof=1))
    if spread == 0.0:
        raise DegenerateSample("samples have zero variance; the automatic bandwidth is undefined")
    return 1.06 * spread * len(samples) ** (-0.2)


def kde_density(
    samples: Sequence[float],
    bandwidth: Optional[float] = None,
    n_points: int = 512,
) -> DensityCurve:
    samples = np.asarray(samples, dtype=float).ravel()
    if len(samples) < 2:
        raise TooFewSamples("a kernel density needs at least two samples")
    h = silverman_bandwidth(samples) if bandwidth is None else float(bandwidth)
    if h <= 0.0:
        raise DegenerateSample("bandwidth must be positive")
    lo, hi = samples.min() - 4.0 * h, samples.max() + 4.0 * h
    # keep at least four abscissae per bandwidth so the trapezoid mass stays within 1e-3
    n_points = int(min(max(n_points, math.ceil((hi - lo) / (h / 4.0)) + 1), 1 << 16))
    x = np.linspace(lo, hi, n_points)
    f = np.empty_like(x)
    chunk = max(1, 4_000_000 // len(samples))
    for start in range(0, n_points, chunk):
        xs = x[start:start + chunk, None]
        f[start:start + chunk] = norm.pdf((xs - samples[None, :]) / h).sum(axis=1)
    f /= len(samples) * h
    return DensityCurve(x=x, f=f, bandwidth=h)
