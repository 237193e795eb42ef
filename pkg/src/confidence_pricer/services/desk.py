from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Iterator, List, Tuple

import numpy as np

from ..approx_dist import HeadConvention, levy_fit, log_average_pdf
from ..config import DayCount, RunConfig
from ..errors import ConfigError
from ..mc_oracle import compare, mc_moments, mc_price_many
from ..models import Measure, ModelParams, OptionKind, OptionSpec, validate
from ..moments import mean_X, moments_log_S, var_X
from ..pricing import PriceResult, QuadratureSettings, price
from ..simulation import PathBundle, TimeGrid, kde_density, long_rows, simulate_paths
from ..storage.base import ResultSink

logger = logging.getLogger(__name__)

PRICE_HEADER = ["kind", "K", "T", "tau", "P0", "price", "q1", "q2", "err_estimate"]
TABLE_HEADER = ["table", "P0", "T", "tau", "K", "price", "published", "abs_diff_published", "mc_price", "mc_se", "abs_diff_mc", "status"]
PATH_HEADER = ["rho", "tau", "path_id", "t", "P", "S", "X"]
DENSITY_HEADER = ["rho", "tau", "x", "f"]
LOGAVG_HEADER = ["rho", "tau", "x", "f", "f_fit"]
MOMENT_HEADER = ["t", "mean_X", "var_X", "mean_log_S", "var_log_S"]
MC_MOMENT_HEADER = [
    "mc_mean_X", "mc_mean_X_se", "mc_var_X", "mc_var_X_se",
    "mc_mean_log_S", "mc_mean_log_S_se", "mc_var_log_S", "mc_var_log_S_se",
]


# built-in tables --------------------------------------------------------------------

TABLE_STRIKES = (400.0, 425.0, 450.0, 475.0, 500.0)


@dataclass(frozen=True)
class TableRow:
    p0: float
    months: int
    weeks: int
    published: Tuple[float, ...]


@dataclass(frozen=True)
class TableDef:
    number: int
    kind: OptionKind
    rows: Tuple[TableRow, ...]


def _by_confidence(values: Tuple[Tuple[float, ...], ...]) -> Tuple[TableRow, ...]:
    return tuple(TableRow(p0, 3, 1, row) for p0, row in zip((10.0, 100.0, 1000.0), values))


def _by_window(values: Tuple[Tuple[float, ...], ...]) -> Tuple[TableRow, ...]:
    windows = ((1, 1), (1, 2), (3, 1), (3, 2))
    return tuple(TableRow(100.0, m, w, row) for (m, w), row in zip(windows, values))


TABLES: Dict[int, TableDef] = {
    1: TableDef(1, OptionKind.VANILLA_CALL, _by_confidence((
        (51.24, 28.35, 11.46, 3.09, 0.54),
        (64.12, 48.05, 34.94, 24.69, 16.97),
        (128.68, 117.75, 107.77, 98.66, 90.35),
    ))),
    2: TableDef(2, OptionKind.VANILLA_CALL, _by_window((
        (52.85, 33.09, 18.27, 8.81, 3.71),
        (51.58, 30.62, 15.18, 6.13, 2.00),
        (64.12, 48.05, 34.94, 24.69, 16.97),
        (62.95, 46.65, 33.42, 23.18, 15.60),
    ))),
    3: TableDef(3, OptionKind.CASH_OR_NOTHING_CALL, _by_confidence((
        (97.17, 82.77, 50.31, 18.87, 4.24),
        (70.07, 58.38, 46.58, 35.66, 26.27),
        (45.70, 41.77, 38.14, 34.79, 31.72),
    ))),
    4: TableDef(4, OptionKind.CASH_OR_NOTHING_CALL, _by_window((
        (86.93, 69.97, 48.27, 28.11, 13.83),
        (91.50, 74.23, 48.69, 24.84, 9.80),
        (70.07, 58.38, 46.58, 35.66, 26.27),
        (71.21, 59.10, 46.77, 35.36, 25.62),
    ))),
}

# market and price parameters shared by every table
TABLE_MARKET = RunConfig(s0=450.0, r=0.01, mu_P=0.03, sigma_P=0.35, sigma_S=0.04, mu_S=1e-5, A=100.0)


# desk --------------------------------------------------------------------------------

class PricingDesk:
    """orchestrates validation, the numerical modules and result persistence"""

    def __init__(self, sink: ResultSink):
        self.sink = sink

    # helpers ----------------------------------------------------------
    def _params(self, config: RunConfig, **overrides) -> ModelParams:
        return validate(config.model_params(**overrides))

    @staticmethod
    def _grid(config: RunConfig, params: ModelParams) -> TimeGrid:
        return TimeGrid.for_delay(config.T, params.tau, config.step)

    # price ------------------------------------------------------------
    def price_rows(self, config: RunConfig) -> List[Dict[str, Any]]:
        params = self._params(config)
        rates = config.rates()
        quad = config.quadrature()
        rows = []
        for spec in config.specs():
            res: PriceResult = price(params, rates, spec, quad, head=config.head)
            rows.append({
                "kind": spec.kind,
                "K": spec.strike,
                "T": spec.maturity,
                "tau": params.tau,
                "P0": params.confidence.p0,
                "price": res.price,
                "q1": res.q1,
                "q2": res.q2,
                "err_estimate": res.quadrature_error_estimate,
            })
        return rows

    def price(self, config: RunConfig) -> Tuple[List[Dict[str, Any]], Path]:
        rows = self.price_rows(config)
        return rows, self.sink.write("price", PRICE_HEADER, rows)

    # tables -----------------------------------------------------------
    def table_rows(
        self,
        which: int,
        *,
        mc_paths: int = 0,
        seed: int = 20180101,
        head: HeadConvention = HeadConvention.SHIFTED,
        days: DayCount = DayCount(),
        quad: QuadratureSettings = QuadratureSettings(),
        workers: int = 1,
    ) -> List[Dict[str, Any]]:
        if which not in TABLES:
            raise ConfigError(f"unknown table {which}; choose one of {sorted(TABLES)}")
        table = TABLES[which]
        base = TABLE_MARKET
        rates = base.rates()
        rows = []
        for row in table.rows:
            T, tau = row.months * days.month, row.weeks * days.week
            params = validate(ModelParams.build(
                mu_P=base.mu_P, sigma_P=base.sigma_P, p0=row.p0, mu_S=base.mu_S,
                sigma_S=base.sigma_S, tau=tau, s0=base.s0,
            ))
            payout = base.A if table.kind == OptionKind.CASH_OR_NOTHING_CALL else None
            specs = [OptionSpec(kind=table.kind, strike=k, maturity=T, payout=payout) for k in TABLE_STRIKES]
            results = [price(params, rates, spec, quad, head=head) for spec in specs]
            estimates = mc_price_many(params, rates, specs, mc_paths, seed, workers=workers) if mc_paths > 0 else [None] * len(specs)
            for spec, res, published, est in zip(specs, results, row.published, estimates):
                rows.append({
                    "table": which,
                    "P0": row.p0,
                    "T": T,
                    "tau": tau,
                    "K": spec.strike,
                    "price": res.price,
                    "published": published,
                    "abs_diff_published": abs(res.price - published),
                    "mc_price": est.mean if est else None,
                    "mc_se": est.std_error if est else None,
                    "abs_diff_mc": abs(res.price - est.mean) if est else None,
                    "status": compare(res.price, est).status if est else None,
                })
        logger.debug("table %d: %d cells", which, len(rows))
        return rows

    def table(self, which: int, **options) -> Tuple[List[Dict[str, Any]], Path]:
        rows = self.table_rows(which, **options)
        return rows, self.sink.write(f"table{which}", TABLE_HEADER, rows)

    # simulation -------------------------------------------------------
    def simulate(self, config: RunConfig) -> Dict[str, Path]:
        if config.n_paths < 1:
            raise ConfigError("simulate needs n_paths >= 1", key="n_paths")
        rhos = config.rhos or (config.rho,)
        taus = config.taus or (config.tau,)
        rates = config.rates()
        path_rows: List[Iterator[Dict[str, Any]]] = []
        density_rows: List[Dict[str, Any]] = []
        logavg_rows: List[Dict[str, Any]] = []
        for tau in taus:
            for rho in rhos:
                params = self._params(config, tau=tau, rho=rho)
                grid = self._grid(config, params)
                # every (rho, tau) pair reuses the seed so paths stay comparable
                bundle = simulate_paths(
                    params, rates, grid, config.n_paths, config.seed, Measure.PHYSICAL,
                    keep_increments=False, workers=config.workers,
                )
                path_rows.append(long_rows(bundle, rho=rho, tau=tau))
                if config.density:
                    curve = kde_density(bundle.terminal_S, config.bandwidth)
                    density_rows.extend({"rho": rho, "tau": tau, "x": x, "f": f} for x, f in zip(curve.x, curve.f))
                if config.logavg:
                    logavg_rows.extend(self._log_average_rows(params, bundle, config.T, rho=rho, tau=tau))
        written = {"paths": self.sink.write("paths", PATH_HEADER, (r for rows in path_rows for r in rows))}
        if config.density:
            written["density"] = self.sink.write("density", DENSITY_HEADER, density_rows)
        if config.logavg:
            written["logavg"] = self.sink.write("logavg", LOGAVG_HEADER, logavg_rows)
        return written

    @staticmethod
    def _log_average_rows(params: ModelParams, bundle: PathBundle, T: float, *, rho: float, tau: float) -> List[Dict[str, Any]]:
        # simulated log(Pbar / u) against the gaussian implied by the moment fit
        approx = levy_fit(params, T)
        pbar = bundle.X[:, -1] - params.head
        curve = kde_density(np.log(pbar / approx.u))
        fitted = log_average_pdf(approx, curve.x)
        return [{"rho": rho, "tau": tau, "x": x, "f": f, "f_fit": g} for x, f, g in zip(curve.x, curve.f, fitted)]

    # moments ----------------------------------------------------------
    def moment_rows(self, config: RunConfig) -> List[Dict[str, Any]]:
        if config.points < 2:
            raise ConfigError("points must be at least 2", key="points")
        params = self._params(config)
        grid = self._grid(config, params)
        idx = np.unique(np.round(np.linspace(0, len(grid.times) - 1, config.points)).astype(int))
        est = None
        if config.n_paths > 0:
            est = mc_moments(params, config.rates(), grid, config.n_paths, config.seed, workers=config.workers)
        rows = []
        for i in idx:
            t = float(grid.times[i])
            log_s = moments_log_S(params, t)
            row: Dict[str, Any] = {
                "t": t,
                "mean_X": mean_X(params, t),
                "var_X": var_X(params, t),
                "mean_log_S": log_s.mean,
                "var_log_S": log_s.variance,
            }
            if est is not None:
                for label, key in (("X", "X"), ("log_S", "log_S")):
                    e = est[key]
                    row[f"mc_mean_{label}"] = e.mean[i]
                    row[f"mc_mean_{label}_se"] = e.mean_se[i]
                    row[f"mc_var_{label}"] = e.variance[i]
                    row[f"mc_var_{label}_se"] = e.variance_se[i]
            rows.append(row)
        return rows

    def moments(self, config: RunConfig) -> Tuple[List[Dict[str, Any]], Path]:
        rows = self.moment_rows(config)
        header = MOMENT_HEADER + (MC_MOMENT_HEADER if config.n_paths > 0 else [])
        return rows, self.sink.write("moments", header, rows)
