from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass, field, fields, replace
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

from .approx_dist import HeadConvention
from .errors import ConfigError
from .models import ModelParams, OptionKind, OptionSpec, RatesCurve
from .pricing import QuadratureRule, QuadratureSettings

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DayCount:
    """year fractions behind the duration suffixes d / w / m / y"""

    day: float = 1.0 / 252.0
    week: float = 5.0 / 252.0
    month: float = 21.0 / 252.0
    year: float = 1.0

    def unit(self, suffix: str) -> float:
        return {"d": self.day, "w": self.week, "m": self.month, "y": self.year}[suffix]


_DURATION = re.compile(r"^\s*(?P<num>[0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?(?:\s*/\s*[0-9]*\.?[0-9]+)?)\s*(?P<unit>[dwmy])?\s*$")


def parse_number(text: str) -> float:
    # plain floats and a/b fractions
    text = text.strip()
    if "/" in text:
        num, den = (part.strip() for part in text.split("/", 1))
        try:
            value = float(Fraction(num) / Fraction(den))
        except (ValueError, ZeroDivisionError):
            raise ValueError(f"not a number: {text!r}")
        return value
    value = float(text)
    if not math.isfinite(value):
        raise ValueError(f"not a finite number: {text!r}")
    return value


def parse_duration(text: str, days: DayCount = DayCount()) -> float:
    """'5d', '1w', '3m', '1y', '5/252' or '0.25' -> year fraction"""
    match = _DURATION.match(text)
    if not match:
        raise ValueError(f"not a duration: {text!r}")
    value = parse_number(match.group("num"))
    unit = match.group("unit")
    return value * days.unit(unit) if unit else value


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_int(text: str) -> int:
    value = parse_number(text)
    if value != int(value):
        raise ValueError(f"not an integer: {text!r}")
    return int(value)


def _split(text: str) -> List[str]:
    items = [item.strip() for item in text.split(",")]
    if not all(items):
        raise ValueError(f"empty entry in list {text!r}")
    return items


# run config ---------------------------------------------------------------------

@dataclass(frozen=True)
class RunConfig:
    """one run: model, market, contract and numerical settings (table-1 defaults)"""

    # model
    mu_S: float = 1e-5
    sigma_S: float = 0.04
    mu_P: float = 0.03
    sigma_P: float = 0.35
    rho: float = 0.0
    tau: float = 5.0 / 252.0
    L: Optional[float] = None
    P0: float = 100.0
    s0: float = 450.0
    # market
    r: float = 0.01
    # contract
    T: float = 63.0 / 252.0
    K: Tuple[float, ...] = (450.0,)
    A: float = 100.0
    kind: OptionKind = OptionKind.VANILLA_CALL
    # run
    n_paths: int = 0
    seed: int = 20180101
    step: Optional[float] = None
    quad_rule: QuadratureRule = QuadratureRule.ADAPTIVE
    n_nodes: int = 128
    rel_tol: float = 1e-8
    head: HeadConvention = HeadConvention.SHIFTED
    rhos: Tuple[float, ...] = ()
    taus: Tuple[float, ...] = ()
    density: bool = False
    logavg: bool = False
    bandwidth: Optional[float] = None
    points: int = 64
    workers: int = 1
    days: DayCount = field(default_factory=DayCount)

    def model_params(self, *, tau: Optional[float] = None, rho: Optional[float] = None) -> ModelParams:
        return ModelParams.build(
            mu_P=self.mu_P,
            sigma_P=self.sigma_P,
            p0=self.P0,
            mu_S=self.mu_S,
            sigma_S=self.sigma_S,
            tau=self.tau if tau is None else tau,
            s0=self.s0,
            rho=self.rho if rho is None else rho,
            L=self.L,
        )

    def rates(self) -> RatesCurve:
        return RatesCurve.flat(self.r)

    def specs(self) -> List[OptionSpec]:
        payout = self.A if self.kind == OptionKind.CASH_OR_NOTHING_CALL else None
        return [OptionSpec(kind=self.kind, strike=k, maturity=self.T, payout=payout) for k in self.K]

    def quadrature(self) -> QuadratureSettings:
        return QuadratureSettings(rule=self.quad_rule, n_nodes=self.n_nodes, rel_tol=self.rel_tol)


def _duration(days: DayCount) -> Callable[[str], float]:
    return lambda text: parse_duration(text, days)


def _parsers(days: DayCount) -> Dict[str, Callable[[str], Any]]:
    dur = _duration(days)
    return {
        "mu_S": parse_number,
        "sigma_S": parse_number,
        "mu_P": parse_number,
        "sigma_P": parse_number,
        "rho": parse_number,
        "tau": dur,
        "L": dur,
        "P0": parse_number,
        "s0": parse_number,
        "r": parse_number,
        "T": dur,
        "K": lambda text: tuple(parse_number(x) for x in _split(text)),
        "A": parse_number,
        "kind": OptionKind,
        "n_paths": _parse_int,
        "seed": _parse_int,
        "step": dur,
        "quad_rule": QuadratureRule,
        "n_nodes": _parse_int,
        "rel_tol": parse_number,
        "head": HeadConvention,
        "rhos": lambda text: tuple(parse_number(x) for x in _split(text)),
        "taus": lambda text: tuple(dur(x) for x in _split(text)),
        "density": _parse_bool,
        "logavg": _parse_bool,
        "bandwidth": parse_number,
        "points": _parse_int,
        "workers": _parse_int,
    }


_DAY_KEYS = ("day", "week", "month", "year")


def _entries(text: str) -> List[Tuple[int, str, str]]:
    entries: List[Tuple[int, str, str]] = []
    seen: Dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", line=lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if not key or not value:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", line=lineno, key=key or None)
        if key in seen:
            raise ConfigError(f"duplicate key {key!r} (first set on line {seen[key]})", line=lineno, key=key)
        seen[key] = lineno
        entries.append((lineno, key, value))
    return entries


def parse_config(text: str, base: Optional[RunConfig] = None) -> RunConfig:
    """strict parse of a key = value file; unknown keys and bad values are errors"""
    base = base or RunConfig()
    entries = _entries(text)

    # day-count keys first, they define what the duration suffixes mean
    day_values: Dict[str, float] = {}
    for lineno, key, value in entries:
        if key in _DAY_KEYS:
            try:
                day_values[key] = parse_number(value)
            except ValueError as e:
                raise ConfigError(f"{key}: {e}", line=lineno, key=key)
            if day_values[key] <= 0.0:
                raise ConfigError(f"{key} must be positive", line=lineno, key=key)
    days = replace(base.days, **day_values)

    parsers = _parsers(days)
    known = {f.name for f in fields(RunConfig)}
    values: Dict[str, Any] = {}
    for lineno, key, value in entries:
        if key in _DAY_KEYS:
            continue
        if key not in parsers or key not in known:
            raise ConfigError(f"unknown key {key!r}", line=lineno, key=key)
        try:
            values[key] = parsers[key](value)
        except ValueError as e:
            raise ConfigError(f"{key}: {e}", line=lineno, key=key)

    config = replace(base, days=days, **values)
    logger.debug("parsed %d config entries", len(entries))
    return config


def load_config(path: Path | str, base: Optional[RunConfig] = None) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e.strerror or e}")
    return parse_config(text, base)
