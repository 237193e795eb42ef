from __future__ import annotations

from typing import Iterable, List, Optional


class PricerError(ValueError):
    """root of every error raised by the package"""


# precondition / usage errors (cli exit code 2) ----------------------------

class ValidationError(PricerError):
    """parameter set violates one or more model invariants"""

    def __init__(self, issues: Iterable[object]):
        self.issues: List[object] = list(issues)
        names = ", ".join(str(getattr(i, "value", i)) for i in self.issues)
        super().__init__(f"invalid parameters: {names}")


class ConfigError(PricerError):
    """malformed or unknown entry in a run config file"""

    def __init__(self, message: str, line: Optional[int] = None, key: Optional[str] = None):
        self.line = line
        self.key = key
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


class TimeOutsideHistory(PricerError):
    pass


class TimeOutOfRange(PricerError):
    pass


class TimeBeyondHorizon(PricerError):
    pass


class GridTooCoarse(PricerError):
    pass


class MeasureRequiresZeroRho(PricerError):
    pass


class WindowTooShort(PricerError):
    pass


class NonPositiveArgument(PricerError):
    pass


class MissingIncrements(PricerError):
    pass


# numerical failures (cli exit code 3) ---------------------------------------

class NumericalError(PricerError):
    """a computation could not produce a trustworthy number"""


class QuadratureNotConverged(NumericalError):
    pass


class PayoffNotIntegrable(NumericalError):
    pass


class DegenerateDenominator(NumericalError):
    pass


class TooFewSamples(NumericalError):
    pass


class DegenerateSample(NumericalError):
    pass
