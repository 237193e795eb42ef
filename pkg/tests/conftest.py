import pytest

from confidence_pricer.models import ModelParams, RatesCurve

WEEK = 5 / 252
QUARTER = 63 / 252


@pytest.fixture
def table1_params() -> ModelParams:
    # parameters behind the published call table, P0 = 100
    return ModelParams.build(mu_P=0.03, sigma_P=0.35, p0=100.0, mu_S=1e-5, sigma_S=0.04, tau=WEEK, s0=450.0)


@pytest.fixture
def flat_rates() -> RatesCurve:
    return RatesCurve.flat(0.01)


@pytest.fixture
def zero_rates() -> RatesCurve:
    return RatesCurve.flat(0.0)
