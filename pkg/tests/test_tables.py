import pytest

from confidence_pricer.approx_dist import HeadConvention
from confidence_pricer.errors import ConfigError
from confidence_pricer.mc_oracle import AgreementStatus
from confidence_pricer.services import TABLES, PricingDesk
from confidence_pricer.storage import CsvSink

STRIKES = (400.0, 425.0, 450.0, 475.0, 500.0)


@pytest.fixture
def desk(tmp_path):
    return PricingDesk(CsvSink(tmp_path))


def _grid(rows, key):
    # {row key: [price per strike]}
    out = {}
    for row in rows:
        out.setdefault(key(row), []).append(row["price"])
    return out


@pytest.mark.parametrize("which", [1, 2, 3, 4])
def test_tables_reproduce_published_values(desk, which):
    floor = 1.0 if which in (1, 2) else 1.5
    rows = desk.table_rows(which, head=HeadConvention.OMITTED)
    assert len(rows) == 5 * len(TABLES[which].rows)
    for row in rows:
        assert row["abs_diff_published"] <= max(0.05 * row["published"], floor), row
        assert row["mc_price"] is None and row["status"] is None


def test_call_table_by_confidence_level(desk):
    prices = _grid(desk.table_rows(1, head=HeadConvention.OMITTED), lambda r: r["P0"])
    for p0 in (10.0, 100.0, 1000.0):
        assert all(b < a for a, b in zip(prices[p0], prices[p0][1:]))
    for i in range(len(STRIKES)):
        assert prices[10.0][i] < prices[100.0][i] < prices[1000.0][i]


def test_call_table_by_window(desk):
    prices = _grid(desk.table_rows(2, head=HeadConvention.OMITTED), lambda r: (round(r["T"] * 252), round(r["tau"] * 252)))
    one_week, two_weeks = 5, 10
    for i in range(len(STRIKES)):
        # longer delay, shorter random window, cheaper option
        assert prices[(21, two_weeks)][i] < prices[(21, one_week)][i]
        assert prices[(63, two_weeks)][i] < prices[(63, one_week)][i]
        assert prices[(21, one_week)][i] < prices[(63, one_week)][i]
        assert prices[(21, two_weeks)][i] < prices[(63, two_weeks)][i]


def test_binary_table_by_confidence_level(desk):
    prices = _grid(desk.table_rows(3, head=HeadConvention.OMITTED), lambda r: r["P0"])
    for p0 in (10.0, 100.0, 1000.0):
        assert all(b < a for a, b in zip(prices[p0], prices[p0][1:]))
    for i, k in enumerate(STRIKES):
        low, mid, high = prices[10.0][i], prices[100.0][i], prices[1000.0][i]
        if k <= 450.0:
            assert low > mid > high
        elif k == 500.0:
            assert low < mid < high


def test_shifted_head_moves_prices_up(desk):
    omitted = desk.table_rows(1, head=HeadConvention.OMITTED)
    shifted = desk.table_rows(1)
    assert all(s["price"] > o["price"] for s, o in zip(shifted, omitted))


def test_table_with_monte_carlo_columns(desk):
    rows, path = desk.table(3, mc_paths=4000, seed=1)
    assert path.name == "table3.csv"
    for row in rows:
        assert row["mc_price"] is not None and row["mc_se"] >= 0.0
        assert row["abs_diff_mc"] == pytest.approx(abs(row["price"] - row["mc_price"]))
        assert row["status"] is not AgreementStatus.BREAKDOWN


def test_default_table_agrees_with_monte_carlo(desk):
    rows = desk.table_rows(1, mc_paths=10_000, seed=7)
    assert all(row["status"] is not AgreementStatus.BREAKDOWN for row in rows), [
        (row["P0"], row["K"], row["price"], row["mc_price"], row["mc_se"]) for row in rows
    ]


def test_unknown_table(desk):
    with pytest.raises(ConfigError):
        desk.table_rows(5)
