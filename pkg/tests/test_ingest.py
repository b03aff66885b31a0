import numpy as np
import pandas as pd
import pytest

from tailgini.errors import DataFormatError, InvalidSampleError
from tailgini.ingest import PriceSeries, align_losses, read_prices, summary_stats, weekly_losses


def _prices(dates, closes, ticker="TEST"):
    return PriceSeries(ticker, pd.DatetimeIndex(pd.to_datetime(dates)), np.asarray(closes, dtype=float))


def test_loss_is_minus_the_weekly_return_in_percent():
    # Friday 2024-01-05 and Friday 2024-01-12 sit in consecutive ISO weeks
    losses = weekly_losses(_prices(["2024-01-05", "2024-01-12"], [100.0, 95.0]))
    assert losses.losses.tolist() == pytest.approx([5.0])
    gains = weekly_losses(_prices(["2024-01-05", "2024-01-12"], [100.0, 110.0]))
    assert gains.losses.tolist() == pytest.approx([-10.0])


def test_last_close_of_each_week_is_used():
    series = _prices(["2024-01-01", "2024-01-05", "2024-01-08", "2024-01-12"], [50.0, 100.0, 70.0, 120.0])
    losses = weekly_losses(series)
    assert losses.losses.tolist() == pytest.approx([-20.0])
    assert losses.iso_weeks == ((2024, 2),)


def test_missing_weeks_are_counted_as_gaps():
    series = _prices(["2024-01-05", "2024-01-12", "2024-02-02"], [100.0, 100.0, 90.0])
    losses = weekly_losses(series)
    assert losses.gaps == 2
    assert losses.n == 2
    assert losses.losses[-1] == pytest.approx(10.0)


def test_iso_weeks_cross_the_year_boundary():
    # 2020-12-31 is in ISO week 53 of 2020, 2021-01-04 in week 1 of 2021
    losses = weekly_losses(_prices(["2020-12-31", "2021-01-04"], [100.0, 101.0]))
    assert losses.gaps == 0
    assert losses.iso_weeks == ((2021, 1),)


def test_one_week_is_not_enough():
    with pytest.raises(InvalidSampleError, match="2 weeks"):
        weekly_losses(_prices(["2024-01-01", "2024-01-02"], [1.0, 2.0]))


def test_non_positive_price_is_rejected():
    with pytest.raises(InvalidSampleError, match="2024-01-12"):
        _prices(["2024-01-05", "2024-01-12"], [100.0, 0.0])


def test_dates_must_increase():
    with pytest.raises(InvalidSampleError, match="increasing"):
        _prices(["2024-01-12", "2024-01-05"], [100.0, 99.0])


def test_thirty_years_of_weekly_data(rng, random_walk_prices):
    dates, closes = random_walk_prices(rng, "1990-01-01", weeks=1566)
    losses = weekly_losses(_prices(dates, closes))
    assert losses.n == 1565
    assert losses.gaps == 0


def test_summary_statistics():
    assert summary_stats(np.array([1.0, -1.0])) == pytest.approx((0.0, np.sqrt(2.0)))
    assert summary_stats(np.full(5, 2.5)) == (2.5, 0.0)


def test_summary_statistics_recover_generator(rng):
    mean, sd = summary_stats(rng.normal(-0.16, 3.11, 1565))
    assert mean == pytest.approx(-0.16, abs=0.25)
    assert sd == pytest.approx(3.11, rel=0.06)


def test_read_prices_uses_file_stem_as_ticker(write_prices):
    path = write_prices("HSBC", ["2024-01-05", "2024-01-12"], [100.0, 95.0])
    series = read_prices(path)
    assert series.ticker == "HSBC"
    assert series.closes.tolist() == [100.0, 95.0]


def test_read_prices_requires_the_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("day,price\n2024-01-05,1\n")
    with pytest.raises(DataFormatError, match="date,close"):
        read_prices(path)


def test_read_prices_rejects_unparseable_close(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("date,close\n2024-01-05,abc\n")
    with pytest.raises(DataFormatError):
        read_prices(path)


def test_align_losses_keeps_common_weeks_only():
    stock = weekly_losses(_prices(["2024-01-05", "2024-01-12", "2024-01-19", "2024-01-26"], [10.0, 9.0, 9.9, 9.0], "S"))
    index = weekly_losses(_prices(["2024-01-12", "2024-01-19", "2024-01-26"], [100.0, 110.0, 99.0], "I"))
    sample = align_losses(stock, index)
    assert sample.n == 2
    assert sample.x.tolist() == pytest.approx([-10.0, 100 * (1 - 9.0 / 9.9)])
    assert sample.y.tolist() == pytest.approx([-10.0, 10.0])
