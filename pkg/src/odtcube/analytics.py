"""Series-level analyses: monthly mobility change rates against a baseline
month and Pearson correlation between a flow series and an external daily
indicator (for example confirmed case counts).
"""
from __future__ import annotations

import csv
import datetime as dt
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .queries import DailySeries

__all__ = [
    "AnalyticsError",
    "ChangeRateReport",
    "AlignedSeriesPair",
    "mobility_change_rate",
    "pearson_correlation",
    "read_indicator_csv",
    "align_series",
]


class AnalyticsError(ValueError):
    """Raised for undefined analytics (zero baseline, constant series)."""


def _month_key(day: dt.date) -> str:
    return f"{day.year:04d}-{day.month:02d}"


def _days_in_month(year: int, month: int) -> int:
    nxt = dt.date(year + month // 12, month % 12 + 1, 1)
    return (nxt - dt.date(year, month, 1)).days


@dataclass(frozen=True)
class ChangeRateReport:
    """Per-month flow change relative to a baseline month's total."""

    place: str
    baseline_month: str  # YYYY-MM
    rates: dict[str, float]
    partial_months: frozenset[str] = frozenset()


def mobility_change_rate(
    series: DailySeries, baseline_month: str, include_partial: bool = False
) -> ChangeRateReport:
    """Rate_i = (M_i - M_baseline) / M_baseline with M_i the month-i sum.

    Months not fully covered by the series are excluded unless
    ``include_partial`` is set, in which case they are reported and flagged.
    The baseline month must be fully covered and have a nonzero total.
    """
    if not series.points:
        raise AnalyticsError("empty series")
    sums: dict[str, int] = {}
    day_counts: dict[str, int] = {}
    for day, n in series.points:
        key = _month_key(day)
        sums[key] = sums.get(key, 0) + n
        day_counts[key] = day_counts.get(key, 0) + 1
    complete = {
        key for key, cnt in day_counts.items()
        if cnt == _days_in_month(int(key[:4]), int(key[5:7]))
    }
    if baseline_month not in sums or baseline_month not in complete:
        raise AnalyticsError(f"series does not cover baseline month {baseline_month}")
    m_base = sums[baseline_month]
    if m_base == 0:
        raise AnalyticsError(f"baseline month {baseline_month} has zero total flow")
    months = sorted(complete | (set(sums) if include_partial else set()))
    rates = {key: (sums[key] - m_base) / m_base for key in months}
    return ChangeRateReport(
        series.place, baseline_month, rates,
        frozenset(set(months) - complete),
    )


@dataclass(frozen=True)
class AlignedSeriesPair:
    """Two equal-length daily series joined on exact dates."""

    dates: tuple[dt.date, ...]
    x: tuple[float, ...]
    y: tuple[float, ...]

    def __post_init__(self) -> None:
        if not (len(self.dates) == len(self.x) == len(self.y)):
            raise AnalyticsError("aligned series lengths differ")
        for a, b in zip(self.dates, self.dates[1:]):
            if b <= a:
                raise AnalyticsError("aligned series dates must strictly increase")


def pearson_correlation(pair: AlignedSeriesPair) -> float:
    """Product-moment correlation coefficient of the pair."""
    n = len(pair.x)
    if n < 2:
        raise AnalyticsError("correlation requires at least two points")
    mx = math.fsum(pair.x) / n
    my = math.fsum(pair.y) / n
    sxy = math.fsum((a - mx) * (b - my) for a, b in zip(pair.x, pair.y))
    sxx = math.fsum((a - mx) ** 2 for a in pair.x)
    syy = math.fsum((b - my) ** 2 for b in pair.y)
    if sxx == 0 or syy == 0:
        raise AnalyticsError("correlation undefined for a constant series")
    r = sxy / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def read_indicator_csv(path: str) -> dict[dt.date, float]:
    """Read a two-column indicator CSV with header ``date,value``."""
    out: dict[dt.date, float] = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"date", "value"}.issubset(reader.fieldnames):
            raise AnalyticsError(f"{path}: expected columns date,value")
        for row in reader:
            out[dt.date.fromisoformat(row["date"].strip())] = float(row["value"])
    return out


def align_series(series: DailySeries, indicator: dict[dt.date, float]) -> AlignedSeriesPair:
    """Exact-date inner join of a flow series with an indicator series."""
    dates = [d for d, _ in series.points if d in indicator]
    return AlignedSeriesPair(
        tuple(dates),
        tuple(float(n) for d, n in series.points if d in indicator),
        tuple(indicator[d] for d in dates),
    )
