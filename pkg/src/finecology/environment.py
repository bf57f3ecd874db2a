"""Loan environment: base-rate series, cluster default risk and loan prices.

The relative performance ``q`` of loan cluster ``ls`` is the upper tail of a
log-normal distribution evaluated at ``5 * (n + 1 - ls) / n``; its location
``mu`` follows the base rate through ``mu = ln(1 + ir) * c``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

N_CLUSTERS = 41


class RateDataError(ValueError):
    """Raised when a base-rate file is malformed or does not cover the horizon."""


def compute_mu(ir: float, c: float = 2.71) -> float:
    if ir <= -1.0:
        raise ValueError(f"base rate must exceed -1, got {ir}")
    return math.log(ir + 1.0) * c


def compute_cluster_q(ls: int, mu: float, sigma2: float = 0.5, n_clusters: int = N_CLUSTERS) -> float:
    """Relative performance of cluster ``ls`` (1-based) for location ``mu``."""
    if not 1 <= ls <= n_clusters:
        raise IndexError(f"cluster index {ls} outside 1..{n_clusters}")
    x = math.log(5.0 * (n_clusters + 1 - ls) / n_clusters)
    return 0.5 * math.erfc((x - mu) / math.sqrt(2.0 * sigma2))


def cluster_q_vector(mu: float, sigma2: float = 0.5, n_clusters: int = N_CLUSTERS) -> np.ndarray:
    """``compute_cluster_q`` for every cluster, index 0 holding ``ls = 1``."""
    return np.array([compute_cluster_q(ls, mu, sigma2, n_clusters) for ls in range(1, n_clusters + 1)])


def price_cluster(q, pr: float = 0.03, vol: float = 0.20):
    """Loan price ``(pr + q)(1 + vol)``; accepts scalars or arrays."""
    return (pr + q) * (1.0 + vol)


def month_index(label: str) -> int:
    """Months since 0000-01 for a ``YYYY-MM`` label."""
    try:
        year, month = label.strip().split("-")
        y, m = int(year), int(month)
    except ValueError as exc:
        raise RateDataError(f"bad month label {label!r}") from exc
    if not 1 <= m <= 12:
        raise RateDataError(f"bad month label {label!r}")
    return y * 12 + (m - 1)


def month_label(index: int) -> str:
    return f"{index // 12:04d}-{index % 12 + 1:02d}"


@dataclass(frozen=True)
class RateSeries:
    """Monthly base rates; ``months`` are absolute month indices."""

    months: np.ndarray
    rates: np.ndarray

    def __post_init__(self):
        if len(self.months) != len(self.rates):
            raise RateDataError("months and rates differ in length")
        if len(self.months) and np.any(np.diff(self.months) <= 0):
            raise RateDataError("month indices must be strictly increasing")
        if np.any(self.rates <= -1.0):
            raise RateDataError("rates must exceed -1")

    def __len__(self) -> int:
        return len(self.months)

    @property
    def labels(self) -> list[str]:
        return [month_label(int(m)) for m in self.months]

    def window(self, start: str, end: str) -> "RateSeries":
        """Contiguous slice ``start..end`` inclusive; every month must be present."""
        lo, hi = month_index(start), month_index(end)
        if hi < lo:
            raise RateDataError(f"end {end} precedes start {start}")
        wanted = np.arange(lo, hi + 1)
        pos = np.searchsorted(self.months, wanted)
        ok = (pos < len(self.months)) & (self.months[np.minimum(pos, len(self.months) - 1)] == wanted)
        if not ok.all():
            missing = month_label(int(wanted[~ok][0]))
            raise RateDataError(f"no base rate for month {missing}")
        return RateSeries(wanted, self.rates[pos].copy())

    def mu(self, c: float = 2.71) -> np.ndarray:
        return np.log(self.rates + 1.0) * c


def load_rates(path: str | Path | None = None) -> RateSeries:
    """Read a ``month,rate`` CSV. ``None`` loads the bundled 1973-2011 series."""
    if path is None:
        text = resources.files("finecology.data").joinpath("us_base_rate_1973_2011.csv").read_text()
        rows = list(csv.reader(text.splitlines()))
        source = "bundled series"
    else:
        try:
            with open(path, newline="") as fh:
                rows = list(csv.reader(fh))
        except OSError as exc:
            raise RateDataError(f"cannot read rates file {path}: {exc}") from exc
        source = str(path)
    if not rows or [h.strip() for h in rows[0]] != ["month", "rate"]:
        raise RateDataError(f"{source}: header must be 'month,rate'")
    months, rates = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or not "".join(row).strip():
            continue
        if len(row) != 2:
            raise RateDataError(f"{source}:{lineno}: expected 2 fields")
        months.append(month_index(row[0]))
        try:
            rates.append(float(row[1]))
        except ValueError as exc:
            raise RateDataError(f"{source}:{lineno}: bad rate {row[1]!r}") from exc
    return RateSeries(np.array(months, dtype=np.int64), np.array(rates, dtype=float))
