"""Targeted node removal, LSCC tracking and the critical-fraction fit."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .components import lscc_size
from .graph import FirmGraph

ORDERS = ("sales", "degree")


class FitError(ValueError):
    """The sweep has no usable collapse region."""


@dataclass(frozen=True)
class RemovalSweep:
    order: str            # "sales" or "degree"
    f: np.ndarray         # removed fraction, strictly increasing
    Q: np.ndarray         # LSCC size / n
    removal: np.ndarray   # node indices in removal order
    n_removed: np.ndarray  # nodes removed at each point

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["f", "Q"])
            for f, q in zip(self.f, self.Q):
                w.writerow([repr(float(f)), repr(float(q))])


@dataclass(frozen=True)
class CriticalFit:
    f_c: float
    exponent: float
    fit_window: tuple[float, float]
    residual: float
    n_points: int

    def to_dict(self) -> dict:
        return {"f_c": self.f_c, "exponent": self.exponent,
                "fit_window": list(self.fit_window), "residual": self.residual,
                "n_points": self.n_points}


def removal_order(graph: FirmGraph, order: str = "sales") -> np.ndarray:
    """Node indices sorted by descending sales or total degree; ties by id."""
    if order == "sales":
        key = graph.sales
    elif order == "degree":
        key = graph.out_degree() + graph.in_degree()
    else:
        raise ValueError(f"unknown removal order {order!r}; expected one of {ORDERS}")
    # lexsort is stable and node index order equals id order
    return np.lexsort((np.arange(graph.n), -np.asarray(key, dtype=float)))


def removal_sweep(graph: FirmGraph, order: str = "sales", step: float = 0.002,
                  min_cluster: int = 2) -> RemovalSweep:
    """Remove nodes in descending order and record (f, Q) every ``step`` of f.

    Degrees are taken from the intact graph, so the order is fixed up front.
    A lone firm trades with nobody, so clusters smaller than ``min_cluster``
    count as Q = 0.
    """
    if not 0 < step <= 1:
        raise ValueError("step must lie in (0, 1]")
    n = graph.n
    seq = removal_order(graph, order)
    if n == 0:
        z = np.zeros(1)
        return RemovalSweep(order, z, z.copy(), seq, np.zeros(1, dtype=np.int64))
    n_steps = int(np.ceil(1.0 / step - 1e-9))
    ks = np.unique(np.minimum(np.round(np.arange(n_steps + 1) * step * n), n).astype(np.int64))
    if ks[-1] != n:
        ks = np.append(ks, n)
    active = np.ones(n, dtype=bool)
    Q = np.empty(len(ks))
    done = 0
    for j, k in enumerate(ks):
        active[seq[done:k]] = False
        done = k
        size = lscc_size(graph, active)
        Q[j] = size / n if size >= min_cluster else 0.0
    return RemovalSweep(order, ks / n, Q, seq, ks)


def fit_fc(sweep: RemovalSweep, window: tuple[float, float] = (0.01, 0.5),
           floor: float | None = None) -> CriticalFit:
    """Fit ``Q ~ (f_c - f)**beta`` near the collapse.

    Points with ``Q/Q(0)`` inside ``window`` are used. Candidate f_c values run
    over the sweep grid from just past the last window point up to the first
    point where ``Q/Q(0)`` drops under ``floor`` (defaults to the window's lower
    edge); the candidate with the smallest RMS log residual wins.
    """
    lo, hi = window
    floor = lo if floor is None else floor
    f = np.asarray(sweep.f, dtype=float)
    Q = np.asarray(sweep.Q, dtype=float)
    if len(Q) == 0 or Q[0] <= 0:
        raise FitError("intact graph has an empty LSCC")
    rel = Q / Q[0]
    below = np.flatnonzero(rel < floor)
    if len(below) == 0:
        raise FitError("Q never collapses below the fit floor")
    first_below = below[0]
    in_win = np.flatnonzero((rel >= lo) & (rel <= hi))
    in_win = in_win[in_win < first_below]
    if len(in_win) < 3:
        raise FitError(f"only {len(in_win)} sweep points inside the fit window")
    fw, lq = f[in_win], np.log(Q[in_win])
    best = None
    for c in range(in_win[-1] + 1, first_below + 1):
        x = np.log(f[c] - fw)
        A = np.column_stack([x, np.ones_like(x)])
        coef, *_ = np.linalg.lstsq(A, lq, rcond=None)
        rms = float(np.sqrt(np.mean((A @ coef - lq) ** 2)))
        if best is None or rms < best[0]:
            best = (rms, float(f[c]), float(coef[0]))
    rms, f_c, beta = best
    if not 0 < f_c < 1:
        raise FitError(f"fitted f_c={f_c} outside (0, 1)")
    return CriticalFit(f_c, beta, (float(fw[0]), float(fw[-1])), rms, len(in_win))
