"""Bankruptcy contagion on the undirected trading network."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.stats import kendalltau

from .._kernels import _uniform
from .graph import FirmGraph


@njit(cache=True)
def _cascade(indptr, indices, start, p, seed):
    n = indptr.shape[0] - 1
    removed = np.zeros(n, dtype=np.bool_)
    queue = np.empty(n, dtype=np.int64)
    state = np.empty(1, dtype=np.uint64)
    state[0] = np.uint64(seed)
    removed[start] = True
    queue[0] = start
    head, tail = 0, 1
    # every removed firm gets one shot at each neighbour still standing
    while head < tail:
        v = queue[head]
        head += 1
        for e in range(indptr[v], indptr[v + 1]):
            w = indices[e]
            if not removed[w] and _uniform(state) < p:
                removed[w] = True
                queue[tail] = w
                tail += 1
    return tail


def _trial_seed(seed) -> np.uint64:
    return np.random.SeedSequence(seed).generate_state(1, np.uint64)[0]


def contagion_start(graph: FirmGraph) -> int:
    """The firm with the most trading partners (smallest id on ties)."""
    return int(np.argmax(graph.undirected_degree()))


def contagion_trial(graph: FirmGraph, p: float, seed) -> float:
    """Fraction of firms removed by one cascade started at the best-connected firm."""
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    if graph.n == 0:
        return 0.0
    indptr, indices = graph.undirected_csr
    return _cascade(indptr, indices, contagion_start(graph), float(p), _trial_seed(seed)) / graph.n


@dataclass
class ContagionEstimate:
    p_c: float | None
    unbounded: bool
    trials: int
    spanning_fraction: float
    crossing: float
    grid: list = field(default_factory=list)          # p values probed
    span_prob: list = field(default_factory=list)     # spanning probability per p
    trend_tau: float | None = None
    trend_pvalue: float | None = None

    def to_dict(self) -> dict:
        return {
            "p_c": self.p_c, "unbounded": self.unbounded, "trials": self.trials,
            "spanning_fraction": self.spanning_fraction, "crossing": self.crossing,
            "grid": self.grid, "span_prob": self.span_prob,
            "trend_tau": self.trend_tau, "trend_pvalue": self.trend_pvalue,
        }


def spanning_probability(graph: FirmGraph, p: float, trials: int, seed, spanning_fraction: float = 0.05) -> float:
    hits = 0
    for k in range(trials):
        if contagion_trial(graph, p, [*np.atleast_1d(seed).tolist(), k]) >= spanning_fraction:
            hits += 1
    return hits / trials


def estimate_pc(graph: FirmGraph, p_grid, trials: int = 50, seed: int = 0,
                spanning_fraction: float = 0.05, crossing: float = 0.5,
                bisect_steps: int = 6) -> ContagionEstimate:
    """Smallest p at which cascades span the network with probability >= ``crossing``.

    The grid locates the first crossing, then bisection narrows the bracket.
    A one-sided Kendall trend test of spanning probability against p over the
    grid is reported as a sanity check on monotonicity.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    grid = np.unique(np.asarray(p_grid, dtype=float))
    if len(grid) == 0 or grid[0] < 0 or grid[-1] > 1:
        raise ValueError("p grid must be non-empty and inside [0, 1]")
    probs = []
    for i, p in enumerate(grid):
        probs.append(spanning_probability(graph, p, trials, [seed, 0, i], spanning_fraction))
    est = ContagionEstimate(None, True, trials, spanning_fraction, crossing,
                            grid.tolist(), probs)
    if len(grid) >= 3 and np.ptp(probs) > 0:
        res = kendalltau(grid, probs, alternative="greater")
        est.trend_tau, est.trend_pvalue = float(res[0]), float(res[1])
    hit = [i for i, q in enumerate(probs) if q >= crossing]
    if not hit:
        return est
    i = hit[0]
    est.unbounded = False
    if i == 0:
        est.p_c = float(grid[0])
        return est
    lo, hi = float(grid[i - 1]), float(grid[i])
    for step in range(bisect_steps):
        mid = 0.5 * (lo + hi)
        if spanning_probability(graph, mid, trials, [seed, 1, step], spanning_fraction) >= crossing:
            hi = mid
        else:
            lo = mid
    est.p_c = 0.5 * (lo + hi)
    return est


def parse_grid(text: str) -> np.ndarray:
    """``"a:step:b"`` -> inclusive grid from a to b."""
    try:
        a, step, b = (float(x) for x in text.split(":"))
    except ValueError:
        raise ValueError(f"grid must look like a:step:b, got {text!r}") from None
    if step <= 0 or b < a:
        raise ValueError(f"bad grid {text!r}")
    k = int(np.floor((b - a) / step + 1e-9))
    return np.round(a + step * np.arange(k + 1), 12)
