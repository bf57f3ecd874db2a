"""Evolutionary operators: investor culture dissemination and bank strategy infection."""

from __future__ import annotations

import math

import numpy as np

from .config import EvolutionParams


def dissemination_increment(ir: float, a: float = 0.02891, b: float = -0.2168) -> float:
    return a / 4.0 * math.exp(b * ir)


def centile_benchmark(returns: np.ndarray, centile: float = 0.40) -> float:
    """Return of the investor sitting at ``centile`` when ranked best to worst."""
    ranked = np.sort(np.asarray(returns, dtype=float))[::-1]
    k = max(int(math.ceil(centile * len(ranked))) - 1, 0)
    return float(ranked[k])


def disseminate_culture(rex: np.ndarray, returns: np.ndarray, ir: float,
                        params: EvolutionParams | None = None,
                        rng: np.random.Generator | None = None) -> np.ndarray:
    """New return expectations after one dissemination step.

    Investors whose trailing return is strictly below the benchmark raise
    ``Rex`` by ``a/4 * exp(b * ir)``, each with ``dissemination_probability``
    (one uniform draw per investor, in id order, when that is below 1).
    Everyone else keeps theirs untouched.
    """
    params = params or EvolutionParams()
    rex = np.asarray(rex, dtype=float)
    if not params.enabled or len(rex) < 2:
        return rex.copy()
    bench = centile_benchmark(returns, params.benchmark_centile)
    below = np.asarray(returns) < bench
    if params.dissemination_probability < 1.0:
        if rng is None:
            raise ValueError("a generator is needed when dissemination_probability < 1")
        below &= rng.random(len(rex)) < params.dissemination_probability
    out = rex.copy()
    out[below] = rex[below] + dissemination_increment(ir * params.ir_scale, params.a, params.b)
    return out


def most_profitable(profit: np.ndarray, eligible: np.ndarray) -> int:
    """Index of the highest ``profit`` among ``eligible``; lowest index on ties."""
    idx = np.flatnonzero(eligible)
    if len(idx) == 0:
        return -1
    return int(idx[np.argmax(profit[idx])])


def infect_strategies(sr: np.ndarray, bn: np.ndarray, profit: np.ndarray, eligible: np.ndarray,
                      rng: np.random.Generator, p: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """One round of strategy infection.

    Each eligible bank is triggered with probability ``p`` (one uniform draw
    per bank in index order). A triggered bank adopts the (SR, BN) pair of the
    most profitable eligible bank when that strategy (SR + BN) is higher than
    its own. Returns the new ``sr``, ``bn`` and the mask of banks that changed.
    """
    sr, bn = np.asarray(sr, dtype=float).copy(), np.asarray(bn, dtype=float).copy()
    draws = rng.random(len(sr))
    changed = np.zeros(len(sr), dtype=bool)
    if eligible.sum() < 2:
        return sr, bn, changed
    donor = most_profitable(profit, eligible)
    d_sr, d_bn = sr[donor], bn[donor]
    triggered = eligible & (draws < p)
    triggered[donor] = False
    take = triggered & (np.round(d_sr + d_bn, 4) > np.round(sr + bn, 4))
    sr[take] = d_sr
    bn[take] = d_bn
    changed[take] = True
    return sr, bn, changed
