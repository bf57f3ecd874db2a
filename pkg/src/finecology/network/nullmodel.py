"""Degree-preserving randomization by directed link swaps."""

from __future__ import annotations

import numpy as np
from numba import njit

from .._kernels import _below
from .graph import FirmGraph

_EMPTY = -1


# Link keys live in an open-addressing table with linear probing. Deletion
# shifts later entries back instead of leaving tombstones, so the table does
# not degrade under the constant insert/delete churn of swapping.

@njit(cache=True)
def _slot(key, mask):
    z = np.uint64(key) * np.uint64(0x9E3779B97F4A7C15)
    z = z ^ (z >> np.uint64(29))
    return np.int64(z & np.uint64(mask))


@njit(cache=True)
def _find(table, mask, key):
    i = _slot(key, mask)
    while table[i] != _EMPTY:
        if table[i] == key:
            return i
        i = (i + 1) & mask
    return -1


@njit(cache=True)
def _insert(table, mask, key):
    i = _slot(key, mask)
    while table[i] != _EMPTY:
        i = (i + 1) & mask
    table[i] = key


@njit(cache=True)
def _remove(table, mask, key):
    i = _find(table, mask, key)
    if i < 0:
        return
    j = i
    while True:
        table[i] = _EMPTY
        while True:
            j = (j + 1) & mask
            if table[j] == _EMPTY:
                return
            home = _slot(table[j], mask)
            # move table[j] back unless its home lies cyclically in (i, j]
            if i <= j:
                if i < home <= j:
                    continue
            elif home > i or home <= j:
                continue
            break
        table[i] = table[j]
        i = j


@njit(cache=True)
def _swap(src, dst, n, n_swaps, seed):
    m = src.shape[0]
    size = 1
    while size < 4 * m:
        size *= 2
    mask = size - 1
    table = np.full(size, _EMPTY, dtype=np.int64)
    for e in range(m):
        _insert(table, mask, src[e] * n + dst[e])
    state = np.empty(1, dtype=np.uint64)
    state[0] = np.uint64(seed)
    done = 0
    for _ in range(n_swaps):
        i = _below(state, m)
        j = _below(state, m)
        if i == j:
            continue
        a, b = src[i], dst[i]
        c, d = src[j], dst[j]
        # A->B, C->D becomes A->D, C->B
        if a == d or c == b:
            continue
        k1 = a * n + d
        k2 = c * n + b
        if _find(table, mask, k1) >= 0 or _find(table, mask, k2) >= 0:
            continue
        _remove(table, mask, a * n + b)
        _remove(table, mask, c * n + d)
        _insert(table, mask, k1)
        _insert(table, mask, k2)
        dst[i] = d
        dst[j] = b
        done += 1
    return done


def randomize(graph: FirmGraph, n_swaps: int | None = None, seed: int = 0,
              return_count: bool = False):
    """Swap endpoints of random link pairs, keeping every in- and out-degree.

    ``n_swaps`` counts attempts (default ``10 * |E|``); a swap that would
    create a self-loop or a duplicate link is skipped.
    """
    m = graph.n_edges
    if n_swaps is None:
        n_swaps = 10 * m
    if n_swaps < 0:
        raise ValueError("n_swaps must be >= 0")
    src = np.array(graph.src, dtype=np.int64)
    dst = np.array(graph.dst, dtype=np.int64)
    done = 0
    if m >= 2 and n_swaps > 0:
        state = np.random.SeedSequence(seed).generate_state(1, np.uint64)[0]
        done = _swap(src, dst, np.int64(graph.n), np.int64(n_swaps), state)
    out = graph.with_edges(src, dst)
    return (out, done) if return_count else out
