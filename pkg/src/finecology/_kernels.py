"""Compiled inner loops for the two tranche-allocation steps.

Both loops are inherently sequential (each placement consumes headroom seen
by the next tranche), so they run under numba. Randomness comes from a
splitmix64 stream seeded by the caller, which keeps results identical across
processes without touching numba's global generator.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

_INV_2_53 = 1.0 / 9007199254740992.0
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


@njit(cache=True)
def _next(state):
    state[0] = (state[0] + np.uint64(0x9E3779B97F4A7C15))
    z = state[0]
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    z = z ^ (z >> np.uint64(31))
    return z


@njit(cache=True)
def _uniform(state):
    return float(_next(state) >> np.uint64(11)) * _INV_2_53


@njit(cache=True)
def _below(state, n):
    # uniform integer in [0, n)
    return int(_uniform(state) * n)


@njit(cache=True)
def _n_fitting(heads, count, amount):
    # heads[:count] is sorted descending; number of entries strictly above amount
    lo, hi = 0, count
    while lo < hi:
        mid = (lo + hi) // 2
        if heads[mid] > amount:
            lo = mid + 1
        else:
            hi = mid
    return lo


@njit(cache=True)
def allocate_deposits_kernel(tr_amount, tr_group, bank_rating, bank_ok, bank_lim,
                             bank_td, match_p, n_groups, seed):
    """Place investor tranches into banks.

    Tranches are drawn in a uniformly random order. Each one walks the banks
    in a fresh random priority order and lands in the first bank that has
    headroom above the tranche and passes an acceptance draw at
    ``match_p[|RT-AG|]``. Banks at the same rating distance are exchangeable,
    so the walk only tracks how many candidates of each distance are left;
    once a draw succeeds the bank is uniform over that distance class.
    ``bank_td`` is updated in place. Returns the bank index per tranche, -1
    when unplaced.
    """
    n_tr = tr_amount.shape[0]
    n_b = bank_rating.shape[0]
    n_p = match_p.shape[0]
    out = np.full(n_tr, -1, dtype=np.int64)
    n_r = 1
    for b in range(n_b):
        if bank_ok[b] and bank_rating[b] + 1 > n_r:
            n_r = bank_rating[b] + 1
    # banks of each rating kept in descending order of headroom
    ids = np.empty((n_r, n_b), dtype=np.int64)
    heads = np.empty((n_r, n_b))
    count = np.zeros(n_r, dtype=np.int64)
    for b in range(n_b):
        if bank_ok[b]:
            r = bank_rating[b]
            ids[r, count[r]] = b
            count[r] += 1
    for r in range(n_r):
        c = count[r]
        h = np.empty(c)
        for j in range(c):
            h[j] = bank_lim[ids[r, j]] - bank_td[ids[r, j]]
        srt = np.argsort(-h, kind="mergesort")
        row = ids[r, :c].copy()
        for j in range(c):
            ids[r, j] = row[srt[j]]
            heads[r, j] = h[srt[j]]
    # largest headroom anywhere; tranches above it are skipped outright
    top = 0.0
    for r in range(n_r):
        if count[r] > 0 and heads[r, 0] > top:
            top = heads[r, 0]
    state = np.empty(1, dtype=np.uint64)
    state[0] = np.uint64(seed)
    order = np.arange(n_tr)
    fit = np.zeros(n_r, dtype=np.int64)
    level = np.zeros(n_p, dtype=np.int64)
    left = np.zeros(n_p, dtype=np.int64)
    for i in range(n_tr):
        j = i + _below(state, n_tr - i)
        k = order[j]
        order[j] = order[i]
        order[i] = k
        amount = tr_amount[k]
        g = tr_group[k]
        if amount <= 0.0 or g < 1 or g > n_groups or not top > amount:
            continue
        lo = max(g - n_p + 1, 0)
        hi = min(g + n_p, n_r)
        for d in range(n_p):
            level[d] = 0
        for r in range(lo, hi):
            fit[r] = 0
            c = count[r]
            if c > 0 and heads[r, 0] > amount:
                fit[r] = c if heads[r, c - 1] > amount else _n_fitting(heads[r], c, amount)
            level[abs(r - g)] += fit[r]
        total = 0
        for d in range(n_p):
            left[d] = level[d] if match_p[d] > 0.0 else 0
            total += left[d]
        d = -1
        while total > 0:
            u = _below(state, total)
            c = 0
            while u >= left[c]:
                u -= left[c]
                c += 1
            if _uniform(state) < match_p[c]:
                d = c
                break
            left[c] -= 1
            total -= 1
        if d < 0:
            continue
        # uniform over every fitting bank at distance d
        pos = _below(state, level[d])
        r = g - d
        if r < lo or r >= hi or pos >= fit[r]:
            if r >= lo and r < hi:
                pos -= fit[r]
            r = g + d
        b = ids[r, pos]
        out[k] = b
        bank_td[b] += amount
        h = heads[r, pos] - amount
        # restore descending order by sliding the bank towards the tail
        c = count[r]
        while pos + 1 < c and heads[r, pos + 1] > h:
            heads[r, pos] = heads[r, pos + 1]
            ids[r, pos] = ids[r, pos + 1]
            pos += 1
        heads[r, pos] = h
        ids[r, pos] = b
        if pos == 0 or h + amount >= top:
            top = 0.0
            for r in range(n_r):
                if count[r] > 0 and heads[r, 0] > top:
                    top = heads[r, 0]
    return out


@njit(cache=True)
def allocate_lending_kernel(tr_amount, tr_bank, bank_bk, cluster_lp, cluster_mrk, cluster_tl, seed):
    """Place bank lending tranches into loan clusters.

    Each tranche visits the clusters in a random order and stops at the
    first one with room that accepts it; acceptance is the standard normal
    density of ``(BK - LP)`` in percentage points. The first acceptor in a
    random order is uniform over the acceptors, which is how it is drawn
    here. ``cluster_tl`` is updated in place. Returns the cluster index
    (0-based) per tranche, -1 for tranches left to the interbank market.
    """
    n_tr = tr_amount.shape[0]
    n_c = cluster_lp.shape[0]
    n_b = bank_bk.shape[0]
    out = np.full(n_tr, -1, dtype=np.int64)
    accept = np.empty((n_b, n_c))
    for b in range(n_b):
        for ls in range(n_c):
            z = (bank_bk[b] - cluster_lp[ls]) * 100.0
            accept[b, ls] = _INV_SQRT_2PI * math.exp(-0.5 * z * z)
    state = np.empty(1, dtype=np.uint64)
    state[0] = np.uint64(seed)
    for k in range(n_tr):
        amount = tr_amount[k]
        if amount <= 0.0:
            continue
        b = tr_bank[k]
        n_acc = 0
        pick = -1
        for ls in range(n_c):
            if not amount < cluster_mrk[ls] - cluster_tl[ls]:
                continue
            if _uniform(state) < accept[b, ls]:
                n_acc += 1
                # reservoir choice keeps the pick uniform over acceptors
                if n_acc == 1 or _below(state, n_acc) == 0:
                    pick = ls
        if pick >= 0:
            out[k] = pick
            cluster_tl[pick] += amount
    return out
