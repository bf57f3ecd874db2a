"""Synthetic firm networks with known structure, for tests and benchmarks.

Each firm gets a heavy-tailed activity weight that sets both its expected
degree and (with lognormal noise) its sales. Links are drawn Chung-Lu style,
source and target in proportion to weight, with a share kept inside the
source's region and a share kept inside its sales band. Planted clusters are
small groups of low-sales firms of one sector and region wired densely among
themselves; their members are recorded in ``graph.meta["planted"]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graph import SECTORS, FirmGraph


class GenerationError(ValueError):
    """The requested network cannot be built."""


@dataclass(frozen=True)
class PlantedCluster:
    size: int = 50
    density: float = 0.1
    sector: str = "construction"
    region: str = "R00"
    sales_percentile: float = 0.2   # members' sales drawn below this quantile


@dataclass(frozen=True)
class SyntheticParams:
    n: int = 10_000
    mean_degree: float = 8.0          # in + out
    gamma: float = 2.5                # tail exponent of the activity weights
    sector_mix: dict = field(default_factory=lambda: {
        "construction": 0.15, "manufacturing": 0.25, "wholesale": 0.2, "services": 0.3, "other": 0.1})
    n_regions: int = 47
    locality: float = 0.5             # share of links kept inside the source's region
    assortativity: float = 0.1        # share of links kept inside the source's sales band
    n_bands: int = 10
    sales_noise: float = 0.5
    planted: tuple = ()


def _stratified(rng, n: int, labels: list, weights) -> np.ndarray:
    """Exact largest-remainder counts per label, randomly placed."""
    w = np.asarray(weights, dtype=float)
    if len(w) == 0 or np.any(w < 0) or w.sum() <= 0:
        raise GenerationError("mixture weights must be non-negative with a positive sum")
    share = w / w.sum() * n
    counts = np.floor(share).astype(np.int64)
    extra = n - counts.sum()
    counts[np.argsort(-(share - counts), kind="stable")[:extra]] += 1
    out = np.repeat(np.asarray(labels, dtype=object), counts).astype(str)
    return out[rng.permutation(n)]


def _grouped_sampler(keys: np.ndarray, w: np.ndarray):
    """Draw nodes in proportion to ``w`` restricted to a group key."""
    order = np.lexsort((np.arange(len(keys)), keys))
    cw = np.cumsum(w[order])
    sk = keys[order]
    start = np.searchsorted(sk, sk, side="left")
    end = np.searchsorted(sk, sk, side="right")
    base = np.where(start > 0, cw[np.maximum(start - 1, 0)], 0.0)

    def draw(rng, group_of_node: np.ndarray) -> np.ndarray:
        # group_of_node: node whose group we sample from
        pos = np.searchsorted(sk, keys[group_of_node], side="left")
        lo = base[pos]
        hi = cw[end[pos] - 1]
        target = lo + rng.random(len(group_of_node)) * (hi - lo)
        j = np.searchsorted(cw, target, side="right")
        j = np.minimum(np.maximum(j, start[pos]), end[pos] - 1)
        return order[j]

    return draw


def generate_synthetic(params: SyntheticParams | None = None, seed: int = 0) -> FirmGraph:
    p = params or SyntheticParams()
    n = int(p.n)
    if n < 1:
        raise GenerationError("n must be >= 1")
    if p.gamma <= 1:
        raise GenerationError("tail exponent must exceed 1 for a finite mean degree")
    if p.mean_degree < 0:
        raise GenerationError("mean degree must be non-negative")
    if not (0 <= p.locality <= 1 and 0 <= p.assortativity <= 1):
        raise GenerationError("locality and assortativity must lie in [0, 1]")
    unknown = set(p.sector_mix) - set(SECTORS)
    if unknown:
        raise GenerationError(f"unknown sectors {sorted(unknown)}")
    rng = np.random.default_rng(seed)

    sector = _stratified(rng, n, list(p.sector_mix), list(p.sector_mix.values()))
    regions = [f"R{i:02d}" for i in range(max(p.n_regions, 1))]
    region = _stratified(rng, n, regions, np.ones(len(regions)))
    w = (1.0 - rng.random(n)) ** (-1.0 / (p.gamma - 1.0))
    w = np.minimum(w, np.sqrt(max(n * p.mean_degree, 1.0)))
    sales = 100.0 * w * np.exp(p.sales_noise * rng.standard_normal(n))

    planted_truth = []
    taken = np.zeros(n, dtype=bool)
    planted_edges = []
    for c in p.planted:
        c = c if isinstance(c, PlantedCluster) else PlantedCluster(**c)
        if c.sector not in SECTORS:
            raise GenerationError(f"unknown planted sector {c.sector!r}")
        if not 0 <= c.density <= 1 or not 0 < c.sales_percentile <= 1:
            raise GenerationError("planted density and sales percentile must lie in [0, 1]")
        free = np.flatnonzero(~taken)
        if c.size > len(free) or c.size < 1:
            raise GenerationError(f"cannot plant a cluster of {c.size} among {len(free)} free nodes")
        members = np.sort(rng.choice(free, size=c.size, replace=False))
        taken[members] = True
        cutoff = np.quantile(sales, c.sales_percentile)
        sales[members] = rng.uniform(0.05, 1.0, size=c.size) * cutoff
        sector[members] = c.sector
        region[members] = c.region
        a, b = np.meshgrid(members, members, indexing="ij")
        mask = (a != b) & (rng.random(a.shape) < c.density)
        planted_edges.append((a[mask], b[mask]))
        planted_truth.append({"members": members.tolist(), "sector": c.sector,
                              "region": c.region, "density": c.density})

    m = int(round(n * p.mean_degree / 2.0))
    if n == 1:
        m = 0  # a lone firm has nobody to trade with
    if m > n * (n - 1):
        raise GenerationError(f"{m} links do not fit in a simple digraph on {n} nodes")

    band = np.zeros(n, dtype=np.int64)
    band[np.argsort(sales, kind="stable")] = np.arange(n) * max(p.n_bands, 1) // n
    region_code = np.unique(region, return_inverse=True)[1].astype(np.int64)
    samplers = {
        (False, False): _grouped_sampler(np.zeros(n, dtype=np.int64), w),
        (True, False): _grouped_sampler(region_code, w),
        (False, True): _grouped_sampler(band, w),
        (True, True): _grouped_sampler(region_code * (p.n_bands + 1) + band, w),
    }
    global_src = samplers[(False, False)]

    keys = set()
    src_out, dst_out = [], []
    for a, b in planted_edges:
        for s, d in zip(a.tolist(), b.tolist()):
            if (s, d) not in keys:
                keys.add((s, d))
                src_out.append(s)
                dst_out.append(d)
    need = m
    rounds = 0
    while need > 0 and rounds < 60:
        k = int(need * 1.1) + 16
        s = global_src(rng, np.zeros(k, dtype=np.int64))
        if rounds < 40:
            local = rng.random(k) < p.locality
            assort = rng.random(k) < p.assortativity
        else:
            # small groups can stall; finish with unconstrained targets
            local = assort = np.zeros(k, dtype=bool)
        d = np.empty(k, dtype=np.int64)
        for flag, draw in samplers.items():
            sel = (local == flag[0]) & (assort == flag[1])
            if sel.any():
                d[sel] = draw(rng, s[sel])
        for x, y in zip(s.tolist(), d.tolist()):
            if x != y and (x, y) not in keys:
                keys.add((x, y))
                src_out.append(x)
                dst_out.append(y)
                need -= 1
                if need == 0:
                    break
        rounds += 1
    if need > 0:
        raise GenerationError(f"could not place {need} of {m} links without duplicates")

    graph = FirmGraph(np.arange(n, dtype=np.int64), sales, sector, region,
                      np.asarray(src_out, dtype=np.int64), np.asarray(dst_out, dtype=np.int64),
                      {"planted": planted_truth, "seed": seed})
    return graph
