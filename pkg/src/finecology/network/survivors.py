"""Who is left in the LSCC just before it collapses, and is that unusual."""

from __future__ import annotations

import numpy as np

from .components import lscc
from .graph import FirmGraph
from .percolation import RemovalSweep


def _survivors_at(graph: FirmGraph, sweep: RemovalSweep, f_threshold: float) -> tuple[np.ndarray, float]:
    idx = np.flatnonzero(sweep.f < f_threshold)
    j = int(idx[-1]) if len(idx) else 0
    active = np.ones(graph.n, dtype=bool)
    active[sweep.removal[: sweep.n_removed[j]]] = False
    return lscc(graph, active), float(sweep.f[j])


def concentrations(graph: FirmGraph, members: np.ndarray) -> dict[str, dict[str, float]]:
    """Survivor share over population share per sector, region and (sector, region) cell."""
    out = {}
    cell = np.char.add(np.char.add(graph.sector.astype(str), "|"), graph.region.astype(str))
    for name, labels in (("sector", graph.sector), ("region", graph.region), ("cell", cell)):
        keys, pop = np.unique(labels, return_counts=True)
        table = {}
        if len(members):
            mk, mc = np.unique(labels[members], return_counts=True)
            got = dict(zip(mk.tolist(), mc.tolist()))
        else:
            got = {}
        for k, c in zip(keys.tolist(), pop.tolist()):
            table[k] = (got.get(k, 0) / len(members)) / (c / graph.n) if len(members) else 0.0
        out[name] = table
    return out


def survivors_report(graph: FirmGraph, sweep: RemovalSweep, f_threshold: float,
                     baseline: dict | None = None, factor: float = 3.0,
                     min_count: int = 3) -> dict:
    """Attribute the LSCC at the last sweep point below ``f_threshold``.

    ``baseline`` holds concentration tables from a randomized counterpart
    (see :func:`baseline_concentrations`). A cell is flagged when its
    concentration exceeds ``factor`` times the larger of its baseline value
    and 1; cells absent from the baseline use 1. Cells with fewer than
    ``min_count`` survivors are never flagged.
    """
    members, f_used = _survivors_at(graph, sweep, f_threshold)
    conc = concentrations(graph, members)
    cell = np.char.add(np.char.add(graph.sector[members], "|"), graph.region[members])
    counts = {}
    for kind, labels in (("sector", graph.sector[members]), ("region", graph.region[members]), ("cell", cell)):
        k, c = np.unique(labels, return_counts=True)
        counts[kind] = dict(zip(k.tolist(), c.tolist()))
    flags = []
    for kind in ("sector", "region", "cell"):
        base = (baseline or {}).get(kind, {})
        for key, c in conc[kind].items():
            ref = max(base.get(key, 1.0), 1.0)
            count = counts[kind].get(key, 0)
            if c > factor * ref and count >= min_count:
                flags.append({"kind": kind, "key": key, "count": count,
                              "concentration": c, "baseline": base.get(key)})
    flags.sort(key=lambda d: -d["concentration"])
    return {
        "order": sweep.order,
        "f_threshold": float(f_threshold),
        "f_used": f_used,
        "factor": factor,
        "min_count": min_count,
        "survivors": [
            {"id": graph.ids[i].item(), "sector": str(graph.sector[i]), "region": str(graph.region[i]),
             "sales": float(graph.sales[i])}
            for i in members
        ],
        "concentration": conc,
        "baseline": baseline,
        "flags": flags,
    }


def baseline_concentrations(random_graph: FirmGraph, sweep: RemovalSweep, f_threshold: float) -> dict:
    """Concentration tables of a randomized graph's survivors at its own threshold."""
    members, _ = _survivors_at(random_graph, sweep, f_threshold)
    return concentrations(random_graph, members)
