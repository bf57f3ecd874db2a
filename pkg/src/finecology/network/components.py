"""Strongly connected components (iterative Tarjan) and the largest one."""

from __future__ import annotations

import numpy as np
from numba import njit

from .graph import FirmGraph


@njit(cache=True)
def _tarjan(n, indptr, indices, active):
    """Component label per node (-1 for inactive nodes) and the component count."""
    index = np.full(n, -1, dtype=np.int64)
    low = np.zeros(n, dtype=np.int64)
    comp = np.full(n, -1, dtype=np.int64)
    on_stack = np.zeros(n, dtype=np.bool_)
    stack = np.empty(n, dtype=np.int64)
    call_node = np.empty(n, dtype=np.int64)
    call_edge = np.empty(n, dtype=np.int64)
    sp = 0
    counter = 0
    n_comp = 0
    for root in range(n):
        if not active[root] or index[root] >= 0:
            continue
        depth = 0
        call_node[0] = root
        call_edge[0] = indptr[root]
        index[root] = counter
        low[root] = counter
        counter += 1
        stack[sp] = root
        sp += 1
        on_stack[root] = True
        while depth >= 0:
            v = call_node[depth]
            e = call_edge[depth]
            if e < indptr[v + 1]:
                call_edge[depth] = e + 1
                w = indices[e]
                if not active[w]:
                    continue
                if index[w] < 0:
                    index[w] = counter
                    low[w] = counter
                    counter += 1
                    stack[sp] = w
                    sp += 1
                    on_stack[w] = True
                    depth += 1
                    call_node[depth] = w
                    call_edge[depth] = indptr[w]
                elif on_stack[w] and index[w] < low[v]:
                    low[v] = index[w]
                continue
            # v is finished
            if low[v] == index[v]:
                while True:
                    sp -= 1
                    w = stack[sp]
                    on_stack[w] = False
                    comp[w] = n_comp
                    if w == v:
                        break
                n_comp += 1
            depth -= 1
            if depth >= 0:
                u = call_node[depth]
                if low[v] < low[u]:
                    low[u] = low[v]
    return comp, n_comp


def strong_components(graph: FirmGraph, active: np.ndarray | None = None) -> np.ndarray:
    """Component label per node; nodes outside ``active`` get -1."""
    if active is None:
        active = np.ones(graph.n, dtype=bool)
    if graph.n == 0:
        return np.zeros(0, dtype=np.int64)
    indptr, indices = graph.out_csr
    comp, _ = _tarjan(graph.n, indptr, indices, np.asarray(active, dtype=np.bool_))
    return comp


def largest_component(labels: np.ndarray) -> np.ndarray:
    """Indices of the largest labelled group; ties go to the group holding the smallest node."""
    ok = labels >= 0
    if not ok.any():
        return np.zeros(0, dtype=np.int64)
    sizes = np.bincount(labels[ok])
    best = sizes.max()
    # first node (lowest index) belonging to a maximal group decides ties
    winners = sizes[labels[ok]] == best
    label = labels[ok][np.argmax(winners)]
    return np.flatnonzero(labels == label)


def lscc(graph: FirmGraph, active: np.ndarray | None = None) -> np.ndarray:
    """Node indices of the largest strongly connected cluster, sorted."""
    return largest_component(strong_components(graph, active))


def lscc_size(graph: FirmGraph, active: np.ndarray | None = None) -> int:
    labels = strong_components(graph, active)
    ok = labels >= 0
    return int(np.bincount(labels[ok]).max()) if ok.any() else 0
