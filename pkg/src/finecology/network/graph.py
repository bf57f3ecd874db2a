"""Directed firm graph with node attributes, plus CSV reading and writing.

Edges point in the direction money flows (``src`` pays ``dst``). Nodes are
stored sorted by id, so "ties broken by id" everywhere in this subpackage is
the same thing as ties broken by node index.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

SECTORS = ("construction", "manufacturing", "wholesale", "services", "other")


class GraphIntegrityError(ValueError):
    """Malformed node or edge data (dangling endpoint, self-loop, duplicate...)."""


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


def _csr(n: int, rows: np.ndarray, cols: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    order = np.lexsort((cols, rows))
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=n), out=indptr[1:])
    return _readonly(indptr), _readonly(cols[order].astype(np.int64))


@dataclass(frozen=True, eq=False)
class FirmGraph:
    ids: np.ndarray      # sorted node ids (int64 or str)
    sales: np.ndarray
    sector: np.ndarray   # str
    region: np.ndarray   # str
    src: np.ndarray      # edge endpoints as node indices
    dst: np.ndarray
    meta: dict = field(default_factory=dict)  # e.g. planted-cluster ground truth

    def __post_init__(self):
        n = len(self.ids)
        for name in ("sales", "sector", "region"):
            if len(getattr(self, name)) != n:
                raise GraphIntegrityError(f"{name} has {len(getattr(self, name))} entries for {n} nodes")
        if len(self.src) != len(self.dst):
            raise GraphIntegrityError("src and dst differ in length")
        if n > 1 and np.any(self.ids[1:] <= self.ids[:-1]):
            raise GraphIntegrityError("node ids must be unique and sorted")
        if len(self.src):
            if min(self.src.min(), self.dst.min()) < 0 or max(self.src.max(), self.dst.max()) >= n:
                raise GraphIntegrityError("edge endpoint outside the node range")
            if np.any(self.src == self.dst):
                raise GraphIntegrityError("self-loops are not allowed")
            if len(np.unique(self.src * np.int64(n) + self.dst)) != len(self.src):
                raise GraphIntegrityError("duplicate edges are not allowed")
        for name in ("ids", "sales", "sector", "region", "src", "dst"):
            object.__setattr__(self, name, _readonly(getattr(self, name)))

    @classmethod
    def from_arrays(cls, ids, sales, sector, region, src_ids=(), dst_ids=()) -> "FirmGraph":
        """Build from unsorted node columns and edges given as node ids."""
        ids = np.asarray(ids)
        if ids.dtype.kind not in "iu":
            ids = ids.astype(str)
        order = np.argsort(ids, kind="stable")
        sorted_ids = ids[order]
        if len(sorted_ids) > 1 and np.any(sorted_ids[1:] == sorted_ids[:-1]):
            raise GraphIntegrityError("duplicate node id")
        src_ids = np.asarray(src_ids, dtype=sorted_ids.dtype if len(src_ids) else None)
        dst_ids = np.asarray(dst_ids, dtype=sorted_ids.dtype if len(dst_ids) else None)
        src = _lookup(sorted_ids, src_ids)
        dst = _lookup(sorted_ids, dst_ids)
        return cls(
            sorted_ids,
            np.asarray(sales, dtype=float)[order],
            np.asarray(sector).astype(str)[order],
            np.asarray(region).astype(str)[order],
            src, dst,
        )

    @property
    def n(self) -> int:
        return len(self.ids)

    @property
    def n_edges(self) -> int:
        return len(self.src)

    def out_degree(self) -> np.ndarray:
        return np.bincount(self.src, minlength=self.n)

    def in_degree(self) -> np.ndarray:
        return np.bincount(self.dst, minlength=self.n)

    @cached_property
    def out_csr(self) -> tuple[np.ndarray, np.ndarray]:
        return _csr(self.n, self.src, self.dst)

    @cached_property
    def undirected_csr(self) -> tuple[np.ndarray, np.ndarray]:
        """Neighbour lists ignoring direction; a reciprocal pair counts once."""
        a = np.concatenate([self.src, self.dst])
        b = np.concatenate([self.dst, self.src])
        key = np.unique(a * np.int64(max(self.n, 1)) + b)
        return _csr(self.n, key // max(self.n, 1), key % max(self.n, 1))

    def undirected_degree(self) -> np.ndarray:
        indptr, _ = self.undirected_csr
        return np.diff(indptr)

    def with_edges(self, src: np.ndarray, dst: np.ndarray) -> "FirmGraph":
        """Same nodes, different edge set (endpoints as node indices)."""
        return FirmGraph(self.ids, self.sales, self.sector, self.region,
                         np.asarray(src, dtype=np.int64), np.asarray(dst, dtype=np.int64),
                         dict(self.meta))


def _lookup(sorted_ids: np.ndarray, wanted: np.ndarray) -> np.ndarray:
    if len(wanted) == 0:
        return np.zeros(0, dtype=np.int64)
    pos = np.searchsorted(sorted_ids, wanted)
    pos = np.minimum(pos, len(sorted_ids) - 1) if len(sorted_ids) else pos
    bad = (len(sorted_ids) == 0) | (sorted_ids[pos] != wanted) if len(sorted_ids) else np.ones(len(wanted), bool)
    if np.any(bad):
        k = int(np.flatnonzero(bad)[0])
        raise GraphIntegrityError(f"edge {k} refers to unknown node {wanted[k]!r}")
    return pos.astype(np.int64)


def _parse_id(text: str):
    text = text.strip()
    try:
        return int(text)
    except ValueError:
        return text


def read_graph(nodes_path: str | Path, edges_path: str | Path) -> FirmGraph:
    """Load ``id,sales,sector,region`` nodes and ``src,dst`` edges."""
    with open(nodes_path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [h.strip() for h in rows[0]] != ["id", "sales", "sector", "region"]:
        raise GraphIntegrityError(f"{nodes_path}: header must be 'id,sales,sector,region'")
    ids, sales, sector, region = [], [], [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 4:
            raise GraphIntegrityError(f"{nodes_path}:{lineno}: expected 4 fields")
        ids.append(_parse_id(row[0]))
        try:
            sales.append(float(row[1]))
        except ValueError:
            raise GraphIntegrityError(f"{nodes_path}:{lineno}: bad sales value {row[1]!r}") from None
        sector.append(row[2].strip())
        region.append(row[3].strip())
    if any(isinstance(i, str) for i in ids):
        ids = [str(i) for i in ids]
    known = set(ids)
    if len(known) != len(ids):
        raise GraphIntegrityError(f"{nodes_path}: duplicate node id")

    with open(edges_path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [h.strip() for h in rows[0]] != ["src", "dst"]:
        raise GraphIntegrityError(f"{edges_path}: header must be 'src,dst'")
    as_str = bool(ids) and isinstance(ids[0], str)
    src, dst, seen = [], [], set()
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 2:
            raise GraphIntegrityError(f"{edges_path}:{lineno}: expected 2 fields")
        a, b = _parse_id(row[0]), _parse_id(row[1])
        if as_str:
            a, b = str(a), str(b)
        for end in (a, b):
            if end not in known:
                raise GraphIntegrityError(f"{edges_path}:{lineno}: unknown node {end!r} in row {row}")
        if a == b:
            raise GraphIntegrityError(f"{edges_path}:{lineno}: self-loop on {a!r}")
        if (a, b) in seen:
            raise GraphIntegrityError(f"{edges_path}:{lineno}: duplicate edge {a!r}->{b!r}")
        seen.add((a, b))
        src.append(a)
        dst.append(b)
    return FirmGraph.from_arrays(ids, sales, sector, region, src, dst)


def write_graph(graph: FirmGraph, nodes_path: str | Path, edges_path: str | Path) -> None:
    with open(nodes_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "sales", "sector", "region"])
        for i in range(graph.n):
            w.writerow([graph.ids[i], repr(float(graph.sales[i])), graph.sector[i], graph.region[i]])
    write_edges(graph, edges_path)


def write_edges(graph: FirmGraph, edges_path: str | Path) -> None:
    order = np.lexsort((graph.dst, graph.src))
    with open(edges_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["src", "dst"])
        for k in order:
            w.writerow([graph.ids[graph.src[k]], graph.ids[graph.dst[k]]])
