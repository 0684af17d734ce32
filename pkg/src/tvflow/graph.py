"""Empirical graphs, the weighted incidence operator and partitions.

Signals are plain ``numpy`` arrays: a node signal has one entry per node and
an edge vector has one entry per oriented edge, in the graph's canonical edge
order. Every undirected edge ``{i, j}`` is stored oriented as ``(head, tail)``
with ``head < tail`` and edges are sorted lexicographically, so all per-node
reductions visit edges in the same order and results are bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "EmpiricalGraph",
    "Partition",
    "TrainingSet",
    "incidence_apply",
    "incidence_transpose_apply",
    "tv_norm",
    "boundary_edges",
    "cluster_boundary",
    "piecewise_constant_signal",
]


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


class EmpiricalGraph:
    """Immutable undirected weighted graph with canonically oriented edges.

    Use :meth:`from_edges` to build one from an arbitrary edge list; the
    constructor itself expects already canonical arrays and only validates.
    """

    __slots__ = ("num_nodes", "heads", "tails", "weights", "degrees",
                 "_out_ptr", "_out_edges", "_in_ptr", "_in_edges")

    def __init__(self, num_nodes: int, heads, tails, weights):
        heads = np.asarray(heads, dtype=np.int64).copy()
        tails = np.asarray(tails, dtype=np.int64).copy()
        weights = np.asarray(weights, dtype=float).copy()
        if not (heads.shape == tails.shape == weights.shape) or heads.ndim != 1:
            raise ValueError("heads, tails and weights must be 1-d arrays of equal length")
        if num_nodes < 1:
            raise ValueError("graph needs at least one node")
        if heads.size:
            if heads.min() < 0 or tails.max() >= num_nodes:
                raise ValueError("node id out of range")
            if np.any(heads == tails):
                raise ValueError("self-loops are not allowed")
            if np.any(heads > tails):
                raise ValueError("edges must be oriented with head < tail")
            if not np.all(np.isfinite(weights)) or np.any(weights <= 0):
                raise ValueError("edge weights must be finite and strictly positive")
            order = np.lexsort((tails, heads))
            if np.any(order != np.arange(heads.size)):
                raise ValueError("edges must be sorted by (head, tail)")
            dup = (heads[1:] == heads[:-1]) & (tails[1:] == tails[:-1])
            if np.any(dup):
                k = int(np.argmax(dup))
                raise ValueError(f"duplicate edge ({heads[k]}, {tails[k]})")

        degrees = (np.bincount(heads, weights, minlength=num_nodes)
                   + np.bincount(tails, weights, minlength=num_nodes))
        if np.any(degrees <= 0):
            isolated = np.flatnonzero(degrees <= 0)
            raise ValueError(f"isolated node(s) not allowed: {isolated[:10].tolist()}")

        self.num_nodes = int(num_nodes)
        self.heads = _frozen(heads)
        self.tails = _frozen(tails)
        self.weights = _frozen(weights)
        self.degrees = _frozen(degrees)

        # CSR-style incidence lists; a stable sort keeps canonical edge order
        # within every node's list.
        e = np.arange(heads.size)
        out_order = np.argsort(heads, kind="stable")
        in_order = np.argsort(tails, kind="stable")
        self._out_edges = _frozen(e[out_order])
        self._in_edges = _frozen(e[in_order])
        self._out_ptr = _frozen(np.concatenate(([0], np.cumsum(np.bincount(heads, minlength=num_nodes)))))
        self._in_ptr = _frozen(np.concatenate(([0], np.cumsum(np.bincount(tails, minlength=num_nodes)))))

    @classmethod
    def from_edges(cls, num_nodes: int | None,
                   edges: Iterable[tuple[int, int, float]]) -> "EmpiricalGraph":
        """Build a graph from ``(u, v, w)`` triples in any orientation and order.

        ``num_nodes`` defaults to ``1 + max node id``. Duplicate undirected
        edges (in either orientation) are rejected.
        """
        triples = [(int(u), int(v), float(w)) for u, v, w in edges]
        if num_nodes is None:
            num_nodes = 1 + max((max(u, v) for u, v, _ in triples), default=-1)
        for u, v, w in triples:
            if u == v:
                raise ValueError(f"self-loop at node {u}")
            if min(u, v) < 0 or max(u, v) >= num_nodes:
                raise ValueError(f"node id out of range in edge ({u}, {v})")
            if not w > 0 or not np.isfinite(w):
                raise ValueError(f"nonpositive weight {w} on edge ({u}, {v})")
        canon = sorted((min(u, v), max(u, v), w) for u, v, w in triples)
        for a, b in zip(canon, canon[1:]):
            if a[:2] == b[:2]:
                raise ValueError(f"duplicate edge ({a[0]}, {a[1]})")
        if canon:
            h, t, w = (np.array(c) for c in zip(*canon))
        else:
            h = t = np.zeros(0, dtype=np.int64)
            w = np.zeros(0)
        return cls(num_nodes, h, t, w)

    @property
    def num_edges(self) -> int:
        return int(self.heads.size)

    @property
    def d_max(self) -> float:
        return float(self.degrees.max())

    def edges(self) -> list[tuple[int, int, float]]:
        return list(zip(self.heads.tolist(), self.tails.tolist(), self.weights.tolist()))

    def out_edges(self, i: int) -> np.ndarray:
        """Edges with ``i`` as head (the directed neighbourhood N+(i))."""
        return self._out_edges[self._out_ptr[i]:self._out_ptr[i + 1]]

    def in_edges(self, i: int) -> np.ndarray:
        """Edges with ``i`` as tail (the directed neighbourhood N-(i))."""
        return self._in_edges[self._in_ptr[i]:self._in_ptr[i + 1]]

    def incident_edges(self, i: int) -> list[tuple[int, int]]:
        """``(edge, sign)`` pairs in canonical order; sign is +1 at the head."""
        pairs = [(int(e), 1) for e in self.out_edges(i)] + [(int(e), -1) for e in self.in_edges(i)]
        return sorted(pairs)

    def neighbors(self, i: int) -> np.ndarray:
        return np.sort(np.concatenate((self.tails[self.out_edges(i)], self.heads[self.in_edges(i)])))

    def edge_index(self, u: int, v: int) -> int:
        h, t = min(u, v), max(u, v)
        lo, hi = self._out_ptr[h], self._out_ptr[h + 1]
        cand = self._out_edges[lo:hi]
        k = np.searchsorted(self.tails[cand], t)
        if k < cand.size and self.tails[cand[k]] == t:
            return int(cand[k])
        raise KeyError(f"no edge {{{u}, {v}}}")

    def connected_components(self) -> np.ndarray:
        """Component label per node."""
        from scipy.sparse import coo_matrix
        from scipy.sparse.csgraph import connected_components

        a = coo_matrix((np.ones(self.num_edges), (self.heads, self.tails)),
                       shape=(self.num_nodes, self.num_nodes))
        _, labels = connected_components(a, directed=False)
        return labels

    def check_node_signal(self, x, name: str = "signal") -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.num_nodes,):
            raise ValueError(f"{name} has shape {x.shape}, expected ({self.num_nodes},)")
        if not np.all(np.isfinite(x)):
            raise ValueError(f"{name} has non-finite entries")
        return x

    def check_edge_vector(self, y, name: str = "edge vector") -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if y.shape != (self.num_edges,):
            raise ValueError(f"{name} has shape {y.shape}, expected ({self.num_edges},)")
        if not np.all(np.isfinite(y)):
            raise ValueError(f"{name} has non-finite entries")
        return y

    def __repr__(self) -> str:
        return f"EmpiricalGraph(num_nodes={self.num_nodes}, num_edges={self.num_edges})"


@dataclass(frozen=True)
class Partition:
    """Disjoint cluster assignment; ``cluster_of[i]`` is in ``0..k-1``."""

    cluster_of: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.cluster_of, dtype=np.int64).copy()
        if c.ndim != 1 or c.size == 0:
            raise ValueError("partition must assign a cluster to every node")
        if c.min() < 0:
            raise ValueError("cluster ids must be nonnegative")
        counts = np.bincount(c)
        if np.any(counts == 0):
            raise ValueError(f"empty cluster(s): {np.flatnonzero(counts == 0).tolist()}")
        object.__setattr__(self, "cluster_of", _frozen(c))

    @classmethod
    def from_clusters(cls, clusters: Sequence[Iterable[int]], num_nodes: int | None = None) -> "Partition":
        clusters = [list(c) for c in clusters]
        n = num_nodes if num_nodes is not None else sum(len(c) for c in clusters)
        assign = np.full(n, -1, dtype=np.int64)
        for l, members in enumerate(clusters):
            for i in members:
                if assign[i] != -1:
                    raise ValueError(f"node {i} assigned twice")
                assign[i] = l
        if np.any(assign < 0):
            raise ValueError("every node must belong to a cluster")
        return cls(assign)

    @property
    def num_nodes(self) -> int:
        return int(self.cluster_of.size)

    @property
    def num_clusters(self) -> int:
        return int(self.cluster_of.max()) + 1

    def members(self, l: int) -> np.ndarray:
        return np.flatnonzero(self.cluster_of == l)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.cluster_of)

    def check(self, g: EmpiricalGraph) -> None:
        if self.num_nodes != g.num_nodes:
            raise ValueError(f"partition covers {self.num_nodes} nodes, graph has {g.num_nodes}")


@dataclass(frozen=True)
class TrainingSet:
    """Labeled nodes and their observed labels, stored sorted by node id."""

    nodes: np.ndarray
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=np.int64).ravel()
        values = np.asarray(self.values, dtype=float).ravel()
        if nodes.shape != values.shape:
            raise ValueError("one label per labeled node")
        if not np.all(np.isfinite(values)):
            raise ValueError("labels must be finite")
        order = np.argsort(nodes, kind="stable")
        nodes, values = nodes[order], values[order]
        if np.any(nodes[1:] == nodes[:-1]):
            raise ValueError("labeled nodes must be distinct")
        if nodes.size and nodes[0] < 0:
            raise ValueError("negative node id in training set")
        object.__setattr__(self, "nodes", _frozen(nodes))
        object.__setattr__(self, "values", _frozen(values))

    @classmethod
    def from_mapping(cls, labels: Mapping[int, float]) -> "TrainingSet":
        items = sorted(labels.items())
        return cls([i for i, _ in items], [v for _, v in items])

    @classmethod
    def from_signal(cls, x, nodes) -> "TrainingSet":
        nodes = np.asarray(nodes, dtype=np.int64)
        return cls(nodes, np.asarray(x, dtype=float)[nodes])

    def __len__(self) -> int:
        return int(self.nodes.size)

    def as_dict(self) -> dict[int, float]:
        return dict(zip(self.nodes.tolist(), self.values.tolist()))

    def mask(self, num_nodes: int) -> np.ndarray:
        m = np.zeros(num_nodes, dtype=bool)
        m[self.nodes] = True
        return m

    def check(self, g: EmpiricalGraph) -> None:
        if self.nodes.size and self.nodes[-1] >= g.num_nodes:
            raise ValueError(f"labeled node {int(self.nodes[-1])} out of range for {g.num_nodes} nodes")


def incidence_apply(g: EmpiricalGraph, x) -> np.ndarray:
    """``D x``: entry ``e`` is ``W_e (x_head - x_tail)``."""
    x = g.check_node_signal(x)
    return g.weights * (x[g.heads] - x[g.tails])


def incidence_transpose_apply(g: EmpiricalGraph, y) -> np.ndarray:
    """``D^T y``: node ``i`` gets the head sum minus the tail sum of ``W_e y_e``.

    Both partial sums accumulate in canonical edge order.
    """
    y = g.check_edge_vector(y)
    f = g.weights * y
    return (np.bincount(g.heads, f, minlength=g.num_nodes)
            - np.bincount(g.tails, f, minlength=g.num_nodes))


def tv_norm(g: EmpiricalGraph, x) -> float:
    """Weighted total variation ``sum_e W_e |x_head - x_tail|``."""
    return float(np.abs(incidence_apply(g, x)).sum())


def boundary_edges(g: EmpiricalGraph, p: Partition) -> np.ndarray:
    """Indices of edges whose endpoints lie in different clusters."""
    p.check(g)
    c = p.cluster_of
    return np.flatnonzero(c[g.heads] != c[g.tails])


def cluster_boundary(g: EmpiricalGraph, p: Partition, l: int) -> np.ndarray:
    """Indices of edges with exactly one endpoint in cluster ``l``."""
    p.check(g)
    c = p.cluster_of
    return np.flatnonzero((c[g.heads] == l) != (c[g.tails] == l))


def piecewise_constant_signal(g: EmpiricalGraph, p: Partition, coeffs) -> np.ndarray:
    p.check(g)
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape != (p.num_clusters,):
        raise ValueError(f"need {p.num_clusters} coefficients, got {coeffs.size}")
    return coeffs[p.cluster_of]
