"""Network-flow view of the TV dual and recovery checks.

A dual vector ``y`` maps to the flow ``f_e = W_e y_e`` (positive means head to
tail). Dual feasibility is the same as ``|f_e| <= W_e`` on every edge plus zero
net supply at unlabeled nodes. The resolving checks decide whether a training
set lets TV minimization recover every signal that is constant on the
clusters of a partition: ``resolving_check_maxflow`` is the scalable
sufficient test on augmented cluster subgraphs, ``resolving_check_exact``
enumerates boundary sign patterns.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .graph import EmpiricalGraph, Partition, TrainingSet, cluster_boundary, boundary_edges
from .maxflow import FlowProblem, max_flow

__all__ = [
    "Flow",
    "FeasibilityReport",
    "InfeasibleFlowError",
    "ConstancyReport",
    "AugmentedClusterGraph",
    "ClusterResolution",
    "BoundaryTooLargeError",
    "dual_to_flow",
    "divergence",
    "check_flow_feasible",
    "dual_objective",
    "unsaturated_constancy_check",
    "build_augmented_subgraph",
    "resolving_check_maxflow",
    "resolving_check_exact",
    "cut_condition_check",
    "sbm_condition",
    "flow_dump_rows",
    "resolving_report_rows",
]


@dataclass(frozen=True)
class Flow:
    graph: EmpiricalGraph
    values: np.ndarray

    def __post_init__(self):
        v = self.graph.check_edge_vector(self.values, "flow")
        if not np.all(np.isfinite(v)):
            raise ValueError("flow values must be finite")
        object.__setattr__(self, "values", v)


class InfeasibleFlowError(ValueError):
    def __init__(self, report: "FeasibilityReport"):
        self.report = report
        super().__init__(f"flow is not dual feasible: {report.summary()}")


class BoundaryTooLargeError(ValueError):
    pass


def dual_to_flow(g: EmpiricalGraph, y) -> Flow:
    y = g.check_edge_vector(y, "dual vector")
    return Flow(g, g.weights * y)


def divergence(g: EmpiricalGraph, f: Flow | np.ndarray) -> np.ndarray:
    """Net outflow (supply) at every node."""
    vals = f.values if isinstance(f, Flow) else g.check_edge_vector(f, "flow")
    return (np.bincount(g.heads, vals, minlength=g.num_nodes)
            - np.bincount(g.tails, vals, minlength=g.num_nodes))


@dataclass
class FeasibilityReport:
    capacity_violations: list[tuple[int, float, float]] = field(default_factory=list)   # (edge, |f_e|, W_e)
    conservation_violations: list[tuple[int, float]] = field(default_factory=list)      # (node, supply)

    @property
    def ok(self) -> bool:
        return not self.capacity_violations and not self.conservation_violations

    def summary(self) -> str:
        return (f"{len(self.capacity_violations)} capacity violation(s), "
                f"{len(self.conservation_violations)} conservation violation(s)")


def check_flow_feasible(g: EmpiricalGraph, f: Flow, t: TrainingSet,
                        cap_edges: Optional[Sequence[int]] = None, tol: float = 1e-6) -> FeasibilityReport:
    """Capacity check on ``cap_edges`` (default: all edges) and conservation
    at unlabeled nodes, both up to ``tol``."""
    rep = FeasibilityReport()
    edges = np.arange(g.num_edges) if cap_edges is None else np.asarray(cap_edges, dtype=np.int64)
    excess = np.abs(f.values[edges]) - g.weights[edges]
    for e in edges[excess > tol]:
        rep.capacity_violations.append((int(e), float(abs(f.values[e])), float(g.weights[e])))
    v = divergence(g, f)
    unlabeled = np.flatnonzero(~t.mask(g.num_nodes))
    for i in unlabeled[np.abs(v[unlabeled]) > tol]:
        rep.conservation_violations.append((int(i), float(v[i])))
    return rep


def dual_objective(g: EmpiricalGraph, t: TrainingSet, f: Flow, tol: float = 1e-6) -> float:
    """``sum_{i in M} label_i * (net outflow at i)`` for a feasible flow."""
    rep = check_flow_feasible(g, f, t, tol=tol)
    if not rep.ok:
        raise InfeasibleFlowError(rep)
    v = divergence(g, f)
    return float(np.dot(t.values, v[t.nodes]))


@dataclass
class ConstancyReport:
    violations: list[tuple[int, float]] = field(default_factory=list)   # (edge, |x_head - x_tail|)
    unsaturated: int = 0

    @property
    def ok(self) -> bool:
        return not self.violations


def unsaturated_constancy_check(g: EmpiricalGraph, f_opt: Flow, x_hat, tol: float = 1e-6) -> ConstancyReport:
    """Report unsaturated edges (``|f_e| < W_e - tol``) along which ``x_hat`` jumps by more than ``tol``."""
    x_hat = g.check_node_signal(x_hat)
    unsat = np.flatnonzero(np.abs(f_opt.values) < g.weights - tol)
    jump = np.abs(x_hat[g.heads[unsat]] - x_hat[g.tails[unsat]])
    bad = unsat[jump > tol]
    return ConstancyReport([(int(e), float(abs(x_hat[g.heads[e]] - x_hat[g.tails[e]]))) for e in bad],
                           unsaturated=int(unsat.size))


@dataclass(frozen=True)
class AugmentedClusterGraph:
    """Cluster subgraph plus a sink node.

    Local node 0 is the sink; local node ``k + 1`` is original node
    ``nodes[k]``. ``edges`` holds intra-cluster edges with capacity ``W``;
    ``sink_edges`` holds ``(local node, capacity)`` with capacity twice the
    node's weight towards other clusters.
    """

    cluster: int
    nodes: np.ndarray
    edges: tuple[tuple[int, int, float], ...]
    sink_edges: tuple[tuple[int, float], ...]
    boundary_weight: float

    @property
    def has_boundary(self) -> bool:
        return bool(self.sink_edges)

    @property
    def num_nodes(self) -> int:
        return int(self.nodes.size) + 1

    def local(self, node: int) -> int:
        k = int(np.searchsorted(self.nodes, node))
        if k >= self.nodes.size or self.nodes[k] != node:
            raise KeyError(f"node {node} is not in cluster {self.cluster}")
        return k + 1

    def flow_problem(self, sources: Sequence[int]) -> FlowProblem:
        """Max-flow instance from the given original nodes (via a super-source) to the sink.

        Undirected edges become antiparallel arc pairs.
        """
        src = self.num_nodes
        arcs: list[tuple[int, int, float]] = []
        for u, v, c in self.edges:
            arcs.append((u, v, c))
            arcs.append((v, u, c))
        for u, c in self.sink_edges:
            arcs.append((u, 0, c))
            arcs.append((0, u, c))
        for s in sources:
            arcs.append((src, self.local(s), float("inf")))
        return FlowProblem(self.num_nodes + 1, arcs, src, 0)


def build_augmented_subgraph(g: EmpiricalGraph, p: Partition, l: int) -> AugmentedClusterGraph:
    p.check(g)
    if not 0 <= l < p.num_clusters:
        raise ValueError(f"cluster {l} does not exist")
    nodes = p.members(l)
    local = np.zeros(g.num_nodes, dtype=np.int64)
    local[nodes] = np.arange(1, nodes.size + 1)
    c = p.cluster_of
    inside_h, inside_t = c[g.heads] == l, c[g.tails] == l
    intra = np.flatnonzero(inside_h & inside_t)
    edges = tuple((int(local[g.heads[e]]), int(local[g.tails[e]]), float(g.weights[e])) for e in intra)
    # external weight per cluster node, accumulated in canonical edge order
    ext = np.zeros(g.num_nodes)
    cross_h = np.flatnonzero(inside_h & ~inside_t)
    cross_t = np.flatnonzero(inside_t & ~inside_h)
    np.add.at(ext, g.heads[cross_h], g.weights[cross_h])
    np.add.at(ext, g.tails[cross_t], g.weights[cross_t])
    sink_edges = tuple((int(local[i]), 2.0 * float(ext[i])) for i in nodes if ext[i] > 0)
    bw = float(g.weights[cluster_boundary(g, p, l)].sum())
    return AugmentedClusterGraph(l, nodes, edges, sink_edges, bw)


@dataclass(frozen=True)
class ClusterResolution:
    cluster: int
    rho: float          # flow value / boundary weight; pass threshold is 2
    required: float     # 2 * boundary weight
    flow_value: float
    passed: bool
    reason: str = ""


def resolving_check_maxflow(g: EmpiricalGraph, p: Partition, t: TrainingSet,
                            tol: float = 1e-9) -> list[ClusterResolution]:
    """Per-cluster max-flow test from the labeled nodes to the boundary.

    A cluster passes when its augmented subgraph carries a flow of value
    ``2 * boundary weight`` from its labeled nodes (joined by a super-source)
    to the sink. ``rho`` is the flow value over the boundary weight, so it
    lies in ``[0, 2]`` and equals 2 on a pass; it is ``inf`` for clusters
    with no boundary, which pass vacuously.
    """
    p.check(g)
    t.check(g)
    out = []
    labeled = t.nodes
    for l in range(p.num_clusters):
        aug = build_augmented_subgraph(g, p, l)
        required = 2.0 * aug.boundary_weight
        if not aug.has_boundary:
            out.append(ClusterResolution(l, float("inf"), 0.0, 0.0, True, "no boundary"))
            continue
        sources = labeled[p.cluster_of[labeled] == l]
        if sources.size == 0:
            out.append(ClusterResolution(l, 0.0, required, 0.0, False, "no labeled node"))
            continue
        res = max_flow(aug.flow_problem(sources.tolist()))
        passed = res.value >= required - tol * max(1.0, required)
        out.append(ClusterResolution(l, res.value / aug.boundary_weight, required, res.value, passed))
    return out


def _pattern_feasible(g: EmpiricalGraph, t_mask: np.ndarray, bnd: np.ndarray, signs: np.ndarray,
                      tol: float) -> bool:
    n = g.num_nodes
    # labeled nodes collapse into one slack node with free supply
    slack = n
    node_id = np.where(t_mask, slack, np.arange(n))
    fixed_out = np.zeros(n + 1)
    phi = 2.0 * signs * g.weights[bnd]
    np.add.at(fixed_out, node_id[g.heads[bnd]], phi)
    np.add.at(fixed_out, node_id[g.tails[bnd]], -phi)
    need = -fixed_out                     # net outflow the free edges must provide
    has_slack = bool(t_mask.any())
    if has_slack:
        need[slack] = -need[:n].sum()
    src, snk = n + 1, n + 2
    arcs: list[tuple[int, int, float]] = []
    free = np.ones(g.num_edges, dtype=bool)
    free[bnd] = False
    for e in np.flatnonzero(free):
        u, v = int(node_id[g.heads[e]]), int(node_id[g.tails[e]])
        if u == v:
            continue
        w = float(g.weights[e])
        arcs.append((u, v, w))
        arcs.append((v, u, w))
    demand = 0.0
    for i in range(n + 1):
        if i == slack and not has_slack:
            continue
        if need[i] > 0:
            arcs.append((src, i, float(need[i])))
            demand += need[i]
        elif need[i] < 0:
            arcs.append((i, snk, float(-need[i])))
    if demand <= tol:
        return True
    res = max_flow(FlowProblem(n + 3, arcs, src, snk))
    return res.value >= demand - tol * max(1.0, demand)


def resolving_check_exact(g: EmpiricalGraph, p: Partition, t: TrainingSet,
                          max_boundary: int = 20, tol: float = 1e-9) -> bool:
    """Decide the resolving property by enumerating boundary sign patterns.

    For each pattern ``b`` a flow must exist with ``f_e = 2 b_e W_e`` on the
    partition boundary, ``|f_e| <= W_e`` elsewhere and zero supply at
    unlabeled nodes. Negating a feasible flow handles ``-b``, so only half
    of the patterns are solved.
    """
    p.check(g)
    t.check(g)
    bnd = boundary_edges(g, p)
    m = bnd.size
    if m > max_boundary:
        raise BoundaryTooLargeError(
            f"partition boundary has {m} edges (limit {max_boundary}); use resolving_check_maxflow")
    mask = t.mask(g.num_nodes)
    if m == 0:
        return True
    for code in range(2 ** (m - 1)):
        signs = np.where((code >> np.arange(m)) & 1, -1.0, 1.0)
        if not _pattern_feasible(g, mask, bnd, signs, tol):
            return False
    return True


def cut_condition_check(g: EmpiricalGraph, p: Partition, t: TrainingSet, l: int,
                        max_size: int = 20, tol: float = 1e-9) -> bool:
    """Brute-force cut condition for cluster ``l``.

    Every subset ``A`` of the cluster's unlabeled nodes must have internal
    cut weight (edges from ``A`` to the rest of the cluster) at least twice
    its external weight (edges from ``A`` to other clusters). Clusters
    without a labeled node fail.
    """
    p.check(g)
    t.check(g)
    members = p.members(l)
    if members.size > max_size:
        raise BoundaryTooLargeError(f"cluster {l} has {members.size} nodes (limit {max_size})")
    mask = t.mask(g.num_nodes)
    if not mask[members].any():
        return False
    free = members[~mask[members]]
    k = free.size
    if k == 0:
        return True
    pos = np.full(g.num_nodes, -1, dtype=np.int64)
    pos[free] = np.arange(k)
    c = p.cluster_of
    in_h, in_t = c[g.heads] == l, c[g.tails] == l
    intra = np.flatnonzero(in_h & in_t)
    ih, it, iw = pos[g.heads[intra]], pos[g.tails[intra]], g.weights[intra]
    ext = np.zeros(k)
    for e in np.flatnonzero(in_h != in_t):
        i = g.heads[e] if in_h[e] else g.tails[e]
        if pos[i] >= 0:
            ext[pos[i]] += g.weights[e]

    chunk = 1 << min(k, 16)
    shifts = np.arange(k)
    for start in range(0, 1 << k, chunk):
        codes = np.arange(start, min(start + chunk, 1 << k), dtype=np.int64)
        bits = ((codes[:, None] >> shifts) & 1).astype(bool)
        ah = np.where(ih >= 0, bits[:, np.maximum(ih, 0)], False)
        at = np.where(it >= 0, bits[:, np.maximum(it, 0)], False)
        internal = ((ah != at) * iw).sum(axis=1)
        external = bits @ ext
        if np.any(internal < 2.0 * external - tol * np.maximum(1.0, external)):
            return False
    return True


def sbm_condition(cluster_sizes: Sequence[int], labeled_per_cluster, p_in: float, p_out: float) -> np.ndarray:
    """Per-cluster ratio ``|M cap C_l| p_in / (2 p_out (N - |C_l|))``.

    Values well above 1 suggest the training set resolves the clusters with
    high probability; ``inf`` when ``p_out`` is 0.
    """
    if not (0.0 <= p_in <= 1.0 and 0.0 <= p_out <= 1.0):
        raise ValueError("probabilities must lie in [0, 1]")
    sizes = np.asarray(cluster_sizes, dtype=float)
    labeled = np.broadcast_to(np.asarray(labeled_per_cluster, dtype=float), sizes.shape)
    denom = 2.0 * p_out * (sizes.sum() - sizes)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(denom > 0, labeled * p_in / np.where(denom > 0, denom, 1.0), np.inf)
    return ratio


def flow_dump_rows(g: EmpiricalGraph, f: Flow, tol: float = 1e-9) -> list[tuple]:
    """Rows ``head, tail, flow, capacity, saturated``."""
    sat = np.abs(f.values) >= g.weights - tol
    return [(int(h), int(tl), float(v), float(w), int(s))
            for h, tl, v, w, s in zip(g.heads, g.tails, f.values, g.weights, sat)]


def resolving_report_rows(report: Sequence[ClusterResolution]) -> list[tuple]:
    """Rows ``cluster, rho, required, pass``."""
    return [(r.cluster, float(r.rho), float(r.required), "pass" if r.passed else "fail") for r in report]
