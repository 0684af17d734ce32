"""Shortest augmenting path (Edmonds-Karp) max-flow on real capacities."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = ["FlowProblem", "MaxFlowResult", "max_flow", "RESIDUAL_TOL"]

RESIDUAL_TOL = 1e-9


@dataclass(frozen=True)
class FlowProblem:
    """Directed arcs ``(u, v, capacity)`` on nodes ``0..num_nodes-1``.

    Capacities may be ``math.inf``; a source-sink path of infinite arcs
    makes the problem unbounded and :func:`max_flow` raises.
    """

    num_nodes: int
    arcs: Sequence[tuple[int, int, float]]
    source: int
    sink: int

    def __post_init__(self):
        if self.source == self.sink:
            raise ValueError("source and sink must differ")
        for node in (self.source, self.sink):
            if not 0 <= node < self.num_nodes:
                raise ValueError(f"terminal {node} out of range")
        for u, v, c in self.arcs:
            if not (0 <= u < self.num_nodes and 0 <= v < self.num_nodes):
                raise ValueError(f"arc ({u}, {v}) out of range")
            if not c >= 0:
                raise ValueError(f"negative or NaN capacity on arc ({u}, {v})")


@dataclass(frozen=True)
class MaxFlowResult:
    value: float
    flows: np.ndarray        # flow on each input arc, same order as FlowProblem.arcs
    source_side: np.ndarray  # nodes reachable from the source in the final residual graph

    def cut_capacity(self, problem: FlowProblem) -> float:
        side = np.zeros(problem.num_nodes, dtype=bool)
        side[self.source_side] = True
        return float(sum(c for u, v, c in problem.arcs if side[u] and not side[v]))


def max_flow(problem: FlowProblem, tol: float = RESIDUAL_TOL) -> MaxFlowResult:
    n = problem.num_nodes
    m = len(problem.arcs)
    # arc 2a is the forward copy of input arc a, 2a+1 its residual twin
    head = np.empty(2 * m, dtype=np.int64)
    resid = [0.0] * (2 * m)
    adj: list[list[int]] = [[] for _ in range(n)]
    for a, (u, v, c) in enumerate(problem.arcs):
        head[2 * a], head[2 * a + 1] = v, u
        resid[2 * a] = float(c)
        adj[u].append(2 * a)
        adj[v].append(2 * a + 1)
    head_l = head.tolist()
    flow = [0.0] * m
    s, t = problem.source, problem.sink

    value = 0.0
    while True:
        pred = [-1] * n
        pred[s] = -2
        q = deque([s])
        while q and pred[t] == -1:
            u = q.popleft()
            for arc in adj[u]:
                w = head_l[arc]
                if pred[w] == -1 and resid[arc] > tol:
                    pred[w] = arc
                    q.append(w)
        if pred[t] == -1:
            break
        bottleneck = math.inf
        w = t
        while w != s:
            arc = pred[w]
            bottleneck = min(bottleneck, resid[arc])
            w = head_l[arc ^ 1]
        if math.isinf(bottleneck):
            raise ValueError("unbounded flow: infinite-capacity source-sink path")
        w = t
        while w != s:
            arc = pred[w]
            resid[arc] -= bottleneck
            resid[arc ^ 1] += bottleneck
            flow[arc >> 1] += bottleneck if arc % 2 == 0 else -bottleneck
            w = head_l[arc ^ 1]
        value += bottleneck

    reach = np.zeros(n, dtype=bool)
    reach[s] = True
    q = deque([s])
    while q:
        u = q.popleft()
        for arc in adj[u]:
            w = head_l[arc]
            if not reach[w] and resid[arc] > tol:
                reach[w] = True
                q.append(w)
    return MaxFlowResult(value, np.array(flow), np.flatnonzero(reach))
