"""Node-local message passing form of the primal-dual TV solver.

Every node and every edge is an agent holding only its own state. A round is
bulk synchronous with barriers between phases:

1. nodes extrapolate ``x~ = 2 x_cur - x_prev`` (local);
2. nodes send ``x~`` to incident edges; edges update and clip their dual;
3. edges send their dual to both endpoints; nodes take the signed weighted
   sum over outgoing minus incoming edges, step, clamp labels, and update
   their running average.

Phases only read values frozen by the previous barrier, so running a phase
through an executor gives the same result as running it serially.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .graph import EmpiricalGraph, TrainingSet

__all__ = ["NodeAgent", "EdgeAgent", "MessagePassingNetwork", "MPResult", "mp_round", "mp_run"]


@dataclass
class NodeAgent:
    node: int
    gamma: float
    out_edges: tuple[tuple[int, float], ...]   # (edge id, weight), canonical order
    in_edges: tuple[tuple[int, float], ...]
    label: Optional[float] = None
    x_prev: float = 0.0
    x_cur: float = 0.0
    x_bar: float = 0.0
    x_tilde: float = 0.0
    k: int = 0

    def edge_ids(self) -> set[int]:
        return {e for e, _ in self.out_edges} | {e for e, _ in self.in_edges}

    def extrapolate(self) -> None:
        self.x_tilde = 2.0 * self.x_cur - self.x_prev

    def update(self, inbox: dict[int, float]) -> None:
        """Primal step from the duals of incident edges (``inbox[edge] = y``)."""
        pos = 0.0
        for e, w in self.out_edges:
            pos += w * inbox[e]
        neg = 0.0
        for e, w in self.in_edges:
            neg += w * inbox[e]
        x_new = self.x_cur - self.gamma * (pos - neg)
        if self.label is not None:
            x_new = self.label
        self.k += 1
        self.x_bar = self.x_bar + (x_new - self.x_bar) / self.k
        self.x_prev, self.x_cur = self.x_cur, x_new


@dataclass
class EdgeAgent:
    edge: int
    head: int
    tail: int
    weight: float
    y: float = 0.0

    def update(self, inbox: dict[int, float]) -> None:
        """Dual step from the extrapolated values at both endpoints."""
        y = self.y + 0.5 * (inbox[self.head] - inbox[self.tail])
        self.y = y / max(1.0, abs(y))


@dataclass
class MessagePassingNetwork:
    nodes: list[NodeAgent]
    edges: list[EdgeAgent]
    audit: bool = False
    messages: int = 0
    rounds: int = 0
    reads: list[tuple[str, int, str, int]] = field(default_factory=list)

    @classmethod
    def from_graph(cls, g: EmpiricalGraph, t: TrainingSet, audit: bool = False) -> "MessagePassingNetwork":
        t.check(g)
        labels = t.as_dict()
        W = g.weights.tolist()
        nodes = [
            NodeAgent(
                node=i,
                gamma=1.0 / float(g.degrees[i]),
                out_edges=tuple((int(e), W[e]) for e in g.out_edges(i)),
                in_edges=tuple((int(e), W[e]) for e in g.in_edges(i)),
                label=labels.get(i),
            )
            for i in range(g.num_nodes)
        ]
        edges = [EdgeAgent(e, h, tl, w) for e, (h, tl, w) in enumerate(g.edges())]
        return cls(nodes, edges, audit=audit)

    def _deliver(self, kind: str, src_kind: str, dst: int, sources: dict[int, float]) -> dict[int, float]:
        self.messages += len(sources)
        if self.audit:
            self.reads.extend((kind, dst, src_kind, s) for s in sources)
        return sources

    def round(self, executor=None) -> None:
        run = executor.map if executor is not None else map

        list(run(NodeAgent.extrapolate, self.nodes))

        # edge phase: each edge hears only its two endpoints
        inboxes = [self._deliver("edge", "node", a.edge,
                                 {a.head: self.nodes[a.head].x_tilde, a.tail: self.nodes[a.tail].x_tilde})
                   for a in self.edges]
        list(run(EdgeAgent.update, self.edges, inboxes))

        # node phase: each node hears only its incident edges
        inboxes = [self._deliver("node", "edge", a.node,
                                 {e: self.edges[e].y for e, _ in a.out_edges + a.in_edges})
                   for a in self.nodes]
        list(run(NodeAgent.update, self.nodes, inboxes))
        self.rounds += 1

    def snapshot(self) -> dict[str, np.ndarray]:
        return {
            "x_prev": np.array([a.x_prev for a in self.nodes]),
            "x_cur": np.array([a.x_cur for a in self.nodes]),
            "x_bar": np.array([a.x_bar for a in self.nodes]),
            "y": np.array([a.y for a in self.edges]),
        }


@dataclass
class MPResult:
    x_last: np.ndarray
    x_bar: np.ndarray
    y: np.ndarray
    network: MessagePassingNetwork


def mp_round(net: MessagePassingNetwork, executor=None) -> MessagePassingNetwork:
    net.round(executor)
    return net


def mp_run(g: EmpiricalGraph, t: TrainingSet, rounds: int, executor=None, audit: bool = False) -> MPResult:
    """Run ``rounds`` synchronous rounds; the primary output is the last iterate."""
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    if len(t) == 0:
        raise ValueError("empty training set: every constant signal is optimal")
    net = MessagePassingNetwork.from_graph(g, t, audit=audit)
    for _ in range(rounds):
        net.round(executor)
    snap = net.snapshot()
    return MPResult(snap["x_cur"], snap["x_bar"], snap["y"], net)
