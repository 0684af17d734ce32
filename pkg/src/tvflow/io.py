"""Plain-text graph, label and partition files, and the CSV outputs.

Input formats (UTF-8, whitespace separated, ``#`` starts a comment)::

    graph       u v w        0-based node ids, w > 0
    labels      i value
    partition   i cluster_id
"""

from __future__ import annotations

import csv
import math
from typing import Iterable, Iterator, Sequence

import numpy as np

from .graph import EmpiricalGraph, Partition, TrainingSet


class GraphFormatError(ValueError):
    """Malformed input file; carries the path and 1-based line number."""

    def __init__(self, path, lineno: int | None, message: str):
        self.path = str(path)
        self.lineno = lineno
        where = f"{self.path}:{lineno}" if lineno is not None else self.path
        super().__init__(f"{where}: {message}")


def _records(path, ncols: int) -> Iterator[tuple[int, list[str]]]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.replace(",", " ").split()
            if len(parts) != ncols:
                raise GraphFormatError(path, lineno, f"expected {ncols} fields, got {len(parts)}")
            yield lineno, parts


def _node_id(path, lineno: int, tok: str) -> int:
    try:
        i = int(tok)
    except ValueError:
        raise GraphFormatError(path, lineno, f"bad node id {tok!r}") from None
    if i < 0:
        raise GraphFormatError(path, lineno, f"negative node id {i}")
    return i


def _real(path, lineno: int, tok: str) -> float:
    try:
        v = float(tok)
    except ValueError:
        raise GraphFormatError(path, lineno, f"bad number {tok!r}") from None
    if not math.isfinite(v):
        raise GraphFormatError(path, lineno, f"non-finite value {tok!r}")
    return v


def load_graph(path, num_nodes: int | None = None) -> EmpiricalGraph:
    """Read an edge list; edges are re-oriented head < tail and sorted."""
    seen: dict[tuple[int, int], int] = {}
    edges = []
    for lineno, (u, v, w) in _records(path, 3):
        u, v = _node_id(path, lineno, u), _node_id(path, lineno, v)
        w = _real(path, lineno, w)
        if u == v:
            raise GraphFormatError(path, lineno, f"self-loop at node {u}")
        if w <= 0:
            raise GraphFormatError(path, lineno, f"nonpositive weight {w}")
        if num_nodes is not None and max(u, v) >= num_nodes:
            raise GraphFormatError(path, lineno, f"node id {max(u, v)} out of range")
        key = (min(u, v), max(u, v))
        if key in seen:
            raise GraphFormatError(path, lineno, f"duplicate edge {key} (first on line {seen[key]})")
        seen[key] = lineno
        edges.append((u, v, w))
    if not edges:
        raise GraphFormatError(path, None, "no edges")
    try:
        return EmpiricalGraph.from_edges(num_nodes, edges)
    except ValueError as exc:
        raise GraphFormatError(path, None, str(exc)) from None


def load_labels(path, num_nodes: int | None = None) -> TrainingSet:
    labels: dict[int, float] = {}
    for lineno, (i, val) in _records(path, 2):
        i = _node_id(path, lineno, i)
        if num_nodes is not None and i >= num_nodes:
            raise GraphFormatError(path, lineno, f"node id {i} out of range")
        if i in labels:
            raise GraphFormatError(path, lineno, f"node {i} labeled twice")
        labels[i] = _real(path, lineno, val)
    return TrainingSet.from_mapping(labels)


def load_partition(path, num_nodes: int | None = None) -> Partition:
    assign: dict[int, int] = {}
    for lineno, (i, c) in _records(path, 2):
        i = _node_id(path, lineno, i)
        c = _node_id(path, lineno, c)
        if i in assign:
            raise GraphFormatError(path, lineno, f"node {i} assigned twice")
        assign[i] = c
    n = num_nodes if num_nodes is not None else (max(assign) + 1 if assign else 0)
    if sorted(assign) != list(range(n)):
        raise GraphFormatError(path, None, f"partition must list every node 0..{n - 1} exactly once")
    try:
        return Partition(np.array([assign[i] for i in range(n)]))
    except ValueError as exc:
        raise GraphFormatError(path, None, str(exc)) from None


def write_graph(path, g: EmpiricalGraph) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# nodes={g.num_nodes} edges={g.num_edges}\n")
        for h, t, w in g.edges():
            fh.write(f"{h} {t} {w!r}\n")


def write_labels(path, t: TrainingSet) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for i, v in zip(t.nodes.tolist(), t.values.tolist()):
            fh.write(f"{i} {v!r}\n")


def write_partition(path, p: Partition) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for i, c in enumerate(p.cluster_of.tolist()):
            fh.write(f"{i} {c}\n")


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence], comments: Sequence[str] = ()) -> None:
    """Write a CSV with optional leading ``# ...`` comment lines.

    Floats are written with ``repr`` so reloading is lossless.
    """
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for c in comments:
            fh.write(f"# {c}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with open(path, encoding="utf-8", newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    if not rows:
        raise GraphFormatError(path, None, "empty CSV")
    return rows[0], rows[1:]


def write_estimate(path, x) -> None:
    write_csv(path, ["node", "estimate"], ((i, float(v)) for i, v in enumerate(np.asarray(x))))


def read_estimate(path, num_nodes: int) -> np.ndarray:
    header, rows = read_csv(path)
    if header[:2] != ["node", "estimate"]:
        raise GraphFormatError(path, 1, "expected header 'node,estimate'")
    x = np.full(num_nodes, np.nan)
    for k, row in enumerate(rows, 2):
        i = _node_id(path, k, row[0])
        if i >= num_nodes:
            raise GraphFormatError(path, k, f"node id {i} out of range")
        x[i] = _real(path, k, row[1])
    if np.any(np.isnan(x)):
        raise GraphFormatError(path, None, "estimate missing for some nodes")
    return x


def write_dual(path, g: EmpiricalGraph, y) -> None:
    write_csv(path, ["edge", "head", "tail", "y"],
              ((e, h, t, float(v)) for e, (h, t, v) in enumerate(zip(g.heads.tolist(), g.tails.tolist(), np.asarray(y)))))


def read_dual(path, g: EmpiricalGraph) -> np.ndarray:
    header, rows = read_csv(path)
    if header[:4] != ["edge", "head", "tail", "y"]:
        raise GraphFormatError(path, 1, "expected header 'edge,head,tail,y'")
    y = np.full(g.num_edges, np.nan)
    for k, row in enumerate(rows, 2):
        h, t = _node_id(path, k, row[1]), _node_id(path, k, row[2])
        try:
            e = g.edge_index(h, t)
        except KeyError:
            raise GraphFormatError(path, k, f"edge ({h}, {t}) not in graph") from None
        # a row given tail-first carries the dual of the reversed orientation
        y[e] = _real(path, k, row[3]) * (1.0 if h < t else -1.0)
    if np.any(np.isnan(y)):
        raise GraphFormatError(path, None, "dual missing for some edges")
    return y


def write_trace(path, trace) -> None:
    write_csv(path, ["k", "tv_bar", "gap", "label_violation"],
              ((r.k, r.tv_bar, r.gap, r.label_violation) for r in trace.records))
