"""Random graph generators, metrics, a brute-force oracle and experiment drivers.

Every experiment is a pure function of its configuration: trial ``k`` draws
from ``numpy.random.default_rng`` seeded by the ``k``-th child of
``SeedSequence(seed)``, and output rows are ordered by trial index even when
trials run on an executor.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from typing import Optional, Sequence

import numpy as np

from .baselines import NLassoOptions, solve_lp, solve_nlasso
from .flow import resolving_check_maxflow, sbm_condition
from .graph import EmpiricalGraph, Partition, TrainingSet, piecewise_constant_signal
from .io import load_graph, load_labels, write_csv
from .solver import solve_tvmin

__all__ = [
    "GeneratorError",
    "OracleTooLargeError",
    "gen_two_cluster",
    "gen_sbm",
    "nmse",
    "tvmin_oracle",
    "ExperimentConfig",
    "TwoClusterConfig",
    "SBMConfig",
    "CompareConfig",
    "ExperimentTable",
    "load_config",
    "exp_two_cluster",
    "exp_sbm",
    "exp_compare",
    "trial_rngs",
]


class GeneratorError(RuntimeError):
    pass


class OracleTooLargeError(ValueError):
    pass


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def trial_rngs(seed: int, trials: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(trials)]


def _build(n: int, h: np.ndarray, t: np.ndarray) -> Optional[EmpiricalGraph]:
    """Unit-weight graph from head < tail arrays, or None if some node is isolated."""
    deg = np.bincount(h, minlength=n) + np.bincount(t, minlength=n)
    if np.any(deg == 0):
        return None
    order = np.lexsort((t, h))
    return EmpiricalGraph(n, h[order], t[order], np.ones(h.size))


def gen_two_cluster(n_per_cluster: int, p_edge: float, n_cross: int, seed=None,
                    max_retries: int = 100) -> tuple[EmpiricalGraph, Partition]:
    """Two Erdos-Renyi clusters joined by ``n_cross`` distinct uniform cross edges.

    Nodes ``0..n-1`` form cluster 0 and ``n..2n-1`` cluster 1; all weights
    are 1. Draws with an isolated node are discarded and redrawn.
    """
    n = int(n_per_cluster)
    if n < 2:
        raise ValueError("clusters need at least 2 nodes")
    if not 0.0 <= p_edge <= 1.0:
        raise ValueError("p_edge must lie in [0, 1]")
    if not 0 <= n_cross <= n * n:
        raise ValueError(f"n_cross must lie in [0, {n * n}]")
    rng = _rng(seed)
    iu, ju = np.triu_indices(n, 1)
    part = Partition(np.repeat([0, 1], n))
    for _ in range(max_retries):
        heads, tails = [], []
        for off in (0, n):
            keep = rng.random(iu.size) < p_edge
            heads.append(iu[keep] + off)
            tails.append(ju[keep] + off)
        cross = rng.choice(n * n, size=int(n_cross), replace=False)
        heads.append(cross // n)
        tails.append(n + cross % n)
        g = _build(2 * n, np.concatenate(heads).astype(np.int64), np.concatenate(tails).astype(np.int64))
        if g is not None:
            return g, part
    raise GeneratorError(f"no draw without isolated nodes in {max_retries} attempts")


def gen_sbm(cluster_sizes: Sequence[int], p_in: float, p_out: float, seed=None,
            max_retries: int = 100) -> tuple[EmpiricalGraph, Partition]:
    """Stochastic block model with unit weights; clusters occupy consecutive node ids."""
    sizes = [int(s) for s in cluster_sizes]
    if not sizes or min(sizes) < 1:
        raise ValueError("cluster sizes must be positive")
    if not (0.0 <= p_in <= 1.0 and 0.0 <= p_out <= 1.0):
        raise ValueError("probabilities must lie in [0, 1]")
    rng = _rng(seed)
    c = np.repeat(np.arange(len(sizes)), sizes)
    n = c.size
    iu, ju = np.triu_indices(n, 1)
    prob = np.where(c[iu] == c[ju], p_in, p_out)
    for _ in range(max_retries):
        keep = rng.random(iu.size) < prob
        g = _build(n, iu[keep].astype(np.int64), ju[keep].astype(np.int64))
        if g is not None:
            return g, Partition(c)
    raise GeneratorError(f"no draw without isolated nodes in {max_retries} attempts")


def nmse(x_true, x_hat) -> float:
    """``||x_true - x_hat||^2 / ||x_true||^2``."""
    x_true = np.asarray(x_true, dtype=float)
    x_hat = np.asarray(x_hat, dtype=float)
    if x_true.shape != x_hat.shape:
        raise ValueError("shape mismatch")
    denom = float(np.dot(x_true, x_true))
    if denom == 0.0:
        raise ValueError("true signal is zero")
    d = x_true - x_hat
    return float(np.dot(d, d)) / denom


def tvmin_oracle(g: EmpiricalGraph, t: TrainingSet, max_unlabeled: int = 10,
                 max_values: int = 4) -> tuple[float, np.ndarray]:
    """Exhaustive TV minimization over signals taking observed label values.

    Some minimizer takes only label values (a vertex of the LP form of the
    problem), so searching those assignments yields the optimum.
    """
    t.check(g)
    if len(t) == 0:
        raise ValueError("empty training set")
    n = g.num_nodes
    free = np.flatnonzero(~t.mask(n))
    values = np.unique(t.values)
    if free.size > max_unlabeled or (free.size and values.size > max_values):
        raise OracleTooLargeError(
            f"{free.size} unlabeled nodes and {values.size} label values exceed ({max_unlabeled}, {max_values})")
    base = np.zeros(n)
    base[t.nodes] = t.values
    if free.size == 0:
        return float(np.abs(g.weights * (base[g.heads] - base[g.tails])).sum()), base
    k, u = values.size, free.size
    total = k ** u
    powers = k ** np.arange(u)
    best_tv, best_x = np.inf, None
    chunk = 1 << 16
    for start in range(0, total, chunk):
        codes = np.arange(start, min(start + chunk, total))
        X = np.broadcast_to(base, (codes.size, n)).copy()
        X[:, free] = values[(codes[:, None] // powers) % k]
        tv = (np.abs(X[:, g.heads] - X[:, g.tails]) * g.weights).sum(axis=1)
        j = int(np.argmin(tv))
        if tv[j] < best_tv:
            best_tv, best_x = float(tv[j]), X[j].copy()
    return best_tv, best_x


@dataclass
class ExperimentConfig:
    seed: int
    trials: int = 10
    max_iters: int = 2000
    gap_tol: Optional[float] = 1e-6

    def __post_init__(self):
        if not isinstance(self.seed, (int, np.integer)) or isinstance(self.seed, bool):
            raise ValueError("seed must be an integer")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, separators=(",", ":"))


@dataclass
class TwoClusterConfig(ExperimentConfig):
    n_per_cluster: int = 100
    # sweep of (p_edge, n_cross), ``trials`` draws each
    points: list = field(default_factory=lambda: [
        [0.05, 40], [0.05, 30], [0.05, 20], [0.05, 10], [0.1, 20], [0.1, 10], [0.1, 8], [0.1, 6],
        [0.15, 12], [0.15, 8], [0.2, 10], [0.2, 8], [0.3, 5], [0.1, 3], [0.3, 2],
    ])
    # trials are grouped by rho into [0, e1), [e1, e2), ...; the last bucket holds rho >= 2
    bucket_edges: list = field(default_factory=lambda: [0.5, 1.0, 1.5, 2.0])
    amplitudes: list = field(default_factory=lambda: [0.1, -0.1])

    def __post_init__(self):
        super().__post_init__()
        if len(self.amplitudes) != 2:
            raise ValueError("two amplitudes required")
        if list(self.bucket_edges) != sorted(self.bucket_edges):
            raise ValueError("bucket_edges must be increasing")


@dataclass
class SBMConfig(ExperimentConfig):
    trials: int = 100
    cluster_sizes: list = field(default_factory=lambda: [10, 10, 10])
    p_in: float = 0.5
    ratios: list = field(default_factory=lambda: [1, 2, 4, 8, 12, 16, 20])
    labels_per_cluster: int = 5
    amplitudes: list = field(default_factory=lambda: [-1.0, 0.0, 1.0])

    def __post_init__(self):
        super().__post_init__()
        if len(self.amplitudes) != len(self.cluster_sizes):
            raise ValueError("one amplitude per cluster required")
        if any(r <= 0 for r in self.ratios):
            raise ValueError("ratios must be positive")
        if self.labels_per_cluster > min(self.cluster_sizes):
            raise ValueError("labels_per_cluster exceeds a cluster size")


@dataclass
class CompareConfig(ExperimentConfig):
    """Three-method NMSE versus iteration count.

    ``source`` is ``"sbm"`` (uses ``cluster_sizes``, ``p_in``, ``p_out``,
    ``amplitudes``, ``labels_per_cluster``) or ``"files"`` (``graph``,
    ``labels`` and a full ``signal`` file in labels format).
    """

    trials: int = 5
    source: str = "sbm"
    cluster_sizes: list = field(default_factory=lambda: [10, 10, 10])
    p_in: float = 0.5
    p_out: float = 0.05
    labels_per_cluster: int = 5
    amplitudes: list = field(default_factory=lambda: [-1.0, 0.0, 1.0])
    graph: Optional[str] = None
    labels: Optional[str] = None
    signal: Optional[str] = None
    nlasso_lambda: float = 1e-2
    checkpoints: list = field(default_factory=lambda: [1, 2, 5, 10, 20, 50, 100, 200, 500, 1000, 2000])

    def __post_init__(self):
        super().__post_init__()
        if self.source not in ("sbm", "files"):
            raise ValueError("source must be 'sbm' or 'files'")
        if self.source == "files" and not (self.graph and self.labels and self.signal):
            raise ValueError("source 'files' needs graph, labels and signal paths")
        if not self.checkpoints or min(self.checkpoints) < 1:
            raise ValueError("checkpoints must be positive iteration counts")
        if not self.nlasso_lambda > 0:
            raise ValueError("nlasso_lambda must be positive")


_CONFIGS = {"two-cluster": TwoClusterConfig, "sbm": SBMConfig, "compare": CompareConfig}


def load_config(kind: str, path=None, **overrides) -> ExperimentConfig:
    """Read a JSON config for experiment ``kind``; unknown keys are rejected."""
    cls = _CONFIGS[kind]
    data = {}
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        if not isinstance(data, dict):
            raise ValueError(f"{path}: config must be a JSON object")
    data.update({k: v for k, v in overrides.items() if v is not None})
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ValueError(f"unknown config key(s): {', '.join(unknown)}")
    if "seed" not in data:
        raise ValueError("config must set 'seed'")
    return cls(**data)


@dataclass
class ExperimentTable:
    header: list[str]
    rows: list[tuple]
    config: ExperimentConfig
    trials: list = field(default_factory=list)   # per-trial detail, for inspection
    counts: list = field(default_factory=list)   # trials behind each row

    def comments(self) -> list[str]:
        return [f"seed={self.config.seed}", f"config={self.config.to_json()}"]

    def write(self, path) -> None:
        write_csv(path, self.header, self.rows, self.comments())


def _map(fn, items, executor):
    return list(executor.map(fn, items)) if executor is not None else [fn(a) for a in items]


def _two_cluster_trial(args) -> tuple[float, float]:
    cfg, p_edge, n_cross, seed_seq = args
    rng = np.random.default_rng(seed_seq)
    n = cfg.n_per_cluster
    g, part = gen_two_cluster(n, p_edge, int(n_cross), rng)
    x = piecewise_constant_signal(g, part, cfg.amplitudes)
    labeled = np.array([rng.integers(n), n + rng.integers(n)])
    t = TrainingSet.from_signal(x, labeled)
    rho = [r.rho for r in resolving_check_maxflow(g, part, t)]
    rho_bar = float(np.mean(rho))
    est = solve_tvmin(g, t, max_iters=cfg.max_iters, gap_tol=cfg.gap_tol).estimate
    return rho_bar, nmse(x, est)


def exp_two_cluster(cfg: TwoClusterConfig, executor=None) -> ExperimentTable:
    """Rows ``rho, nmse``: mean connectivity and mean NMSE per rho bucket.

    ``rho`` of a trial is the mean of the two clusters' normalized max-flow
    values (``inf`` when there are no cross edges). Empty buckets are
    skipped.
    """
    seqs = np.random.SeedSequence(cfg.seed).spawn(len(cfg.points) * cfg.trials)
    jobs = [(cfg, float(p), int(c), seqs[i * cfg.trials + k])
            for i, (p, c) in enumerate(cfg.points) for k in range(cfg.trials)]
    out = _map(_two_cluster_trial, jobs, executor)
    res = np.array(out).reshape(-1, 2)
    # slack so that a passing trial (rho == 2 up to roundoff) lands in the top bucket
    bucket = np.searchsorted(np.asarray(cfg.bucket_edges, dtype=float), res[:, 0] + 1e-9, side="right")
    rows, counts = [], []
    for b in range(len(cfg.bucket_edges) + 1):
        sel = bucket == b
        if sel.any():
            rows.append((float(np.mean(res[sel, 0])), float(np.mean(res[sel, 1]))))
            counts.append(int(sel.sum()))
    return ExperimentTable(["rho", "nmse"], rows, cfg, out, counts)


def _sbm_instance(sizes, p_in, p_out, amplitudes, labels_per_cluster, rng):
    g, part = gen_sbm(sizes, p_in, p_out, rng)
    x = piecewise_constant_signal(g, part, amplitudes)
    labeled = np.concatenate([rng.choice(part.members(l), labels_per_cluster, replace=False)
                              for l in range(part.num_clusters)])
    return g, x, TrainingSet.from_signal(x, labeled)


def _sbm_trial(args) -> float:
    cfg, ratio, seed_seq = args
    rng = np.random.default_rng(seed_seq)
    g, x, t = _sbm_instance(cfg.cluster_sizes, cfg.p_in, cfg.p_in / ratio, cfg.amplitudes,
                            cfg.labels_per_cluster, rng)
    est = solve_tvmin(g, t, max_iters=cfg.max_iters, gap_tol=cfg.gap_tol).estimate
    return nmse(x, est)


def exp_sbm(cfg: SBMConfig, executor=None) -> ExperimentTable:
    """Rows ``ratio, nmse, margin`` with ``p_out = p_in / ratio``.

    ``margin`` is the smallest per-cluster value of :func:`sbm_condition`.
    """
    seqs = np.random.SeedSequence(cfg.seed).spawn(len(cfg.ratios) * cfg.trials)
    jobs = [(cfg, float(r), seqs[i * cfg.trials + k])
            for i, r in enumerate(cfg.ratios) for k in range(cfg.trials)]
    out = _map(_sbm_trial, jobs, executor)
    rows = []
    for i, r in enumerate(cfg.ratios):
        margin = sbm_condition(cfg.cluster_sizes, cfg.labels_per_cluster, cfg.p_in, cfg.p_in / r)
        rows.append((float(r), float(np.mean(out[i * cfg.trials:(i + 1) * cfg.trials])), float(margin.min())))
    return ExperimentTable(["ratio", "nmse", "margin"], rows, cfg, out, [cfg.trials] * len(rows))


def _checkpoint_curve(run, checkpoints: Sequence[int], x_true) -> np.ndarray:
    """NMSE at each checkpoint; a run that stops early keeps its last value."""
    want = {int(k): j for j, k in enumerate(checkpoints)}
    curve = np.full(len(checkpoints), np.nan)
    last = [None]

    def cb(k, x):
        last[0] = x
        j = want.get(k)
        if j is not None:
            curve[j] = nmse(x_true, x)

    final = run(cb)
    if final is not None:
        last[0] = final
    if last[0] is not None:
        curve[np.isnan(curve)] = nmse(x_true, last[0])
    return curve


def _compare_trial(args) -> np.ndarray:
    cfg, seed_seq = args
    if cfg.source == "files":
        g = load_graph(cfg.graph)
        t = load_labels(cfg.labels, g.num_nodes)
        sig = load_labels(cfg.signal, g.num_nodes)
        if len(sig) != g.num_nodes:
            raise ValueError(f"{cfg.signal}: signal must give a value for every node")
        x = sig.values
    else:
        rng = np.random.default_rng(seed_seq)
        g, x, t = _sbm_instance(cfg.cluster_sizes, cfg.p_in, cfg.p_out, cfg.amplitudes,
                                cfg.labels_per_cluster, rng)
    kmax = int(max(cfg.checkpoints))
    tv = _checkpoint_curve(lambda cb: solve_tvmin(g, t, max_iters=kmax, callback=cb).estimate,
                           cfg.checkpoints, x)
    lp = _checkpoint_curve(lambda cb: solve_lp(g, t, max_iters=max(kmax, 10 * g.num_nodes), callback=cb),
                           cfg.checkpoints, x)
    nl = _checkpoint_curve(
        lambda cb: solve_nlasso(g, t, NLassoOptions(cfg.nlasso_lambda, max_iters=kmax, tol=0.0), callback=cb).estimate,
        cfg.checkpoints, x)
    return np.stack([tv, lp, nl], axis=1)


def exp_compare(cfg: CompareConfig, executor=None) -> ExperimentTable:
    """Rows ``k, nmse_tvmin, nmse_lp, nmse_nlasso`` averaged over trials.

    LP iterations are conjugate-gradient steps; TV-min and nLasso iterations
    are primal-dual steps.
    """
    seqs = np.random.SeedSequence(cfg.seed).spawn(cfg.trials)
    out = _map(_compare_trial, [(cfg, s) for s in seqs], executor)
    mean = np.mean(np.stack(out), axis=0)
    rows = [(int(k), float(a), float(b), float(c)) for k, (a, b, c) in zip(cfg.checkpoints, mean)]
    return ExperimentTable(["k", "nmse_tvmin", "nmse_lp", "nmse_nlasso"], rows, cfg, out, [cfg.trials] * len(rows))
