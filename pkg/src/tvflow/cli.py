"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data error, 3 failed check
(``verify`` or ``cert``).
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from typing import Optional, Sequence

import numpy as np

from . import bench, io
from .baselines import NLassoOptions, solve_lp, solve_nlasso
from .flow import BoundaryTooLargeError, resolving_check_exact, resolving_check_maxflow, resolving_report_rows
from .graph import TrainingSet, piecewise_constant_signal
from .solver import certificate_gap, solve_tvmin

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_CHECK = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _positive_int(s: str) -> int:
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _floats(s: str) -> list[float]:
    return [float(v) for v in s.split(",") if v.strip()]


def _ints(s: str) -> list[int]:
    return [int(v) for v in s.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="tvflow", description="TV minimization on graphs with flow-based certificates.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("solve", help="estimate a graph signal from labels")
    s.add_argument("--graph", required=True)
    s.add_argument("--labels", required=True)
    s.add_argument("--algorithm", choices=["tvmin", "lp", "nlasso"], default="tvmin")
    s.add_argument("--lambda", dest="lam", type=float, default=1e-2, help="nLasso regularization")
    s.add_argument("--iters", type=_positive_int, default=2000)
    s.add_argument("--gap-tol", type=float, default=1e-6, help="TV-min stopping gap (tvmin only)")
    s.add_argument("--out", help="estimate CSV (default: stdout)")
    s.add_argument("--trace", help="trace CSV (tvmin only)")
    s.add_argument("--dual-out", help="dual vector CSV (tvmin only)")

    v = sub.add_parser("verify", help="check whether the labels resolve a partition")
    v.add_argument("--graph", required=True)
    v.add_argument("--labels", required=True)
    v.add_argument("--partition", required=True)
    v.add_argument("--exact", action="store_true", help="also enumerate boundary sign patterns")
    v.add_argument("--out", help="resolving report CSV")

    g = sub.add_parser("gen", help="generate a random instance")
    g.add_argument("model", choices=["two-cluster", "sbm"])
    g.add_argument("--n-per-cluster", type=_positive_int, default=100)
    g.add_argument("--p-edge", type=float, default=0.2)
    g.add_argument("--n-cross", type=int, default=10)
    g.add_argument("--cluster-sizes", type=_ints, default=[10, 10, 10])
    g.add_argument("--p-in", type=float, default=0.5)
    g.add_argument("--p-out", type=float, default=0.05)
    g.add_argument("--amplitudes", type=_floats, help="planted value per cluster")
    g.add_argument("--labels-per-cluster", type=_positive_int, default=None)
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--out-prefix", required=True)

    e = sub.add_parser("exp", help="run an experiment")
    e.add_argument("kind", choices=["two-cluster", "sbm", "compare"])
    e.add_argument("--config", help="JSON config; defaults are used for missing keys")
    e.add_argument("--seed", type=int, help="overrides the config seed")
    e.add_argument("--trials", type=_positive_int, help="overrides the config trial count")
    e.add_argument("--workers", type=_positive_int, default=1)
    e.add_argument("--out", help="result CSV (default: stdout)")

    c = sub.add_parser("cert", help="certify an estimate with a dual vector")
    c.add_argument("--graph", required=True)
    c.add_argument("--labels", required=True)
    c.add_argument("--estimate", required=True)
    c.add_argument("--dual", required=True)
    c.add_argument("--gap-tol", type=float, default=1e-6)
    return p


def _emit_csv(path: Optional[str], header, rows, comments=()) -> None:
    if path is None:
        for c in comments:
            print(f"# {c}")
        print(",".join(header))
        for r in rows:
            print(",".join(repr(v) if isinstance(v, float) else str(v) for v in r))
    else:
        io.write_csv(path, header, rows, comments)


def _cmd_solve(a) -> int:
    g = io.load_graph(a.graph)
    t = io.load_labels(a.labels, g.num_nodes)
    if len(t) == 0:
        raise ValueError(f"{a.labels}: no labels")
    if a.algorithm == "tvmin":
        res = solve_tvmin(g, t, max_iters=a.iters, gap_tol=a.gap_tol)
        x = res.estimate
        if a.trace:
            io.write_trace(a.trace, res.trace)
        if a.dual_out:
            io.write_dual(a.dual_out, g, res.y)
        print(f"tvmin: {res.trace.iterations} iterations, stop={res.trace.stop_reason}, "
              f"gap={res.gap:.3e}, output={res.selected}", file=sys.stderr)
    elif a.algorithm == "lp":
        x = solve_lp(g, t)
    else:
        r = solve_nlasso(g, t, NLassoOptions(a.lam, max_iters=a.iters))
        x = r.estimate
        print(f"nlasso: {r.iterations} iterations, converged={r.converged}", file=sys.stderr)
    rows = [(i, float(v)) for i, v in enumerate(x)]
    _emit_csv(a.out, ["node", "estimate"], rows)
    return EXIT_OK


def _cmd_verify(a) -> int:
    g = io.load_graph(a.graph)
    t = io.load_labels(a.labels, g.num_nodes)
    p = io.load_partition(a.partition, g.num_nodes)
    report = resolving_check_maxflow(g, p, t)
    rows = resolving_report_rows(report)
    header = ["cluster", "rho", "required", "pass"]
    _emit_csv(None, header, rows)
    if a.out:
        io.write_csv(a.out, header, rows)
    ok = all(r.passed for r in report)
    for r in report:
        if r.reason:
            print(f"cluster {r.cluster}: {r.reason}", file=sys.stderr)
    if a.exact:
        exact = resolving_check_exact(g, p, t)
        print(f"exact: {'pass' if exact else 'fail'}")
        ok = ok and exact
    return EXIT_OK if ok else EXIT_CHECK


def _cmd_gen(a) -> int:
    if a.model == "two-cluster":
        g, p = bench.gen_two_cluster(a.n_per_cluster, a.p_edge, a.n_cross, a.seed)
        amps = a.amplitudes or [0.1, -0.1]
        per = a.labels_per_cluster or 1
    else:
        g, p = bench.gen_sbm(a.cluster_sizes, a.p_in, a.p_out, a.seed)
        amps = a.amplitudes or list(np.linspace(-1.0, 1.0, p.num_clusters))
        per = a.labels_per_cluster or 5
    if len(amps) != p.num_clusters:
        raise UsageError(f"--amplitudes needs {p.num_clusters} values")
    x = piecewise_constant_signal(g, p, amps)
    # label draw uses its own stream so the graph depends only on the seed and model parameters
    rng = np.random.default_rng([a.seed, 1])
    if per > p.sizes().min():
        raise UsageError("--labels-per-cluster exceeds a cluster size")
    labeled = np.concatenate([rng.choice(p.members(l), per, replace=False) for l in range(p.num_clusters)])
    pre = a.out_prefix
    io.write_graph(f"{pre}.graph", g)
    io.write_partition(f"{pre}.partition", p)
    io.write_labels(f"{pre}.labels", TrainingSet.from_signal(x, labeled))
    io.write_labels(f"{pre}.signal", TrainingSet.from_signal(x, np.arange(g.num_nodes)))
    print(f"wrote {pre}.graph ({g.num_nodes} nodes, {g.num_edges} edges), "
          f"{pre}.partition, {pre}.labels, {pre}.signal", file=sys.stderr)
    return EXIT_OK


def _cmd_exp(a) -> int:
    cfg = bench.load_config(a.kind, a.config, seed=a.seed, trials=a.trials)
    run = {"two-cluster": bench.exp_two_cluster, "sbm": bench.exp_sbm, "compare": bench.exp_compare}[a.kind]
    if a.workers > 1:
        with ProcessPoolExecutor(a.workers) as ex:
            table = run(cfg, ex)
    else:
        table = run(cfg)
    _emit_csv(a.out, table.header, table.rows, table.comments())
    return EXIT_OK


def _cmd_cert(a) -> int:
    g = io.load_graph(a.graph)
    t = io.load_labels(a.labels, g.num_nodes)
    x = io.read_estimate(a.estimate, g.num_nodes)
    y = io.read_dual(a.dual, g)
    viol = float(np.max(np.abs(x[t.nodes] - t.values))) if len(t) else 0.0
    gap = certificate_gap(g, t, x, y)
    print(f"label_violation={viol!r}")
    print(f"gap={gap!r}")
    if not np.isfinite(gap):
        print("cert: dual vector is infeasible", file=sys.stderr)
        return EXIT_CHECK
    if viol > a.gap_tol or gap > a.gap_tol:
        print(f"cert: fail (tolerance {a.gap_tol})", file=sys.stderr)
        return EXIT_CHECK
    print("cert: pass")
    return EXIT_OK


_COMMANDS = {"solve": _cmd_solve, "verify": _cmd_verify, "gen": _cmd_gen, "exp": _cmd_exp, "cert": _cmd_cert}


def cli_main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError, BoundaryTooLargeError, bench.GeneratorError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


def main() -> None:
    sys.exit(cli_main())
