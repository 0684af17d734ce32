"""Comparison methods: label propagation and network Lasso."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, cg

from .graph import EmpiricalGraph, TrainingSet, incidence_apply
from .solver import ScalingFactors, solve_tvmin

__all__ = [
    "UnlabeledComponentError",
    "solve_lp",
    "lp_objective",
    "NLassoOptions",
    "NLassoResult",
    "solve_nlasso",
    "nlasso_objective",
    "ConsistencyReport",
    "nlasso_tvmin_consistency",
]


class UnlabeledComponentError(ValueError):
    pass


def _check_components(g: EmpiricalGraph, t: TrainingSet) -> None:
    comp = g.connected_components()
    covered = np.zeros(comp.max() + 1, dtype=bool)
    covered[comp[t.nodes]] = True
    if not covered.all():
        bad = np.flatnonzero(~covered)
        raise UnlabeledComponentError(
            f"{bad.size} connected component(s) contain no labeled node (e.g. node {int(np.argmax(comp == bad[0]))})")


def lp_objective(g: EmpiricalGraph, x) -> float:
    """``sum_e W_e^2 (x_head - x_tail)^2``."""
    d = incidence_apply(g, x)
    return float(np.dot(d, d))


def solve_lp(g: EmpiricalGraph, t: TrainingSet, tol: float = 1e-10,
             max_iters: Optional[int] = None,
             callback: Optional[Callable[[int, np.ndarray], None]] = None) -> np.ndarray:
    """Label propagation: harmonic extension of the labels with edge weights ``W^2``.

    Solves the unlabeled block of the ``W^2``-Laplacian system by
    Jacobi-preconditioned conjugate gradients to relative residual ``tol``.
    ``callback(k, x)`` sees the full signal after each CG iteration.
    """
    t.check(g)
    if len(t) == 0:
        raise ValueError("empty training set")
    _check_components(g, t)
    n = g.num_nodes
    x = np.zeros(n)
    x[t.nodes] = t.values
    free = np.flatnonzero(~t.mask(n))
    if free.size == 0:
        return x
    w2 = g.weights ** 2
    H, T = g.heads, g.tails
    adj = sp.coo_matrix((np.concatenate([w2, w2]), (np.concatenate([H, T]), np.concatenate([T, H]))),
                        shape=(n, n)).tocsr()
    deg2 = np.asarray(adj.sum(axis=1)).ravel()
    L = (sp.diags(deg2) - adj).tocsr()
    A = L[free][:, free]
    b = -(L[free] @ x)
    inv_diag = 1.0 / deg2[free]
    M = LinearOperator(A.shape, matvec=lambda r: inv_diag * r)
    cb = None
    if callback is not None:
        count = [0]

        def cb(xk):
            count[0] += 1
            full = x.copy()
            full[free] = xk
            callback(count[0], full)

    sol, info = cg(A, b, rtol=tol, atol=0.0, maxiter=max_iters if max_iters is not None else 10 * free.size,
                   M=M, callback=cb)
    if info > 0:
        raise RuntimeError(f"conjugate gradients did not reach tol={tol} in {info} iterations")
    x[free] = sol
    return x


@dataclass(frozen=True)
class NLassoOptions:
    lam: float
    max_iters: int = 5000
    tol: float = 1e-10

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


@dataclass
class NLassoResult:
    estimate: np.ndarray
    y: np.ndarray
    iterations: int
    converged: bool


def nlasso_objective(g: EmpiricalGraph, t: TrainingSet, x, lam: float) -> float:
    """``sum_{i in M} (x_i - label_i)^2 + lam * TV(x)``."""
    x = g.check_node_signal(x)
    r = x[t.nodes] - t.values
    return float(np.dot(r, r)) + lam * float(np.abs(incidence_apply(g, x)).sum())


def solve_nlasso(g: EmpiricalGraph, t: TrainingSet, opts: NLassoOptions,
                 callback: Optional[Callable[[int, np.ndarray], None]] = None) -> NLassoResult:
    """Network Lasso by the primal-dual iteration of :func:`solve_tvmin`.

    The dual is clipped to ``[-lam, lam]`` and the label clamp is replaced by
    the proximal map of the squared fidelity,
    ``x_i = (v_i + 2 gamma_i label_i) / (1 + 2 gamma_i)`` on labeled nodes.
    Returns the last iterate; iteration stops once the largest primal change
    in a step drops below ``tol``.
    """
    t.check(g)
    s = ScalingFactors.from_graph(g)
    lam_e, gamma, W, H, T = s.lam, s.gamma, g.weights, g.heads, g.tails
    n = g.num_nodes
    labeled, labels = t.nodes, t.values
    g_lab = gamma[labeled]
    x_prev = np.zeros(n)
    x_cur = np.zeros(n)
    y = np.zeros(g.num_edges)
    converged = False
    k = 0
    for k in range(1, opts.max_iters + 1):
        x_tilde = 2.0 * x_cur - x_prev
        y = np.clip(y + lam_e * (W * (x_tilde[H] - x_tilde[T])), -opts.lam, opts.lam)
        f = W * y
        x_new = x_cur - gamma * (np.bincount(H, f, minlength=n) - np.bincount(T, f, minlength=n))
        x_new[labeled] = (x_new[labeled] + 2.0 * g_lab * labels) / (1.0 + 2.0 * g_lab)
        step = float(np.max(np.abs(x_new - x_cur)))
        x_prev, x_cur = x_cur, x_new
        if callback is not None:
            callback(k, x_cur)
        if step <= opts.tol:
            converged = True
            break
    return NLassoResult(x_cur.copy(), y.copy(), k, converged)


@dataclass
class ConsistencyReport:
    found: bool
    lam: Optional[float]
    error: float                 # max abs difference to the TV-min solution at the best lambda
    errors: dict[float, float]   # per-lambda error
    reason: str = ""


def nlasso_tvmin_consistency(g: EmpiricalGraph, t: TrainingSet, tol: float = 1e-3,
                             lambdas: Optional[Sequence[float]] = None,
                             tvmin_iters: int = 2000, nlasso_iters: int = 20000) -> ConsistencyReport:
    """Look for a ``lam`` whose nLasso solution matches the TV-min solution within ``tol``.

    The comparison is on all nodes. Instances with a connected component
    free of labels are reported as not found: TV minimization leaves such
    components undetermined.
    """
    if lambdas is None:
        lambdas = np.logspace(-4, 2, 13)
    try:
        _check_components(g, t)
    except UnlabeledComponentError as exc:
        return ConsistencyReport(False, None, float("inf"), {}, str(exc))
    ref = solve_tvmin(g, t, max_iters=tvmin_iters, gap_tol=1e-12).estimate
    errors: dict[float, float] = {}
    for lam in lambdas:
        est = solve_nlasso(g, t, NLassoOptions(float(lam), max_iters=nlasso_iters)).estimate
        errors[float(lam)] = float(np.max(np.abs(est - ref)))
    best = min(errors, key=errors.get)
    found = errors[best] <= tol
    return ConsistencyReport(found, best if found else None, errors[best], errors,
                             "" if found else "no lambda on the grid within tolerance")
