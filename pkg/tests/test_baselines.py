import numpy as np
import pytest
from scipy.optimize import minimize

from instances import chain, toy, random_connected_graph
from tvflow.baselines import (
    NLassoOptions,
    UnlabeledComponentError,
    lp_objective,
    nlasso_objective,
    nlasso_tvmin_consistency,
    solve_lp,
    solve_nlasso,
)
from tvflow.graph import EmpiricalGraph, TrainingSet
from tvflow.solver import solve_tvmin


def random_instance(seed, n_max=30):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, n_max + 1))
    g = random_connected_graph(rng, n, int(rng.integers(0, 2 * n)))
    k = int(rng.integers(1, n))
    nodes = rng.choice(n, k, replace=False)
    return g, TrainingSet(nodes, rng.normal(size=k))


def dense_harmonic(g, t):
    n = g.num_nodes
    L = np.zeros((n, n))
    for h, tl, w in g.edges():
        L[h, h] += w * w
        L[tl, tl] += w * w
        L[h, tl] -= w * w
        L[tl, h] -= w * w
    x = np.zeros(n)
    x[t.nodes] = t.values
    free = np.flatnonzero(~t.mask(n))
    x[free] = np.linalg.solve(L[np.ix_(free, free)], -L[free] @ x)
    return x


class TestLP:
    def test_all_labeled(self):
        g, _, _, _ = toy()
        lab = np.arange(8.0)
        assert np.array_equal(solve_lp(g, TrainingSet(np.arange(8), lab)), lab)

    def test_chain3(self):
        x = solve_lp(chain(3), TrainingSet([0, 2], [0.0, 1.0]))
        assert x[1] == pytest.approx(0.5, abs=1e-12)

    def test_toy_strictly_interior(self):
        g, _, t, _ = toy()
        x = solve_lp(g, t)
        assert np.all((x[1:7] > 0.01) & (x[1:7] < 0.99))
        assert x[3] == pytest.approx(5 / 6, abs=1e-9) and x[4] == pytest.approx(1 / 6, abs=1e-9)

    @pytest.mark.parametrize("seed", range(15))
    def test_matches_dense_solve(self, seed):
        g, t = random_instance(seed)
        x = solve_lp(g, t)
        assert np.max(np.abs(x - dense_harmonic(g, t))) <= 1e-7

    @pytest.mark.parametrize("seed", range(10))
    def test_harmonic_and_optimal(self, seed):
        g, t = random_instance(seed)
        x = solve_lp(g, t)
        w2 = g.weights ** 2
        acc = np.zeros(g.num_nodes)
        np.add.at(acc, g.heads, w2 * (x[g.tails] - x[g.heads]))
        np.add.at(acc, g.tails, w2 * (x[g.heads] - x[g.tails]))
        free = ~t.mask(g.num_nodes)
        assert np.max(np.abs(acc[free])) <= 1e-7 * max(1.0, w2.max())
        tv_est = solve_tvmin(g, t, max_iters=500).estimate
        assert lp_objective(g, x) <= lp_objective(g, tv_est) + 1e-9

    def test_unlabeled_component(self):
        g = EmpiricalGraph.from_edges(4, [(0, 1, 1.0), (2, 3, 1.0)])
        with pytest.raises(UnlabeledComponentError, match="component"):
            solve_lp(g, TrainingSet([0], [1.0]))

    def test_callback_and_empty(self):
        g, _, t, _ = toy()
        seen = []
        solve_lp(g, t, callback=lambda k, x: seen.append(k))
        assert seen and seen == list(range(1, len(seen) + 1))
        with pytest.raises(ValueError, match="empty"):
            solve_lp(g, TrainingSet([], []))


def nlasso_direct(g, t, lam):
    """Smooth reformulation minimized by SLSQP: slack s_e >= |W_e (x_h - x_t)|."""
    n, m = g.num_nodes, g.num_edges
    H, T, W = g.heads, g.tails, g.weights

    def obj(z):
        r = z[t.nodes] - t.values
        return float(r @ r) + lam * z[n:].sum()

    cons = [
        {"type": "ineq", "fun": lambda z: z[n:] - W * (z[H] - z[T])},
        {"type": "ineq", "fun": lambda z: z[n:] + W * (z[H] - z[T])},
    ]
    z0 = np.zeros(n + m)
    res = minimize(obj, z0, constraints=cons, method="SLSQP", options={"ftol": 1e-12, "maxiter": 1000})
    return res.fun


class TestNLasso:
    @pytest.mark.parametrize("lam", [0.1, 0.5, 1.0, 1.5])
    def test_one_edge_closed_form(self, lam):
        g = EmpiricalGraph.from_edges(2, [(0, 1, 1.0)])
        res = solve_nlasso(g, TrainingSet([0, 1], [1.0, -1.0]), NLassoOptions(lam))
        assert res.converged
        assert res.estimate == pytest.approx([1 - lam / 2, -1 + lam / 2], abs=1e-8)

    def test_shrinkage_monotone(self):
        g, _, t, _ = toy()
        spreads = []
        for lam in (0.05, 0.2, 0.5, 1.0):
            x = solve_nlasso(g, t, NLassoOptions(lam, max_iters=50000)).estimate
            spreads.append(x.max() - x.min())
        assert all(a >= b - 1e-9 for a, b in zip(spreads, spreads[1:]))

    def test_large_lambda_gives_mean(self):
        g = random_connected_graph(np.random.default_rng(3), 5, 3)
        t = TrainingSet([0, 2, 4], [1.0, 2.0, 6.0])
        x = solve_nlasso(g, t, NLassoOptions(100.0, max_iters=100000)).estimate
        assert np.allclose(x, 3.0, atol=1e-6)

    @pytest.mark.parametrize("seed", range(6))
    def test_objective_matches_direct(self, seed):
        g, t = random_instance(seed, n_max=8)
        lam = 0.3
        res = solve_nlasso(g, t, NLassoOptions(lam, max_iters=100000, tol=1e-12))
        ref = nlasso_direct(g, t, lam)
        assert nlasso_objective(g, t, res.estimate, lam) == pytest.approx(ref, abs=1e-5)
        assert nlasso_objective(g, t, res.estimate, lam) <= ref + 1e-6

    def test_dual_bounded(self):
        g, _, t, _ = toy()
        res = solve_nlasso(g, t, NLassoOptions(0.3))
        assert np.max(np.abs(res.y)) <= 0.3

    def test_options(self):
        with pytest.raises(ValueError):
            NLassoOptions(0.0)
        with pytest.raises(ValueError):
            NLassoOptions(1.0, max_iters=0)


class TestConsistency:
    def test_toy(self):
        g, _, t, x = toy()
        rep = nlasso_tvmin_consistency(g, t)
        assert rep.found and rep.error <= 1e-3 and rep.lam is not None

    def test_all_labeled(self):
        g, _, _, _ = toy()
        rep = nlasso_tvmin_consistency(g, TrainingSet(np.arange(8), np.linspace(0, 1, 8)))
        assert rep.found

    def test_unlabeled_component(self):
        g = EmpiricalGraph.from_edges(4, [(0, 1, 1.0), (2, 3, 1.0)])
        rep = nlasso_tvmin_consistency(g, TrainingSet([0], [1.0]))
        assert not rep.found and "component" in rep.reason
