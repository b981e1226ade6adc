"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""

import time

import numpy as np
import pytest

from barystab.barycenter import barycenter_1d
from barystab.experiments import (
    ExperimentConfig,
    fig1_family,
    hnet_discretize,
    remark_exponent_family,
    run_dual_check,
    run_empirical_bary,
    run_fig2,
    run_reg_bias,
)
from barystab.barycenter import barycenter_exact
from barystab.functionals import (
    compute_c_rho,
    convex_support_constant,
    strong_convexity_gap,
    variance_inequality_check,
)
from barystab.measures import Domain, Population, make_discrete
from barystab.metrics import fit_exponent, nested_w1, pairwise_w2
from barystab.transport import w2_exact, w2_value

from conftest import random_measure
from oracles import ot_by_vertices, w2sq_permutations


@pytest.fixture
def report(capsys):
    def emit(number, name, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number:2d} {name}: {detail}")
        assert ok, detail

    return emit


def test_fig1_counterexample(report):
    t0 = time.perf_counter()
    worst_w2, worst_w1 = 0.0, -np.inf
    for eps in (0.05, 0.1, 0.25, 0.5):
        P, Q = fig1_family(eps)
        w2 = w2_value(barycenter_exact(P).measure, barycenter_exact(Q).measure)
        worst_w2 = max(worst_w2, abs(w2 - 1.0))
        worst_w1 = max(worst_w1, nested_w1(P, Q) - eps)
    elapsed = time.perf_counter() - t0
    ok = worst_w2 <= 1e-8 and worst_w1 <= 1e-9 and elapsed < 1.0
    report(1, "fig1", ok, f"max|W2-1|={worst_w2:.2e} max(W1-eps)={worst_w1:.2e} time={elapsed:.2f}s")


def test_remark_exponent(report):
    t0 = time.perf_counter()
    errs, rels, ratios = [], [], []
    for eps in (0.02, 0.05, 0.1, 0.2):
        rho, mu0, mu_eps, pot = remark_exponent_family(eps, grid=2048)
        w2sq = w2_value(mu0, mu_eps) ** 2
        gap = strong_convexity_gap(rho, mu0, mu_eps, pot).gap
        errs.append(abs(w2sq - eps))
        rels.append(abs(gap / (eps**2 / 4) - 1))
        ratios.append(gap / w2sq**2)
    elapsed = time.perf_counter() - t0
    ok = max(errs) <= 1e-10 and max(rels) <= 0.02 and np.all(np.abs(np.array(ratios) - 0.25) <= 0.01) \
        and elapsed < 10
    report(2, "remark", ok, f"max|W2^2-eps|={max(errs):.1e} max rel gap err={max(rels):.4f} "
                            f"gap/W2^4 in [{min(ratios):.4f},{max(ratios):.4f}] time={elapsed:.1f}s")


def test_fig2_exponent(report):
    t0 = time.perf_counter()
    parts, ok = [], True
    for alpha in (0.25, 0.5, 1.0):
        cfg = ExperimentConfig(family="fig2", alpha=alpha, a=0.5, resolution=64, params={"nested_w1": False})
        s = run_fig2(cfg).summary
        ok &= abs(s["slope"] - alpha) <= 0.15 and s["r_squared"] >= 0.98
        parts.append(f"alpha={alpha} slope={s['slope']:.3f} r2={s['r_squared']:.4f}")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 300
    report(3, "fig2", ok, "; ".join(parts) + f" time={elapsed:.0f}s")


def _population_1d(rng, dom):
    k = int(rng.integers(1, 6))
    return Population.from_entries([(l, random_measure(rng, int(rng.integers(1, 21)), dom))
                                    for l in rng.dirichlet(np.ones(k))])


def test_lipschitz_1d(report):
    t0 = time.perf_counter()
    dom = Domain(1.0, 1)
    worst = -np.inf
    for seed in range(200):
        rng = np.random.default_rng(seed)
        P, Q = _population_1d(rng, dom), _population_1d(rng, dom)
        lhs = w2_value(barycenter_1d(P).measure, barycenter_1d(Q).measure)
        worst = max(worst, lhs - nested_w1(P, Q))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-6 and elapsed < 30
    report(4, "1d-lipschitz", ok, f"max(W2-W1)={worst:.3e} over 200 pairs time={elapsed:.1f}s")


def test_strong_duality(report):
    t0 = time.perf_counter()
    worst = run_dual_check(ExperimentConfig(params={"instances": 50})).summary["max_dual_gap"]
    elapsed = time.perf_counter() - t0
    report(5, "dual-gap", worst <= 1e-6 and elapsed < 60, f"max gap={worst:.2e} time={elapsed:.1f}s")


def test_gap_positivity(report):
    t0 = time.perf_counter()
    dom = Domain(1.0, 2)
    worst = np.inf
    for seed in range(500):
        rng = np.random.default_rng(seed)
        rho, mu, nu = (random_measure(rng, int(rng.integers(1, 9)), dom) for _ in range(3))
        _, _, pot = w2_exact(rho, mu)
        worst = min(worst, strong_convexity_gap(rho, mu, nu, pot).gap)
    elapsed = time.perf_counter() - t0
    report(6, "gap>=0", worst >= -1e-8 and elapsed < 120, f"min gap={worst:.3e} time={elapsed:.1f}s")


def _vi_grids(d):
    if d == 1:
        X = (-0.5 + (np.arange(256) + 0.5) / 256)[:, None]
        return X, np.linspace(-1, 1, 4001)[:, None]
    g = -0.5 + (np.arange(24) + 0.5) / 24
    X = np.stack(np.meshgrid(g, g, indexing="ij"), -1).reshape(-1, 2)
    t = np.linspace(-0.7, 0.7, 121)
    Y = np.stack(np.meshgrid(t, t, indexing="ij"), -1).reshape(-1, 2)
    return X, Y[np.linalg.norm(Y, axis=1) <= 1]


def _smooth_potential(rng, Y):
    d = Y.shape[1]
    A = rng.uniform(0.8, 1.5)
    k = rng.normal(size=(3, d)) * 2
    phase = rng.uniform(0, 2 * np.pi, 3)
    amp = rng.uniform(0, 0.05, 3)
    return 0.5 * A * (Y**2).sum(1) + (amp * np.sin(Y @ k.T + phase)).sum(1) + rng.normal(0, 0.1, d) @ Y.T


def test_variance_inequality(report):
    t0 = time.perf_counter()
    violations, parts = 0, []
    for d in (1, 2):
        X, Y = _vi_grids(d)
        rho = make_discrete(X, np.ones(len(X)), Domain(1.0, d))
        c = convex_support_constant(1.0, np.sqrt(d), 1.0, 1.0, d)
        bad = 0
        for seed in range(100):
            rng = np.random.default_rng(seed)
            bad += not variance_inequality_check(rho, _smooth_potential(rng, Y), _smooth_potential(rng, Y), c, Y).satisfied
        violations += bad
        parts.append(f"d={d} c={c:.3e} violations={bad}")
    elapsed = time.perf_counter() - t0
    report(7, "variance-ineq", violations == 0 and elapsed < 120, "; ".join(parts) + f" time={elapsed:.1f}s")


def test_laplacian_constants(report):
    w = 0.25
    two = compute_c_rho([[0, w], [w, 0]], 1.0, 1.0, 1.0, 2).lambda2
    path = compute_c_rho([[0, 1, 0], [1, 0, 1], [0, 1, 0]], 1.0, 1.0, 1.0, 2).lambda2
    single = compute_c_rho([[0.0]], 1.0, 2.0, 1.0, 2, diam=1.5).c_rho
    formula = convex_support_constant(1.0, 1.5, 1.0, 2.0, 2)
    rel = abs(single / formula - 1)
    ok = abs(two - 2 * w) <= 1e-9 and abs(path - 1) <= 1e-9 and rel <= 4 * np.finfo(float).eps
    report(8, "c_rho", ok, f"two-set lambda2={two:.12f} path-3 lambda2={path:.12f} N=1 rel err={rel:.1e}")


def test_hnet_bound(report):
    t0 = time.perf_counter()
    dom = Domain(1.0, 2)
    worst = -np.inf
    for seed in range(50):
        rho = random_measure(np.random.default_rng(seed), 40, dom, scale=1.0)
        for h in (0.05, 0.1, 0.2):
            worst = max(worst, w2_value(rho, hnet_discretize(rho, h), size_cap=None) - h)
    elapsed = time.perf_counter() - t0
    report(9, "h-net", worst <= 0 and elapsed < 60, f"max(W2-h)={worst:.3e} time={elapsed:.1f}s")


def test_oracle_equivalence(report):
    dom = Domain(1.0, 2)
    perm_err = 0.0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        n = seed % 6 + 1
        a, b = random_measure(rng, n, dom, uniform=True), random_measure(rng, n, dom, uniform=True)
        perm_err = max(perm_err, abs(w2_value(a, b) ** 2 - w2sq_permutations(a.points, b.points)))
    nested_err = 0.0
    for seed in range(50):
        rng = np.random.default_rng(1000 + seed)
        P, Q = (Population.from_entries([(l, random_measure(rng, int(rng.integers(1, 5)), dom))
                                         for l in rng.dirichlet(np.ones(int(rng.integers(1, 4))))])
                for _ in range(2))
        want = ot_by_vertices(P.lambdas, Q.lambdas, pairwise_w2(P.measures, Q.measures))
        nested_err = max(nested_err, abs(nested_w1(P, Q) - want))
    ok = perm_err <= 1e-12 and nested_err <= 1e-9
    report(10, "oracles", ok, f"permutation max err={perm_err:.1e} nested W1 max err={nested_err:.1e}")


def test_statistical_trends(report):
    t0 = time.perf_counter()
    means = run_empirical_bary(ExperimentConfig()).tables["empirical_bary"].column("mean_w2")
    rises = np.diff(means) / means[:-1]
    inversions = rises[rises > 0]
    trend_ok = len(inversions) <= 1 and np.all(inversions <= 0.05)

    bias = run_reg_bias(ExperimentConfig()).tables["reg_bias"].column("w2_bias")
    bias_ok = bool(np.all(np.diff(bias) >= -1e-4)) and bias[0] <= bias[-1]
    elapsed = time.perf_counter() - t0
    ok = trend_ok and bias_ok and elapsed < 600
    report(11, "trends", ok, f"empirical means={np.array2string(means, precision=4)} "
                             f"reg bias={np.array2string(bias, precision=5)} time={elapsed:.0f}s")
