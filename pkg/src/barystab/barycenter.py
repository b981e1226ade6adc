"""Wasserstein barycenter solvers.

All solvers return a :class:`BarycenterResult` whose ``objective`` is the
variance functional ``F_P(mu) = 1/2 sum_i lambda_i W2^2(rho_i, mu)``
recomputed from exact transport solves.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog
from scipy.special import logsumexp
from sklearn.cluster import kmeans_plusplus

from .exceptions import NotConverged, SizeCapExceeded, SolverNotConverged, WrongDimension
from .measures import DiscreteMeasure, GridSpec, Population, make_discrete
from .transport import DEFAULT_SIZE_CAP, barycentric_projection, sq_dists, w2_exact, w2_value
from . import io as _io

METHODS = ("OneD", "FixedSupport", "FreeSupport", "Penalized", "TwoMarginal")
PENALTIES = ("entropy", "power")
FIRST_ORDER_TOL = 1e-7


@dataclass(frozen=True, eq=False)
class BarycenterResult:
    measure: DiscreteMeasure
    objective: float
    method: str
    iterations: int
    converged: bool

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")

    def to_dict(self) -> dict:
        out = self.measure.to_dict()
        out.update(objective=float(self.objective), method=self.method,
                   iterations=int(self.iterations), converged=bool(self.converged))
        return out

    def to_json(self) -> str:
        return _io.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "BarycenterResult":
        return cls(DiscreteMeasure.from_dict(data), float(data["objective"]), data["method"],
                   int(data["iterations"]), bool(data["converged"]))


def objective(P: Population, mu: DiscreteMeasure, threads: int = 1,
              size_cap: int | None = DEFAULT_SIZE_CAP) -> float:
    """``1/2 sum_i lambda_i W2^2(rho_i, mu)`` by exact solves, summed in entry order."""
    def one(rho):
        return w2_value(rho, mu, size_cap=size_cap) ** 2

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            sq = list(pool.map(one, P.measures))
    else:
        sq = [one(rho) for rho in P.measures]
    return 0.5 * float(sum(l * s for l, s in zip(P.lambdas, sq)))


# ---------------------------------------------------------------------------
# one dimension


def barycenter_1d(P: Population) -> BarycenterResult:
    """Exact barycenter on the line by averaging quantile functions.

    The quantile levels are the union of the cumulative-weight breakpoints of
    all marginals, so every quantile function is constant on each level
    interval and the average is exact.
    """
    if P.domain.d != 1:
        raise WrongDimension(f"barycenter_1d needs d = 1, got d = {P.domain.d}")
    levels, quantiles = _quantile_table(P)
    widths = np.diff(levels)
    atoms = P.lambdas @ quantiles
    spread = ((quantiles - atoms[None, :]) ** 2) @ widths
    obj = 0.5 * float(P.lambdas @ spread)
    mu = make_discrete(atoms[:, None], widths, P.domain)
    return BarycenterResult(mu, obj, "OneD", 1, True)


def _quantile_table(P: Population):
    sorted_measures = []
    breaks = [np.array([0.0, 1.0])]
    for rho in P.measures:
        order = np.argsort(rho.points[:, 0], kind="stable")
        x, w = rho.points[order, 0], rho.weights[order]
        cw = np.cumsum(w)
        cw[-1] = 1.0
        sorted_measures.append((x, cw))
        breaks.append(cw)
    levels = np.unique(np.clip(np.concatenate(breaks), 0.0, 1.0))
    keep = np.r_[True, np.diff(levels) > 1e-15]
    levels = levels[keep]
    levels[-1] = 1.0
    mids = 0.5 * (levels[1:] + levels[:-1])
    quantiles = np.empty((len(P), len(mids)))
    for i, (x, cw) in enumerate(sorted_measures):
        idx = np.minimum(np.searchsorted(cw, mids, side="left"), len(x) - 1)
        quantiles[i] = x[idx]
    return levels, quantiles


# ---------------------------------------------------------------------------
# fixed support


@dataclass(frozen=True)
class _LPSolution:
    weights: np.ndarray
    value: float
    row_duals: list      # alpha_i on the atoms of rho_i
    col_duals: np.ndarray  # beta_i on the support, shape (N, K)
    reduced: np.ndarray  # reduced cost of every support weight


def fixed_support_lp(P: Population, support: np.ndarray) -> _LPSolution:
    """Exact LP over plans ``gamma_i`` whose second marginals all equal ``mu``.

    Minimises ``1/2 sum_i lambda_i <C_i, gamma_i>``.  The duals satisfy
    ``1/2 lambda_i |x - s|^2 >= alpha_i(x) + beta_i(s)``; the reduced cost of
    ``mu(s)`` is ``sum_i beta_i(s) - t`` with ``t`` the dual of the mass
    constraint.
    """
    S = np.asarray(support, dtype=float)
    K = len(S)
    sizes = [rho.n_atoms for rho in P.measures]
    var_start = np.r_[0, np.cumsum(sizes) * K]
    n_rows = sum(sizes) + len(P) * K + 1
    mu_var = var_start[-1] + np.arange(K)
    r_idx, c_idx, vals, costs, rhs = [], [], [], [], []
    row = 0
    for i, (lam, rho) in enumerate(zip(P.lambdas, P.measures)):
        n = rho.n_atoms
        costs.append(0.5 * lam * sq_dists(rho.points, S).ravel())
        var = var_start[i] + np.arange(n * K)
        r_idx.append(np.repeat(row + np.arange(n), K)); c_idx.append(var); vals.append(np.ones(n * K))
        rhs.append(rho.weights)
        row += n
    col_rows = []
    for i, rho in enumerate(P.measures):
        n = rho.n_atoms
        var = var_start[i] + np.arange(n * K)
        r_idx.append(np.tile(row + np.arange(K), n)); c_idx.append(var); vals.append(np.ones(n * K))
        r_idx.append(row + np.arange(K)); c_idx.append(mu_var); vals.append(-np.ones(K))
        rhs.append(np.zeros(K))
        col_rows.append(row)
        row += K
    r_idx.append(np.full(K, row)); c_idx.append(mu_var); vals.append(np.ones(K))
    rhs.append(np.ones(1))
    n_var = var_start[-1] + K
    A = sp.csc_matrix((np.concatenate(vals), (np.concatenate(r_idx), np.concatenate(c_idx))),
                      shape=(n_rows, n_var))
    c = np.concatenate(costs + [np.zeros(K)])
    res = linprog(c, A_eq=A, b_eq=np.concatenate(rhs), bounds=(0, None), method="highs-ds")
    if res.status != 0:
        raise SolverNotConverged(f"barycenter LP failed: {res.message}")
    y = res.eqlin.marginals
    row_duals, start = [], 0
    for rho in P.measures:
        row_duals.append(y[start:start + rho.n_atoms])
        start += rho.n_atoms
    beta = np.stack([y[r:r + K] for r in col_rows])
    t = y[-1]
    reduced = beta.sum(axis=0) - t
    w = np.clip(res.x[mu_var], 0.0, None)
    return _LPSolution(w / w.sum(), float(res.fun), row_duals, beta, reduced)


def first_order_violation(weights, subgradient) -> float:
    """Largest objective decrease certified possible by moving one atom's mass.

    For a convex objective with subgradient ``g`` on the support, moving
    mass ``w_k`` from ``k`` to ``l`` decreases it by at most
    ``w_k (g_k - g_l)``.
    """
    w = np.asarray(weights, dtype=float)
    g = np.asarray(subgradient, dtype=float)
    active = w > 0
    if not np.any(active):
        return 0.0
    return float(max(0.0, np.max(w[active] * (g[active] - g.min()))))


def barycenter_fixed_support(P: Population, support, size_cap: int | None = DEFAULT_SIZE_CAP,
                             bregman: bool = True, epsilon: float = 1e-3, max_iter: int = 20_000,
                             tol: float = 1e-10) -> BarycenterResult:
    """Weights on a fixed support minimising the variance functional.

    The exact LP is used when ``sum_i n_i * |support|`` fits under
    ``size_cap``; otherwise iterative Bregman projections with an annealed
    regularisation take over, and ``converged`` reports whether the result
    passes the first-order mass-transfer check.
    """
    S = np.atleast_2d(np.asarray(support, dtype=float))
    if S.shape[1] != P.domain.d:
        S = S.reshape(-1, P.domain.d)
    if len(S) == 0:
        raise ValueError("support must be nonempty")
    size = sum(rho.n_atoms for rho in P.measures) * len(S)
    if size_cap is None or size <= size_cap:
        sol = fixed_support_lp(P, S)
        mu = make_discrete(S, sol.weights, P.domain)
        viol = first_order_violation(sol.weights, sol.reduced)
        return BarycenterResult(mu, objective(P, mu, size_cap=None), "FixedSupport", 1,
                                viol <= FIRST_ORDER_TOL)
    if not bregman:
        raise SizeCapExceeded(f"fixed-support LP of size {size} exceeds cap {size_cap}")
    w, iters = _bregman_barycenter(P, S, epsilon, max_iter, tol)
    mu = make_discrete(S, w, P.domain)
    viol = first_order_violation(w, _exact_subgradient(P, S, w))
    return BarycenterResult(mu, objective(P, mu, size_cap=None), "FixedSupport", iters,
                            viol <= FIRST_ORDER_TOL)


def _exact_subgradient(P: Population, S: np.ndarray, w: np.ndarray) -> np.ndarray:
    """``1/2 sum_i lambda_i v_i`` with ``v_i`` the c-transform dual on all of S."""
    keep = w > 0
    mu = make_discrete(S[keep], w[keep], P.domain)
    g = np.zeros(len(S))
    for lam, rho in zip(P.lambdas, P.measures):
        _, _, pot = w2_exact(rho, mu, size_cap=None)
        # u_i(x) = |x|^2 - 2 psi*(x); v(s) = min_x |x - s|^2 - u(x)
        u = np.einsum("ij,ij->i", rho.points, rho.points) - 2 * pot.psi_star
        v = (sq_dists(rho.points, S) - u[:, None]).min(axis=0)
        g += 0.5 * lam * v
    return g


def _bregman_barycenter(P: Population, S: np.ndarray, epsilon: float, max_iter: int, tol: float):
    """Log-domain iterative Bregman projections with epsilon annealing."""
    Cs = [sq_dists(rho.points, S) for rho in P.measures]
    scale = max(C.max() for C in Cs)
    las = [np.log(rho.weights) for rho in P.measures]
    lam = P.lambdas
    fs = [np.zeros(rho.n_atoms) for rho in P.measures]
    gs = [np.zeros(len(S)) for _ in P.measures]
    ladder = np.geomspace(scale, epsilon, max(2, int(np.ceil(np.log2(scale / epsilon))) + 1))
    used = 0
    log_mu = np.full(len(S), -np.log(len(S)))
    for stage, eps in enumerate(ladder):
        last = stage == len(ladder) - 1
        while used < max_iter:
            used += 1
            cols = []
            for i, C in enumerate(Cs):
                fs[i] = -eps * logsumexp((gs[i][None, :] - C) / eps, axis=1) + eps * las[i]
                cols.append(logsumexp((fs[i][:, None] - C) / eps, axis=0))
            new_log_mu = sum(l * (c + g / eps) for l, c, g in zip(lam, cols, gs))
            new_log_mu -= logsumexp(new_log_mu)
            for i in range(len(Cs)):
                gs[i] = eps * (new_log_mu - cols[i])
            change = np.abs(np.exp(new_log_mu) - np.exp(log_mu)).sum()
            log_mu = new_log_mu
            if change <= (tol if last else 1e-6):
                break
        if used >= max_iter:
            break
    return np.exp(log_mu), used


def centroid_support(P: Population, max_points: int = 100_000) -> np.ndarray:
    """All points ``sum_i lambda_i x_{i, k_i}``; they contain a discrete barycenter."""
    count = int(np.prod([rho.n_atoms for rho in P.measures]))
    if count > max_points:
        raise SizeCapExceeded(f"centroid set has {count} points, above {max_points}")
    pts = np.zeros((1, P.domain.d))
    for lam, rho in zip(P.lambdas, P.measures):
        pts = (pts[:, None, :] + lam * rho.points[None, :, :]).reshape(-1, P.domain.d)
    pts = np.unique(np.round(pts, 14), axis=0)
    norms = np.linalg.norm(pts, axis=1)
    pts = np.where((norms > P.domain.R)[:, None], pts * (P.domain.R / np.maximum(norms, 1e-300))[:, None], pts)
    return pts


def barycenter_exact(P: Population, size_cap: int | None = DEFAULT_SIZE_CAP) -> BarycenterResult:
    """A global minimiser, via the fixed-support LP on the centroid set."""
    if P.domain.d == 1:
        return barycenter_1d(P)
    return barycenter_fixed_support(P, centroid_support(P), size_cap=size_cap, bregman=False)


# ---------------------------------------------------------------------------
# free support


def barycenter_free_support(P: Population, k: int, init=None, max_iter: int = 200, tol: float = 1e-9,
                            seed: int = 0, n_init: int = 4, threads: int = 1) -> BarycenterResult:
    """Fixed-point iteration on atom positions with fixed weights.

    Each step solves OT from the current iterate to every marginal and
    moves each atom to the lambda-weighted mean of its barycentric images.
    This never increases the objective.  Since the iteration can stall at
    a poor matching, ``init=None`` runs ``n_init`` k-means++ seedings of the
    pooled atoms plus every marginal with exactly ``k`` atoms, and keeps the
    best result.  ``init`` may also be an ``(k, d)`` array or a measure
    (whose weights are then kept).
    """
    if k < 1:
        raise ValueError("k must be positive")
    starts = []
    if init is None:
        starts += [(X, np.full(k, 1.0 / k)) for X in _kmeanspp_starts(P, k, seed, n_init)]
        starts += [(rho.points, rho.weights) for rho in P.measures if rho.n_atoms == k]
    elif isinstance(init, DiscreteMeasure):
        if init.n_atoms != k:
            raise ValueError("init measure must have k atoms")
        starts.append((init.points, init.weights))
    else:
        X = np.asarray(init, dtype=float).reshape(k, P.domain.d)
        if not np.all(P.domain.contains(X)):
            raise ValueError("init atoms must lie in the domain")
        starts.append((X, np.full(k, 1.0 / k)))

    best = None
    for X, w in starts:
        res = _fixed_point(P, X, w, max_iter, tol, threads)
        if best is None or res.objective < best.objective - 1e-14:
            best = res
    return best


def _kmeanspp_starts(P: Population, k: int, seed: int, n_init: int):
    pooled = P.pooled()
    if pooled.n_atoms < k:
        raise ValueError(f"need k <= {pooled.n_atoms} distinct pooled atoms for k-means++")
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n_init):
        centers, _ = kmeans_plusplus(pooled.points, k, sample_weight=pooled.weights,
                                     random_state=int(rng.integers(2**31 - 1)))
        out.append(centers)
    return out


def _fixed_point(P: Population, X, w, max_iter, tol, threads) -> BarycenterResult:
    domain = P.domain
    X = np.array(X, dtype=float)
    w = np.asarray(w, dtype=float)

    def step(X):
        mu = DiscreteMeasure(X, w, domain)

        def images(rho):
            _, plan, _ = w2_exact(mu, rho, size_cap=None)
            return plan.cost, barycentric_projection(plan)

        if threads > 1:
            with ThreadPoolExecutor(threads) as pool:
                out = list(pool.map(images, P.measures))
        else:
            out = [images(rho) for rho in P.measures]
        obj = 0.5 * float(sum(l * c for l, (c, _) in zip(P.lambdas, out)))
        newX = sum(l * T for l, (_, T) in zip(P.lambdas, out))
        return obj, _project_ball(newX, domain.R)

    prev = np.inf
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        obj, newX = step(X)
        if obj > prev + 1e-10:
            raise SolverNotConverged(f"objective increased at iteration {it}: {prev} -> {obj}",
                                     iterations=it)
        prev = obj
        move = float(np.max(np.linalg.norm(newX - X, axis=1)))
        X = newX
        if move < tol:
            converged = True
            break
    mu = make_discrete(X, w, domain)
    return BarycenterResult(mu, objective(P, mu, threads=threads, size_cap=None), "FreeSupport", it,
                            converged)


def _project_ball(X, R):
    norms = np.linalg.norm(X, axis=1)
    over = norms > R
    if np.any(over):
        X = X.copy()
        X[over] *= (R / norms[over])[:, None]
    return X


# ---------------------------------------------------------------------------
# two marginals


def barycenter_two_marginal(P: Population, size_cap: int | None = None) -> BarycenterResult:
    """Exact barycenter of a two-entry population by displacement interpolation.

    With weights ``(1 - t, t)`` the barycenter is the image of an optimal
    plan between the two marginals under ``(x, y) -> (1 - t) x + t y``.
    """
    if len(P) != 2:
        raise ValueError("barycenter_two_marginal needs exactly two entries")
    rho0, rho1 = P.measures
    t = float(P.lambdas[1])
    w2, plan, _ = w2_exact(rho0, rho1, size_cap=size_cap)
    ii, jj = np.nonzero(plan.matrix > 0)
    atoms = (1 - t) * rho0.points[ii] + t * rho1.points[jj]
    mu = make_discrete(_project_ball(atoms, P.domain.R), plan.matrix[ii, jj], P.domain)
    # F_P along the geodesic is t(1 - t) W2^2 / 2
    obj = 0.5 * t * (1 - t) * w2**2
    return BarycenterResult(mu, obj, "TwoMarginal", 1, True)


# ---------------------------------------------------------------------------
# penalised


def barycenter_penalized(P: Population, grid: GridSpec, lam: float, penalty: str = "entropy",
                         p: float = 2.0, solver: str | None = None) -> BarycenterResult:
    """Minimise ``F_P(mu) + lam * G(mu)`` over measures on the grid nodes.

    ``penalty="entropy"`` uses ``G(mu) = sum mu log mu``; ``penalty="power"``
    uses ``G(mu) = sum mu^p`` with ``p >= 1``.  At ``lam = 0`` this is the
    fixed-support LP.  For ``lam > 0`` the convex program is solved with
    cvxpy (transport plans as variables, penalty on their common marginal).
    """
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    if penalty not in PENALTIES:
        raise ValueError(f"penalty must be one of {PENALTIES}")
    if penalty == "power" and p < 1:
        raise ValueError("power penalty needs p >= 1")
    S = grid.nodes()
    if lam == 0:
        res = barycenter_fixed_support(P, S, size_cap=None)
        return BarycenterResult(res.measure, res.objective, "Penalized", res.iterations, res.converged)

    import cvxpy as cp

    mu, fp, pen, cons, _ = _penalized_model(P, S, penalty, p)
    try:
        return _solve_penalized(P, S, mu, cp.Problem(cp.Minimize(fp + lam * pen), cons), solver)
    except NotConverged:
        if lam >= 1:
            raise
    # dividing by a small lam rescues interior-point runs that stall
    return _solve_penalized(P, S, mu, cp.Problem(cp.Minimize(fp / lam + pen), cons), solver)


def barycenter_penalty_limit(P: Population, grid: GridSpec, penalty: str = "entropy", p: float = 2.0,
                             slack: float = 1e-9, solver: str | None = None) -> BarycenterResult:
    """Grid barycenter of least penalty, the limit of the penalised solutions as ``lam -> 0``.

    Solves the unpenalised LP, then minimises the penalty over its optimal
    face: plans and weights are confined to entries whose reduced cost is
    at most ``slack`` (relative).
    """
    if penalty not in PENALTIES:
        raise ValueError(f"penalty must be one of {PENALTIES}")
    import cvxpy as cp

    S = grid.nodes()
    sol = fixed_support_lp(P, S)
    mu, fp, pen, cons, plans = _penalized_model(P, S, penalty, p)
    # complementary slackness with one dual optimum cuts out the optimal face
    tol = slack * max(1.0, sol.value)
    off = sol.reduced > tol
    cons.append(cp.multiply(off.astype(float), mu) == 0)
    for lam, rho, g, alpha, beta in zip(P.lambdas, P.measures, plans, sol.row_duals, sol.col_duals):
        rc = 0.5 * lam * sq_dists(rho.points, S) - alpha[:, None] - beta[None, :]
        blocked = rc > tol
        cons.append(cp.multiply(blocked.astype(float), g) == 0)
        off |= blocked.all(axis=0)
    return _solve_penalized(P, S, mu, cp.Problem(cp.Minimize(pen), cons), solver, zero=off)


def _penalized_model(P: Population, S: np.ndarray, penalty: str, p: float):
    import cvxpy as cp

    mu = cp.Variable(len(S), nonneg=True)
    terms, cons, plans = [], [cp.sum(mu) == 1], []
    for l, rho in zip(P.lambdas, P.measures):
        g = cp.Variable((rho.n_atoms, len(S)), nonneg=True)
        plans.append(g)
        terms.append(0.5 * l * cp.sum(cp.multiply(sq_dists(rho.points, S), g)))
        cons += [cp.sum(g, axis=1) == rho.weights, cp.sum(g, axis=0) == mu]
    pen = -cp.sum(cp.entr(mu)) if penalty == "entropy" else cp.sum(cp.power(mu, p))
    return mu, cp.sum(terms), pen, cons, plans


def _solve_penalized(P: Population, S: np.ndarray, mu, prob, solver, zero=None) -> BarycenterResult:
    import cvxpy as cp

    try:
        prob.solve(solver=solver or cp.CLARABEL)
    except cp.error.SolverError as exc:
        raise NotConverged(f"penalized barycenter: {exc}") from exc
    if prob.status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
        raise NotConverged(f"penalized barycenter solver status {prob.status}")
    w = np.clip(np.asarray(mu.value, dtype=float), 0.0, None)
    if zero is not None:
        w[zero] = 0.0
    w[w < 1e-12 * w.max()] = 0.0
    measure = make_discrete(S, w, P.domain)
    iters = int(prob.solver_stats.num_iters or 0)
    return BarycenterResult(measure, objective(P, measure, size_cap=None), "Penalized", iters,
                            prob.status == cp.OPTIMAL)
