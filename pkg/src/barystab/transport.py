"""Quadratic-cost optimal transport between discrete measures.

Exact solves go through the network simplex of POT (``ot.emd``); the dual
variables it returns are converted to the convex-potential convention

    psi_star(x_i) + psi(y_j) >= <x_i, y_j>,

so that ``psi_star`` is the Legendre conjugate of ``psi`` on the source atoms.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

# POT probes every installed array backend on import; none are used here
for _backend in ("TENSORFLOW", "PYTORCH", "JAX", "CUPY"):
    os.environ.setdefault(f"POT_BACKEND_DISABLE_{_backend}", "1")

import numpy as np
import ot
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist
from scipy.special import logsumexp

from .exceptions import (
    DomainMismatch,
    NonDeterministicPlan,
    NotConverged,
    NumericalUnderflow,
    SizeCapExceeded,
    SolverNotConverged,
)
from .measures import DiscreteMeasure, make_discrete, second_moment
from . import io as _io

DEFAULT_SIZE_CAP = 4_000_000
# network simplex on lattice-structured inputs is much faster once the atom
# order is scrambled; a fixed seed keeps the result deterministic
_SHUFFLE_ABOVE = 250_000
_SHUFFLE_SEED = 0x5EED
_EMD_MAX_ITER = 10**9
_CHUNK = 1 << 22


def sq_dists(X, Y) -> np.ndarray:
    return cdist(np.asarray(X, dtype=float), np.asarray(Y, dtype=float), "sqeuclidean")


@dataclass(frozen=True, eq=False)
class TransportPlan:
    source: DiscreteMeasure
    target: DiscreteMeasure
    matrix: np.ndarray
    cost: float

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float, copy=True)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def triples(self, threshold: float = 0.0):
        """(i, j, mass) for every entry above ``threshold``, sorted by (i, j)."""
        ii, jj = np.nonzero(self.matrix > threshold)
        return [(int(i), int(j), float(self.matrix[i, j])) for i, j in zip(ii, jj)]

    def to_csv(self, path) -> Path:
        return _io.write_csv(path, ["i", "j", "mass"], self.triples())

    def marginal_error(self) -> float:
        return float(max(np.abs(self.matrix.sum(1) - self.source.weights).max(),
                         np.abs(self.matrix.sum(0) - self.target.weights).max()))


@dataclass(frozen=True, eq=False)
class PotentialPair:
    """Dual certificate of an exact solve.

    ``psi`` lives on the target atoms and ``psi_star`` on the source atoms.
    ``certified_cost`` is the squared distance implied by the duals.  An
    optional reference table ``(ref_points, ref_psi)`` extends ``psi`` to
    points off the target support; it must stay feasible against
    ``psi_star``.
    """

    psi: np.ndarray
    psi_star: np.ndarray
    certified_cost: float
    source: DiscreteMeasure
    target: DiscreteMeasure
    ref_points: np.ndarray | None = None
    ref_psi: np.ndarray | None = None

    def __post_init__(self):
        for name in ("psi", "psi_star", "ref_points", "ref_psi"):
            if getattr(self, name) is None:
                continue
            a = np.array(getattr(self, name), dtype=float, copy=True)
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        if (self.ref_points is None) != (self.ref_psi is None):
            raise ValueError("ref_points and ref_psi go together")
        if self.ref_points is not None:
            object.__setattr__(self, "ref_points", self.ref_points.reshape(-1, self.target.dim))

    def feasibility_violation(self) -> float:
        """Largest amount by which psi_star(x) + psi(y) falls below <x, y>."""
        X, Y = self.source.points, self.target.points
        step = max(1, _CHUNK // len(Y))
        worst = 0.0
        for s in range(0, len(X), step):
            slack = self.psi_star[s:s + step, None] + self.psi[None, :] - X[s:s + step] @ Y.T
            worst = max(worst, float(-slack.min()))
        return worst

    def duality_cost(self) -> float:
        return dual_cost(self.source, self.target, self.psi_star, self.psi)

    def shifted(self, c: float) -> "PotentialPair":
        """Same certificate with ``psi + c`` and ``psi_star - c``."""
        ref = None if self.ref_psi is None else self.ref_psi + c
        return PotentialPair(self.psi + c, self.psi_star - c, self.certified_cost,
                             self.source, self.target, self.ref_points, ref)

    def with_reference(self, points, values) -> "PotentialPair":
        pts = np.asarray(points, dtype=float).reshape(-1, self.target.dim)
        vals = np.asarray(values, dtype=float)
        slack = self.psi_star[:, None] + vals[None, :] - self.source.points @ pts.T
        if slack.min() < -1e-8:
            raise ValueError(f"reference values infeasible by {-slack.min():.3g}")
        return PotentialPair(self.psi, self.psi_star, self.certified_cost, self.source,
                             self.target, pts, vals)

    def psi_on(self, points) -> np.ndarray:
        """Smallest extension of ``psi`` feasible against ``psi_star``.

        This is ``max_i <x_i, y> - psi_star(x_i)``; it agrees with ``psi`` on
        the target support after double conjugation.
        """
        return legendre_conjugate(self.psi_star, self.source.points, points)


def dual_cost(rho: DiscreteMeasure, mu: DiscreteMeasure, psi_star, psi) -> float:
    return float(second_moment(rho) + second_moment(mu)
                 - 2.0 * (rho.weights @ psi_star + mu.weights @ psi))


def _check_pair(rho: DiscreteMeasure, mu: DiscreteMeasure):
    if rho.domain != mu.domain:
        raise DomainMismatch(f"domains differ: {rho.domain} vs {mu.domain}")


def _emd(a, b, C):
    """Network simplex with a deterministic shuffle on large inputs."""
    n, m = C.shape
    if n * m < _SHUFFLE_ABOVE:
        G, log = ot.emd(a, b, C, numItermax=_EMD_MAX_ITER, log=True)
        return G, log
    rng = np.random.default_rng(_SHUFFLE_SEED)
    p, q = rng.permutation(n), rng.permutation(m)
    G, log = ot.emd(a[p], b[q], C[np.ix_(p, q)], numItermax=_EMD_MAX_ITER, log=True)
    ip, iq = np.argsort(p), np.argsort(q)
    log = dict(log, u=log["u"][ip], v=log["v"][iq])
    return G[np.ix_(ip, iq)], log


def _emd_checked(a, b, C):
    G, log = _emd(a, b, C)
    if log.get("warning"):
        raise SolverNotConverged(f"network simplex: {log['warning']}")
    return G, log


def w2_exact(rho: DiscreteMeasure, mu: DiscreteMeasure, size_cap: int | None = DEFAULT_SIZE_CAP):
    """Exact W2 with an optimal plan and optimal potentials.

    Returns ``(w2, plan, potentials)``.  The potentials are normalised so
    that ``psi`` vanishes at the first target atom.

    Raises
    ------
    SizeCapExceeded
        If ``n_source * n_target`` exceeds ``size_cap``.
    """
    _check_pair(rho, mu)
    n, m = rho.n_atoms, mu.n_atoms
    if size_cap is not None and n * m > size_cap:
        raise SizeCapExceeded(f"{n}x{m} problem exceeds cap {size_cap}")
    X, Y = rho.points, mu.points
    C = sq_dists(X, Y)
    G, log = _emd_checked(rho.weights, mu.weights, C)
    cost = float(np.sum(G * C))

    # u_i + v_j <= |x_i - y_j|^2  becomes  psi*(x_i) + psi(y_j) >= <x_i, y_j>
    psi_star = 0.5 * np.einsum("ij,ij->i", X, X) - 0.5 * log["u"]
    psi = 0.5 * np.einsum("ij,ij->i", Y, Y) - 0.5 * log["v"]
    # one round of conjugation removes slack left by the simplex duals
    psi_star = legendre_conjugate(psi, Y, X)
    psi = legendre_conjugate(psi_star, X, Y)
    shift = psi[0]
    psi, psi_star = psi - shift, psi_star + shift

    plan = TransportPlan(rho, mu, G, cost)
    pot = PotentialPair(psi, psi_star, dual_cost(rho, mu, psi_star, psi), rho, mu)
    return float(np.sqrt(max(cost, 0.0))), plan, pot


def w2_value(rho: DiscreteMeasure, mu: DiscreteMeasure, size_cap: int | None = DEFAULT_SIZE_CAP) -> float:
    """Exact W2 without building plan or potential objects."""
    _check_pair(rho, mu)
    if size_cap is not None and rho.n_atoms * mu.n_atoms > size_cap:
        raise SizeCapExceeded(f"{rho.n_atoms}x{mu.n_atoms} problem exceeds cap {size_cap}")
    C = sq_dists(rho.points, mu.points)
    G, _ = _emd_checked(rho.weights, mu.weights, C)
    return float(np.sqrt(max(np.sum(G * C), 0.0)))


def _half(mu: DiscreteMeasure, tol: float):
    """Representatives of the classes {z, -z} and their masses."""
    P, w = mu.points, mu.weights
    nz = np.abs(P) > tol
    first = np.argmax(nz, axis=1)
    lead = P[np.arange(len(P)), first]
    at_origin = ~nz.any(axis=1)
    keep = (lead > 0) | at_origin
    reps = P[keep]
    mirror = -reps
    tree_idx = _match_points(mirror, P, tol)
    if np.any(tree_idx < 0):
        return None
    mass = w[keep] + np.where(at_origin[keep], 0.0, w[tree_idx])
    return reps, mass


def _match_points(A, B, tol):
    d, idx = cKDTree(B).query(A)
    return np.where(d <= tol, idx, -1)


def is_centrally_symmetric(mu: DiscreteMeasure, tol: float = 1e-12) -> bool:
    idx = _match_points(-mu.points, mu.points, tol)
    return bool(np.all(idx >= 0) and np.allclose(mu.weights[idx], mu.weights, rtol=0, atol=tol))


def w2_symmetric(rho: DiscreteMeasure, mu: DiscreteMeasure, size_cap: int | None = 4 * DEFAULT_SIZE_CAP,
                 tol: float = 1e-12) -> float:
    """Exact W2 between two measures invariant under ``x -> -x``.

    Symmetrising any optimal plan keeps it optimal, so the problem reduces
    to the quotient by the reflection with cost
    ``min(|z - w|^2, |z + w|^2)``, which has half as many atoms per side.
    """
    _check_pair(rho, mu)
    if not (is_centrally_symmetric(rho, tol) and is_centrally_symmetric(mu, tol)):
        raise ValueError("both measures must be invariant under x -> -x")
    A, a = _half(rho, tol)
    B, b = _half(mu, tol)
    if size_cap is not None and len(a) * len(b) > size_cap:
        raise SizeCapExceeded(f"{len(a)}x{len(b)} quotient problem exceeds cap {size_cap}")
    C = np.minimum(sq_dists(A, B), sq_dists(A, -B))
    G, _ = _emd_checked(a / a.sum(), b / b.sum(), C)
    return float(np.sqrt(max(np.sum(G * C), 0.0)))


def w2_1d(rho: DiscreteMeasure, mu: DiscreteMeasure) -> float:
    """Exact W2 on the line through quantile functions."""
    _check_pair(rho, mu)
    if rho.dim != 1:
        raise ValueError("w2_1d needs one-dimensional measures")
    return float(np.sqrt(max(ot.emd2_1d(rho.points[:, 0], mu.points[:, 0],
                                        rho.weights, mu.weights, metric="sqeuclidean"), 0.0)))


def w2_entropic(rho: DiscreteMeasure, mu: DiscreteMeasure, epsilon: float, max_iter: int = 100_000,
                tol: float = 1e-9, log_domain: bool = True):
    """Sinkhorn plan for entropic OT and its unregularized transport cost.

    The returned value ``<plan, C>`` is an upper-biased estimate of W2^2
    (it is not square-rooted).  Convergence means the L1 violation of the
    row marginal is at most ``tol``; column marginals are exact after each
    sweep.

    Raises
    ------
    NotConverged
        After ``max_iter`` sweeps.
    NumericalUnderflow
        In scaling mode when the Gibbs kernel underflows.
    """
    _check_pair(rho, mu)
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    a, b = rho.weights, mu.weights
    C = sq_dists(rho.points, mu.points)
    if log_domain:
        G, it = _sinkhorn_log(a, b, C, epsilon, max_iter, tol)
    else:
        G, it = _sinkhorn_scaling(a, b, C, epsilon, max_iter, tol)
    plan = TransportPlan(rho, mu, G, float(np.sum(G * C)))
    return plan.cost, plan


def _sinkhorn_log(a, b, C, eps, max_iter, tol):
    # epsilon-scaling: small epsilon from a cold start converges sublinearly,
    # so warm-start the potentials along a geometric ladder
    la, lb = np.log(a), np.log(b)
    f = np.zeros(len(a))
    g = np.zeros(len(b))
    top = max(float(C.max()), eps)
    ladder = np.geomspace(top, eps, max(1, int(np.ceil(np.log2(top / eps)))) + 1)
    used = 0
    for stage, e in enumerate(ladder):
        last = stage == len(ladder) - 1
        stage_tol = tol if last else max(tol, 1e-6)
        while used < max_iter:
            used += 1
            f = -e * logsumexp((g[None, :] - C) / e + lb[None, :], axis=1)
            g = -e * logsumexp((f[:, None] - C) / e + la[:, None], axis=0)
            G = np.exp((f[:, None] + g[None, :] - C) / e + la[:, None] + lb[None, :])
            if np.abs(G.sum(1) - a).sum() <= stage_tol:
                break
        if used >= max_iter and not last:
            break
    if used < max_iter or np.abs(G.sum(1) - a).sum() <= tol:
        return G, used
    raise NotConverged(f"Sinkhorn did not reach tol={tol} in {max_iter} iterations", iterations=max_iter)


def _sinkhorn_scaling(a, b, C, eps, max_iter, tol):
    with np.errstate(under="ignore"):
        K = np.exp(-C / eps)
    if np.any(K.sum(1) == 0) or np.any(K.sum(0) == 0):
        raise NumericalUnderflow(f"Gibbs kernel underflows at epsilon={eps}; use log_domain=True")
    u = np.ones(len(a))
    v = np.ones(len(b))
    for it in range(1, max_iter + 1):
        u = a / (K @ v)
        v = b / (K.T @ u)
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
            raise NumericalUnderflow(f"scaling vectors overflowed at epsilon={eps}")
        if it % 10 == 0 or it == max_iter:
            G = u[:, None] * K * v[None, :]
            if np.abs(G.sum(1) - a).sum() <= tol:
                return G, it
    raise NotConverged(f"Sinkhorn did not reach tol={tol} in {max_iter} iterations", iterations=max_iter)


def legendre_conjugate(psi, support_points, eval_points, return_argmax: bool = False):
    """``psi*(x) = max_y <x, y> - psi(y)`` over the finite support."""
    psi = np.asarray(psi, dtype=float)
    Y = np.atleast_2d(np.asarray(support_points, dtype=float))
    X = np.asarray(eval_points, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, Y.shape[1])
    out = np.empty(len(X))
    arg = np.empty(len(X), dtype=int)
    step = max(1, _CHUNK // max(len(Y), 1))
    for s in range(0, len(X), step):
        vals = X[s:s + step] @ Y.T - psi[None, :]
        k = np.argmax(vals, axis=1)
        arg[s:s + step] = k
        out[s:s + step] = vals[np.arange(len(k)), k]
    return (out, arg) if return_argmax else out


def c_transform(phi, target_points, source_points) -> np.ndarray:
    """``phi^c(x) = min_y 0.5 |x - y|^2 - phi(y)`` over the finite target support."""
    phi = np.asarray(phi, dtype=float)
    Y = np.atleast_2d(np.asarray(target_points, dtype=float))
    X = np.asarray(source_points, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, Y.shape[1])
    # 0.5|x-y|^2 - phi(y) = 0.5|x|^2 - (<x,y> - (0.5|y|^2 - phi(y)))
    psi = 0.5 * np.einsum("ij,ij->i", Y, Y) - phi
    return 0.5 * np.einsum("ij,ij->i", X, X) - legendre_conjugate(psi, Y, X)


def brenier_map_from_potential(plan: TransportPlan, threshold: float = 1e-9) -> np.ndarray:
    """Image of every source atom under a deterministic plan.

    Row ``i`` of the result is the target atom receiving all mass of source
    atom ``i``; this is the atomic stand-in for the gradient of ``psi_star``.

    Raises
    ------
    NonDeterministicPlan
        If some source atom splits its mass over several target atoms.
    """
    G = plan.matrix
    counts = (G > threshold).sum(axis=1)
    if np.any(counts > 1):
        i = int(np.argmax(counts > 1))
        raise NonDeterministicPlan(f"source atom {i} is split over {int(counts[i])} targets")
    return plan.target.points[np.argmax(G, axis=1)]


def barycentric_projection(plan: TransportPlan) -> np.ndarray:
    """Conditional mean of the target given each source atom."""
    G = plan.matrix
    return (G @ plan.target.points) / G.sum(axis=1, keepdims=True)


def pushforward(plan: TransportPlan) -> DiscreteMeasure:
    """The second marginal of the plan, rebuilt as a measure."""
    return make_discrete(plan.target.points, plan.matrix.sum(axis=0), plan.target.domain)
