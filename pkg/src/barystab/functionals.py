"""Variance and Kantorovich functionals, strong-convexity gaps and constants."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import gamma as gamma_fn

from .barycenter import BarycenterResult, fixed_support_lp
from .exceptions import DisconnectedSupport, NonOptimalPotential
from .measures import DiscreteMeasure, Population, make_discrete, second_moment
from .transport import PotentialPair, legendre_conjugate, w2_exact, w2_value
from . import io as _io

INEQUALITY_TOL = 1e-9
# stand-in for +infinity when an indicator potential is represented by values
INDICATOR_CAP = 1e6


@dataclass(frozen=True)
class GapReport:
    """Two sides of a strong-convexity inequality.

    ``lhs_variance`` is ``c * Var_rho(psi_tilde* - psi*)`` and ``gap`` the
    Bregman-type right side.
    """

    lhs_variance: float
    gap: float
    w2_between_targets: float
    satisfied: bool

    def to_dict(self) -> dict:
        return {"lhs_variance": self.lhs_variance, "gap": self.gap,
                "w2_between_targets": self.w2_between_targets, "satisfied": self.satisfied}

    def to_json(self) -> str:
        return _io.dumps(self.to_dict())


@dataclass(frozen=True, eq=False)
class LaplacianReport:
    overlap_weights: np.ndarray
    lambda2: float
    c_rho: float

    def laplacian(self) -> np.ndarray:
        return laplacian(self.overlap_weights)

    def to_dict(self) -> dict:
        return {"overlap_weights": np.asarray(self.overlap_weights).tolist(),
                "lambda2": self.lambda2, "c_rho": self.c_rho}

    def to_json(self) -> str:
        return _io.dumps(self.to_dict())


def _report(lhs: float, gap: float, w2: float) -> GapReport:
    return GapReport(float(lhs), float(gap), float(w2), bool(lhs <= gap + INEQUALITY_TOL))


def variance(rho: DiscreteMeasure, f) -> float:
    """``Var_rho(f)`` for ``f`` given on the atoms of ``rho``."""
    f = np.asarray(f, dtype=float)
    mean = rho.weights @ f
    # centred form avoids the cancellation of E[f^2] - E[f]^2
    return float(max(rho.weights @ (f - mean) ** 2, 0.0))


def variance_functional(P: Population, mu: DiscreteMeasure) -> float:
    """``F_P(mu) = 1/2 sum_i lambda_i W2^2(rho_i, mu)``."""
    total = 0.0
    for lam, rho in zip(P.lambdas, P.measures):
        total += lam * w2_exact(rho, mu, size_cap=None)[0] ** 2
    return 0.5 * total


def kantorovich_functional(rho: DiscreteMeasure, psi, support) -> float:
    """``K_rho(psi) = <psi*, rho>`` with the conjugate taken over ``support``."""
    return float(rho.weights @ legendre_conjugate(psi, support, rho.points))


# ---------------------------------------------------------------------------
# strong convexity of the half squared distance


def potential_values(pot: PotentialPair, points) -> np.ndarray:
    """Evaluate the potential of ``pot`` at arbitrary points.

    Points of the target support take the stored ``psi``.  Elsewhere the
    smallest value compatible with ``psi_star`` is used,
    ``max_i <x_i, y> - psi_star(x_i)``, unless the pair carries a reference
    table covering the point.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, pot.target.dim)
    out = pot.psi_on(pts)
    for ref_pts, ref_vals in ((pot.ref_points, pot.ref_psi), (pot.target.points, pot.psi)):
        if ref_pts is None:
            continue
        idx = _lookup(pts, ref_pts)
        hit = idx >= 0
        out[hit] = np.asarray(ref_vals)[idx[hit]]
    return out


def _lookup(points, table, tol: float = 1e-12) -> np.ndarray:
    d, idx = cKDTree(table).query(points)
    return np.where(d <= tol, idx, -1)


def check_optimal(pot: PotentialPair, rho: DiscreteMeasure, mu: DiscreteMeasure,
                  tol: float = 1e-7) -> float:
    """Validate that ``pot`` is an optimal potential pair for ``(rho, mu)``.

    Returns the exact W2^2.

    Raises
    ------
    NonOptimalPotential
    """
    if not (pot.source.same_atoms(rho) and pot.target.same_atoms(mu)):
        raise NonOptimalPotential("potential pair was built for different measures")
    viol = pot.feasibility_violation()
    if viol > 1e-8:
        raise NonOptimalPotential(f"potential pair infeasible by {viol:.3g}")
    w2sq = w2_value(rho, mu, size_cap=None) ** 2
    dual = pot.duality_cost()
    if abs(dual - w2sq) > tol * max(1.0, w2sq):
        raise NonOptimalPotential(f"dual cost {dual:.12g} differs from W2^2 = {w2sq:.12g}")
    return w2sq


def strong_convexity_gap(rho: DiscreteMeasure, mu: DiscreteMeasure, nu: DiscreteMeasure,
                         psi_rho_to_mu: PotentialPair) -> GapReport:
    """Gap of ``1/2 W2^2(., rho)`` above its linearisation at ``mu``, evaluated at ``nu``.

    ``gap = 1/2 W2^2(nu, rho) - 1/2 W2^2(mu, rho) - <1/2|.|^2 - psi, nu - mu>``
    where ``psi`` is the optimal potential from ``rho`` to ``mu``.  The
    variance term uses an optimal potential from ``rho`` to ``nu`` solved
    here.
    """
    pot = psi_rho_to_mu
    w2sq_mu = check_optimal(pot, rho, mu)
    w2_nu, _, pot_nu = w2_exact(rho, nu, size_cap=None)
    half_sq = lambda m: 0.5 * np.einsum("ij,ij->i", m.points, m.points)
    lin_nu = nu.weights @ (half_sq(nu) - potential_values(pot, nu.points))
    lin_mu = mu.weights @ (half_sq(mu) - potential_values(pot, mu.points))
    gap = 0.5 * w2_nu**2 - 0.5 * w2sq_mu - (lin_nu - lin_mu)
    var = variance(rho, pot_nu.psi_star - pot.psi_star)
    return _report(var, gap, w2_value(mu, nu, size_cap=None))


def gap_kantorovich_form(rho: DiscreteMeasure, nu: DiscreteMeasure, pot_mu: PotentialPair,
                         pot_nu: PotentialPair) -> float:
    """``K(psi_mu) - K(psi_nu) + <psi_mu - psi_nu, nu>`` with ``K(psi) = <psi*, rho>``."""
    k_mu = rho.weights @ pot_mu.psi_star
    k_nu = rho.weights @ pot_nu.psi_star
    diff = potential_values(pot_mu, nu.points) - potential_values(pot_nu, nu.points)
    return float(k_mu - k_nu + nu.weights @ diff)


def variance_inequality_check(rho: DiscreteMeasure, psi, psi_tilde, c: float, support) -> GapReport:
    """Check ``c Var_rho(psi_tilde* - psi*) <= K(psi_tilde) - K(psi) - <psi - psi_tilde, T#rho>``.

    Both potentials are given on the common reference ``support``; ``T``
    sends each atom of ``rho`` to the maximiser defining ``psi*``, the
    atomic form of the gradient of ``psi*``.
    """
    if not c > 0:
        raise ValueError("c must be positive")
    Y = np.asarray(support, dtype=float).reshape(-1, rho.dim)
    psi = np.asarray(psi, dtype=float)
    psi_tilde = np.asarray(psi_tilde, dtype=float)
    conj, arg = legendre_conjugate(psi, Y, rho.points, return_argmax=True)
    conj_t, arg_t = legendre_conjugate(psi_tilde, Y, rho.points, return_argmax=True)
    k, k_t = rho.weights @ conj, rho.weights @ conj_t
    pushed = rho.weights @ (psi - psi_tilde)[arg]
    gap = k_t - k - pushed
    lhs = c * variance(rho, conj_t - conj)
    image = make_discrete(Y[arg], rho.weights, rho.domain)
    image_t = make_discrete(Y[arg_t], rho.weights, rho.domain)
    return _report(lhs, gap, w2_value(image, image_t, size_cap=None))


# ---------------------------------------------------------------------------
# duality for the barycenter problem


def barycenter_dual_potentials(P: Population, support) -> tuple[list[np.ndarray], float]:
    """Potentials ``psi_i`` on ``support`` with ``sum_i lambda_i psi_i = 1/2 |.|^2`` there.

    They come from the duals of the fixed-support barycenter LP; the
    second value is that LP's optimum.
    """
    S = np.asarray(support, dtype=float)
    sol = fixed_support_lp(P, S)
    half_sq = 0.5 * np.einsum("ij,ij->i", S, S)
    psis = []
    for lam, beta in zip(P.lambdas, sol.col_duals):
        # 1/2 lam |x - s|^2 >= alpha(x) + beta(s)  gives  psi(s) = 1/2|s|^2 - beta(s)/lam
        psis.append(half_sq - beta / lam if lam > 0 else half_sq.copy())
    resid = half_sq - sum(l * p for l, p in zip(P.lambdas, psis))
    psis = [p + resid for p in psis]
    return psis, sol.value


def dual_value(P: Population, support, psis) -> float:
    """``1/2 sum lambda_i M2(rho_i) - sum lambda_i <psi_i*, rho_i>``."""
    S = np.asarray(support, dtype=float)
    total = 0.0
    for lam, rho, psi in zip(P.lambdas, P.measures, psis):
        total += lam * (0.5 * second_moment(rho) - rho.weights @ legendre_conjugate(psi, S, rho.points))
    return float(total)


def dual_gap(P: Population, bary: BarycenterResult) -> float:
    """``|F_P(mu) - D|`` for the dual value ``D`` assembled on ``spt(mu)``."""
    keep = P.lambdas > 0
    if not np.all(keep):
        P = Population.from_entries([(l, m) for l, m in P.entries if l > 0], normalize=True)
    S = bary.measure.points
    psis, _ = barycenter_dual_potentials(P, S)
    return float(abs(variance_functional(P, bary.measure) - dual_value(P, S, psis)))


# ---------------------------------------------------------------------------
# constants for the variance inequality


def laplacian(weights) -> np.ndarray:
    W = np.array(weights, dtype=float)
    np.fill_diagonal(W, 0.0)
    return np.diag(W.sum(axis=1)) - W


def graph_laplacian_lambda2(weights) -> float:
    """Second smallest eigenvalue of the weighted Laplacian ``diag(W 1) - W``."""
    W = np.asarray(weights, dtype=float)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise ValueError("overlap weights must be a square matrix")
    if not np.allclose(W, W.T, rtol=0, atol=1e-12):
        raise ValueError("overlap weights must be symmetric")
    if np.any(W < 0):
        raise ValueError("overlap weights must be nonnegative")
    if len(W) < 2:
        return math.inf
    ev = np.linalg.eigvalsh(laplacian(W))
    return float(ev[1])


def _prefactor(d: int) -> float:
    return math.e * (d + 1) * 2.0 ** (d + 1)


def convex_support_constant(R: float, diam: float, m: float, M: float, d: int) -> float:
    """``(e (d+1) 2^(d+1) R diam (M/m)^2)^-1`` for a density on a convex set."""
    _check_density_bounds(m, M)
    return 1.0 / (_prefactor(d) * R * diam * (M / m) ** 2)


def _check_density_bounds(m, M):
    if not (m > 0 and M > 0 and m <= M):
        raise ValueError("need 0 < m <= M")


def compute_c_rho(overlaps, m: float, M: float, R: float, d: int, diam: float | None = None) -> LaplacianReport:
    """Variance-inequality constant for a density on a connected union of convex sets.

    ``overlaps[i][j]`` is the mass of the intersection of sets ``i`` and
    ``j``.  With ``N`` sets,

        c = (e (d+1) 2^(d+1) R^2 (M/m)^2 (N^2 + 2 N^3 / lambda2))^-1.

    A single set falls back to :func:`convex_support_constant` with the
    given ``diam`` (default ``2R``).

    Raises
    ------
    DisconnectedSupport
        If ``lambda2 <= 1e-12``.
    """
    _check_density_bounds(m, M)
    W = np.atleast_2d(np.asarray(overlaps, dtype=float))
    N = len(W)
    lam2 = graph_laplacian_lambda2(W)
    if N == 1:
        c = convex_support_constant(R, 2.0 * R if diam is None else diam, m, M, d)
        return LaplacianReport(W, lam2, c)
    if lam2 <= 1e-12:
        raise DisconnectedSupport(f"overlap graph is disconnected (lambda2 = {lam2:.3g})")
    c = 1.0 / (_prefactor(d) * R**2 * (M / m) ** 2 * (N**2 + 2.0 * N**3 / lam2))
    return LaplacianReport(W, lam2, c)


def sphere_area(d: int) -> float:
    """Surface area of the unit sphere in R^d."""
    return 2.0 * math.pi ** (d / 2) / gamma_fn(d / 2)


def min_overlap_mass(overlaps, exclusive_masses) -> float:
    """Smallest positive pairwise overlap or exclusive mass."""
    W = np.asarray(overlaps, dtype=float)
    iu = np.triu_indices(len(W), 1)
    pair = W[iu][W[iu] > 0]
    return float(min(np.min(pair) if pair.size else np.inf, np.min(exclusive_masses)))


def c_rho_poincare(N: int, m: float, M: float, R: float, d: int, c_pw: float, eps_min: float) -> float:
    """Alternate constant through an L1 Poincare-Wirtinger constant ``c_pw``.

    ``eps_min`` is the smallest overlap or exclusive mass (see
    :func:`min_overlap_mass`).
    """
    _check_density_bounds(m, M)
    if not (c_pw > 0 and eps_min > 0):
        raise ValueError("c_pw and eps_min must be positive")
    inner = M * sphere_area(d) * R ** (d - 1) * N**2 * c_pw / eps_min**2
    return 1.0 / (_prefactor(d) * R**2 * (M / m) ** 2 * N * (N + 0.5 * inner**3))
