"""scikit-learn style wrappers around the barycenter solvers and the h-net projection."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .barycenter import (
    METHODS,
    barycenter_1d,
    barycenter_exact,
    barycenter_fixed_support,
    barycenter_free_support,
    barycenter_penalized,
    barycenter_two_marginal,
    objective,
)
from .experiments import hnet_discretize
from .measures import DiscreteMeasure, Domain, GridSpec, Population, make_discrete
from .metrics import pairwise_w2
from .transport import DEFAULT_SIZE_CAP


def _bounding_domain(points: np.ndarray) -> Domain:
    r = float(np.max(np.linalg.norm(points, axis=1))) if len(points) else 0.0
    return Domain(max(r, 1e-12) * (1 + 1e-9), points.shape[1])


def check_measure(obj, domain: Domain | None = None) -> DiscreteMeasure:
    """Coerce ``obj`` to a :class:`DiscreteMeasure`.

    Accepts a measure, a ``(points, weights)`` pair or a bare point array
    (uniform weights).  Without ``domain``, the smallest centred ball
    holding the points is used.
    """
    if isinstance(obj, DiscreteMeasure):
        return obj
    if isinstance(obj, tuple) and len(obj) == 2:
        points, weights = obj
    else:
        points, weights = obj, None
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if weights is None:
        weights = np.ones(len(pts))
    return make_discrete(pts, weights, domain or _bounding_domain(pts))


def check_population(obj, domain: Domain | None = None) -> Population:
    """Coerce ``obj`` to a :class:`Population`.

    Accepts a population, a sequence of ``(weight, measure)`` pairs or a
    sequence of measures (equal weights).  Measures given as arrays share
    one domain large enough for all of them.
    """
    if isinstance(obj, Population):
        return obj
    items = list(obj)
    if not items:
        raise ValueError("population needs at least one measure")
    paired = all(isinstance(it, tuple) and len(it) == 2 and np.ndim(it[0]) == 0 for it in items)
    lams = [float(it[0]) for it in items] if paired else [1.0] * len(items)
    raw = [it[1] for it in items] if paired else items
    if domain is None:
        given = [m.domain for m in raw if isinstance(m, DiscreteMeasure)]
        if given:
            domain = given[0]
        else:
            pts = np.vstack([np.asarray(check_measure(m).points) for m in raw])
            domain = _bounding_domain(pts)
    return Population.from_entries([(l, check_measure(m, domain)) for l, m in zip(lams, raw)], normalize=True)


class WassersteinBarycenter(BaseEstimator):
    """Barycenter of a population of discrete measures.

    Parameters
    ----------
    method : {"auto", "OneD", "FixedSupport", "FreeSupport", "Penalized", "TwoMarginal"}
        ``"auto"`` picks the exact 1D solver on the line and the centroid
        LP otherwise.
    n_atoms : int, optional
        Atom count for the free-support solver.
    grid_resolution : int
        Nodes per axis for the fixed-support and penalised solvers.
    lam, penalty
        Penalty weight and kind for ``method="Penalized"``.
    size_cap : int
        Largest cost matrix an exact solve may build.
    random_state : int
        Seed for the free-support restarts.

    Attributes
    ----------
    barycenter_ : DiscreteMeasure
    objective_ : float
    n_iter_ : int
    """

    def __init__(self, method="auto", n_atoms=None, grid_resolution=32, lam=0.0, penalty="entropy",
                 size_cap=DEFAULT_SIZE_CAP, random_state=0):
        self.method = method
        self.n_atoms = n_atoms
        self.grid_resolution = grid_resolution
        self.lam = lam
        self.penalty = penalty
        self.size_cap = size_cap
        self.random_state = random_state

    def fit(self, X, y=None):
        P = check_population(X)
        method = self.method
        if method not in ("auto",) + METHODS:
            raise ValueError(f"method must be 'auto' or one of {METHODS}")
        if method == "auto":
            res = barycenter_1d(P) if P.domain.d == 1 else barycenter_exact(P, size_cap=self.size_cap)
        elif method == "OneD":
            res = barycenter_1d(P)
        elif method == "TwoMarginal":
            res = barycenter_two_marginal(P, size_cap=self.size_cap)
        elif method == "FreeSupport":
            k = self.n_atoms or max(m.n_atoms for m in P.measures)
            res = barycenter_free_support(P, k, seed=self.random_state)
        else:
            grid = GridSpec(self.grid_resolution, P.domain)
            if method == "FixedSupport":
                res = barycenter_fixed_support(P, grid.nodes(), size_cap=self.size_cap)
            else:
                res = barycenter_penalized(P, grid, self.lam, penalty=self.penalty)
        self.population_ = P
        self.result_ = res
        self.barycenter_ = res.measure
        self.objective_ = res.objective
        self.n_iter_ = res.iterations
        return self

    def transform(self, X):
        """W2 distance from each measure in ``X`` to the fitted barycenter, shape ``(n, 1)``."""
        check_is_fitted(self, "barycenter_")
        measures = [check_measure(m, self.barycenter_.domain) for m in X]
        return pairwise_w2(measures, [self.barycenter_], size_cap=self.size_cap)

    def score(self, X, y=None):
        """Negative variance functional of the fitted barycenter against ``X``."""
        check_is_fitted(self, "barycenter_")
        return -objective(check_population(X, self.barycenter_.domain), self.barycenter_, size_cap=self.size_cap)


class HNetDiscretizer(TransformerMixin, BaseEstimator):
    """Project measures onto the lattice ``(h / sqrt d) Z^d``; W2 moves by at most ``h``."""

    def __init__(self, h=0.1):
        self.h = h

    def fit(self, X=None, y=None):
        if not self.h > 0:
            raise ValueError("h must be positive")
        self.h_ = float(self.h)
        return self

    def transform(self, X):
        check_is_fitted(self, "h_")
        return [hnet_discretize(check_measure(m), self.h_) for m in X]
