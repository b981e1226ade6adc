"""Atomic probability measures on a ball, populations of them, and grids.

Every measure in the library is a weighted point cloud inside
``Omega = B(0, R)``.  Density-defined measures are realised by evaluating the
density on lattice nodes (:func:`discretize_density`).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .exceptions import (
    AllZeroDensity,
    DomainMismatch,
    InvalidMeasureError,
    NegativeWeight,
    PointOutsideDomain,
    ZeroTotalMass,
)
from . import io as _io

DOMAIN_TOL = 1e-12
MERGE_TOL = 1e-12
MASS_TOL = 1e-10
# weights already summing to 1 this closely are not re-divided, which keeps
# make_discrete bit-for-bit idempotent
_RENORMALIZE_TOL = 1e-12


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Domain:
    """The closed ball of radius ``R`` centred at the origin of R^d."""

    R: float
    d: int

    def __post_init__(self):
        if not (np.isfinite(self.R) and self.R > 0):
            raise ValueError(f"radius must be positive, got {self.R}")
        if int(self.d) != self.d or self.d < 1:
            raise ValueError(f"dimension must be a positive integer, got {self.d}")
        object.__setattr__(self, "R", float(self.R))
        object.__setattr__(self, "d", int(self.d))

    @property
    def diameter(self) -> float:
        return 2.0 * self.R

    def contains(self, points, tol: float = DOMAIN_TOL) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return np.linalg.norm(points, axis=1) <= self.R + tol

    def to_dict(self) -> dict:
        return {"R": self.R, "d": self.d}

    @classmethod
    def from_dict(cls, data: dict) -> "Domain":
        return cls(R=float(data["R"]), d=int(data["d"]))


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Weighted point cloud.  Build with :func:`make_discrete`."""

    points: np.ndarray
    weights: np.ndarray
    domain: Domain

    def __post_init__(self):
        object.__setattr__(self, "points", _frozen(self.points))
        object.__setattr__(self, "weights", _frozen(self.weights))

    @property
    def n_atoms(self) -> int:
        return len(self.weights)

    @property
    def dim(self) -> int:
        return self.domain.d

    def __len__(self) -> int:
        return self.n_atoms

    def __repr__(self) -> str:
        return f"DiscreteMeasure(n_atoms={self.n_atoms}, d={self.dim}, R={self.domain.R})"

    def same_atoms(self, other: "DiscreteMeasure", tol: float = MERGE_TOL) -> bool:
        """Equality as merged atom sets, independent of atom order."""
        if not isinstance(other, DiscreteMeasure):
            return NotImplemented
        if self.domain != other.domain or self.n_atoms != other.n_atoms:
            return False
        i, j = self._canonical_order(), other._canonical_order()
        return bool(
            np.all(np.abs(self.points[i] - other.points[j]) <= tol)
            and np.all(np.abs(self.weights[i] - other.weights[j]) <= tol)
        )

    __eq__ = same_atoms
    __hash__ = None

    def _canonical_order(self) -> np.ndarray:
        return np.lexsort(self.points.T[::-1])

    def mean(self) -> np.ndarray:
        return self.weights @ self.points

    def translate(self, v) -> "DiscreteMeasure":
        return make_discrete(self.points + np.asarray(v, dtype=float), self.weights, self.domain)

    def to_dict(self) -> dict:
        return {
            "domain": self.domain.to_dict(),
            "points": self.points.tolist(),
            "weights": self.weights.tolist(),
        }

    def to_json(self) -> str:
        return _io.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "DiscreteMeasure":
        domain = Domain.from_dict(data["domain"])
        points = np.asarray(data["points"], dtype=float).reshape(-1, domain.d)
        return make_discrete(points, data["weights"], domain)


def _as_points(points, d: int | None = None) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1) if d in (None, 1) else pts.reshape(-1, d)
    if pts.ndim != 2:
        raise InvalidMeasureError("points must be a list of vectors")
    return pts


def make_discrete(points, weights, domain: Domain) -> DiscreteMeasure:
    """Validate, merge coincident atoms and normalise into a DiscreteMeasure.

    Atoms closer than 1e-12 are merged (the first occurrence keeps its
    position); zero-weight atoms are dropped.

    Raises
    ------
    NegativeWeight, ZeroTotalMass, PointOutsideDomain
    """
    pts = _as_points(points, domain.d)
    w = np.asarray(weights, dtype=float).ravel()
    if len(pts) != len(w) or len(w) == 0:
        raise InvalidMeasureError(
            f"need matching nonempty points/weights, got {len(pts)} and {len(w)}")
    if pts.shape[1] != domain.d:
        raise InvalidMeasureError(f"points have dimension {pts.shape[1]}, domain has {domain.d}")
    if not np.all(np.isfinite(pts)) or not np.all(np.isfinite(w)):
        raise InvalidMeasureError("points and weights must be finite")
    if np.any(w < 0):
        raise NegativeWeight(f"negative weight {w.min()}")
    total = w.sum()
    if total <= 0:
        raise ZeroTotalMass("weights sum to zero")
    outside = ~domain.contains(pts)
    if np.any(outside):
        k = int(np.argmax(outside))
        raise PointOutsideDomain(
            f"point {pts[k].tolist()} has norm {np.linalg.norm(pts[k]):.6g} > R={domain.R}")

    keep = w > 0
    pts, w = pts[keep], w[keep]
    pts, w = _merge_close(pts, w)
    total = w.sum()
    if abs(total - 1.0) > _RENORMALIZE_TOL:
        w = w / total
    return DiscreteMeasure(pts, w, domain)


def _merge_close(pts: np.ndarray, w: np.ndarray):
    if len(w) < 2:
        return pts, w
    pairs = cKDTree(pts).query_pairs(MERGE_TOL, output_type="ndarray")
    if len(pairs) == 0:
        return pts, w
    # union-find over the close pairs; representatives are the smallest index
    parent = np.arange(len(w))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i, j in pairs:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)
    roots = np.array([find(i) for i in range(len(w))])
    reps, inverse = np.unique(roots, return_inverse=True)
    merged = np.zeros(len(reps))
    np.add.at(merged, inverse, w)
    return pts[reps], merged


def dirac(x, domain: Domain) -> DiscreteMeasure:
    return make_discrete([np.atleast_1d(np.asarray(x, dtype=float))], [1.0], domain)


def uniform_on(points, domain: Domain) -> DiscreteMeasure:
    pts = _as_points(points, domain.d)
    return make_discrete(pts, np.full(len(pts), 1.0 / len(pts)), domain)


def second_moment(mu: DiscreteMeasure) -> float:
    """sum_i w_i |x_i|^2."""
    return float(mu.weights @ np.einsum("ij,ij->i", mu.points, mu.points))


@dataclass(frozen=True)
class GridSpec:
    """Cell-centred lattice with ``resolution`` nodes per axis.

    The lattice covers ``box`` (default ``[-R, R]^d``); nodes falling outside
    the domain ball are dropped, not clamped.
    """

    resolution: int
    domain: Domain
    box: tuple | None = None

    def __post_init__(self):
        if int(self.resolution) != self.resolution or self.resolution < 1:
            raise ValueError("resolution must be a positive integer")
        if self.box is not None:
            lo, hi = (tuple(np.broadcast_to(np.asarray(b, dtype=float), (self.domain.d,)))
                      for b in self.box)
            if any(h <= l for l, h in zip(lo, hi)):
                raise ValueError("box must have hi > lo on every axis")
            object.__setattr__(self, "box", (lo, hi))

    @property
    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        if self.box is None:
            R = self.domain.R
            return np.full(self.domain.d, -R), np.full(self.domain.d, R)
        return np.asarray(self.box[0]), np.asarray(self.box[1])

    @property
    def spacing(self) -> np.ndarray:
        lo, hi = self.bounds
        return (hi - lo) / self.resolution

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def nodes(self) -> np.ndarray:
        lo, hi = self.bounds
        axes = [lo[k] + (np.arange(self.resolution) + 0.5) * (hi[k] - lo[k]) / self.resolution
                for k in range(self.domain.d)]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=1)
        pts = pts[self.domain.contains(pts)]
        if len(pts) == 0:
            raise ValueError("grid has no node inside the domain")
        return pts


def discretize_density(f: Callable[[np.ndarray], np.ndarray], grid: GridSpec) -> DiscreteMeasure:
    """Atoms at the grid nodes with weights proportional to ``f(nodes)``.

    ``f`` receives an ``(n, d)`` array and returns ``n`` nonnegative values.
    """
    nodes = grid.nodes()
    vals = np.asarray(f(nodes), dtype=float).reshape(-1)
    if vals.shape[0] != len(nodes):
        raise ValueError("density must return one value per node")
    if np.any(vals < 0) or not np.all(np.isfinite(vals)):
        raise NegativeWeight("density must be finite and nonnegative on the grid")
    if not np.any(vals > 0):
        raise AllZeroDensity("density vanishes on every grid node")
    return make_discrete(nodes, vals, grid.domain)


@dataclass(frozen=True, eq=False)
class Population:
    """Finitely supported measure over measures: weights lambda_i on rho_i."""

    lambdas: np.ndarray
    measures: tuple
    domain: Domain = field(default=None)

    def __post_init__(self):
        lam = np.asarray(self.lambdas, dtype=float).ravel()
        measures = tuple(self.measures)
        if len(lam) != len(measures) or len(lam) == 0:
            raise InvalidMeasureError("population needs matching nonempty weights and measures")
        if np.any(lam < 0):
            raise NegativeWeight("population weights must be nonnegative")
        if abs(lam.sum() - 1.0) > MASS_TOL:
            raise InvalidMeasureError(f"population weights sum to {lam.sum()}, not 1")
        domain = self.domain if self.domain is not None else measures[0].domain
        for m in measures:
            if not isinstance(m, DiscreteMeasure):
                raise InvalidMeasureError("population entries must be DiscreteMeasure")
            if m.domain != domain:
                raise DomainMismatch("all population entries must share one Domain")
        object.__setattr__(self, "lambdas", _frozen(lam))
        object.__setattr__(self, "measures", measures)
        object.__setattr__(self, "domain", domain)

    @classmethod
    def from_entries(cls, entries: Sequence[tuple[float, DiscreteMeasure]], normalize: bool = False):
        lam = np.array([float(l) for l, _ in entries])
        if normalize:
            if lam.sum() <= 0:
                raise ZeroTotalMass("population weights sum to zero")
            lam = lam / lam.sum()
        return cls(lam, tuple(m for _, m in entries))

    @classmethod
    def single(cls, rho: DiscreteMeasure) -> "Population":
        return cls(np.array([1.0]), (rho,))

    @property
    def entries(self) -> list[tuple[float, DiscreteMeasure]]:
        return list(zip(self.lambdas.tolist(), self.measures))

    def __len__(self) -> int:
        return len(self.measures)

    def __iter__(self):
        return iter(self.entries)

    def __repr__(self) -> str:
        return f"Population(n_measures={len(self)}, d={self.domain.d}, R={self.domain.R})"

    def pooled(self) -> DiscreteMeasure:
        """The mixture sum_i lambda_i rho_i as a single measure."""
        pts = np.concatenate([m.points for m in self.measures])
        w = np.concatenate([l * m.weights for l, m in zip(self.lambdas, self.measures)])
        return make_discrete(pts, w, self.domain)

    def translate(self, v) -> "Population":
        return Population(self.lambdas, tuple(m.translate(v) for m in self.measures), self.domain)

    def to_dict(self) -> dict:
        return {"entries": [{"lambda": float(l), "measure": m.to_dict()}
                            for l, m in zip(self.lambdas, self.measures)]}

    def to_json(self) -> str:
        return _io.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "Population":
        entries = [(float(e["lambda"]), DiscreteMeasure.from_dict(e["measure"])) for e in data["entries"]]
        return cls.from_entries(entries)


@dataclass(frozen=True)
class RegularityProfile:
    """Regularity constants of a population and the indices of its regular part.

    ``alpha`` is the population mass of the regular entries, ``m_lower`` and
    ``m_upper`` bound their densities, ``perimeter`` bounds the boundary
    measure of their supports and ``c_convexity`` is the constant of the
    variance inequality.  These are inputs for analytic families; nothing
    here estimates them.
    """

    alpha: float
    m_lower: float
    m_upper: float
    perimeter: float
    c_convexity: float
    regular_indices: tuple[int, ...]

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")
        for name in ("m_lower", "m_upper", "perimeter", "c_convexity"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.m_lower > self.m_upper:
            raise ValueError("m_lower must not exceed m_upper")
        object.__setattr__(self, "regular_indices", tuple(int(i) for i in self.regular_indices))

    def validate(self, population: Population) -> None:
        idx = list(self.regular_indices)
        if any(i < 0 or i >= len(population) for i in idx):
            raise ValueError("regular index out of range")
        mass = float(population.lambdas[idx].sum()) if idx else 0.0
        if abs(mass - self.alpha) > MASS_TOL:
            raise ValueError(f"regular entries carry mass {mass}, profile says alpha={self.alpha}")
