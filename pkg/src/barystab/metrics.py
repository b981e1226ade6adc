"""Distances between populations and power-law exponent fits."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import ot
from scipy import stats

from .exceptions import DomainMismatch, NonPositiveSample
from .measures import DiscreteMeasure, Population
from .transport import DEFAULT_SIZE_CAP, is_centrally_symmetric, w2_symmetric, w2_value
from . import io as _io

FIT_FLOOR = 1e-10


def w2_auto(rho: DiscreteMeasure, mu: DiscreteMeasure, size_cap: int | None = DEFAULT_SIZE_CAP) -> float:
    """Exact W2, switching to the reflection quotient for large symmetric pairs."""
    big = size_cap is not None and rho.n_atoms * mu.n_atoms > size_cap
    if big and is_centrally_symmetric(rho) and is_centrally_symmetric(mu):
        return w2_symmetric(rho, mu, size_cap=8 * size_cap)
    return w2_value(rho, mu, size_cap=size_cap)


def pairwise_w2(left, right, threads: int = 1, size_cap: int | None = DEFAULT_SIZE_CAP) -> np.ndarray:
    """Matrix of exact W2 between two lists of measures.

    Entries are computed independently, so the result does not depend on
    the number of threads.
    """
    left, right = list(left), list(right)
    jobs = [(i, j) for i in range(len(left)) for j in range(len(right))]

    def one(ij):
        i, j = ij
        return w2_auto(left[i], right[j], size_cap=size_cap)

    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(threads) as pool:
            vals = list(pool.map(one, jobs))
    else:
        vals = [one(ij) for ij in jobs]
    return np.array(vals, dtype=float).reshape(len(left), len(right))


def _check_domains(P: Population, Q: Population):
    if P.domain != Q.domain:
        raise DomainMismatch("populations live on different domains")


def nested_w1(P: Population, Q: Population, threads: int = 1,
              size_cap: int | None = DEFAULT_SIZE_CAP) -> float:
    """1-Wasserstein distance between populations with ground cost W2."""
    _check_domains(P, Q)
    C = pairwise_w2(P.measures, Q.measures, threads=threads, size_cap=size_cap)
    return float(max(ot.emd2(P.lambdas, Q.lambdas, C, numItermax=10**8), 0.0))


def tv_distance(P: Population, Q: Population) -> float:
    """Total variation between populations, matching entries by atom-set equality."""
    _check_domains(P, Q)
    distinct: list[DiscreteMeasure] = []
    mass: list[list[float]] = []
    for side, pop in enumerate((P, Q)):
        for lam, rho in pop.entries:
            for k, other in enumerate(distinct):
                if rho.same_atoms(other):
                    mass[k][side] += lam
                    break
            else:
                distinct.append(rho)
                mass.append([0.0, 0.0])
                mass[-1][side] += lam
    return float(min(1.0, 0.5 * sum(abs(p - q) for p, q in mass)))


@dataclass(frozen=True, eq=False)
class ExponentFit:
    """Least-squares line through ``(log x, log y)``."""

    x: np.ndarray
    y: np.ndarray
    slope: float
    intercept: float
    r_squared: float

    @property
    def pairs(self) -> list[tuple[float, float]]:
        return list(zip(self.x.tolist(), self.y.tolist()))

    def predict(self, x) -> np.ndarray:
        return np.exp(self.intercept) * np.asarray(x, dtype=float) ** self.slope

    def to_dict(self) -> dict:
        return {"pairs": [list(p) for p in self.pairs], "slope": self.slope,
                "intercept": self.intercept, "r_squared": self.r_squared}

    def to_json(self) -> str:
        return _io.dumps(self.to_dict())

    def to_csv(self, path):
        return _io.write_csv(path, ["x", "y"], self.pairs)


def fit_exponent(pairs, min_points: int = 3) -> ExponentFit:
    """Fit ``y ~ C x^slope`` by least squares in log-log coordinates.

    Points with ``0 <= y < 1e-10`` are treated as solver zeros and dropped.

    Raises
    ------
    NonPositiveSample
        On a nonpositive ``x``, a negative ``y``, or fewer than
        ``min_points`` usable points.
    """
    arr = np.asarray(pairs, dtype=float).reshape(-1, 2)
    x, y = arr[:, 0], arr[:, 1]
    if np.any(~np.isfinite(arr)):
        raise NonPositiveSample("pairs must be finite")
    if np.any(x <= 0) or np.any(y < 0):
        raise NonPositiveSample("exponent fit needs x > 0 and y >= 0")
    keep = y >= FIT_FLOOR
    x, y = x[keep], y[keep]
    if len(x) < min_points:
        raise NonPositiveSample(f"need at least {min_points} points with y >= {FIT_FLOOR}, got {len(x)}")
    lx, ly = np.log(x), np.log(y)
    if np.ptp(lx) == 0:
        raise NonPositiveSample("all x values coincide")
    res = stats.linregress(lx, ly)
    r2 = 1.0 if np.ptp(ly) == 0 else float(np.clip(res.rvalue**2, 0.0, 1.0))
    return ExponentFit(x, y, float(res.slope), float(res.intercept), r2)
