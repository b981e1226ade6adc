"""Instance families and the experiments built on them.

Every generator is deterministic in its arguments; randomised experiments
derive all randomness from a single integer seed.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .barycenter import (
    BarycenterResult,
    barycenter_1d,
    barycenter_exact,
    barycenter_penalized,
    barycenter_penalty_limit,
    barycenter_two_marginal,
)
from .exceptions import BadConfig, NonPositiveSample, OutOfRegime
from .functionals import compute_c_rho, dual_gap, strong_convexity_gap
from .measures import DiscreteMeasure, Domain, GridSpec, Population, RegularityProfile, make_discrete
from .metrics import fit_exponent, nested_w1, tv_distance, w2_auto
from .transport import DEFAULT_SIZE_CAP, PotentialPair, dual_cost, w2_value
from . import io as _io

FAMILIES = ("fig1", "fig2", "remark")
UINT64_MAX = 2**64 - 1


# ---------------------------------------------------------------------------
# tables and configuration


@dataclass(frozen=True)
class Table:
    """Named columns and rows of plain numbers."""

    columns: tuple
    rows: tuple

    def column(self, name: str) -> np.ndarray:
        k = self.columns.index(name)
        return np.array([r[k] for r in self.rows], dtype=float)

    def to_csv(self, path) -> Path:
        return _io.write_csv(path, list(self.columns), self.rows)

    def to_dict(self) -> dict:
        return {"columns": list(self.columns), "rows": [list(r) for r in self.rows]}


def _table(columns, rows) -> Table:
    return Table(tuple(columns), tuple(tuple(r) for r in rows))


@dataclass(frozen=True)
class ExperimentConfig:
    """Parameters of one experiment run.

    Ladders are tuples of strictly positive, strictly increasing numbers.
    Keys that only some experiments understand go in ``params``.
    """

    family: str = "fig2"
    epsilons: tuple = ()
    alpha: float = 0.5
    a: float = 0.5
    resolution: int = 64
    sample_sizes: tuple = ()
    m_ladder: tuple = ()
    lambdas: tuple = ()
    h_ladder: tuple = ()
    seed: int = 0
    size_cap: int = DEFAULT_SIZE_CAP
    threads: int = 1
    force: bool = False
    params: dict = field(default_factory=dict)

    _LADDERS = ("epsilons", "sample_sizes", "m_ladder", "lambdas", "h_ladder")

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise BadConfig(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        for name in self._LADDERS:
            try:
                ladder = tuple(float(v) for v in getattr(self, name))
            except (TypeError, ValueError) as exc:
                raise BadConfig(f"{name} must be a list of numbers") from exc
            if any(not (math.isfinite(v) and v > 0) for v in ladder):
                raise BadConfig(f"{name} must be strictly positive")
            if any(b <= a for a, b in zip(ladder, ladder[1:])):
                raise BadConfig(f"{name} must be sorted ascending without repeats")
            object.__setattr__(self, name, ladder)
        for name in ("sample_sizes", "m_ladder"):
            if any(v != int(v) for v in getattr(self, name)):
                raise BadConfig(f"{name} must hold integers")
            object.__setattr__(self, name, tuple(int(v) for v in getattr(self, name)))
        if isinstance(self.seed, bool) or int(self.seed) != self.seed or not 0 <= self.seed <= UINT64_MAX:
            raise BadConfig("seed must be an unsigned 64-bit integer")
        if int(self.resolution) != self.resolution or self.resolution < 1:
            raise BadConfig("resolution must be a positive integer")
        if int(self.threads) != self.threads or self.threads < 1:
            raise BadConfig("threads must be a positive integer")
        if self.size_cap is not None and self.size_cap < 1:
            raise BadConfig("size_cap must be positive")
        if not isinstance(self.params, dict):
            raise BadConfig("params must be a mapping")
        object.__setattr__(self, "seed", int(self.seed))

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise BadConfig("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise BadConfig(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise BadConfig(str(exc)) from exc

    def to_dict(self) -> dict:
        return {f.name: (list(v) if isinstance(v := getattr(self, f.name), tuple) else v)
                for f in fields(self)}

    def with_defaults(self, **defaults) -> "ExperimentConfig":
        """Fill empty ladders (and only those) from ``defaults``."""
        fill = {k: v for k, v in defaults.items() if k in self._LADDERS and not getattr(self, k)}
        return replace(self, **fill)

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)


def _pmap(fn, items, threads: int):
    """``map`` that keeps input order whatever the completion order."""
    items = list(items)
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


# ---------------------------------------------------------------------------
# closed-form families

FIG_DOMAIN = Domain(2.0, 2)


def _upper_lower(domain: Domain) -> DiscreteMeasure:
    return make_discrete([[0.0, 1.0], [0.0, -1.0]], [0.5, 0.5], domain)


def fig1_family(epsilon: float, force: bool = False) -> tuple[Population, Population]:
    """The pair ``(P_eps, P_-eps)`` whose barycenters stay at distance one.

    Both populations mix, with weight one half each, the measure on
    ``(0, +-1)`` and the measure on ``+-(1, eps/2)`` (resp. ``+-(1, -eps/2)``).
    """
    if not force and not 0 < epsilon <= 0.5:
        raise OutOfRegime("fig1 family needs 0 < epsilon <= 1/2 (use force to override)")
    rho1 = _upper_lower(FIG_DOMAIN)

    def pop(e):
        x = np.array([1.0, e / 2])
        return Population.from_entries([(0.5, rho1), (0.5, make_discrete([x, -x], [0.5, 0.5], FIG_DOMAIN))])

    return pop(epsilon), pop(-epsilon)


def _power_cdf(u, alpha):
    return np.sign(u) * np.abs(u) ** (2 * alpha)


def fig2_square_measure(a: float, alpha: float, epsilon: float, resolution: int = 64) -> DiscreteMeasure:
    """Discretised density ``|y - eps|^(2 alpha - 1)`` on the square of side ``a``
    centred at ``(1, eps)``, plus its mirror image through the origin.

    The vertical lattice has spacing ``a / resolution`` and is anchored at
    ``y = 0`` for every ``eps``, so measures for different ``eps`` share
    atoms wherever their squares overlap.  Each atom carries the exact mass
    of its (clipped) cell.
    """
    h = a / resolution
    lo_y, hi_y = epsilon - a / 2, epsilon + a / 2
    k0 = math.floor(lo_y / h + 1e-9)
    k1 = math.ceil(hi_y / h - 1e-9)
    edges = np.clip(np.arange(k0, k1 + 1) * h, lo_y, hi_y)
    mass = _power_cdf(edges[1:] - epsilon, alpha) - _power_cdf(edges[:-1] - epsilon, alpha)
    yc = 0.5 * (edges[1:] + edges[:-1])
    keep = mass > 0
    mass, yc = mass[keep], yc[keep]
    xc = 1 - a / 2 + (np.arange(resolution) + 0.5) * h
    X, Y = np.meshgrid(xc, yc, indexing="ij")
    pts = np.column_stack([X.ravel(), Y.ravel()])
    w = np.broadcast_to(mass, X.shape).ravel()
    return make_discrete(np.vstack([pts, -pts]), np.concatenate([w, w]), FIG_DOMAIN)


def fig2_family(a: float, alpha: float, epsilon: float, resolution: int = 64,
                force: bool = False) -> tuple[Population, Population]:
    """The pair ``(P_0, P_eps)`` whose barycenters separate like ``eps^alpha``."""
    if not force:
        if not 0 < a < 1:
            raise OutOfRegime("fig2 family needs 0 < a < 1")
        if not alpha > 0:
            raise OutOfRegime("fig2 family needs alpha > 0")
        if not 0 < epsilon <= a / 2:
            raise OutOfRegime("fig2 family needs 0 < epsilon <= a/2 (use force to override)")
    rho1 = _upper_lower(FIG_DOMAIN)

    def pop(e):
        return Population.from_entries([(0.5, rho1), (0.5, fig2_square_measure(a, alpha, e, resolution))])

    return pop(0.0), pop(epsilon)


def symmetrize(mu: DiscreteMeasure) -> DiscreteMeasure:
    """Average of ``mu`` and its image under ``x -> -x``."""
    return make_discrete(np.vstack([mu.points, -mu.points]), np.concatenate([mu.weights, mu.weights]),
                         mu.domain)


def fig2_barycenter(P: Population) -> BarycenterResult:
    """Exact barycenter of a two-entry symmetric population, itself symmetric.

    Reflecting a barycenter of a reflection-invariant population gives
    another one, and the barycenter set is convex, so the average is a
    barycenter too.
    """
    res = barycenter_two_marginal(P)
    return replace(res, measure=symmetrize(res.measure))


def remark_exponent_family(epsilon: float, grid: int = 2048):
    """``(rho, mu0, mu_eps, psi)`` with a strong-convexity gap of exactly ``eps^2 / 4``.

    ``rho`` is uniform on ``grid`` cell centres of ``[-1/2, 1/2]`` (``grid``
    even, so no atom sits at the origin); ``mu_eps`` moves mass ``eps`` from
    ``+-1`` to ``0``.  ``psi`` is the optimal pair from ``rho`` to ``mu0``
    built from the indicator of ``[-1, 1]``: it vanishes there, so its
    conjugate is ``|x|``.  A reference table carries the zero values on a
    fine grid of ``[-1, 1]``.
    """
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    if grid < 2 or grid % 2:
        raise ValueError("grid must be a positive even integer")
    dom = Domain(1.0, 1)
    x = -0.5 + (np.arange(grid) + 0.5) / grid
    rho = make_discrete(x[:, None], np.full(grid, 1.0 / grid), dom)
    mu0 = make_discrete([[-1.0], [1.0]], [0.5, 0.5], dom)
    mu_eps = make_discrete([[-1.0], [0.0], [1.0]], [0.5 - epsilon / 2, epsilon, 0.5 - epsilon / 2], dom)
    psi_star = np.abs(rho.points[:, 0])
    psi = np.zeros(mu0.n_atoms)
    pot = PotentialPair(psi, psi_star, dual_cost(rho, mu0, psi_star, psi), rho, mu0)
    ref = np.linspace(-1.0, 1.0, 2 * grid + 1)[:, None]
    return rho, mu0, mu_eps, pot.with_reference(ref, np.zeros(len(ref)))


# ---------------------------------------------------------------------------
# sampling and discretisation


def hnet_discretize(rho: DiscreteMeasure, h: float) -> DiscreteMeasure:
    """Send each atom to the nearest point of the lattice ``(h / sqrt d) Z^d`` inside the domain.

    The lattice has covering radius ``h / 2``, and every point of the ball
    lies within ``h`` of a lattice point that is itself in the ball, so the
    result is within ``h`` of ``rho`` in W2.
    """
    if not h > 0:
        raise ValueError("h must be positive")
    d, dom = rho.dim, rho.domain
    s = h / math.sqrt(d)
    lo = np.floor((rho.points.min(axis=0) - h) / s).astype(int)
    hi = np.ceil((rho.points.max(axis=0) + h) / s).astype(int)
    axes = [np.arange(l, u + 1) * s for l, u in zip(lo, hi)]
    net = np.stack([m.ravel() for m in np.meshgrid(*axes, indexing="ij")], axis=1)
    net = net[dom.contains(net, tol=0.0)]
    _, idx = cKDTree(net).query(rho.points)
    return make_discrete(net[idx], rho.weights, dom)


def empirical_sample(rho: DiscreteMeasure, n: int, seed: int) -> DiscreteMeasure:
    """Empirical measure of ``n`` independent draws from ``rho``."""
    if int(n) != n or n < 1:
        raise ValueError("n must be a positive integer")
    rng = np.random.default_rng(seed)
    idx = rng.choice(rho.n_atoms, size=int(n), p=rho.weights)
    return make_discrete(rho.points[idx], np.full(int(n), 1.0 / n), rho.domain)


def random_measure(rng: np.random.Generator, n_atoms: int, domain: Domain, radius: float | None = None,
                   uniform_weights: bool = False) -> DiscreteMeasure:
    """Atoms drawn uniformly in the ball of ``radius`` (default the domain's)."""
    r = domain.R if radius is None else radius
    d = domain.d
    g = rng.standard_normal((n_atoms, d))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    pts = g * (r * rng.random(n_atoms) ** (1.0 / d))[:, None]
    w = np.ones(n_atoms) if uniform_weights else rng.dirichlet(np.ones(n_atoms))
    return make_discrete(pts, w, domain)


def random_population(rng: np.random.Generator, n_measures: int, n_atoms: int, domain: Domain,
                      radius: float | None = None) -> Population:
    lam = rng.dirichlet(np.ones(n_measures))
    return Population.from_entries([(l, random_measure(rng, n_atoms, domain, radius)) for l in lam])


def empirical_rate(d: int) -> str:
    """Order of ``E W2(rho_n, rho)`` for ``n`` samples of a measure on ``R^d``."""
    if d < 4:
        return "n^(-1/4)"
    if d == 4:
        return "n^(-1/4) log(n)^(1/2)"
    return f"n^(-1/{d})"


# ---------------------------------------------------------------------------
# experiments


def _any_barycenter(P: Population) -> BarycenterResult:
    return barycenter_1d(P) if P.domain.d == 1 else barycenter_exact(P)


def empirical_barycenter_experiment(P: Population, m_ladder, seed: int, n_seeds: int = 50,
                                    profile: RegularityProfile | None = None, threads: int = 1) -> Table:
    """Distance between the barycenter of ``m`` sampled marginals and that of ``P``.

    For each ``m`` and each of ``n_seeds`` repetitions, ``m`` entries are
    drawn from ``P`` (with replacement, by weight) and given weight
    ``1/m``.  Rows report the mean, spread and maximum over repetitions.
    """
    if profile is not None:
        profile.validate(P)
    ladder = [int(m) for m in m_ladder]
    if any(m < 1 for m in ladder):
        raise ValueError("sample sizes must be positive")
    target = _any_barycenter(P).measure
    streams = np.random.SeedSequence(seed).spawn(len(ladder))
    cache: dict = {}

    def distance(counts):
        key = tuple(counts)
        if key not in cache:
            sub = Population.from_entries([(c, rho) for c, rho in zip(counts, P.measures) if c > 0],
                                          normalize=True)
            cache[key] = w2_value(_any_barycenter(sub).measure, target, size_cap=None)
        return cache[key]

    rows = []
    for m, ss in zip(ladder, streams):
        rng = np.random.default_rng(ss)
        draws = [np.bincount(rng.choice(len(P), size=m, p=P.lambdas), minlength=len(P)) for _ in range(n_seeds)]
        dists = np.array(_pmap(distance, draws, threads))
        rows.append((m, float(dists.mean()), float(dists.std()), float(dists.max()), n_seeds))
    return _table(("m", "mean_w2", "std_w2", "max_w2", "repetitions"), rows)


def regularization_bias_experiment(P: Population, grid: GridSpec, lambdas, penalty: str = "entropy",
                                   p: float = 2.0, threads: int = 1) -> tuple[Table, float | None]:
    """``W2(mu^lam, mu^0)`` along a ladder of penalty weights.

    ``mu^0`` is the least-penalty grid barycenter, the point the penalised
    solutions approach as ``lam -> 0``.  Returns the table and the fitted
    log-log slope (``None`` when fewer than three distances are above
    solver noise).
    """
    ref = barycenter_penalty_limit(P, grid, penalty=penalty, p=p).measure

    def one(lam):
        res = barycenter_penalized(P, grid, float(lam), penalty=penalty, p=p)
        return float(lam), w2_value(res.measure, ref, size_cap=None), res.objective

    rows = _pmap(one, lambdas, threads)
    try:
        slope = fit_exponent([(l, d) for l, d, _ in rows]).slope
    except NonPositiveSample:
        slope = None
    return _table(("lambda", "w2_bias", "objective"), rows), slope


def _fig_rows(P, Q, mu_p, mu_q, eps, threads, size_cap, with_w1=True):
    w2 = w2_auto(mu_p, mu_q, size_cap=size_cap)
    w1 = nested_w1(P, Q, threads=threads, size_cap=size_cap) if with_w1 else math.nan
    tv = tv_distance(P, Q)
    return eps, w2, w1, tv


def stability_sweep(config: ExperimentConfig) -> Table:
    """Barycenter displacement against population perturbation along a ladder.

    ``fig1`` and ``fig2`` rows hold the two distances together with the
    ratios ``w2/W1``, ``w2/W1^(1/6)`` and ``w2/TV^(1/5)``.  ``remark`` rows
    hold the strong-convexity gap against ``W2(mu0, mu_eps)``.
    """
    cfg = config
    if cfg.family == "remark":
        cfg = cfg.with_defaults(epsilons=(0.02, 0.05, 0.1, 0.2))
        rows = []
        for eps, w2sq, gap in _pmap(lambda e: _remark_row(e, cfg.params.get("grid", 2048)), cfg.epsilons,
                                    cfg.threads):
            rows.append((eps, math.sqrt(w2sq), gap, gap / w2sq**2, gap / w2sq**3))
        return _table(("perturbation", "w2_targets", "gap", "gap_over_w2_4", "gap_over_w2_6"), rows)

    if cfg.family == "fig1":
        cfg = cfg.with_defaults(epsilons=(0.05, 0.1, 0.25, 0.5))

        def one(e):
            P, Q = fig1_family(e, force=cfg.force)
            return _fig_rows(P, Q, barycenter_exact(P).measure, barycenter_exact(Q).measure, e, 1, cfg.size_cap)
    else:
        cfg = cfg.with_defaults(epsilons=tuple(np.geomspace(cfg.a / 40, cfg.a / 2, 8)))
        P0, _ = fig2_family(cfg.a, cfg.alpha, cfg.epsilons[0], cfg.resolution, force=cfg.force)
        mu0 = fig2_barycenter(P0).measure

        def one(e):
            _, Q = fig2_family(cfg.a, cfg.alpha, e, cfg.resolution, force=cfg.force)
            return _fig_rows(P0, Q, mu0, fig2_barycenter(Q).measure, e, 1, cfg.size_cap)

    rows = []
    for eps, w2, w1, tv in _pmap(one, cfg.epsilons, cfg.threads):
        rows.append((eps, w2, w1, tv, w2 / w1, w2 / w1 ** (1 / 6), w2 / tv ** (1 / 5)))
    return _table(("perturbation", "w2_bary", "nested_w1", "tv", "ratio_w1", "holder_w1", "holder_tv"), rows)


def _remark_row(eps, grid):
    rho, mu0, mu_eps, pot = remark_exponent_family(eps, grid)
    rep = strong_convexity_gap(rho, mu0, mu_eps, pot)
    return eps, rep.w2_between_targets**2, rep.gap


# ---------------------------------------------------------------------------
# runners used by the command line


@dataclass(frozen=True)
class RunResult:
    tables: dict
    summary: dict


def run_fig1(cfg: ExperimentConfig) -> RunResult:
    cfg = cfg.with_defaults(epsilons=(0.05, 0.1, 0.25, 0.5))

    def one(e):
        P, Q = fig1_family(e, force=cfg.force)
        return _fig_rows(P, Q, barycenter_exact(P).measure, barycenter_exact(Q).measure, e, 1, cfg.size_cap)

    rows = [(e, w2, w1, tv, w2 / w1) for e, w2, w1, tv in _pmap(one, cfg.epsilons, cfg.threads)]
    table = _table(("epsilon", "w2_bary", "nested_w1", "tv", "ratio_w1"), rows)
    return RunResult({"fig1": table}, {"max_abs_w2_minus_1": max(abs(r[1] - 1) for r in rows)})


def run_fig2(cfg: ExperimentConfig) -> RunResult:
    cfg = cfg.with_defaults(epsilons=tuple(np.geomspace(cfg.a / 40, cfg.a / 2, 8)))
    with_w1 = bool(cfg.params.get("nested_w1", True))
    P0, _ = fig2_family(cfg.a, cfg.alpha, cfg.epsilons[0], cfg.resolution, force=cfg.force)
    mu0 = fig2_barycenter(P0).measure

    def one(e):
        _, Q = fig2_family(cfg.a, cfg.alpha, e, cfg.resolution, force=cfg.force)
        return _fig_rows(P0, Q, mu0, fig2_barycenter(Q).measure, e, 1, cfg.size_cap, with_w1)

    rows = _pmap(one, cfg.epsilons, cfg.threads)
    fit = fit_exponent([(e, w2) for e, w2, _, _ in rows])
    table = _table(("epsilon", "w2_bary", "nested_w1", "tv"), rows)
    return RunResult({"fig2": table}, {"alpha": cfg.alpha, "slope": fit.slope, "r_squared": fit.r_squared})


def run_remark(cfg: ExperimentConfig) -> RunResult:
    cfg = cfg.with_defaults(epsilons=(0.02, 0.05, 0.1, 0.2))
    grid = int(cfg.params.get("grid", 2048))
    rows = [(e, w2sq, gap, gap / e**2, gap / w2sq**2)
            for e, w2sq, gap in _pmap(lambda e: _remark_row(e, grid), cfg.epsilons, cfg.threads)]
    table = _table(("epsilon", "w2_sq", "gap", "gap_over_eps2", "gap_over_w2_4"), rows)
    return RunResult({"remark_exponent": table}, {"grid": grid})


def run_stability_sweep(cfg: ExperimentConfig) -> RunResult:
    table = stability_sweep(cfg)
    summary = {"family": cfg.family}
    if cfg.family != "remark":
        try:
            fit = fit_exponent(list(zip(table.column("nested_w1"), table.column("w2_bary"))))
            summary.update(slope_vs_w1=fit.slope, r_squared=fit.r_squared)
        except NonPositiveSample:
            summary.update(slope_vs_w1=None)
    return RunResult({"stability_sweep": table}, summary)


def default_population_1d(domain: Domain | None = None) -> Population:
    """Three shifted and scaled uniform grids on the line, weights 1/2, 1/3, 1/6."""
    dom = domain or Domain(1.0, 1)
    base = (np.arange(20) + 0.5) / 20
    specs = [(0.5, -0.6, 0.5), (1 / 3, -0.2, 0.8), (1 / 6, 0.3, 0.6)]
    return Population.from_entries([(l, make_discrete((lo + width * base)[:, None], np.ones(20), dom))
                                    for l, lo, width in specs])


def run_empirical_bary(cfg: ExperimentConfig) -> RunResult:
    cfg = cfg.with_defaults(m_ladder=(2, 4, 8, 16, 32))
    n_seeds = int(cfg.params.get("repetitions", 50))
    P = default_population_1d()
    table = empirical_barycenter_experiment(P, cfg.m_ladder, cfg.seed, n_seeds=n_seeds, threads=cfg.threads)
    return RunResult({"empirical_bary": table}, {"rate_reference": empirical_rate(P.domain.d)})


def run_hnet(cfg: ExperimentConfig) -> RunResult:
    cfg = cfg.with_defaults(h_ladder=(0.05, 0.1, 0.2))
    n_measures = int(cfg.params.get("measures", 50))
    n_atoms = int(cfg.params.get("atoms", 50))
    d = int(cfg.params.get("dim", 2))
    dom = Domain(1.0, d)
    streams = np.random.SeedSequence(cfg.seed).spawn(n_measures)

    def one(k):
        rho = random_measure(np.random.default_rng(streams[k]), n_atoms, dom)
        return [(k, h, w2_value(rho, hnet_discretize(rho, h), size_cap=None)) for h in cfg.h_ladder]

    rows = [(k, h, w2, int(w2 <= h)) for batch in _pmap(one, range(n_measures), cfg.threads)
            for k, h, w2 in batch]
    violations = sum(1 - r[3] for r in rows)
    return RunResult({"hnet": _table(("instance", "h", "w2", "within_bound"), rows)}, {"violations": violations})


def run_reg_bias(cfg: ExperimentConfig) -> RunResult:
    cfg = cfg.with_defaults(lambdas=tuple(np.geomspace(1e-4, 1e-1, 6)))
    alpha = float(cfg.params.get("alpha", 1.0))
    res = int(cfg.params.get("population_resolution", 4))
    grid_res = int(cfg.params.get("grid_resolution", 16))
    penalty = cfg.params.get("penalty", "entropy")
    P, _ = fig2_family(cfg.a, alpha, cfg.a / 2, res, force=cfg.force)
    grid = GridSpec(grid_res, P.domain, box=((-1.0, -1.0), (1.0, 1.0)))
    table, slope = regularization_bias_experiment(P, grid, cfg.lambdas, penalty=penalty, threads=cfg.threads)
    return RunResult({"reg_bias": table}, {"slope": slope, "penalty": penalty})


def run_dual_check(cfg: ExperimentConfig) -> RunResult:
    n = int(cfg.params.get("instances", 50))
    dom = Domain(1.0, 2)
    streams = np.random.SeedSequence(cfg.seed).spawn(n)

    def one(k):
        rng = np.random.default_rng(streams[k])
        P = random_population(rng, int(rng.integers(2, 5)), int(rng.integers(2, 6)), dom)
        bary = barycenter_exact(P)
        return k, len(P), bary.objective, dual_gap(P, bary)

    rows = _pmap(one, range(n), cfg.threads)
    return RunResult({"dual_check": _table(("instance", "n_measures", "objective", "dual_gap"), rows)},
                     {"max_dual_gap": max(r[3] for r in rows)})


def run_certify_crho(cfg: ExperimentConfig) -> RunResult:
    prm = cfg.params
    w = float(prm.get("overlap", 0.25))
    graphs = prm.get("graphs") or [
        {"name": "single", "overlaps": [[0.0]]},
        {"name": "two-set", "overlaps": [[0.0, w], [w, 0.0]]},
        {"name": "path-3", "overlaps": [[0.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 0.0]]},
    ]
    m, M = float(prm.get("m", 1.0)), float(prm.get("M", 1.0))
    R, d = float(prm.get("R", 1.0)), int(prm.get("d", 2))
    rows = []
    for g in graphs:
        rep = compute_c_rho(g["overlaps"], m, M, R, d)
        rows.append((g["name"], len(rep.overlap_weights), rep.lambda2, rep.c_rho))
    return RunResult({"certify_crho": _table(("graph", "n_sets", "lambda2", "c_rho"), rows)}, {})


RUNNERS = {
    "fig1": run_fig1,
    "fig2": run_fig2,
    "remark-exponent": run_remark,
    "stability-sweep": run_stability_sweep,
    "empirical-bary": run_empirical_bary,
    "hnet": run_hnet,
    "reg-bias": run_reg_bias,
    "dual-check": run_dual_check,
    "certify-crho": run_certify_crho,
}
