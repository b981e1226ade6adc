import numpy as np
import pytest
from hypothesis import given, strategies as st

from barystab.exceptions import DomainMismatch, NonDeterministicPlan, NotConverged, SizeCapExceeded
from barystab.measures import Domain, make_discrete
from barystab.transport import (
    barycentric_projection,
    brenier_map_from_potential,
    c_transform,
    is_centrally_symmetric,
    legendre_conjugate,
    pushforward,
    w2_1d,
    w2_entropic,
    w2_exact,
    w2_symmetric,
    w2_value,
)

from conftest import random_measure
from oracles import ot_by_vertices, w2_quantile_1d, w2sq_permutations


def test_translation_distance(plane):
    mu = make_discrete([[0, 0], [0.5, 0.5]], [0.3, 0.7], plane)
    w2, plan, pot = w2_exact(mu, mu.translate([0.3, -0.4]))
    assert w2 == pytest.approx(0.5, abs=1e-12)
    assert plan.marginal_error() < 1e-14


def test_identical_measures(plane):
    mu = make_discrete([[0, 0], [1, 0]], [0.5, 0.5], plane)
    assert w2_value(mu, mu) == 0.0


@pytest.mark.parametrize("seed", range(10))
def test_certificate_matches_primal(seed, plane):
    rng = np.random.default_rng(seed)
    rho, mu = random_measure(rng, 7, plane), random_measure(rng, 5, plane)
    w2, plan, pot = w2_exact(rho, mu)
    assert pot.feasibility_violation() <= 1e-12
    assert pot.certified_cost == pytest.approx(w2**2, abs=1e-12)
    assert pot.duality_cost() == pytest.approx(w2**2, abs=1e-12)
    assert plan.cost == pytest.approx(w2**2, abs=1e-12)


@pytest.mark.parametrize("seed", range(10))
def test_unequal_weights_against_vertex_enumeration(seed, plane):
    rng = np.random.default_rng(100 + seed)
    rho, mu = random_measure(rng, 3, plane), random_measure(rng, 3, plane)
    C = ((rho.points[:, None] - mu.points[None]) ** 2).sum(-1)
    assert w2_value(rho, mu) ** 2 == pytest.approx(ot_by_vertices(rho.weights, mu.weights, C), abs=1e-12)


def test_potential_shift_keeps_certificate(plane):
    rng = np.random.default_rng(3)
    rho, mu = random_measure(rng, 4, plane), random_measure(rng, 4, plane)
    _, _, pot = w2_exact(rho, mu)
    moved = pot.shifted(0.7)
    assert moved.duality_cost() == pytest.approx(pot.duality_cost(), abs=1e-12)
    assert moved.feasibility_violation() <= 1e-12


def test_psi_on_agrees_on_target(plane):
    rng = np.random.default_rng(5)
    rho, mu = random_measure(rng, 6, plane), random_measure(rng, 4, plane)
    _, _, pot = w2_exact(rho, mu)
    np.testing.assert_allclose(pot.psi_on(mu.points), pot.psi, atol=1e-12)


def test_reference_must_be_feasible(plane):
    rho = make_discrete([[1, 0]], [1], plane)
    mu = make_discrete([[0, 0]], [1], plane)
    _, _, pot = w2_exact(rho, mu)
    with pytest.raises(ValueError):
        pot.with_reference([[1.5, 0]], [-10.0])


def test_size_cap(plane):
    rng = np.random.default_rng(0)
    rho, mu = random_measure(rng, 30, plane), random_measure(rng, 30, plane)
    with pytest.raises(SizeCapExceeded):
        w2_exact(rho, mu, size_cap=100)


def test_domain_mismatch():
    a = make_discrete([[0, 0]], [1], Domain(1.0, 2))
    b = make_discrete([[0, 0]], [1], Domain(2.0, 2))
    with pytest.raises(DomainMismatch):
        w2_value(a, b)


@given(st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_w2_matches_permutation_oracle(n, seed):
    dom = Domain(1.0, 2)
    rng = np.random.default_rng(seed)
    rho, mu = random_measure(rng, n, dom, uniform=True), random_measure(rng, n, dom, uniform=True)
    if rho.n_atoms != n or mu.n_atoms != n:
        return
    assert w2_value(rho, mu) ** 2 == pytest.approx(w2sq_permutations(rho.points, mu.points), abs=1e-12)


@given(st.integers(0, 2**32 - 1))
def test_triangle_inequality(seed):
    dom = Domain(1.0, 2)
    rng = np.random.default_rng(seed)
    a, b, c = (random_measure(rng, 5, dom) for _ in range(3))
    assert w2_value(a, c) <= w2_value(a, b) + w2_value(b, c) + 1e-12


@pytest.mark.parametrize("seed", range(5))
def test_w2_1d_matches_quantile_oracle(seed, line):
    rng = np.random.default_rng(seed)
    rho, mu = random_measure(rng, 8, line), random_measure(rng, 5, line)
    want = w2_quantile_1d(rho.points[:, 0], rho.weights, mu.points[:, 0], mu.weights)
    assert w2_1d(rho, mu) == pytest.approx(want, abs=1e-12)
    assert w2_value(rho, mu) == pytest.approx(want, abs=1e-12)


def test_symmetric_quotient_matches_full_solve(plane):
    rng = np.random.default_rng(11)
    base = rng.uniform(-0.6, 0.6, size=(6, 2))
    w = rng.uniform(0.2, 1, 6)
    rho = make_discrete(np.vstack([base, -base]), np.r_[w, w], plane)
    other = rng.uniform(-0.6, 0.6, size=(5, 2))
    v = rng.uniform(0.2, 1, 5)
    mu = make_discrete(np.vstack([other, -other]), np.r_[v, v], plane)
    assert is_centrally_symmetric(rho) and is_centrally_symmetric(mu)
    assert w2_symmetric(rho, mu) == pytest.approx(w2_value(rho, mu), abs=1e-12)
    with pytest.raises(ValueError):
        w2_symmetric(rho, make_discrete([[0.5, 0]], [1], plane))


def test_sinkhorn_translation_value(plane):
    rho = make_discrete([[0, 0], [1, 0]], [0.5, 0.5], plane)
    cost, plan = w2_entropic(rho, rho.translate([0, np.sqrt(0.5)]), epsilon=1e-3)
    assert cost == pytest.approx(0.5, abs=1e-6)
    assert np.abs(plan.matrix.sum(0) - 0.5).max() < 1e-12


def test_sinkhorn_approaches_exact(plane):
    rng = np.random.default_rng(2)
    rho, mu = random_measure(rng, 10, plane), random_measure(rng, 12, plane)
    exact = w2_value(rho, mu) ** 2
    cost, _ = w2_entropic(rho, mu, epsilon=1e-3)
    assert cost >= exact - 1e-9
    assert cost == pytest.approx(exact, abs=1e-2)


def test_sinkhorn_scaling_mode_and_budget(plane):
    rng = np.random.default_rng(2)
    rho, mu = random_measure(rng, 6, plane), random_measure(rng, 6, plane)
    a, _ = w2_entropic(rho, mu, epsilon=0.5, log_domain=False)
    b, _ = w2_entropic(rho, mu, epsilon=0.5)
    assert a == pytest.approx(b, abs=1e-8)
    with pytest.raises(NotConverged):
        w2_entropic(rho, mu, epsilon=1e-3, max_iter=2)


def test_legendre_conjugate_of_quadratic(line):
    Y = np.linspace(-1, 1, 2001)[:, None]
    x = np.array([[-0.3], [0.0], [0.45]])
    got = legendre_conjugate(0.5 * Y[:, 0] ** 2, Y, x)
    np.testing.assert_allclose(got, 0.5 * x[:, 0] ** 2, atol=1e-6)


def test_c_transform_identity(line):
    Y = np.array([[0.0], [1.0]])
    got = c_transform(np.zeros(2), Y, np.array([[0.25], [0.75]]))
    np.testing.assert_allclose(got, [0.5 * 0.25**2, 0.5 * 0.25**2])


def test_brenier_map_and_pushforward(plane):
    rho = make_discrete([[0, 0], [1, 0]], [0.5, 0.5], plane)
    mu = rho.translate([0, 0.5])
    _, plan, _ = w2_exact(rho, mu)
    T = brenier_map_from_potential(plan)
    np.testing.assert_allclose(T, rho.points + [0, 0.5])
    np.testing.assert_allclose(barycentric_projection(plan), T)
    assert pushforward(plan) == mu


def test_split_plan_is_not_a_map(plane):
    rho = make_discrete([[0, 0]], [1], plane)
    mu = make_discrete([[0, 1], [0, -1]], [0.5, 0.5], plane)
    _, plan, _ = w2_exact(rho, mu)
    with pytest.raises(NonDeterministicPlan):
        brenier_map_from_potential(plan)


def test_plan_csv(tmp_path, plane):
    rho = make_discrete([[0, 0], [1, 0]], [0.5, 0.5], plane)
    _, plan, _ = w2_exact(rho, rho)
    text = plan.to_csv(tmp_path / "plan.csv").read_text()
    assert text.splitlines()[0] == "i,j,mass"
    assert len(text.splitlines()) == 3
