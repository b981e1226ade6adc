import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from barystab.barycenter import barycenter_exact
from barystab.exceptions import DisconnectedSupport, NonOptimalPotential
from barystab.functionals import (
    c_rho_poincare,
    check_optimal,
    compute_c_rho,
    convex_support_constant,
    dual_gap,
    gap_kantorovich_form,
    graph_laplacian_lambda2,
    kantorovich_functional,
    min_overlap_mass,
    potential_values,
    sphere_area,
    strong_convexity_gap,
    variance,
    variance_functional,
    variance_inequality_check,
)
from barystab.measures import Domain, Population, make_discrete
from barystab.transport import w2_exact

from conftest import random_measure


def test_variance_of_constant_is_zero(plane):
    rho = make_discrete([[0, 0], [1, 0]], [0.5, 0.5], plane)
    assert variance(rho, [3.0, 3.0]) == 0.0
    assert variance(rho, [0.0, 2.0]) == pytest.approx(1.0)


def test_variance_functional_of_single_marginal(plane):
    rho = make_discrete([[0, 0]], [1], plane)
    mu = make_discrete([[0, 1]], [1], plane)
    assert variance_functional(Population.single(rho), mu) == pytest.approx(0.5)


def test_kantorovich_of_half_square(line):
    Y = np.linspace(-1, 1, 401)[:, None]
    rho = make_discrete([[0.0], [0.5]], [0.5, 0.5], line)
    # conjugate of |y|^2 / 2 is |x|^2 / 2, exactly on grid points
    assert kantorovich_functional(rho, 0.5 * Y[:, 0] ** 2, Y) == pytest.approx(0.0625, abs=1e-12)


def test_check_optimal_rejects_foreign_pair(plane):
    rng = np.random.default_rng(0)
    rho, mu, nu = (random_measure(rng, 4, plane) for _ in range(3))
    _, _, pot = w2_exact(rho, mu)
    assert check_optimal(pot, rho, mu) >= 0
    with pytest.raises(NonOptimalPotential):
        check_optimal(pot, rho, nu)


def test_potential_values_prefers_reference(line):
    rho = make_discrete([[-0.25], [0.25]], [0.5, 0.5], line)
    mu = make_discrete([[-1.0], [1.0]], [0.5, 0.5], line)
    _, _, pot = w2_exact(rho, mu)
    pot = pot.shifted(-pot.psi[0])
    plain = potential_values(pot, [[0.0]])[0]
    with_ref = potential_values(pot.with_reference([[0.0]], [plain + 0.1]), [[0.0]])[0]
    assert with_ref == pytest.approx(plain + 0.1)
    np.testing.assert_allclose(potential_values(pot, mu.points), pot.psi)


@pytest.mark.parametrize("seed", range(20))
def test_gap_nonnegative_and_kantorovich_identity(seed, plane):
    rng = np.random.default_rng(seed)
    rho, mu, nu = (random_measure(rng, int(rng.integers(2, 7)), plane) for _ in range(3))
    _, _, pot_mu = w2_exact(rho, mu)
    _, _, pot_nu = w2_exact(rho, nu)
    rep = strong_convexity_gap(rho, mu, nu, pot_mu)
    assert rep.gap >= -1e-10
    # the gap equals K(psi_mu) - K(psi_nu) + <psi_mu - psi_nu, nu>
    assert rep.gap == pytest.approx(gap_kantorovich_form(rho, nu, pot_mu, pot_nu), abs=1e-12)


def test_gap_vanishes_at_mu(plane):
    rng = np.random.default_rng(1)
    rho, mu = random_measure(rng, 5, plane), random_measure(rng, 4, plane)
    _, _, pot = w2_exact(rho, mu)
    rep = strong_convexity_gap(rho, mu, mu, pot)
    assert rep.gap == pytest.approx(0.0, abs=1e-12)
    assert rep.w2_between_targets == 0.0


def test_variance_inequality_on_uniform_grid(line):
    x = -0.5 + (np.arange(128) + 0.5) / 128
    rho = make_discrete(x[:, None], np.ones(128), line)
    Y = np.linspace(-1, 1, 2001)[:, None]
    psi = 0.5 * Y[:, 0] ** 2
    psi_t = 0.6 * Y[:, 0] ** 2 + 0.05 * np.sin(3 * Y[:, 0])
    c = convex_support_constant(1.0, 1.0, 1.0, 1.0, 1)
    rep = variance_inequality_check(rho, psi, psi_t, c, Y)
    assert rep.satisfied and rep.gap > 0
    with pytest.raises(ValueError):
        variance_inequality_check(rho, psi, psi_t, 0.0, Y)


@pytest.mark.parametrize("seed", range(8))
def test_dual_gap_closes(seed, plane):
    rng = np.random.default_rng(seed)
    P = Population.from_entries([(l, random_measure(rng, 4, plane)) for l in rng.dirichlet(np.ones(3))])
    assert dual_gap(P, barycenter_exact(P)) <= 1e-9


def test_dual_gap_skips_zero_weights(plane):
    rng = np.random.default_rng(3)
    a, b = random_measure(rng, 3, plane), random_measure(rng, 3, plane)
    P = Population.from_entries([(1.0, a), (0.0, b)])
    assert dual_gap(P, barycenter_exact(P)) <= 1e-9


def test_lambda2_of_small_graphs():
    w = 0.3
    assert graph_laplacian_lambda2([[0, w], [w, 0]]) == pytest.approx(2 * w, abs=1e-12)
    assert graph_laplacian_lambda2([[0, 1, 0], [1, 0, 1], [0, 1, 0]]) == pytest.approx(1.0, abs=1e-12)
    assert graph_laplacian_lambda2([[0]]) == math.inf
    with pytest.raises(ValueError):
        graph_laplacian_lambda2([[0, 1], [0, 0]])


def test_c_rho_single_set_and_disconnected():
    single = compute_c_rho([[0.0]], 1.0, 2.0, 1.0, 2, diam=1.5)
    assert single.c_rho == pytest.approx(1.0 / (math.e * 3 * 8 * 1.0 * 1.5 * 4.0), rel=1e-15)
    with pytest.raises(DisconnectedSupport):
        compute_c_rho([[0, 0], [0, 0]], 1, 1, 1, 2)
    with pytest.raises(ValueError):
        compute_c_rho([[0.0]], 2.0, 1.0, 1.0, 2)


def test_c_rho_decreases_with_more_sets():
    two = compute_c_rho([[0, 1], [1, 0]], 1, 1, 1, 2).c_rho
    three = compute_c_rho([[0, 1, 0], [1, 0, 1], [0, 1, 0]], 1, 1, 1, 2).c_rho
    assert three < two


def test_poincare_route():
    assert sphere_area(2) == pytest.approx(2 * math.pi)
    assert sphere_area(3) == pytest.approx(4 * math.pi)
    eps = min_overlap_mass([[0, 0.2], [0.2, 0]], [0.3, 0.5])
    assert eps == pytest.approx(0.2)
    c = c_rho_poincare(2, 1, 1, 1, 2, 1.0, eps)
    assert 0 < c < compute_c_rho([[0, 0.2], [0.2, 0]], 1, 1, 1, 2).c_rho
    with pytest.raises(ValueError):
        c_rho_poincare(2, 1, 1, 1, 2, 0.0, eps)


@given(st.integers(0, 2**32 - 1))
def test_gap_is_nonnegative_property(seed):
    dom = Domain(1.0, 2)
    rng = np.random.default_rng(seed)
    rho, mu, nu = (random_measure(rng, int(rng.integers(1, 6)), dom) for _ in range(3))
    _, _, pot = w2_exact(rho, mu)
    assert strong_convexity_gap(rho, mu, nu, pot).gap >= -1e-10
