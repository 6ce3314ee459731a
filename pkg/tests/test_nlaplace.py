import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from nlpotential.fields import Grid, RadonMeasure, ScalarField, sphere_area
from nlpotential.nlaplace import (DirichletProblem, energy, flux_through_sphere, n_laplacian, solve_dirichlet,
                                  weak_comparison_check)


def unit_box(n, N):
    # cell centers span [0, 1]^n exactly so the meshed box is the unit box
    return Grid(n, (N + 1,) * n, 1.0 / N, (0.0,) * n)


def log_field(g, m=1.0):
    return ScalarField.from_function(g, lambda x: -m * np.log(np.linalg.norm(x, axis=-1)))


@pytest.fixture(scope="module")
def dirac3():
    g = Grid.centered(3, 1.0 + 2 / 24, 1 / 24, True)
    u, rep = solve_dirichlet(DirichletProblem.ball(g, 1.0, RadonMeasure.dirac([0, 0, 0], 4 * math.pi)))
    return g, u, rep


def test_energy_of_zero_field_is_background():
    for n in (2, 3):
        g = unit_box(n, 8)
        eps = 0.3
        assert energy(ScalarField(g, np.zeros(g.shape)), RadonMeasure.dirac([0.5] * n), eps) == pytest.approx(
            eps**n / n, rel=1e-12)


def test_energy_of_coordinate_function():
    g = unit_box(3, 6)
    assert energy(ScalarField.from_function(g, lambda x: x[..., 0])) == pytest.approx(1 / 3, rel=1e-12)


def test_energy_of_log_profile_on_annulus_matches_radial_quadrature():
    n, a = 2, 0.7
    g = Grid.centered(n, 1.0, 1 / 256)
    r = g.radius()
    region = (r >= 0.1) & (r <= 1.0)
    E = energy(log_field(g, a), region=region)
    oracle = sphere_area(n) * a**n / n * integrate.quad(lambda t: t ** (-n) * t ** (n - 1), 0.1, 1.0)[0]
    assert E == pytest.approx(oracle, rel=0.03)


def test_affine_boundary_data_gives_affine_solution():
    g = Grid.centered(3, 1.0, 1 / 8)
    aff = lambda x: 0.3 + 0.7 * x[..., 0] - 0.2 * x[..., 2]  # noqa: E731
    u, rep = solve_dirichlet(DirichletProblem.ball(g, 0.9, None, aff))
    assert rep.converged
    assert np.max(np.abs(u.values - aff(g.points()))) < 1e-6


def test_zero_data_gives_zero():
    g = Grid.centered(2, 1.0, 1 / 16)
    u, rep = solve_dirichlet(DirichletProblem.ball(g, 0.9))
    assert rep.converged and np.max(np.abs(u.values)) < 1e-12


def test_dirac_solution_matches_fundamental_solution(dirac3):
    g, u, rep = dirac3
    assert rep.converged
    r = g.radius()
    band = (r >= 0.2) & (r <= 0.8)
    exact = -np.log(r[band])
    # sup-norm error relative to the sup of the exact profile on the band
    assert np.max(np.abs(u.values[band] - exact)) / exact.max() < 0.05


def test_solver_energies_nonincreasing(dirac3):
    _, _, rep = dirac3
    e = np.asarray(rep.energies)
    assert np.all(np.diff(e) <= 1e-12 * np.abs(e[:-1]).max())
    assert rep.h == pytest.approx(1 / 24) and rep.epsilon == pytest.approx(1 / 24)


def test_solver_report_json():
    g = Grid.centered(2, 1.0, 1 / 8)
    _, rep = solve_dirichlet(DirichletProblem.ball(g, 0.9, RadonMeasure.dirac([0, 0])))
    assert '"converged": true' in rep.to_json()


def test_dirichlet_problem_validation():
    g = Grid.centered(2, 1.0, 1 / 8)
    with pytest.raises(ValueError):
        solve_dirichlet(DirichletProblem.ball(g, 0.9, epsilon=0.0))
    with pytest.raises(ValueError):
        DirichletProblem.ball(g, 0.9, boundary=np.full(g.shape, np.nan))


@given(st.integers(0, 2**31 - 1), st.sampled_from([2, 3]))
def test_maximum_principle(seed, n):
    rng = np.random.default_rng(seed)
    g = Grid.centered(n, 1.0, 1 / 6 if n == 3 else 1 / 10)
    bnd = rng.uniform(-1, 2, g.shape)
    free = g.radius() < 0.8
    u, rep = solve_dirichlet(DirichletProblem(g, free, bnd))
    fixed = ~free | g.box_boundary()
    lo, hi = bnd[fixed].min(), bnd[fixed].max()
    assert rep.converged
    assert u.values[free].min() >= lo - 1e-6 and u.values[free].max() <= hi + 1e-6


def test_n_laplacian_of_affine_is_zero():
    g = Grid.centered(3, 1.0, 1 / 8)
    L = n_laplacian(ScalarField.from_function(g, lambda x: 1 + 2 * x[..., 0] - x[..., 1]), 0.1)
    ok = ~L.singular
    assert ok.any() and np.max(np.abs(L.values[ok])) < 1e-10


def test_n_laplacian_of_log_vanishes_away_from_origin():
    errs = []
    for h in (1 / 16, 1 / 32):
        g = Grid.centered(3, 1.0, h)
        L = n_laplacian(log_field(g))
        r = g.radius()
        band = (r > 0.3) & (r < 0.8) & ~L.singular
        errs.append(np.max(np.abs(L.values[band])))
    # individual flux derivatives are of size r^{-n} ~ 37 at r = 0.3; the residual is O(h)
    assert errs[0] / errs[1] > 1.8
    assert errs[1] < 0.05 * 0.3**-3


def test_flux_of_fundamental_solution():
    g = Grid.centered(3, 1.0, 1 / 32, True)
    f = log_field(g)
    for R in (0.35, 0.6, 0.85):
        assert flux_through_sphere(f, R) == pytest.approx(4 * math.pi, rel=0.01)


def test_flux_of_constant_is_zero():
    g = Grid.centered(3, 1.0, 1 / 8)
    assert flux_through_sphere(ScalarField(g, np.full(g.shape, 3.0)), 0.5) == 0.0


@given(st.floats(0.1, 3.0), st.sampled_from([2, 3, 4]))
def test_flux_homogeneous_in_m(m, n):
    f = lambda x: -m * np.log(np.linalg.norm(x, axis=-1))  # noqa: E731
    assert flux_through_sphere(f, 0.5, np.zeros(n), 24) == pytest.approx(m ** (n - 1) * sphere_area(n), rel=1e-6)


def test_flux_sphere_must_fit():
    g = Grid.centered(2, 1.0, 1 / 8)
    with pytest.raises(ValueError):
        flux_through_sphere(ScalarField(g, np.zeros(g.shape)), 0.99)


def test_mass_balance_radial_measure():
    g = Grid.centered(2, 1.0 + 2 / 64, 1 / 64, True)
    dens = ScalarField(g, 2.0 * (g.radius() < 0.5))
    mu = RadonMeasure(((np.zeros(2), 1.5),), dens)
    u, _ = solve_dirichlet(DirichletProblem.ball(g, 1.0, mu))
    assert flux_through_sphere(u, 0.9) == pytest.approx(mu.total_mass(), rel=0.05)


def test_flux_scales_with_measure():
    g = Grid.centered(3, 1.0 + 2 / 16, 1 / 16, True)
    c = 1.5
    u1, _ = solve_dirichlet(DirichletProblem.ball(g, 1.0, RadonMeasure.dirac([0, 0, 0], 4.0)))
    u2, _ = solve_dirichlet(DirichletProblem.ball(g, 1.0, RadonMeasure.dirac([0, 0, 0], 4.0 * c**2)))
    f1, f2 = flux_through_sphere(u1, 0.5), flux_through_sphere(u2, 0.5)
    assert f2 / f1 == pytest.approx(c**2, rel=0.02)
    r = g.radius()
    band = (r > 0.2) & (r < 0.5)
    assert np.median(u2.values[band] / u1.values[band]) == pytest.approx(c, rel=0.02)


def test_epsilon_robustness(dirac3):
    g, u, _ = dirac3
    u_half, _ = solve_dirichlet(DirichletProblem.ball(g, 1.0, RadonMeasure.dirac([0, 0, 0], 4 * math.pi),
                                                      epsilon=g.h / 2))
    r = g.radius()
    band = (r >= 0.2) & (r <= 0.8)
    disc = np.max(np.abs(u.values[band] + np.log(r[band])))
    assert np.max(np.abs(u.values[band] - u_half.values[band])) < disc


def test_weak_comparison_examples():
    g = Grid.centered(2, 1.0, 1 / 32)
    free = g.radius() < 0.9
    prob0 = DirichletProblem(g, free, np.zeros(g.shape))
    v, _ = solve_dirichlet(prob0)
    assert weak_comparison_check(v, v, free).fraction == 1.0
    u, _ = solve_dirichlet(DirichletProblem(g, free, np.zeros(g.shape), RadonMeasure.dirac([0, 0])))
    assert weak_comparison_check(u, v, free).holds
    bnd = np.cos(g.points()[..., 0])
    v1, _ = solve_dirichlet(DirichletProblem(g, free, bnd))
    u1, _ = solve_dirichlet(DirichletProblem(g, free, bnd + 1))
    rep = weak_comparison_check(u1, v1, free)
    assert rep.holds and rep.min_difference >= 1 - 1e-6
