import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nlpotential.asymptotics import (CutoffSpec, blow_down, cutoff_a, cutoff_second_derivative, default_tolerance,
                                     exceptional_set, extrapolate_limit, growth_condition_check, infimum_diagnostic,
                                     inversion_transform, quotient_profile, ray_length_increments,
                                     slope_after_inversion)
from nlpotential.fields import Grid, RadonMeasure, ScalarField, gradient, sphere_area
from nlpotential.nlaplace import DirichletProblem, solve_dirichlet
from nlpotential.thinness import Verdict, ball_chain, thinness_series


def mlog(m):
    return lambda x: -m * np.log(np.linalg.norm(x, axis=-1))


RADII = np.geomspace(1e-1, 1e-5, 20)

# -- cutoff -------------------------------------------------------------


@given(st.floats(1e-3, 1e3), st.sampled_from([2, 3, 4]), st.floats(0, 1e9))
def test_cutoff_bounds(alpha, n, s):
    spec = CutoffSpec(alpha, n)
    v, d = cutoff_a(s, spec)
    assert 0 <= v <= n * alpha * (1 + 1e-12)
    assert 0 < d <= 1
    assert v <= s + 1e-12 * max(1.0, s)


@given(st.floats(0.01, 10), st.sampled_from([2, 3, 4]), st.floats(1.0001, 1e3))
def test_cutoff_derivative_matches_finite_difference(alpha, n, k):
    spec = CutoffSpec(alpha, n)
    s = alpha * k
    step = 1e-6 * s
    fd = (cutoff_a(s + step, spec)[0] - cutoff_a(s - step, spec)[0]) / (2 * step)
    assert cutoff_a(s, spec)[1] == pytest.approx(fd, rel=1e-5)
    fd2 = (cutoff_a(s + step, spec)[1] - cutoff_a(s - step, spec)[1]) / (2 * step)
    assert cutoff_second_derivative(s, spec) == pytest.approx(fd2, rel=1e-4)
    assert cutoff_second_derivative(s, spec) < 0


def test_cutoff_identity_below_alpha_and_limit():
    spec = CutoffSpec(0.7, 3)
    s = np.linspace(0, 0.7, 11)
    v, d = cutoff_a(s, spec)
    assert np.array_equal(v, s) and np.all(d == 1.0)
    assert cutoff_a(1e30, spec)[0] == pytest.approx(2.1, rel=1e-12)
    assert spec.ceiling == pytest.approx(2.1)


def test_cutoff_validation():
    with pytest.raises(ValueError):
        CutoffSpec(0.0, 3)
    with pytest.raises(ValueError):
        CutoffSpec(1.0, 1)
    with pytest.raises(ValueError):
        cutoff_a(-1.0, CutoffSpec(1.0, 2))


# -- blow-down ----------------------------------------------------------


def test_blow_down_of_log_is_exact():
    m, r = 0.8, 1e-3
    bd = blow_down(mlog(m), r, n=3)
    g = bd.field.grid
    ok = ~bd.field.singular
    xi = np.linalg.norm(g.points()[ok], axis=-1)
    exact = m + m * np.log(1 / xi) / math.log(1 / r)
    assert np.allclose(bd.field.values[ok], exact, rtol=1e-12)


def test_blow_down_of_bounded_field_vanishes():
    w = lambda x: np.sin(np.linalg.norm(x, axis=-1) * 40) + 0.5  # noqa: E731
    sups = [np.nanmax(np.abs(blow_down(w, r, n=2).field.values)) for r in (1e-2, 1e-4, 1e-8)]
    assert sups[0] > sups[1] > sups[2] and sups[2] < 0.1


def test_blow_down_with_cutoff():
    bd = blow_down(mlog(2.0), 1e-2, n=2, alpha=0.5)
    ok = ~bd.cut.singular
    assert np.all(bd.cut.values[ok] <= 2 * 0.5 + 1e-12)


# -- quotient profile ---------------------------------------------------


def test_quotient_profile_angular_perturbation():
    m = 0.6
    w = lambda x: mlog(m)(x) + 0.4 * x[..., 0] / np.linalg.norm(x, axis=-1) - 0.1  # noqa: E731
    prof = quotient_profile(w, RADII, n=3)
    assert prof.gamma_minus == pytest.approx(m, abs=0.02)
    assert prof.m == pytest.approx(m, abs=1e-9)
    # sphere minimum of the perturbation is -0.5
    assert prof.lower_constant == pytest.approx(0.5, abs=1e-3)


def test_extrapolate_limit_exact_for_inverse_log():
    r = np.geomspace(1e-1, 1e-6, 12)
    v = 0.9 + 0.37 / np.log(1 / r)
    assert extrapolate_limit(r, v) == pytest.approx(0.9, rel=1e-10)


@given(st.floats(0, 1.5), st.floats(0, 0.5), st.floats(0, 0.5), st.floats(0.5, 6))
def test_slope_recovery_property(m, a, b, k):
    def w(x):
        r = np.linalg.norm(x, axis=-1)
        return m * np.log(1 / r) + a * np.sin(k * r) + b * x[..., 1] / r

    assert quotient_profile(w, RADII, n=3).m == pytest.approx(m, abs=0.05)


def test_lower_constant_stable_under_dyadic_shift():
    def w(x):
        r = np.linalg.norm(x, axis=-1)
        return 0.8 * np.log(1 / r) + 0.3 * np.cos(10 * r) + 0.2 * x[..., 0] / r

    # both windows sit where the regular part has settled
    radii = np.geomspace(1e-2, 1e-6, 20)
    a = quotient_profile(w, radii, n=3).lower_constant
    b = quotient_profile(w, radii / 2, n=3).lower_constant
    assert abs(a - b) < 0.05


@pytest.fixture(scope="module")
def solved2():
    h = 1 / 128
    g = Grid.centered(2, 1 + 2 * h, h, True)
    u, _ = solve_dirichlet(DirichletProblem.ball(g, 1.0, RadonMeasure.dirac([0, 0], sphere_area(2)), 0.1))
    return g, u


def test_solved_dirac_profile_slope_one_and_monotone(solved2):
    g, u = solved2
    radii = np.geomspace(0.8, 6 * g.h, 14)
    prof = quotient_profile(lambda x: u.sample(x, order=3), radii, n=2)
    assert prof.m == pytest.approx(1.0, rel=0.05)
    assert prof.is_monotone(1e-3)


def test_harmonic_field_has_zero_slope():
    h = 1 / 64
    g = Grid.centered(2, 1 + 2 * h, h)
    u, _ = solve_dirichlet(DirichletProblem.ball(g, 1.0, None, lambda x: 1.0 + 0.5 * x[..., 0]))
    radii = np.geomspace(0.8, 6 * h, 12)
    assert abs(quotient_profile(lambda x: u.sample(x, order=3), radii, n=2).m) < 0.05


def test_quotient_profile_validation():
    with pytest.raises(ValueError):
        quotient_profile(mlog(1), [0.1, 0.01], n=2)
    with pytest.raises(ValueError):
        quotient_profile(mlog(1), [0.5, 0.1, 0.01, 2.0], n=2)
    with pytest.raises(ValueError):
        quotient_profile(mlog(1), RADII)


# -- exceptional sets ---------------------------------------------------


def test_exceptional_set_of_pure_log_is_empty():
    E = exceptional_set(mlog(0.7), 0.7, n=3)
    pts = np.random.default_rng(1).uniform(-0.9, 0.9, (2000, 3))
    assert not E.contains(pts).any()
    assert default_tolerance(0.7) == pytest.approx(0.09)


def test_exceptional_set_recovers_thin_chain():
    n, m = 3, 0.5
    chain = ball_chain(n, 3, 8)

    def w(x):
        return mlog(m)(x) + np.where(chain.contains(x), -np.log(np.linalg.norm(x, axis=-1)), 0.0)

    E = exceptional_set(w, m, n=n)
    centers = np.array([c for c, _ in chain.balls])
    assert E.contains(centers).all()
    assert not E.contains(centers * 1.3).any()


def test_exceptional_set_on_cone_is_not_thin():
    n, m = 2, 0.5

    def w(x):
        r = np.linalg.norm(x, axis=-1)
        cone = x[..., 0] >= 0.8 * r
        return m * np.log(1 / r) + np.where(cone, np.log(1 / r), 0.0)

    E = exceptional_set(w, m, n=n)
    assert thinness_series(E, 1, 9, h=1 / 16).verdict is Verdict.NOT_THIN


def test_exceptional_set_from_grid_field():
    g = Grid.centered(2, 1.0, 1 / 32)
    r = g.radius()
    F = ScalarField(g, np.where(r > 0, -0.5 * np.log(np.maximum(r, 1e-300)) + (g.points()[..., 1] > 0.5), 0.0))
    E = exceptional_set(F, 0.5)
    assert E.contains(np.array([[0.1, 0.7]]))[0]
    assert not E.contains(np.array([[0.1, -0.3]]))[0]


# -- inversion ----------------------------------------------------------


def test_inversion_of_flat_factor():
    w = inversion_transform(lambda x: np.zeros(x.shape[:-1]))
    prof = quotient_profile(w, RADII, n=3)
    assert prof.m == pytest.approx(2.0, abs=1e-9)
    assert slope_after_inversion(prof.m) == pytest.approx(0.0, abs=1e-9)


def test_inversion_of_log_factor():
    w = inversion_transform(lambda x: -0.5 * np.log(np.linalg.norm(x, axis=-1)))
    assert quotient_profile(w, RADII, n=2).m == pytest.approx(1.5, abs=1e-9)


def test_inversion_of_grid_field():
    g = Grid.centered(2, 8.0, 1 / 8, True)
    phi = ScalarField.from_function(g, lambda x: -0.5 * np.log(np.maximum(np.linalg.norm(x, axis=-1), 1e-3)))
    w = inversion_transform(phi, R0=2.0)
    ok = ~w.singular
    y = w.grid.radius()[ok]
    assert np.allclose(w.values[ok], -1.5 * np.log(y), atol=5e-3)
    with pytest.raises(ValueError):
        inversion_transform(phi, R0=5.0)


# -- growth condition and line integrals --------------------------------


def test_growth_condition_examples():
    n = 3
    g = Grid.centered(n, 1.0, 1 / 16)
    r = g.radius()
    ok = r > 0.1
    wv = np.where(ok, -np.log(np.maximum(r, 1e-12)), 0.0)
    gw = gradient(ScalarField(g, wv)).values
    zero = growth_condition_check(np.zeros(g.shape), wv, gw, 1.0, n)
    assert zero.fraction == 1.0
    eq = np.linalg.norm(gw, axis=-1) ** (n - 2) * np.exp(2 * wv)
    assert growth_condition_check(eq, wv, gw, 1.0, n).fraction == 1.0
    chain = ball_chain(n, 1, 3, radius_fn=lambda i: 0.3).contains(g.points())
    spiked = np.where(chain, 10 * eq + 1, eq)
    rep = growth_condition_check(spiked, wv, gw, 1.0, n)
    assert np.array_equal(rep.violations, chain)


def test_ray_length_divergence():
    div = ray_length_increments(lambda x: -1.2 * np.log(np.linalg.norm(x, axis=-1)), [1, 0, 0])
    assert div.divergent and div.exponent == pytest.approx(1.2, abs=1e-3)
    conv = ray_length_increments(lambda x: -0.5 * np.log(np.linalg.norm(x, axis=-1)), [0, 1, 0])
    assert not conv.divergent and conv.exponent == pytest.approx(0.5, abs=1e-3)


@given(st.floats(0.0, 2.0), st.floats(0, 0.5))
def test_divergent_line_integral_implies_slope_at_least_one(m, a):
    def w(x):
        r = np.linalg.norm(x, axis=-1)
        return m * np.log(1 / r) + a * np.sin(7 * r)

    rep = ray_length_increments(w, [1, 0, 0])
    if rep.divergent:
        assert quotient_profile(w, RADII, n=3).m >= 1 - 0.05


def test_infimum_diagnostic_bounded_by_slope():
    pts = np.array([[10.0**-k, 0, 0] for k in range(2, 6)])
    q = infimum_diagnostic(mlog(1.0), pts)
    lim = np.log(1 / (1.5 * pts[:, 0])) / np.log(1 / pts[:, 0])
    assert np.all(q >= lim - 1e-9) and np.all(q <= 1.0)
