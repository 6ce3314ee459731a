import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nlpotential import geometry as geo
from nlpotential.fields import Grid, ScalarField, sphere_area
from nlpotential.nlaplace import flux_through_sphere


def radial_flux_oracle(m, delta, R, n):
    # phi' = -m r / (r^2 + delta^2); flux = -|phi'|^{n-2} phi' * |S_R|
    d = m * R / (R * R + delta * delta)
    return d ** (n - 1) * R ** (n - 1)


@pytest.mark.parametrize("n", [2, 3, 4])
@pytest.mark.parametrize("m", [0.25, 1.0])
def test_capped_profile_flux_matches_radial_oracle(n, m):
    for R in (0.2, 1.0, 5.0):
        assert geo.capped_profile_flux(m, 0.1, R, n) == pytest.approx(radial_flux_oracle(m, 0.1, R, n), rel=1e-12)


@pytest.mark.parametrize("n", [2, 3])
def test_sphere_quadrature_flux_of_capped_profile(n):
    phi = geo.capped_log_profile(0.5, 0.1)
    for R in (0.5, 2.0):
        got = flux_through_sphere(phi, R, np.zeros(n), 48) / sphere_area(n)
        assert got == pytest.approx(geo.capped_profile_flux(0.5, 0.1, R, n), rel=1e-3)


def test_ricci_density_sign_follows_profile_sign():
    g = Grid.centered(2, 2.0, 1 / 16)
    good = geo.ricci_direction_density(geo.ConformalMetric(geo.capped_log_profile(0.5, 0.3), 2), g, tol=1e-6)
    assert good.nonnegative
    bad = geo.ricci_direction_density(geo.ConformalMetric(lambda x: -geo.capped_log_profile(0.5, 0.3)(x), 2),
                                      g, tol=1e-6)
    assert not bad.nonnegative


def test_conformal_metric_validates_phi():
    with pytest.raises(TypeError):
        geo.ConformalMetric(3.0, 2)
    g = Grid.centered(2, 1.0, 0.25)
    with pytest.raises(ValueError):
        geo.ConformalMetric(ScalarField(g, np.zeros(g.shape)), 3)


@pytest.mark.parametrize("m", [0.25, 0.5, 0.75])
def test_flux_and_profile_slopes_agree_on_callable(m):
    g = geo.ConformalMetric(geo.capped_log_profile(m, 0.1), 3)
    fm = geo.flux_m(g, [5.0, 10.0, 20.0, 40.0])
    assert fm.m == pytest.approx(m, abs=1e-4)
    assert fm.stable and fm.consistent_sign
    assert geo.profile_m(g) == pytest.approx(m, abs=1e-3)


def test_profile_m_rejects_small_gridded_phi():
    grid = Grid.centered(3, 2.0, 0.25)
    phi = ScalarField.from_function(grid, geo.capped_log_profile(0.5))
    with pytest.raises(ValueError):
        geo.profile_m(geo.ConformalMetric(phi, 3))


def test_exhaustion_domain_plus_sign_is_bounded_ball():
    g = Grid.centered(2, 4.0, 1 / 16)
    phi = ScalarField.from_function(g, geo.capped_log_profile(0.5, 0.1))
    reg = geo.exhaustion_domain(phi, geo.ExhaustionDomainSpec(0.5, 2.0, 2.0))
    assert reg.contains_origin and reg.bounded and reg.asserted_bounded
    # G > phi is roughly |x| < e^{t/eps}
    area = reg.mask.sum() * g.h**2
    assert area == pytest.approx(math.pi * math.e**2, rel=0.05)


def test_exhaustion_domain_minus_sign_needs_thin_certificate():
    g = Grid.centered(2, 4.0, 1 / 16)
    phi = ScalarField(g, np.full(g.shape, -10.0))
    spec = geo.ExhaustionDomainSpec(0.5, 0.1, 0.1, sign=-1)
    reg = geo.exhaustion_domain(phi, spec)
    assert reg.contains_origin and not reg.bounded and not reg.asserted_bounded
    assert "unbounded" in reg.note


def test_exhaustion_spec_validation():
    with pytest.raises(ValueError):
        geo.ExhaustionDomainSpec(0.5, 0.0, 1.0)
    with pytest.raises(ValueError):
        geo.ExhaustionDomainSpec(0.5, 1.0, 1.0, sign=0)


curv = st.floats(-3, 3, allow_nan=False)


@given(st.lists(curv, min_size=2, max_size=5))
def test_sectional_implies_ricci(k):
    c = geo.curvature_condition(k)
    if c.nonnegative_sectional:
        assert c.nonnegative_ricci


@given(st.lists(curv, min_size=2, max_size=5), st.randoms(use_true_random=False))
def test_curvature_class_is_permutation_invariant(k, rnd):
    p = list(k)
    rnd.shuffle(p)
    assert geo.curvature_condition(k) == geo.curvature_condition(p)


@given(st.floats(-3, 3, allow_nan=False), st.integers(2, 5))
def test_umbilic_curvature_classes(kappa, n):
    c = geo.curvature_condition([kappa] * n)
    assert c.strictly_convex == (kappa > 0)
    assert c.nonnegative_ricci == ((n - 1) * kappa * kappa >= n - 1)
    assert c.nonnegative_sectional == (kappa * kappa >= 1)


def test_principal_curvatures_reject_nonfinite():
    with pytest.raises(ValueError):
        geo.PrincipalCurvatures((1.0, math.inf))


def test_inner_rotation_of_shifted_equidistant():
    s = geo.HypersurfaceGraph(lambda x: np.log(np.linalg.norm(x, axis=-1)) + 0.3 * x[..., 0]
                              / np.linalg.norm(x, axis=-1), 3)
    radii = np.geomspace(1, 100, 8)
    prof = geo.inner_rotation(s, radii)
    # sampled sup: the nodes miss the maximizing direction by about one node spacing
    np.testing.assert_allclose(prof.rho_hat, np.log(radii) + 0.3, atol=1e-3)
    assert prof.nondecreasing and prof.log_convex


def test_inner_rotation_detects_concavity_in_log_r():
    s = geo.HypersurfaceGraph(lambda x: np.sqrt(np.log1p(np.linalg.norm(x, axis=-1))), 2)
    assert not geo.inner_rotation(s, np.geomspace(1, 100, 8)).log_convex


def test_equidistant_bound_constant_and_violation():
    radii = np.geomspace(1, 1e3, 12)
    ok = geo.equidistant_bound(geo.HypersurfaceGraph(lambda x: np.log(np.linalg.norm(x, axis=-1)) + 0.7, 2), radii)
    assert not ok.violation and ok.C == pytest.approx(0.7, abs=1e-12)
    bad = geo.equidistant_bound(geo.HypersurfaceGraph(lambda x: 2 * np.log(np.linalg.norm(x, axis=-1)), 2), radii)
    assert bad.violation and bad.C is None


def test_busemann_check_flags_negative_origin_mass():
    g = Grid.centered(2, 1.0, 1 / 32)
    r = g.radius()
    lg = np.where(r > 0, np.log(np.maximum(r, 1e-300)), 0.0)
    up = geo.busemann_subharmonic_check(ScalarField(g, lg, r == 0), origin_radius=0.25)
    down = geo.busemann_subharmonic_check(ScalarField(g, -lg, r == 0), origin_radius=0.25)
    assert up.origin_mass == pytest.approx(2 * math.pi, rel=1e-2) and not up.origin_flagged
    assert down.origin_flagged


def test_busemann_check_convex_paraboloid_has_no_violations():
    g = Grid.centered(3, 1.0, 1 / 8)
    rep = geo.busemann_subharmonic_check(ScalarField.from_function(g, lambda x: np.sum(x * x, axis=-1)))
    assert not rep.violations.any()


@pytest.mark.parametrize("m", [0.0, 0.5, 1.0])
def test_hypersurface_asymptote_recovers_slope(m):
    s = geo.HypersurfaceGraph(lambda x: m * np.log(np.linalg.norm(x, axis=-1))
                              + 0.2 * x[..., 0] / np.linalg.norm(x, axis=-1), 3)
    rep = geo.hypersurface_asymptote(s)
    assert rep.m == pytest.approx(m, abs=1e-6)
    assert rep.in_range
    assert rep.upper_C == pytest.approx(0.2, abs=0.02)


def test_hypersurface_asymptote_needs_three_decades():
    s = geo.HypersurfaceGraph(lambda x: np.zeros(x.shape[:-1]), 2)
    with pytest.raises(ValueError):
        geo.hypersurface_asymptote(s, 10.0, 1e3 * 0.9)
