import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nlpotential.fields import (Grid, RadonMeasure, ScalarField, ball_mass, ball_volume, dilate, dyadic_annuli,
                                gradient, sphere_area, sphere_nodes)


def test_sphere_area_and_ball_volume():
    assert sphere_area(2) == pytest.approx(2 * math.pi)
    assert sphere_area(3) == pytest.approx(4 * math.pi)
    assert sphere_area(4) == pytest.approx(2 * math.pi**2)
    for n in (2, 3, 4):
        assert ball_volume(n, 2.0) == pytest.approx(sphere_area(n) / n * 2.0**n)


def test_grid_validation():
    with pytest.raises(ValueError):
        Grid(5, (4,) * 5, 0.1, (0.0,) * 5)
    with pytest.raises(ValueError):
        Grid(2, (4, 4), -0.1, (0.0, 0.0))
    with pytest.raises(ValueError):
        Grid(2, (4, 4), 0.1, (-1.0, 0.0), (True, False))


def test_cells_closed_on_lower_face():
    g = Grid.box([0, 0], [1, 1], 0.25)
    # cell k covers [c - h/2, c + h/2); the shared face belongs to the upper cell
    c0 = g.cell_center((0, 0))
    face = c0 + np.array([g.h / 2, 0.0])
    assert g.cell_index(face) == (1, 0)
    assert g.cell_index(c0 - np.array([g.h / 2, 0.0])) == (0, 0)


def test_mirror_weights_integrate_full_box():
    full = Grid.centered(3, 1.0, 0.125)
    half = Grid.centered(3, 1.0, 0.125, True)
    f = lambda x: np.exp(-np.sum(x * x, axis=-1))  # noqa: E731
    a = ScalarField.from_function(full, f).integral()
    b = ScalarField.from_function(half, f).integral()
    assert b == pytest.approx(a, rel=1e-12)


def test_gradient_of_constant_is_zero():
    g = Grid.centered(3, 1.0, 0.1)
    gr = gradient(ScalarField(g, np.full(g.shape, 2.5)))
    assert np.max(np.abs(gr.norm())) == 0.0


def test_gradient_of_affine_is_exact_in_interior():
    g = Grid.box([0, 0], [1, 1], 0.05)
    gr = gradient(ScalarField.from_function(g, lambda x: x[..., 0])).values
    inner = (slice(1, -1), slice(1, -1))
    assert np.allclose(gr[inner][..., 0], 1.0, atol=1e-12)
    assert np.allclose(gr[inner][..., 1], 0.0, atol=1e-12)


def test_gradient_of_log_at_half_radius_second_order():
    errs = []
    for h in (1 / 16, 1 / 32):
        g = Grid.centered(3, 1.0, h)
        f = ScalarField.from_function(g, lambda x: -np.log(np.linalg.norm(x, axis=-1)))
        pts, _ = sphere_nodes(3, 0.5, 12)
        # sample at cell centers near the sphere to avoid interpolation error
        idx = [g.cell_index(p) for p in pts]
        centers = np.array([g.cell_center(i) for i in idx])
        vals = gradient(f).norm()[tuple(np.array(idx).T)]
        exact = 1 / np.linalg.norm(centers, axis=1)
        errs.append(np.max(np.abs(vals - exact)))
    assert errs[1] < 0.01
    assert errs[0] / errs[1] > 3.0  # O(h^2)


@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 2**31 - 1))
def test_gradient_is_linear(a, b, seed):
    rng = np.random.default_rng(seed)
    g = Grid.centered(2, 0.5, 0.1)
    f = rng.standard_normal(g.shape)
    h = rng.standard_normal(g.shape)
    lhs = gradient(ScalarField(g, a * f + b * h)).values
    gf = gradient(ScalarField(g, f)).values
    gh = gradient(ScalarField(g, h)).values
    assert np.allclose(lhs, a * gf + b * gh, atol=1e-10 * (1 + abs(a) + abs(b)))


def test_ball_mass_atom_examples():
    mu = RadonMeasure.dirac([0, 0, 0], 1.0)
    assert ball_mass(mu, [0, 0, 0], 0.5) == 1.0
    assert ball_mass(mu, [1, 0, 0], 0.5) == 0.0


def test_ball_mass_uniform_density_unit_ball():
    g = Grid.centered(3, 1.1, 1 / 32)
    mu = RadonMeasure((), ScalarField(g, (g.radius() <= 1.0).astype(float)))
    assert ball_mass(mu, [0, 0, 0], 1.0) == pytest.approx(4 * math.pi / 3, rel=0.01)


@given(st.lists(st.floats(0.01, 1.5), min_size=2, max_size=8))
def test_ball_mass_nondecreasing_and_total(ts):
    g = Grid.centered(2, 1.0, 1 / 16)
    dens = ScalarField(g, np.exp(-g.radius() ** 2))
    mu = RadonMeasure(((np.array([0.2, -0.1]), 0.7),), dens)
    ts = sorted(ts)
    vals = [ball_mass(mu, [0.05, 0.1], t) for t in ts]
    assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))
    assert ball_mass(mu, [0.05, 0.1], 10.0) == pytest.approx(mu.total_mass(), rel=1e-12)


def test_dyadic_annuli_examples():
    a = dyadic_annuli([0, 0, 0], 1, 6)
    w, W = a.pair(1)
    assert (w.r_in, w.r_out, w.closed) == (0.25, 0.5, True)
    assert (W.r_in, W.r_out, W.closed) == (0.125, 1.0, False)
    w, W = dyadic_annuli(None, 0, 3).pair(0)
    assert (w.r_in, w.r_out) == (1.0, 2.0)
    assert (W.r_in, W.r_out) == (0.5, 4.0)
    for i in a.indices:
        w, W = a.pair(i)
        assert W.r_in < w.r_in and w.r_out < W.r_out


@given(st.integers(0, 3), st.integers(1, 6), st.integers(0, 2**31 - 1))
def test_dyadic_annuli_tile_punctured_ball(i_min, span, seed):
    a = dyadic_annuli([0.0, 0.0], i_min, i_min + span)
    rng = np.random.default_rng(seed)
    r = rng.uniform(2.0 ** (-i_min - span - 1), 2.0 ** (-i_min), 200)
    th = rng.uniform(0, 2 * np.pi, 200)
    p = np.stack([r * np.cos(th), r * np.sin(th)], axis=-1)
    hits = sum(a.pair(i)[0].contains(p).astype(int) for i in a.indices)
    assert np.all(hits >= 1)
    on_sphere = np.isclose(np.log2(r), np.round(np.log2(r)))
    assert np.all((hits == 1) | on_sphere)


def test_load_vector_preserves_mass():
    g = Grid.centered(3, 1.0, 1 / 8, True)
    dens = ScalarField(g, np.exp(-g.radius()))
    mu = RadonMeasure(((np.zeros(3), 2.0),), dens)
    assert float(np.sum(mu.load_vector(g))) == pytest.approx(mu.total_mass(), rel=1e-12)


def test_sphere_nodes_weights_sum_to_area():
    for n in (2, 3, 4):
        _, w = sphere_nodes(n, 0.7, 16)
        assert np.sum(w) == pytest.approx(sphere_area(n) * 0.7 ** (n - 1), rel=1e-10)


def test_dilate():
    m = np.zeros((7, 7), bool)
    m[3, 3] = True
    assert dilate(m, 1).sum() == 9
    assert dilate(m, 0).sum() == 1
