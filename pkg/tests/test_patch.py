import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import planar_net, twisted_gregory
from patchtrace.patch import (BezierNet, Domain, GregoryNet, bernstein_max_weights, calc_points_and_d,
                              crop_bezier, eval_bezier, eval_bezier_du, eval_bezier_dudv, eval_bezier_dv,
                              eval_gregory, eval_gregory_du, eval_patch, eval_patch_grid, gregory_blend_weights,
                              gregory_weight_bounds, subdivide_de_casteljau, transpose, unpack)
from patchtrace.verify import random_bezier, random_gregory


def bernstein(n, i, t):
    from math import comb
    return comb(n, i) * t ** i * (1 - t) ** (n - i)


def eval_direct(points, u, v):
    """Tensor-product Bernstein sum: an independent evaluation path."""
    return sum(bernstein(3, i, u) * bernstein(3, j, v) * points[i, j] for i in range(4) for j in range(4))


def test_planar_evaluation_and_derivatives():
    net = planar_net()
    np.testing.assert_allclose(eval_bezier(net, 0.25, 0.75, np.float64), [0.25, 0.75, 0.0], atol=1e-15)
    np.testing.assert_allclose(eval_bezier_du(net, 0.3, 0.6, np.float64), [1, 0, 0], atol=1e-12)
    np.testing.assert_allclose(eval_bezier_dv(net, 0.3, 0.6, np.float64), [0, 1, 0], atol=1e-12)
    np.testing.assert_allclose(eval_bezier_dudv(net, 0.3, 0.6, np.float64), [0, 0, 0], atol=1e-12)


def test_corners_interpolate(rng):
    net = random_bezier(rng)
    for (u, v), (i, j) in {(0, 0): (0, 0), (1, 0): (3, 0), (0, 1): (0, 3), (1, 1): (3, 3)}.items():
        np.testing.assert_allclose(eval_bezier(net, u, v, np.float64), net.points[i, j], atol=1e-12)


def test_evaluation_matches_bernstein_sum(rng):
    net = random_bezier(rng)
    for u, v in rng.random((20, 2)):
        np.testing.assert_allclose(eval_bezier(net, u, v, np.float64), eval_direct(net.points, u, v), atol=1e-12)


def test_derivatives_match_finite_differences(rng):
    net = random_bezier(rng)
    h = 1e-6
    u, v = 0.37, 0.61
    fd_u = (eval_bezier(net, u + h, v, np.float64) - eval_bezier(net, u - h, v, np.float64)) / (2 * h)
    fd_v = (eval_bezier(net, u, v + h, np.float64) - eval_bezier(net, u, v - h, np.float64)) / (2 * h)
    np.testing.assert_allclose(eval_bezier_du(net, u, v, np.float64), fd_u, atol=1e-6)
    np.testing.assert_allclose(eval_bezier_dv(net, u, v, np.float64), fd_v, atol=1e-6)
    fd_uv = (eval_bezier_du(net, u, v + h, np.float64) - eval_bezier_du(net, u, v - h, np.float64)) / (2 * h)
    np.testing.assert_allclose(eval_bezier_dudv(net, u, v, np.float64), fd_uv, atol=1e-5)


def test_crop_full_domain_is_identity(rng):
    net = random_bezier(rng)
    out = crop_bezier(net, Domain(), np.float64)
    np.testing.assert_allclose(out.points, net.points, rtol=1e-12, atol=1e-12)


def test_crop_degenerate_domain_collapses_to_point(rng):
    net = random_bezier(rng)
    out = crop_bezier(net, Domain(0.4, 0.4, 0.7, 0.7), np.float64)
    p = eval_bezier(net, 0.4, 0.7, np.float64)
    np.testing.assert_allclose(out.points.reshape(16, 3), np.broadcast_to(p, (16, 3)), atol=1e-12)


def test_crop_of_planar_net_is_affine():
    out = crop_bezier(planar_net(), Domain(0.25, 0.5, 0.0, 0.75), np.float64)
    i, j = np.meshgrid(np.arange(4) / 3.0, np.arange(4) / 3.0, indexing="ij")
    np.testing.assert_allclose(out.points[..., 0], 0.25 + 0.25 * i, atol=1e-14)
    np.testing.assert_allclose(out.points[..., 1], 0.75 * j, atol=1e-14)


unit = st.floats(0.0, 1.0)


@given(st.integers(0, 2 ** 32 - 1), unit, unit, unit, unit, unit, unit)
def test_crop_then_evaluate_reparameterises(seed, a, b, c, d, s, t):
    """Property: S_crop(s, t) = S(u0 + s (u1 - u0), v0 + t (v1 - v0))."""
    net = random_bezier(np.random.default_rng(seed))
    u0, u1 = sorted((a, b))
    v0, v1 = sorted((c, d))
    dom = Domain(u0, u1, v0, v1)
    q = crop_bezier(net, dom, np.float64)
    u, v = dom.map(s, t)
    np.testing.assert_allclose(eval_bezier(q, s, t, np.float64), eval_bezier(net, u, v, np.float64),
                               atol=1e-10 * (1 + np.abs(net.points).max()))


@pytest.mark.parametrize("axis", [0, 1])
def test_subdivision_halves_match_crops(rng, axis):
    net = random_bezier(rng)
    left, right = subdivide_de_casteljau(net, axis, np.float64)
    if axis == 0:
        doms = Domain(0, 0.5, 0, 1), Domain(0.5, 1, 0, 1)
    else:
        doms = Domain(0, 1, 0, 0.5), Domain(0, 1, 0.5, 1)
    np.testing.assert_allclose(left.points, crop_bezier(net, doms[0], np.float64).points, atol=1e-12)
    np.testing.assert_allclose(right.points, crop_bezier(net, doms[1], np.float64).points, atol=1e-12)


def test_subdivision_shares_the_split_curve(rng):
    left, right = subdivide_de_casteljau(random_bezier(rng), 0, np.float64)
    np.testing.assert_array_equal(left.points[3], right.points[0])
    with pytest.raises(ValueError):
        subdivide_de_casteljau(planar_net(), 2)


def test_transpose_swaps_parameters(rng):
    net = random_bezier(rng)
    tr = transpose(net)
    np.testing.assert_allclose(eval_bezier(tr, 0.2, 0.9, np.float64), eval_bezier(net, 0.9, 0.2, np.float64),
                               atol=1e-12)
    np.testing.assert_array_equal(transpose(tr).points, net.points)


def test_float32_evaluation_stays_float32(rng):
    net = random_bezier(rng).astype(np.float32)
    assert eval_bezier(net, 0.5, 0.5).dtype == np.float32
    assert crop_bezier(net, Domain(0, 0.5, 0, 0.5)).points.dtype == np.float32


# --- Gregory ---------------------------------------------------------------------


def test_gregory_with_coinciding_pairs_equals_bezier(rng):
    b = random_bezier(rng)
    g = GregoryNet(b.points, b.points[1:3, 1:3])
    for u, v in rng.random((10, 2)):
        np.testing.assert_allclose(eval_gregory(g, u, v, np.float64), eval_bezier(b, u, v, np.float64), atol=1e-12)


def test_gregory_blend_weights_follow_the_rational_form():
    w = gregory_blend_weights(0.25, 0.5)
    assert w[0, 0] == pytest.approx(0.25 / 0.75)     # u / (u + v)
    assert w[1, 0] == pytest.approx(0.75 / 1.25)     # (1-u) / (1-u + v)
    assert w[0, 1] == pytest.approx(0.25 / 0.75)     # u / (u + 1-v)
    assert w[1, 1] == pytest.approx(0.75 / 1.25)     # (1-u) / (1-u + 1-v)
    # 0/0 at the corners is resolved to an even blend
    assert gregory_blend_weights(0.0, 0.0)[0, 0] == 0.5


def test_gregory_corners_and_boundary_interpolate():
    g = twisted_gregory()
    np.testing.assert_allclose(eval_gregory(g, 0, 0, np.float64), g.points[0, 0], atol=1e-12)
    np.testing.assert_allclose(eval_gregory(g, 1, 1, np.float64), g.points[3, 3], atol=1e-12)
    # boundary curve v = 0 depends only on row j = 0 of the grid
    b = BezierNet(g.points)
    np.testing.assert_allclose(eval_gregory(g, 0.3, 0.0, np.float64), eval_bezier(b, 0.3, 0.0, np.float64),
                               atol=1e-12)


def test_gregory_evaluation_matches_explicit_blend(rng):
    g = random_gregory(rng)
    u, v = 0.3, 0.8
    w = gregory_blend_weights(u, v)
    grid = g.points.copy()
    for i in (1, 2):
        for j in (1, 2):
            grid[i, j] = g.pv[i - 1, j - 1] + w[i - 1, j - 1] * (g.points[i, j] - g.pv[i - 1, j - 1])
    np.testing.assert_allclose(eval_gregory(g, u, v, np.float64), eval_direct(grid, u, v), atol=1e-12)
    assert eval_gregory_du(g, u, v, np.float64).shape == (3,)


def test_pack_roundtrip(rng):
    g = random_gregory(rng)
    back = unpack(g.packed(), True)
    np.testing.assert_array_equal(back.points, g.points)
    np.testing.assert_array_equal(back.pv, g.pv)
    b = random_bezier(rng)
    np.testing.assert_array_equal(unpack(b.packed(), False).points, b.points)


def test_eval_patch_grid_matches_pointwise(rng):
    g = random_gregory(rng)
    us = np.linspace(0, 1, 5)
    grid = eval_patch_grid(g, us, us, np.float64)
    for a in range(5):
        for b in range(5):
            np.testing.assert_allclose(grid[a, b], eval_patch(g, us[a], us[b], np.float64), atol=1e-14)


def test_weight_bounds_on_full_domain():
    wb = gregory_weight_bounds(Domain())
    np.testing.assert_array_equal(wb.g_min, 0.0)
    np.testing.assert_array_equal(wb.g_max, 1.0)


def test_weight_bounds_cover_sampled_weights(rng):
    for _ in range(50):
        u0, u1 = np.sort(rng.random(2))
        v0, v1 = np.sort(rng.random(2))
        wb = gregory_weight_bounds(Domain(u0, u1, v0, v1))
        for u, v in zip(rng.uniform(u0, u1, 20), rng.uniform(v0, v1, 20)):
            w = gregory_blend_weights(u, v)
            assert np.all(w >= wb.g_min - 1e-12) and np.all(w <= wb.g_max + 1e-12)


def test_bernstein_maxima():
    wu1, wu2, _, _ = bernstein_max_weights(Domain())
    assert wu1 == pytest.approx(4 / 9) and wu2 == pytest.approx(4 / 9)
    # interval left of 1/3: B1 peaks at the right end, B2 at the right end too
    wu1, wu2, _, _ = bernstein_max_weights(Domain(0.0, 0.25, 0, 1))
    assert wu1 == pytest.approx(bernstein(3, 1, 0.25)) and wu2 == pytest.approx(bernstein(3, 2, 0.25))
    # degenerate boundary interval: both maxima vanish
    assert bernstein_max_weights(Domain(0, 0, 0, 1))[:2] == (0.0, 0.0)
    assert bernstein_max_weights(Domain(1, 1, 0, 1))[:2] == (0.0, 0.0)


def test_bezier_bound_has_zero_displacement(rng):
    res = calc_points_and_d(random_bezier(rng), Domain(0.1, 0.6, 0.2, 0.3), np.float64)
    np.testing.assert_array_equal(res.d, 0.0)


def test_gregory_bound_contains_samples(rng):
    for _ in range(20):
        g = random_gregory(rng, twist=0.3)
        u0, u1 = np.sort(rng.random(2))
        v0, v1 = np.sort(rng.random(2))
        box = calc_points_and_d(g, Domain(u0, u1, v0, v1), np.float64).box()
        us, vs = np.linspace(u0, u1, 9), np.linspace(v0, v1, 9)
        pts = eval_patch_grid(g, us, vs, np.float64).reshape(-1, 3)
        assert np.all(pts >= box.lo - 1e-12) and np.all(pts <= box.hi + 1e-12)


def test_gregory_displacement_is_nonnegative_and_shrinks():
    g = twisted_gregory(0.3)
    d_full = calc_points_and_d(g, Domain(), np.float64).d
    d_quarter = calc_points_and_d(g, Domain(0.25, 0.5, 0.25, 0.5), np.float64).d
    assert np.all(d_full >= 0) and np.all(d_quarter <= d_full)
    assert np.any(d_full > 0)


def test_domain_validation():
    with pytest.raises(ValueError):
        Domain(0.6, 0.5, 0, 1)
    with pytest.raises(ValueError):
        Domain(0, 1.5, 0, 1)
    with pytest.raises(ValueError):
        BezierNet(np.full((4, 4, 3), np.nan))
