import numpy as np
import pytest

from conftest import bump_net, planar_net, twisted_gregory
from patchtrace.geometry import Ray
from patchtrace.oracle import OracleScene, oracle_intersect, tessellate
from patchtrace.patch import eval_patch
from patchtrace.verify import check_oracle_agreement, fixture_patches


def test_single_cell_planar_tessellation():
    t = tessellate(planar_net(), 1)
    assert t.triangle_count == 2
    assert t.area() == pytest.approx(1.0)
    np.testing.assert_allclose(t.vertices[1, 1], [1, 1, 0])


def test_corner_vertex_is_control_point(rng):
    g = twisted_gregory()
    t = tessellate(g, 8)
    np.testing.assert_array_equal(t.vertices[0, 0], g.points[0, 0])


@pytest.mark.parametrize("n", [1, 3, 16, 64])
def test_planar_area_is_one(n):
    assert tessellate(planar_net(), n).area() == pytest.approx(1.0, rel=1e-12)


def test_vertices_are_shared_between_cells():
    t = tessellate(bump_net(), 4)
    tri = t.triangles()
    # each interior vertex index appears in six triangles: sharing is by index, not by value
    counts = np.zeros((5, 5), int)
    np.add.at(counts, (tri[..., 0].ravel(), tri[..., 1].ravel()), 1)
    assert counts[2, 2] == 6


def test_perpendicular_centre_ray_on_plane():
    hit = oracle_intersect(tessellate(planar_net(), 16), Ray([0.5, 0.5, 1.0], [0, 0, -1]))
    assert hit.t == 1.0 and hit.u == 0.5 and hit.v == 0.5


def test_grazing_miss_outside():
    assert oracle_intersect(tessellate(planar_net(), 16), Ray([1.5, 0.5, 0.0], [0, 1, 0])) is None
    assert oracle_intersect(tessellate(planar_net(), 16), Ray([1.01, 0.5, 1.0], [0, 0, -1])) is None


def test_shared_edges_and_vertices_do_not_leak():
    t = tessellate(bump_net(), 8)
    # rays through every grid vertex and every cell diagonal midpoint
    for a in range(1, 8):
        for b in range(1, 8):
            for p in (t.vertices[a, b], 0.5 * (t.vertices[a, b] + t.vertices[a + 1, b + 1])):
                assert oracle_intersect(t, Ray(p + [0, 0, 1], [0, 0, -1])) is not None


def test_hits_lie_on_the_tessellation(rng):
    g = twisted_gregory()
    t = tessellate(g, 64)
    for _ in range(50):
        u, v = rng.uniform(0.1, 0.9, 2)
        p = eval_patch(g, u, v, np.float64)
        hit = oracle_intersect(t, Ray(p + [0.01, 0.02, 2.0], [0, 0, -1]))
        assert hit is not None
        assert 0.0 <= hit.u <= 1.0 and 0.0 <= hit.v <= 1.0
        assert abs(np.linalg.norm(hit.normal) - 1) < 1e-9


def test_monotone_convergence():
    patch = bump_net(0.8)
    ray = Ray([0.37, 0.41, 2.0], [0.05, -0.02, -1.0])
    ts = [oracle_intersect(tessellate(patch, n), ray).t for n in (4, 8, 16, 32, 64)]
    diffs = np.abs(np.diff(ts))
    assert np.all(diffs[1:] < diffs[:-1])


def test_agrees_with_direct_intersector_on_fixture():
    res = check_oracle_agreement(fixture_patches(1, seed=5), rays=1000, n=256, seed=5)
    assert res.details["unexcused"] == 0 and res.details["t_over_tol"] == 0, res.summary()
    assert res.details["agreement"] >= 0.99


def test_disagreements_come_from_boundary_padding():
    from patchtrace.intersect import IntersectConfig
    from patchtrace.tracer import PreparedScene
    from patchtrace.verify import rays_toward

    patches = fixture_patches(1, seed=5)
    rng = np.random.default_rng(3)
    orig, dirs, _ = rays_toward(patches, rng, 1000)
    tess = OracleScene(patches, 256).trace(orig, dirs)
    eps = 1e-4 * np.linalg.norm(np.ptp(patches[0].all_points(), axis=0))
    padded = PreparedScene(patches).trace(orig, dirs, scale=0.0, eps=eps)
    plain = PreparedScene(patches, IntersectConfig(padding=False)).trace(orig, dirs, scale=0.0, eps=eps)
    assert np.count_nonzero(plain.found != tess.found) <= np.count_nonzero(padded.found != tess.found)
    # padding only ever adds hits
    assert not np.any(plain.found & ~padded.found)


def test_scene_trace_matches_per_patch(teapot, rng):
    from patchtrace.verify import rays_toward

    scene = OracleScene(teapot[:6], n=16)
    orig, dirs, _ = rays_toward(teapot[:6], rng, 200)
    r = scene.trace(orig, dirs)
    for k in range(0, 200, 10):
        hits = [oracle_intersect(t, Ray(orig[k], dirs[k])) for t in scene.tess]
        ts = [h.t for h in hits if h is not None]
        assert bool(ts) == bool(r.found[k])
        if ts:
            assert min(ts) == pytest.approx(r.t[k], rel=1e-12)


def test_resolution_validation():
    with pytest.raises(ValueError):
        tessellate(planar_net(), 0)
