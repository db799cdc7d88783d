import numpy as np
import pytest

from opaquereach.geometry import (DEFAULT_TOL, DimensionMismatch, EmptySetError,
                                  GeometryError, HPolytope, Tolerances,
                                  UnsupportedDimension, VPolytope, Zonotope,
                                  box_vertices, convex_hull_h, in_hull,
                                  interval_hull_points, linear_image,
                                  minkowski_sum, minkowski_sum_points,
                                  prune_indices, reduce_over, reduce_under,
                                  vpolytope_to_zonotope_box, zonotope_to_vpolytope)


class TestTypes:
    def test_tolerances_validation(self):
        with pytest.raises(GeometryError):
            Tolerances(geom_eps=0.0)
        with pytest.raises(GeometryError):
            Tolerances(lp_eps=2.0)
        t = Tolerances()
        assert t.geom_eps == 1e-9 and t.lp_eps == 1e-9 and t.gjk_eps == 1e-10

    def test_vpolytope_validation(self):
        with pytest.raises(EmptySetError):
            VPolytope(np.zeros((0, 2)))
        with pytest.raises(GeometryError):
            VPolytope([[np.nan, 0.0]])
        v = VPolytope([[1.0, 2.0]])
        assert v.dim == 2 and v.nv == 1
        with pytest.raises(AttributeError):
            v.vertices = None
        with pytest.raises(ValueError):
            v.vertices[0, 0] = 5.0  # read-only backing array

    def test_hpolytope_validation(self):
        h = HPolytope(np.zeros((0, 3)), np.zeros(0), dim=3)
        assert h.nrows == 0 and bool(h.contains([[1.0, 2.0, 3.0]])[0])
        with pytest.raises(DimensionMismatch):
            HPolytope([[1.0, 0.0]], [1.0, 2.0])

    def test_zonotope_validation(self):
        z = Zonotope([1.0, 2.0])
        assert z.ngens == 0 and z.dim == 2
        with pytest.raises(DimensionMismatch):
            Zonotope([0.0], [[1.0, 2.0]])

    def test_box_vertices(self):
        corners = box_vertices([0, 0], [1, 2])
        assert corners.shape == (4, 2)
        assert {tuple(c) for c in corners} == {(0, 0), (1, 0), (0, 2), (1, 2)}


class TestPrune:
    def test_square_with_interior_points(self):
        pts = np.array([[0, 0], [1, 0], [0, 1], [1, 1], [0.5, 0.5], [0.25, 0.75]])
        keep = prune_indices(pts)
        assert sorted(keep) == [0, 1, 2, 3]

    def test_collinear(self):
        pts = np.array([[0.0, 0, 0], [1, 1, 1], [2, 2, 2], [0.5, 0.5, 0.5]])
        keep = prune_indices(pts)
        assert sorted(keep) == [0, 2]

    def test_duplicates(self):
        pts = np.array([[1.0, 1.0], [1.0, 1.0], [1.0, 1.0]])
        assert list(prune_indices(pts)) == [0]

    def test_high_dim_dedupe_only(self):
        pts = np.vstack([np.eye(5), np.eye(5), np.full((1, 5), 0.2)])
        keep = prune_indices(pts)
        # interior centroid point is kept (no pruning above dim 3), dups removed
        assert len(keep) == 6


class TestMinkowskiAndImage:
    def test_square_plus_square(self):
        a = VPolytope.from_box([0, 0], [1, 1])
        b = VPolytope.from_box([0, 0], [2, 2])
        s = minkowski_sum(a, b)
        lo, hi = s.bounding_box()
        assert np.allclose(lo, [0, 0]) and np.allclose(hi, [3, 3])
        assert s.nv == 4

    def test_sum_indices(self):
        p = np.array([[0.0], [1.0]])
        q = np.array([[10.0], [20.0]])
        pts, ip, iq = minkowski_sum_points(p, q)
        assert pts.shape == (4, 1)
        assert np.allclose(pts.ravel(), p[ip].ravel() + q[iq].ravel())

    def test_linear_image_projection(self):
        v = VPolytope.from_box([0, 0, 0], [1, 2, 3])
        img = linear_image(np.array([[1.0, 0, 0], [0, 1.0, 0]]), v)
        lo, hi = img.bounding_box()
        assert np.allclose(lo, [0, 0]) and np.allclose(hi, [1, 2])
        assert img.nv == 4

    def test_image_shape_check(self):
        v = VPolytope.from_box([0, 0], [1, 1])
        with pytest.raises(DimensionMismatch):
            linear_image(np.eye(3), v)


class TestConvexHullH:
    def test_triangle_facets(self):
        h = convex_hull_h(np.array([[0.0, 0], [2, 0], [0, 2]]))
        assert h.nrows == 3
        assert bool(h.contains([[0.5, 0.5]], eps=1e-9)[0])
        assert not bool(h.contains([[1.5, 1.5]], eps=1e-9)[0])

    def test_membership_agrees_with_lp_oracle(self):
        # facet membership vs the independent LP membership route
        rng = np.random.default_rng(7)
        for dim in (1, 2, 3):
            for _ in range(20):
                pts = rng.uniform(-2, 2, size=(dim + 3, dim))
                h = convex_hull_h(pts)
                v = VPolytope(pts)
                probes = rng.uniform(-3, 3, size=(40, dim))
                for x in probes:
                    margin = h.violation(x[None, :])[0]
                    if abs(margin) < 1e-7:
                        continue  # within tolerance band, either answer fine
                    assert bool(h.contains(x[None, :], eps=1e-9)[0]) == in_hull(x, v)

    def test_flat_square_in_3d(self):
        pts = np.array([[0.0, 0, 1], [1, 0, 1], [0, 1, 1], [1, 1, 1]])
        h = convex_hull_h(pts)
        assert bool(h.contains([[0.5, 0.5, 1.0]], eps=1e-8)[0])
        assert not bool(h.contains([[0.5, 0.5, 1.5]], eps=1e-8)[0])
        assert not bool(h.contains([[1.5, 0.5, 1.0]], eps=1e-8)[0])

    def test_segment_in_3d(self):
        pts = np.array([[0.0, 0, 0], [1, 1, 1]])
        h = convex_hull_h(pts)
        assert bool(h.contains([[0.5, 0.5, 0.5]], eps=1e-8)[0])
        assert not bool(h.contains([[0.5, 0.5, 0.6]], eps=1e-8)[0])

    def test_singleton(self):
        h = convex_hull_h(np.array([[2.0, 3.0]]))
        assert bool(h.contains([[2.0, 3.0]], eps=1e-8)[0])
        assert not bool(h.contains([[2.1, 3.0]], eps=1e-8)[0])

    def test_dim_cap(self):
        with pytest.raises(UnsupportedDimension):
            convex_hull_h(np.eye(4))


class TestZonotope:
    def test_interval_hull(self):
        z = Zonotope([1.0, -1.0], [[1.0, 0], [0.5, 0.5]])
        lo, hi = z.interval_hull()
        assert np.allclose(lo, [-0.5, -1.5]) and np.allclose(hi, [2.5, -0.5])

    def test_support_matches_vertex_enumeration(self):
        rng = np.random.default_rng(11)
        for _ in range(25):
            dim = int(rng.integers(1, 4))
            g = int(rng.integers(1, 6))
            z = Zonotope(rng.normal(size=dim), rng.normal(size=(g, dim)))
            v = zonotope_to_vpolytope(z)
            for _ in range(5):
                d = rng.normal(size=dim)
                assert z.support(d) == pytest.approx(float(np.max(v.vertices @ d)), abs=1e-9)

    def test_to_vpolytope_sign_enumeration(self):
        z = Zonotope([0.0, 0.0], [[1.0, 0.0], [0.0, 1.0]])
        v = zonotope_to_vpolytope(z)
        assert {tuple(p) for p in v.vertices} == {(-1, -1), (-1, 1), (1, -1), (1, 1)}

    def test_reduction_budgets_and_nesting(self):
        rng = np.random.default_rng(13)
        for _ in range(20):
            dim = int(rng.integers(1, 4))
            g = int(rng.integers(dim + 1, 9))
            z = Zonotope(rng.normal(size=dim), rng.normal(size=(g, dim)))
            for order in (1.0, 1.5, 2.0):
                over = reduce_over(z, order)
                under = reduce_under(z, order)
                budget = int(np.floor(order * dim))
                assert over.ngens <= budget and under.ngens <= budget
                for _ in range(8):
                    d = rng.normal(size=dim)
                    assert over.support(d) >= z.support(d) - 1e-9
                    assert under.support(d) <= z.support(d) + 1e-9

    def test_bounding_box_zonotope(self):
        v = VPolytope(np.array([[0.0, 0], [2, 1], [1, 3]]))
        z = vpolytope_to_zonotope_box(v)
        lo, hi = z.interval_hull()
        vlo, vhi = v.bounding_box()
        assert np.allclose(lo, vlo) and np.allclose(hi, vhi)

    def test_interval_hull_points(self):
        lo, hi = interval_hull_points(np.array([[0.0, 5], [2, -1]]))
        assert np.allclose(lo, [0, -1]) and np.allclose(hi, [2, 5])
