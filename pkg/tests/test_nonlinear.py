"""Expression trees and the sampled nonlinear falsifier.

The falsifier can only ever answer FAILS or UNKNOWN, so the tests lean on
two cross-checks: wrapping a linear plant and comparing against the exact
engine (cloud points must land inside the exact output sets, and a sampled
FAILS must imply an exact FAILS once delta clears the cloud resolution),
and bitwise provenance replay as the determinism oracle.
"""

import numpy as np
import pytest

from opaquereach.expr import Expr, ExprError, linear_exprs, parse_expr, parse_vector
from opaquereach.geometry import GeometryError, VPolytope, Zonotope, vertex_hull_distances
from opaquereach.nonlinear import (NlSystem, SampleCloud, merge_clouds, nl_falsify,
                                   nl_reach_samples)
from opaquereach.opacity import Status, check_strong_k_iso, output_reach
from opaquereach.system import InputSet, LtiSystem, Scenario

pytestmark = pytest.mark.filterwarnings(
    "ignore:secret and nonsecret initial sets overlap")


def logistic(a=3.5):
    f = [{"op": "add", "args": [
        {"op": "mul", "args": [{"const": a}, {"x": 0},
                               {"op": "sub", "args": [{"const": 1.0}, {"x": 0}]}]},
        {"u": 0}]}]
    return NlSystem.from_expressions(1, 1, 1, f, [{"x": 0}])


def square_readout():
    # identity dynamics, y = x^2
    return NlSystem.from_expressions(
        1, 1, 1, [{"x": 0}],
        [{"op": "pow", "args": [{"x": 0}, {"const": 2.0}]}])


def atm_linear():
    return LtiSystem([[1.0, 1.0], [0.0, 1.0]], [[0.5], [1.0]], [[1.0, 0.0]])


def random_linear_instance(rng, separated):
    n = int(rng.integers(1, 3))
    m = int(rng.integers(1, 3))
    p = int(rng.integers(1, n + 1))
    sys = LtiSystem(rng.uniform(-1, 1, (n, n)), rng.uniform(-1, 1, (n, m)),
                    rng.uniform(-1, 1, (p, n)))
    lo = rng.uniform(-1, 0, n)
    hi = lo + rng.uniform(0.2, 1.0, n)
    if separated:
        shift = rng.uniform(4.0, 6.0, n) * rng.choice([-1.0, 1.0], n)
        secret = VPolytope.from_box(lo + shift, hi + shift)
    else:
        pad = (hi - lo) * rng.uniform(0.05, 0.3, n)
        secret = VPolytope.from_box(lo + pad, hi - pad * 0.5)
    nonsecret = VPolytope.from_box(lo, hi)
    u_hi = rng.uniform(0.1, 0.5, m)
    sc = Scenario(sys, secret, nonsecret, InputSet.box(-u_hi, u_hi),
                  (int(rng.integers(1, 4)),))
    return sc


class TestExpr:

    def test_arithmetic_tree(self):
        # ((x0 - u0) * 2)^2 / 4
        tree = {"op": "div", "args": [
            {"op": "pow", "args": [
                {"op": "mul", "args": [
                    {"op": "sub", "args": [{"x": 0}, {"u": 0}]},
                    {"const": 2.0}]},
                {"const": 2.0}]},
            {"const": 4.0}]}
        e = parse_expr(tree)
        x = np.array([[1.0], [3.0], [-2.0]])
        u = np.array([[0.5], [1.0], [0.0]])
        np.testing.assert_allclose(e.eval(x, u), ((x[:, 0] - u[:, 0]) * 2) ** 2 / 4)

    def test_variadic_and_neg(self):
        e = parse_expr({"op": "add", "args": [
            {"const": 1.0}, {"x": 0}, {"op": "neg", "args": [{"x": 1}]},
            {"op": "mul", "args": [{"const": 2.0}, {"x": 0}, {"x": 1}]}]})
        x = np.array([[2.0, 3.0]])
        assert e.eval(x)[0] == pytest.approx(1 + 2 - 3 + 12)

    def test_batch_matches_scalar_rows(self):
        e = parse_expr({"op": "sub", "args": [
            {"op": "pow", "args": [{"x": 0}, {"const": 3.0}]},
            {"op": "div", "args": [{"u": 0}, {"const": 2.0}]}]})
        rng = np.random.default_rng(5)
        x = rng.normal(size=(40, 1))
        u = rng.normal(size=(40, 1))
        batch = e.eval(x, u)
        rows = np.array([e.eval(x[i:i + 1], u[i:i + 1])[0] for i in range(40)])
        assert np.array_equal(batch, rows)

    def test_linear_exprs_match_matrices(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            n, m = int(rng.integers(1, 4)), int(rng.integers(1, 3))
            a = np.round(rng.uniform(-2, 2, (n, n)), 2)
            b = np.round(rng.uniform(-2, 2, (n, m)), 2)
            exprs = linear_exprs(a, b)
            x = rng.normal(size=(7, n))
            u = rng.normal(size=(7, m))
            got = np.stack([e.eval(x, u) for e in exprs], axis=1)
            np.testing.assert_allclose(got, x @ a.T + u @ b.T, atol=1e-12)

    def test_zero_row_becomes_constant(self):
        (e,) = linear_exprs(np.zeros((1, 2)))
        assert e.kind == "const" and e.eval(np.ones((3, 2)))[0] == 0.0

    def test_max_indices(self):
        e = parse_expr({"op": "add", "args": [{"x": 2}, {"u": 1}, {"const": 1.0}]})
        assert e.max_indices() == (2, 1)
        assert parse_expr({"const": 4}).max_indices() == (-1, -1)

    @pytest.mark.parametrize("tree,fragment", [
        ({"op": "exp", "args": [{"x": 0}]}, "unknown operation"),
        ({"op": "neg", "args": [{"x": 0}, {"x": 1}]}, "exactly 1"),
        ({"op": "sub", "args": [{"x": 0}]}, "exactly 2"),
        ({"op": "add", "args": [{"x": 0}]}, "at least 2"),
        ({"op": "add", "args": "nope"}, "must be a list"),
        ({"const": "three"}, "not a number"),
        ({"x": -1}, "integer >= 0"),
        ({"x": True}, "integer >= 0"),
        ({"x": 0, "u": 1}, "expected one of"),
        ([1, 2], "JSON objects"),
    ])
    def test_parse_errors(self, tree, fragment):
        with pytest.raises(ExprError, match=fragment):
            parse_expr(tree, "f")

    def test_error_names_the_path(self):
        bad = {"op": "add", "args": [{"x": 0}, {"op": "zap", "args": []}]}
        with pytest.raises(ExprError, match=r"f\.args\[1\]\.op"):
            parse_expr(bad, "f")

    def test_parse_vector(self):
        v = parse_vector([{"x": 0}, {"const": 2.0}])
        assert len(v) == 2 and all(isinstance(e, Expr) for e in v)
        with pytest.raises(ExprError, match="nonempty list"):
            parse_vector([])

    def test_u_needs_controls(self):
        e = parse_expr({"u": 0})
        with pytest.raises(ExprError, match="no controls"):
            e.eval(np.zeros((1, 1)))


class TestNlSystem:

    def test_expression_plant_steps(self):
        sys = logistic()
        x = np.array([[0.2], [0.5]])
        u = np.zeros((2, 1))
        np.testing.assert_allclose(sys.step(x, u)[:, 0], [0.56, 0.875])
        np.testing.assert_allclose(sys.output(x), x)

    def test_nonzero_origin_output_warns(self):
        with pytest.warns(UserWarning, match=r"output\(0\) != 0"):
            NlSystem.from_expressions(
                1, 1, 1, [{"x": 0}],
                [{"op": "add", "args": [{"x": 0}, {"const": 1.0}]}])

    def test_shape_probes(self):
        with pytest.raises(GeometryError, match="step must map"):
            NlSystem(2, 1, 1, lambda x, u: x[:, :1], lambda x: x[:, :1])
        with pytest.raises(GeometryError, match="output must map"):
            NlSystem(2, 1, 2, lambda x, u: x, lambda x: x[:, :1])
        with pytest.raises(GeometryError, match="positive dimension"):
            NlSystem(0, 1, 1, lambda x, u: x, lambda x: x)

    def test_expression_dimension_checks(self):
        with pytest.raises(GeometryError, match="references x_2"):
            NlSystem.from_expressions(1, 1, 1, [{"x": 2}], [{"x": 0}])
        with pytest.raises(GeometryError, match="references u_1"):
            NlSystem.from_expressions(1, 1, 1, [{"u": 1}], [{"x": 0}])
        with pytest.raises(GeometryError, match="state only"):
            NlSystem.from_expressions(1, 1, 1, [{"x": 0}], [{"u": 0}])
        with pytest.raises(GeometryError, match="component expressions"):
            NlSystem.from_expressions(2, 1, 1, [{"x": 0}], [{"x": 0}])

    def test_from_linear_matches_simulation(self):
        rng = np.random.default_rng(3)
        lin = LtiSystem(rng.uniform(-1, 1, (2, 2)), rng.uniform(-1, 1, (2, 1)),
                        rng.uniform(-1, 1, (1, 2)))
        sys = NlSystem.from_linear(lin)
        x = rng.normal(size=(5, 2))
        u = rng.normal(size=(5, 1))
        np.testing.assert_allclose(sys.step(x, u), x @ lin.a.T + u @ lin.b.T, atol=1e-12)
        np.testing.assert_allclose(sys.output(x), x @ lin.c.T, atol=1e-12)


class TestReachSamples:

    def test_identity_plant_cloud_is_gridded_output(self):
        sys = NlSystem.from_expressions(2, 1, 2, [{"x": 0}, {"x": 1}],
                                        [{"x": 0}, {"x": 1}])
        cloud = nl_reach_samples(sys, VPolytope.from_box([0.0, 0.0], [1.0, 2.0]),
                                 VPolytope.singleton([0.0]), 2, grid=3)
        want = {(a, b) for a in (0.0, 0.5, 1.0) for b in (0.0, 1.0, 2.0)}
        assert {tuple(p) for p in cloud.points} == want
        assert np.array_equal(cloud.points, cloud.x0)

    def test_control_sequences_enumerate_product(self):
        sys = NlSystem.from_expressions(1, 1, 1,
                                        [{"op": "add", "args": [{"x": 0}, {"u": 0}]}],
                                        [{"x": 0}])
        cloud = nl_reach_samples(sys, VPolytope.singleton([0.0]),
                                 VPolytope.from_box([-1.0], [1.0]), 2, grid=2)
        assert sorted(cloud.points[:, 0]) == [-2.0, 0.0, 0.0, 2.0]
        assert cloud.controls.shape == (4, 2, 1)

    def test_linear_cloud_inside_exact_output_set(self):
        rng = np.random.default_rng(21)
        for _ in range(20):
            sc = random_linear_instance(rng, separated=bool(rng.integers(0, 2)))
            k = sc.schedule[0]
            sys = NlSystem.from_linear(sc.sys)
            for role in ("secret", "nonsecret"):
                cloud = nl_reach_samples(sys, getattr(sc, role), sc.inputs, k, grid=3)
                hull, _ = _output_hull(sc, k, role)
                gaps = vertex_hull_distances(VPolytope(cloud.points), hull)
                assert gaps.max() <= 1e-7

    def test_cloud_is_deterministic(self):
        sys = logistic()
        x0 = VPolytope.from_box([0.1], [0.9])
        u = VPolytope.from_box([-0.05], [0.05])
        a = nl_reach_samples(sys, x0, u, 3, grid=4)
        b = nl_reach_samples(sys, x0, u, 3, grid=4)
        assert np.array_equal(a.points, b.points)
        assert np.array_equal(a.controls, b.controls)

    def test_logistic_orbit_value(self):
        sys = logistic()
        cloud = nl_reach_samples(sys, VPolytope.singleton([0.2]),
                                 VPolytope.singleton([0.0]), 3, grid=2)
        assert len(cloud) == 1
        assert cloud.points[0, 0] == pytest.approx(0.41533184, abs=1e-12)

    def test_provenance_replay_is_bitwise(self):
        sys = logistic()
        cloud = nl_reach_samples(sys, VPolytope.from_box([0.1], [0.8]),
                                 VPolytope.from_box([-0.1], [0.1]), 3, grid=3)
        for i in range(len(cloud)):
            assert np.array_equal(cloud.replay(sys, i), cloud.points[i])

    def test_cap_refused_with_hint(self):
        sys = logistic()
        with pytest.raises(GeometryError, match="coarser grid"):
            nl_reach_samples(sys, VPolytope.from_box([0.0], [1.0]),
                             VPolytope.from_box([-1.0], [1.0]), 3, grid=9, cap=100)

    def test_grid_validation(self):
        sys = logistic()
        box = VPolytope.from_box([0.0], [1.0])
        with pytest.raises(GeometryError, match="at least 2"):
            nl_reach_samples(sys, box, box, 1, grid=1)
        with pytest.raises(GeometryError, match="pair"):
            nl_reach_samples(sys, box, box, 1, grid=(2, 2, 2))
        with pytest.raises(GeometryError, match="integer times"):
            nl_reach_samples(sys, box, box, 0)

    def test_non_box_initial_set_stays_inside(self):
        sys = NlSystem.from_expressions(2, 1, 2, [{"x": 0}, {"x": 1}],
                                        [{"x": 0}, {"x": 1}])
        tri = VPolytope(np.array([[0.0, 0.0], [2.0, 0.0], [0.0, 2.0]]))
        cloud = nl_reach_samples(sys, tri, VPolytope.singleton([0.0]), 1, grid=5)
        gaps = vertex_hull_distances(VPolytope(cloud.x0), tri)
        assert gaps.max() <= 1e-9
        # the lattice corner (2, 2) must have been filtered out
        assert not any(np.allclose(p, [2.0, 2.0]) for p in cloud.x0)

    def test_thin_set_falls_back_to_vertices(self):
        # a diamond misses all four bounding-box corners at grid 2
        sys = NlSystem.from_expressions(2, 1, 2, [{"x": 0}, {"x": 1}],
                                        [{"x": 0}, {"x": 1}])
        diamond = VPolytope(np.array([[0.5, 0.0], [0.0, 0.25],
                                      [0.5, 0.5], [1.0, 0.25]]))
        cloud = nl_reach_samples(sys, diamond, VPolytope.singleton([0.0]), 1, grid=2)
        assert {tuple(p) for p in cloud.x0} == {(0.5, 0.0), (0.0, 0.25),
                                               (0.5, 0.5), (1.0, 0.25)}

    def test_set_coercions(self):
        sys = logistic()
        z = Zonotope(np.array([0.5]), np.array([[0.1]]))
        c1 = nl_reach_samples(sys, z, InputSet.singleton([0.0]), 1, grid=2)
        c2 = nl_reach_samples(sys, np.array([[0.4], [0.6]]),
                              VPolytope.singleton([0.0]), 1, grid=2)
        assert np.array_equal(np.sort(c1.points, 0), np.sort(c2.points, 0))
        with pytest.raises(GeometryError, match="dimension"):
            nl_reach_samples(sys, VPolytope.from_box([0, 0], [1, 1]),
                             VPolytope.singleton([0.0]), 1)

    def test_merge_sorts_and_dedups(self):
        sys = logistic()
        u = VPolytope.singleton([0.0])
        a = nl_reach_samples(sys, VPolytope.singleton([0.7]), u, 2, grid=2)
        b = nl_reach_samples(sys, VPolytope.singleton([0.3]), u, 2, grid=2)
        m = merge_clouds(a, b, a)
        assert len(m) == 2
        assert m.x0[0, 0] == 0.3 and m.x0[1, 0] == 0.7
        with pytest.raises(GeometryError, match="different horizons"):
            merge_clouds(a, nl_reach_samples(sys, VPolytope.singleton([0.7]), u, 1))

    def test_cloud_validation(self):
        with pytest.raises(GeometryError, match="sample count"):
            SampleCloud(np.zeros((2, 1)), np.zeros((3, 1)), np.zeros((2, 1, 1)), 1)
        with pytest.raises(GeometryError, match=r"\(N, k, m\)"):
            SampleCloud(np.zeros((2, 1)), np.zeros((2, 1)), np.zeros((2, 1)), 1)
        with pytest.raises(GeometryError, match="horizon"):
            SampleCloud(np.zeros((2, 1)), np.zeros((2, 1)), np.zeros((2, 3, 1)), 2)


def _output_hull(sc, k, role):
    from opaquereach.opacity import _as_vpoly
    return _as_vpoly(output_reach(sc, k, role), sc.tol)


class TestFalsify:

    def test_atm_separation(self):
        sys = NlSystem.from_linear(atm_linear())
        v = nl_falsify(sys, VPolytope.singleton([0.0, 1.0]),
                       VPolytope.singleton([10.0, 1.0]),
                       VPolytope.singleton([0.0]), 3, delta=1.0)
        assert v.status is Status.FAILS
        assert v.distance == pytest.approx(10.0, abs=1e-9)
        assert v.witness.output[0] == pytest.approx(3.0)
        assert v.witness.nearest[0] == pytest.approx(13.0)
        np.testing.assert_allclose(v.witness.trajectory.x0, [0.0, 1.0])
        assert v.witness.trajectory.controls.shape == (3, 1)

    def test_square_readout_disjoint_ranges(self):
        sys = square_readout()
        v = nl_falsify(sys, VPolytope.from_box([2.0], [3.0]),
                       VPolytope.from_box([0.0], [1.0]),
                       VPolytope.singleton([0.0]), 2, delta=1.0, grid=5)
        assert v.status is Status.FAILS
        # worst secret sample is 3^2 = 9 against nearest nonsecret 1^2 = 1
        assert v.distance == pytest.approx(8.0, abs=1e-9)

    def test_identical_sets_unknown(self):
        sys = square_readout()
        box = VPolytope.from_box([0.0], [1.0])
        v = nl_falsify(sys, box, box, VPolytope.singleton([0.0]), 2,
                       delta=0.5, grid=4)
        assert v.status is Status.UNKNOWN
        assert "dispersion" in v.note
        assert v.distance == 0.0

    def test_delta_validation(self):
        sys = square_readout()
        box = VPolytope.from_box([0.0], [1.0])
        for bad in (0.0, -1.0, float("nan")):
            with pytest.raises(GeometryError, match="positive"):
                nl_falsify(sys, box, box, box, 1, delta=bad)

    def test_never_holds(self):
        rng = np.random.default_rng(17)
        seen = set()
        for _ in range(20):
            sc = random_linear_instance(rng, separated=bool(rng.integers(0, 2)))
            sys = NlSystem.from_linear(sc.sys)
            v = nl_falsify(sys, sc.secret, sc.nonsecret, sc.inputs, sc.schedule[0],
                           delta=float(rng.uniform(0.1, 2.0)), grid=3)
            seen.add(v.status)
        assert Status.HOLDS not in seen
        assert seen == {Status.FAILS, Status.UNKNOWN}

    def test_linear_consistency(self):
        # with delta above the provable covering radius of the nonsecret
        # cloud, a sampled FAILS can only come from a genuine exact FAILS
        rng = np.random.default_rng(29)
        fails_agree = 0
        for _ in range(40):
            sc = random_linear_instance(rng, separated=bool(rng.integers(0, 2)))
            k = sc.schedule[0]
            sys = NlSystem.from_linear(sc.sys)
            delta = _covering_bound(sc, k, grid=3) + 1e-8
            v = nl_falsify(sys, sc.secret, sc.nonsecret, sc.inputs, k,
                           delta=delta, grid=3)
            if v.status is Status.FAILS:
                exact = check_strong_k_iso(sc, k)
                assert exact.status is Status.FAILS
                fails_agree += 1
        assert fails_agree >= 10

    def test_refining_nonsecret_grid_keeps_unknown(self):
        # a nested refinement only adds nonsecret samples, so distances
        # cannot grow and an UNKNOWN cannot flip to FAILS
        rng = np.random.default_rng(41)
        checked = 0
        for _ in range(25):
            sc = random_linear_instance(rng, separated=False)
            k = sc.schedule[0]
            sys = NlSystem.from_linear(sc.sys)
            coarse = nl_falsify(sys, sc.secret, sc.nonsecret, sc.inputs, k,
                                delta=1.0, grid=3)
            if coarse.status is not Status.UNKNOWN:
                continue
            fine = nl_falsify(sys, sc.secret, sc.nonsecret, sc.inputs, k,
                              delta=1.0, grid=3, grid_nonsecret=5)
            assert fine.status is Status.UNKNOWN
            assert fine.distance <= coarse.distance + 1e-9
            checked += 1
        assert checked >= 10

    def test_falsify_verdict_is_deterministic(self):
        sys = logistic()
        args = (VPolytope.from_box([0.6], [0.9]), VPolytope.from_box([0.1], [0.4]),
                VPolytope.from_box([-0.05], [0.05]), 3)
        a = nl_falsify(sys, *args, delta=0.05, grid=3)
        b = nl_falsify(sys, *args, delta=0.05, grid=3)
        assert a.status == b.status and a.distance == b.distance
        assert a.note == b.note


def _half_cells(verts, g):
    w = verts.max(axis=0) - verts.min(axis=0)
    return np.where(w <= 1e-9, 0.0, w / (g - 1)) / 2.0


def _covering_bound(sc, k, grid):
    """Provable covering radius of the gridded nonsecret output cloud.

    Rounding each box coordinate to its nearest lattice point moves it by
    at most half a cell, and the output map is linear, so every point of
    the exact output hull lies within this bound of some cloud sample.
    Only valid for box-shaped sets, where the lattice is not filtered.
    """
    hx = np.linalg.norm(_half_cells(sc.nonsecret.vertices, grid))
    hu = np.linalg.norm(_half_cells(sc.inputs.vertices(), grid))
    c = sc.sys.c
    bound = np.linalg.norm(c @ sc.sys.power(k), 2) * hx
    for term in sc.sys.input_terms(k):
        bound += np.linalg.norm(c @ term, 2) * hu
    return float(bound)
