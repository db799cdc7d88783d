"""Verdict engine for initial-state opacity of linear plants.

An outside observer sees outputs only.  A secret initial state stays hidden
at time k when every output it can produce is also producible from some
nonsecret initial state; that is the strong notion, decided by the inclusion
C X_s(k) subseteq C X_ns(k) of output reach sets.  The weak notion only asks
that the two output sets share a point.  Both reduce to convex queries on
reach sets, so verdicts come with concrete trajectories: a violating secret
run for FAILS, matching secret/nonsecret run pairs for HOLDS.

The backward-set conditions, secret pruning, and the algebra of unions and
intersections of initial sets live here too.  Pruning and the second
backward condition quantify over ALL admissible controls, so they use the
erosion preset (pre0_output_robust); existence-style conditions use the
Minkowski preset (pre0_output).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .geometry import (DEFAULT_TOL, GeometryError, HPolytope, Tolerances,
                       UnsupportedDimension, VPolytope, Zonotope,
                       convex_hull_h, gjk_closest, hpoly_to_vpolytope,
                       hull_contains, hulls_equal, hulls_intersect,
                       lp_feasible_in_hull, vertex_hull_distances,
                       zonotope_to_vpolytope)
from .system import (InputSet, LtiSystem, ReachSet, Scenario, output_set,
                     pre0_output, pre0_output_robust, reach_exact, simulate)

__all__ = [
    "Status", "Trajectory", "FailureWitness", "MatchCertificate", "Verdict",
    "ScheduleVerdict", "Pre0Report", "LawReport", "UnsalvageableSecretError",
    "output_reach", "check_strong_k_iso", "check_weak_k_iso", "check_K_iso",
    "k_step_schedule", "check_pre0_conditions", "prune_secret",
    "set_algebra_suite", "counterexample_nonsecret_union",
    "counterexample_union_weak", "counterexample_intersection_reach",
]


class Status(str, Enum):
    HOLDS = "HOLDS"
    FAILS = "FAILS"
    UNKNOWN = "UNKNOWN"


class UnsalvageableSecretError(GeometryError):
    """The secret and nonsecret output sets share no point at time k, so no
    subset of the secret can be explained away."""


@dataclass(frozen=True)
class Trajectory:
    """An initial state with the control sequence applied to it."""

    x0: np.ndarray
    controls: np.ndarray

    def replay(self, sys: LtiSystem):
        return simulate(sys, self.x0, self.controls)


@dataclass(frozen=True)
class FailureWitness:
    """A secret output no nonsecret run can produce.

    output is the offending point, distance its gap to the nonsecret output
    set, nearest the closest nonsecret output, and trajectory (when vertex
    provenance is available) a concrete secret run ending at output.
    """

    output: np.ndarray
    distance: float
    nearest: np.ndarray | None = None
    trajectory: Trajectory | None = None


@dataclass(frozen=True)
class MatchCertificate:
    """A secret output together with a nonsecret run reproducing it."""

    output: np.ndarray
    nonsecret: Trajectory
    secret: Trajectory | None = None
    residual: float = 0.0


@dataclass(frozen=True)
class Verdict:
    status: Status
    mode: str
    k: int
    distance: float | None = None
    witness: FailureWitness | None = None
    certificates: tuple = ()
    note: str = ""

    def __bool__(self):
        return self.status is Status.HOLDS


@dataclass(frozen=True)
class ScheduleVerdict:
    """Per-time verdicts over a schedule plus their aggregate."""

    mode: str
    per_k: dict
    status: Status
    first_failure: int | None = None


@dataclass(frozen=True)
class Pre0Report:
    """The two backward-set conditions equivalent to the strong check.

    cond1: some nonsecret initial state can produce a secret-feasible output
    (decided on the Minkowski preset of the secret output hull).
    cond2: every secret initial state keeps its output nonsecret-feasible
    under every admissible control (decided on the erosion preset of the
    nonsecret output hull).  The conjunction must agree with
    check_strong_k_iso.
    """

    cond1: bool
    cond2: bool
    k: int
    cond1_point: np.ndarray | None = None
    cond2_witness: np.ndarray | None = None

    @property
    def status(self):
        return Status.HOLDS if (self.cond1 and self.cond2) else Status.FAILS


@dataclass(frozen=True)
class LawReport:
    name: str
    law: str
    holds: bool
    cases: int
    detail: str = ""


def _check_horizon(k):
    kk = int(k)
    if kk != k or kk < 1:
        raise GeometryError(f"opacity is judged at integer times >= 1, got {k!r}")
    return kk


def _initial_set(sc, role):
    return sc.secret if role == "secret" else sc.nonsecret


def output_reach(sc: Scenario, k, role, vertex_cap=200_000) -> ReachSet:
    """Exact output reach set of one role at time k."""
    r = reach_exact(sc.sys, _initial_set(sc, role), sc.inputs_for(role), k,
                    sc.tol, vertex_cap=vertex_cap)
    return output_set(sc.sys, r, sc.tol)


def _as_vpoly(rs: ReachSet, tol):
    if isinstance(rs.set, Zonotope):
        return zonotope_to_vpolytope(rs.set, tol), None
    return rs.set, rs.provenance


def _combo_trajectory(weights, prov, horizon, m):
    if prov is None:
        return None
    w = np.asarray(weights, dtype=float)
    x0 = w @ prov.x0
    if prov.controls.shape[1] == 0:
        return Trajectory(x0, np.zeros((horizon, m)))
    return Trajectory(x0, np.einsum("i,ikm->km", w, prov.controls))


def check_strong_k_iso(sc: Scenario, k, certificates=True,
                       vertex_cap=200_000) -> Verdict:
    """HOLDS iff every output of a secret run at time k has a nonsecret
    explanation, decided by inclusion of output reach sets.

    FAILS carries the secret output vertex with the largest distance to the
    nonsecret output set, plus the secret run reaching it.  HOLDS carries,
    for each secret output vertex, a nonsecret run reproducing it; convexity
    extends those certificates to every interior output.  UNKNOWN appears
    only if a reach set had to degrade to an over-approximation.
    """
    k = _check_horizon(k)
    out_s = output_reach(sc, k, "secret", vertex_cap)
    out_ns = output_reach(sc, k, "nonsecret", vertex_cap)
    ps, prov_s = _as_vpoly(out_s, sc.tol)
    pns, prov_ns = _as_vpoly(out_ns, sc.tol)
    dists = vertex_hull_distances(ps, pns, sc.tol)
    worst = int(np.argmax(dists))
    dmax = float(dists[worst])
    eps = sc.tol.geom_eps
    if dmax > eps:
        if out_s.fidelity == "exact":
            _, _, cq, _, _ = gjk_closest(VPolytope.singleton(ps.vertices[worst]),
                                         pns, sc.tol)
            traj = None
            if prov_s is not None:
                traj = Trajectory(prov_s.x0[worst], prov_s.controls[worst])
            wit = FailureWitness(ps.vertices[worst], dmax, cq, traj)
            return Verdict(Status.FAILS, "strong", k, dmax, wit)
        return Verdict(Status.UNKNOWN, "strong", k, dmax,
                       note="secret reach degraded to an over-approximation; "
                            "the violation may be an artifact")
    if out_ns.fidelity != "exact":
        return Verdict(Status.UNKNOWN, "strong", k, dmax,
                       note="nonsecret reach degraded to an over-approximation; "
                            "inclusion in it proves nothing")
    certs = ()
    if certificates:
        certs = tuple(_strong_certificates(sc, k, ps, prov_s, pns, prov_ns))
    return Verdict(Status.HOLDS, "strong", k, dmax, certificates=certs)


def _strong_certificates(sc, k, ps, prov_s, pns, prov_ns):
    m = sc.sys.m
    for i in range(ps.nv):
        d, _, cq, _, wq = gjk_closest(VPolytope.singleton(ps.vertices[i]),
                                      pns, sc.tol)
        sec = None
        if prov_s is not None:
            sec = Trajectory(prov_s.x0[i], prov_s.controls[i])
        yield MatchCertificate(ps.vertices[i],
                               _combo_trajectory(wq, prov_ns, k, m),
                               sec, float(d))


def check_weak_k_iso(sc: Scenario, k, vertex_cap=200_000) -> Verdict:
    """HOLDS iff some output at time k is producible by both roles.

    HOLDS carries one secret and one nonsecret run meeting at a common
    output; FAILS carries the separating distance and the closest secret
    output.  A FAILS on over-approximated sets is still sound (shrinking the
    sets cannot create an intersection), so only a sound HOLDS can degrade
    to UNKNOWN here.
    """
    k = _check_horizon(k)
    out_s = output_reach(sc, k, "secret", vertex_cap)
    out_ns = output_reach(sc, k, "nonsecret", vertex_cap)
    ps, prov_s = _as_vpoly(out_s, sc.tol)
    pns, prov_ns = _as_vpoly(out_ns, sc.tol)
    d, cp, cq, wp, wq = gjk_closest(ps, pns, sc.tol)
    if d > sc.tol.geom_eps:
        wit = FailureWitness(cp, float(d), cq,
                             _combo_trajectory(wp, prov_s, k, sc.sys.m))
        return Verdict(Status.FAILS, "weak", k, float(d), wit)
    if out_s.fidelity != "exact" or out_ns.fidelity != "exact":
        return Verdict(Status.UNKNOWN, "weak", k, float(d),
                       note="intersection found on over-approximated sets only")
    cert = MatchCertificate(0.5 * (cp + cq),
                            _combo_trajectory(wq, prov_ns, k, sc.sys.m),
                            _combo_trajectory(wp, prov_s, k, sc.sys.m),
                            float(d))
    return Verdict(Status.HOLDS, "weak", k, float(d), certificates=(cert,))


_CHECKERS = {"strong": check_strong_k_iso, "weak": check_weak_k_iso}


def check_K_iso(sc: Scenario, mode="strong", **kw) -> ScheduleVerdict:
    """Run one check at every time in the schedule; HOLDS iff all do."""
    try:
        checker = _CHECKERS[mode]
    except KeyError:
        raise GeometryError(f"unknown mode {mode!r}") from None
    per_k = {k: checker(sc, k, **kw) for k in sc.schedule}
    statuses = [v.status for v in per_k.values()]
    first_failure = next((k for k in sc.schedule
                          if per_k[k].status is Status.FAILS), None)
    if first_failure is not None:
        agg = Status.FAILS
    elif any(s is Status.UNKNOWN for s in statuses):
        agg = Status.UNKNOWN
    else:
        agg = Status.HOLDS
    return ScheduleVerdict(mode, per_k, agg, first_failure)


def k_step_schedule(final, depth):
    """The schedule {final-depth+1, ..., final}: secrecy of the last `depth`
    steps judged at time `final`."""
    final, depth = int(final), int(depth)
    if depth < 1 or depth > final:
        raise GeometryError("need 1 <= depth <= final")
    return tuple(range(final - depth + 1, final + 1))


def _output_hull(sc, k, role, vertex_cap):
    if sc.sys.p > 3:
        raise UnsupportedDimension(
            "backward-set conditions need output hulls, available for "
            "output dimension <= 3 only")
    ps, _ = _as_vpoly(output_reach(sc, k, role, vertex_cap), sc.tol)
    return ps, convex_hull_h(ps.vertices, sc.tol)


def check_pre0_conditions(sc: Scenario, k, vertex_cap=200_000) -> Pre0Report:
    """Decide the two backward-set conditions at time k.

    Both are evaluated on exact output hulls, so output dimension <= 3.
    """
    k = _check_horizon(k)
    _, hull_s = _output_hull(sc, k, "secret", vertex_cap)
    _, hull_ns = _output_hull(sc, k, "nonsecret", vertex_cap)
    pre1 = pre0_output(sc.sys, hull_s, sc.inputs_for("nonsecret"), k, sc.tol)
    point = lp_feasible_in_hull(pre1, sc.nonsecret, sc.tol)
    pre2 = pre0_output_robust(sc.sys, hull_ns, sc.inputs_for("secret"), k,
                              sc.tol)
    scale = max(1.0, float(np.abs(pre2.offsets).max()) if pre2.nrows else 1.0)
    viol = pre2.violation(sc.secret.vertices)
    worst = int(np.argmax(viol))
    cond2 = bool(viol[worst] <= 10.0 * sc.tol.geom_eps * scale)
    return Pre0Report(point is not None, cond2, k,
                      cond1_point=point,
                      cond2_witness=None if cond2 else sc.secret.vertices[worst])


def prune_secret(sc: Scenario, k, vertex_cap=200_000) -> HPolytope:
    """Largest subset of the secret hull that stays explainable at time k.

    Intersects the secret hull with the erosion preset of CX_s(k) n
    CX_ns(k): from any remaining initial state, every admissible control
    yields an output the nonsecret side can also produce.  Raises
    UnsalvageableSecretError when the output sets share no point at all.
    Requires state and output dimension <= 3 (hull constructions).
    """
    k = _check_horizon(k)
    ps, hull_s = _output_hull(sc, k, "secret", vertex_cap)
    pns, hull_ns = _output_hull(sc, k, "nonsecret", vertex_cap)
    if not hulls_intersect(ps, pns, sc.tol):
        raise UnsalvageableSecretError(
            f"secret and nonsecret outputs are disjoint at k={k}; "
            "no pruning can hide the secret")
    pre = pre0_output_robust(sc.sys, hull_s.intersect(hull_ns),
                             sc.inputs_for("secret"), k, sc.tol)
    return convex_hull_h(sc.secret.vertices, sc.tol).intersect(pre)


# --- algebra of unions and intersections of initial sets ------------------

def _with_secret(sc, verts, tol=None):
    # derived families may overlap the nonsecret set; that is the point of
    # several laws, so the overlap warning is muted here
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return Scenario(sc.sys, VPolytope(verts), sc.nonsecret, sc.inputs,
                        sc.schedule, tol or sc.tol, sc.inputs_nonsecret)


def _with_nonsecret(sc, verts):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return Scenario(sc.sys, sc.secret, VPolytope(verts), sc.inputs,
                        sc.schedule, sc.tol, sc.inputs_nonsecret)


def _split_secret(sc):
    """Two overlapping parts whose union is the secret vertex set."""
    v = sc.secret.vertices
    if v.shape[0] < 2:
        return v, v
    mid = (v.shape[0] + 1) // 2
    centroid = v.mean(axis=0, keepdims=True)
    return np.vstack([v[:mid], centroid]), np.vstack([v[mid:], centroid])


def _law_union_reach(scs, tol):
    ok, cases = True, 0
    for sc in scs:
        k = sc.schedule[0]
        merged = np.vstack([sc.secret.vertices, sc.nonsecret.vertices])
        whole = reach_exact(sc.sys, VPolytope(merged), sc.inputs, k, tol)
        parts = [reach_exact(sc.sys, s, sc.inputs, k, tol).set.vertices
                 for s in (sc.secret, sc.nonsecret)]
        ok &= hulls_equal(whole.set, VPolytope(np.vstack(parts)), tol)
        cases += 1
    return LawReport("union-reach", "reach of a union is the union of the "
                     "reaches", ok, cases)


def _law_union_output(scs, tol):
    ok, cases = True, 0
    for sc in scs:
        k = sc.schedule[0]
        merged = np.vstack([sc.secret.vertices, sc.nonsecret.vertices])
        whole = output_set(sc.sys, reach_exact(sc.sys, VPolytope(merged),
                                               sc.inputs, k, tol), tol)
        parts = [output_set(sc.sys, reach_exact(sc.sys, s, sc.inputs, k, tol),
                            tol).set.vertices
                 for s in (sc.secret, sc.nonsecret)]
        ok &= hulls_equal(whole.set, VPolytope(np.vstack(parts)), tol)
        cases += 1
    return LawReport("union-output", "the output map distributes over unions "
                     "of initial sets", ok, cases)


def _law_union_secret_strong(scs, tol):
    ok, cases = True, 0
    for sc in scs:
        k = sc.schedule[0]
        s1, s2 = _split_secret(sc)
        whole = check_strong_k_iso(sc, k, certificates=False).status
        both = (check_strong_k_iso(_with_secret(sc, s1), k,
                                   certificates=False).status is Status.HOLDS
                and check_strong_k_iso(_with_secret(sc, s2), k,
                                       certificates=False).status is Status.HOLDS)
        ok &= (whole is Status.HOLDS) == both
        cases += 1
    return LawReport("union-secret-strong", "a union of secrets is strongly "
                     "opaque exactly when every part is", ok, cases)


def _law_nonsecret_union_strong(scs, tol):
    # one direction only: explainability by a part extends to the union
    ok, cases = True, 0
    for sc in scs:
        k = sc.schedule[0]
        if check_strong_k_iso(sc, k, certificates=False).status is not Status.HOLDS:
            continue
        grown = np.vstack([sc.nonsecret.vertices,
                           sc.nonsecret.vertices + 0.25,
                           sc.nonsecret.vertices - 0.25])
        v = check_strong_k_iso(_with_nonsecret(sc, grown), k,
                               certificates=False)
        ok &= v.status is Status.HOLDS
        cases += 1
    return LawReport("nonsecret-union-strong", "enlarging the nonsecret set "
                     "preserves a strong verdict (converse false)", ok, cases)


# reconstructing an intersection goes through padded halfspaces and plane
# crossings accurate to about 10 * geom_eps, so verdicts on it are compared
# under this slack instead of the raw tolerance
_HULL_SLACK = Tolerances(geom_eps=1e-6)


def _law_intersection_reach(scs, tol):
    ok, cases = True, 0
    for sc in scs:
        k = sc.schedule[0]
        s1, s2 = _split_secret(sc)
        inter = _intersect_vpolys(VPolytope(s1), VPolytope(s2), tol)
        if inter is None:
            continue
        r_int = reach_exact(sc.sys, inter, sc.inputs, k, tol).set
        for s in (s1, s2):
            r = reach_exact(sc.sys, VPolytope(s), sc.inputs, k, tol).set
            ok &= hull_contains(r_int, r, _HULL_SLACK)
        cases += 1
    return LawReport("intersection-reach", "reach of an intersection sits "
                     "inside the intersection of reaches (inclusion only)",
                     ok, cases)


def _law_intersection_secret_strong(scs, tol):
    ok, cases = True, 0
    for sc in scs:
        k = sc.schedule[0]
        s1, s2 = _split_secret(sc)
        parts_hold = all(
            check_strong_k_iso(_with_secret(sc, s), k,
                               certificates=False).status is Status.HOLDS
            for s in (s1, s2))
        if not parts_hold:
            continue
        inter = _intersect_vpolys(VPolytope(s1), VPolytope(s2), tol)
        if inter is None:
            continue
        v = check_strong_k_iso(_with_secret(sc, inter.vertices, _HULL_SLACK),
                               k, certificates=False)
        ok &= v.status is Status.HOLDS
        cases += 1
    return LawReport("intersection-secret-strong", "an intersection of "
                     "strongly opaque secrets stays strongly opaque "
                     "(inclusion only)", ok, cases)


def _law_intersection_secret_weak(scs, tol):
    # the intersection being weakly opaque pushes out to every part
    ok, cases = True, 0
    for sc in scs:
        k = sc.schedule[0]
        s1, s2 = _split_secret(sc)
        inter = _intersect_vpolys(VPolytope(s1), VPolytope(s2), tol)
        if inter is None:
            continue
        if check_weak_k_iso(_with_secret(sc, inter.vertices, _HULL_SLACK),
                            k).status is not Status.HOLDS:
            continue
        for s in (s1, s2):
            ok &= check_weak_k_iso(_with_secret(sc, s, _HULL_SLACK),
                                   k).status is Status.HOLDS
        cases += 1
    return LawReport("intersection-secret-weak", "weak opacity of an "
                     "intersection extends to every part", ok, cases)


def _law_union_secret_weak(scs, tol):
    # one direction only: a weakly opaque part keeps the union weakly opaque
    ok, cases = True, 0
    for sc in scs:
        k = sc.schedule[0]
        s1, s2 = _split_secret(sc)
        any_holds = any(
            check_weak_k_iso(_with_secret(sc, s), k).status is Status.HOLDS
            for s in (s1, s2))
        if not any_holds:
            continue
        whole = check_weak_k_iso(sc, k)
        ok &= whole.status is Status.HOLDS
        cases += 1
    return LawReport("union-secret-weak", "a weakly opaque part keeps the "
                     "union weakly opaque (converse false)", ok, cases)


def _law_counterexamples(scs, tol):
    ok = True
    base, grown = counterexample_nonsecret_union()
    k = base.schedule[0]
    ok &= check_strong_k_iso(base, k).status is Status.FAILS
    ok &= check_strong_k_iso(grown, k).status is Status.HOLDS
    union_sc, part_a, part_b = counterexample_union_weak()
    k = union_sc.schedule[0]
    ok &= check_weak_k_iso(union_sc, k).status is Status.HOLDS
    ok &= check_weak_k_iso(part_a, k).status is Status.FAILS
    ok &= check_weak_k_iso(part_b, k).status is Status.FAILS
    sc = counterexample_intersection_reach()
    r1 = reach_exact(sc.sys, sc.secret, sc.inputs, 1, tol).set
    r2 = reach_exact(sc.sys, sc.nonsecret, sc.inputs, 1, tol).set
    ok &= not hulls_intersect(sc.secret, sc.nonsecret, tol)
    ok &= hulls_intersect(r1, r2, tol)
    return LawReport("one-directional-converses", "the stored constructions "
                     "defeat the converses of the one-directional laws",
                     ok, 3)


def _intersect_vpolys(a: VPolytope, b: VPolytope, tol):
    if a.dim > 3:
        return None
    h = convex_hull_h(a.vertices, tol).intersect(convex_hull_h(b.vertices, tol))
    try:
        return hpoly_to_vpolytope(h, tol)
    except GeometryError:
        return None


def set_algebra_suite(scenarios, tol: Tolerances = DEFAULT_TOL):
    """Exercise the union/intersection laws on a family of scenarios.

    Two-directional laws are checked as equivalences, one-directional ones
    as implications, and the stored counterexamples show their converses
    really do fail.  Returns one LawReport per law.
    """
    scs = list(scenarios)
    if not scs:
        raise GeometryError("need at least one scenario")
    return [
        _law_union_reach(scs, tol),
        _law_union_output(scs, tol),
        _law_union_secret_strong(scs, tol),
        _law_nonsecret_union_strong(scs, tol),
        _law_intersection_reach(scs, tol),
        _law_intersection_secret_strong(scs, tol),
        _law_intersection_secret_weak(scs, tol),
        _law_union_secret_weak(scs, tol),
        _law_counterexamples(scs, tol),
    ]


def _line_scenario(secret, nonsecret, schedule=(1,)):
    sys = LtiSystem([[1.0]], [[0.0]], [[1.0]])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return Scenario(sys,
                        VPolytope(np.asarray(secret, dtype=float)[:, None]),
                        VPolytope(np.asarray(nonsecret, dtype=float)[:, None]),
                        InputSet.singleton([0.0]), schedule)


def counterexample_nonsecret_union():
    """Strong opacity against a union of nonsecret sets does not localize.

    The secret interval [0, 2] is explainable by [0, 1] united with [1, 2]
    but by neither half alone; returned as (failing base, holding union)
    scenario pair with the base using the left half only.
    """
    base = _line_scenario([0.0, 2.0], [0.0, 1.0])
    grown = _line_scenario([0.0, 2.0], [0.0, 1.0, 2.0])
    return base, grown


def counterexample_union_weak():
    """A union of secrets can be weakly opaque while no part is.

    Secrets {0} and {2} both miss the nonsecret output {1}, yet their hull
    [0, 2] covers it.  Returned as (union scenario, part a, part b).
    """
    union_sc = _line_scenario([0.0, 2.0], [1.0])
    part_a = _line_scenario([0.0], [1.0])
    part_b = _line_scenario([2.0], [1.0])
    return union_sc, part_a, part_b


def counterexample_intersection_reach():
    """Disjoint initial sets whose reach sets meet anyway (nilpotent drift),
    so reach-of-intersection can be strictly smaller: here the initial
    intersection is empty while both reach sets are the origin."""
    sys = LtiSystem(np.zeros((2, 2)), np.zeros((2, 1)), np.eye(2))
    return Scenario(sys, VPolytope([[1.0, 0.0]]), VPolytope([[0.0, 1.0]]),
                    InputSet.singleton([0.0]), (1,))
