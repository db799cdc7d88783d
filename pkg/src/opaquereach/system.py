"""Discrete-time linear plants and their forward and backward reachable sets.

The plant is x(t+1) = A x(t) + B u(t), y(t) = C x(t) with a convex set of
initial states and a time-invariant convex set of admissible controls.  With
convex data the union of all states reachable at time k collapses to

    X(k) = A^k X0 + sum_{j=0}^{k-1} A^(k-1-j) B U      (Minkowski sums)

which is what reach_exact computes, in either V-polytope or zonotope
representation.  V-polytope runs track which initial vertex and which control
vertices produced every reach vertex so callers can reconstruct concrete
trajectories behind a verdict.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .geometry import (DEFAULT_TOL, DimensionMismatch, GeometryError,
                       HPolytope, Tolerances, UnsupportedDimension, VPolytope,
                       Zonotope, convex_hull_h, hpoly_to_vpolytope,
                       hulls_intersect, linear_image, minkowski_sum_points,
                       prune_indices, support_values, vpolytope_to_zonotope_box,
                       zonotope_to_vpolytope)

__all__ = [
    "LtiSystem", "InputSet", "ReachProvenance", "ReachSet", "Scenario",
    "reach_exact", "output_set", "simulate", "input_reach",
    "pre0_output", "pre0_output_robust",
]

STATE = "state"
OUTPUT = "output"
FIDELITIES = ("exact", "over", "under")


def _check_matrix(m, name):
    m = np.ascontiguousarray(np.asarray(m, dtype=float))
    if m.ndim == 1:
        m = m[None, :] if name == "C" else m[:, None]
    if m.ndim != 2 or m.size == 0:
        raise GeometryError(f"{name} must be a nonempty 2-D matrix")
    if not np.all(np.isfinite(m)):
        raise GeometryError(f"{name} must have finite entries")
    m.setflags(write=False)
    return m


class LtiSystem:
    """The plant x(t+1) = A x(t) + B u(t), y(t) = C x(t)."""

    __slots__ = ("a", "b", "c")

    def __init__(self, a, b, c):
        a = _check_matrix(a, "A")
        b = _check_matrix(b, "B")
        c = _check_matrix(c, "C")
        if a.shape[0] != a.shape[1]:
            raise DimensionMismatch(f"A must be square, got {a.shape}")
        if b.shape[0] != a.shape[0]:
            raise DimensionMismatch("B must have one row per state")
        if c.shape[1] != a.shape[0]:
            raise DimensionMismatch("C must have one column per state")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)

    def __setattr__(self, name, value):
        raise AttributeError("LtiSystem is immutable")

    @property
    def n(self):
        return self.a.shape[0]

    @property
    def m(self):
        return self.b.shape[1]

    @property
    def p(self):
        return self.c.shape[0]

    def observed_by(self, c):
        """Same dynamics seen through a different output map."""
        return LtiSystem(self.a, self.b, c)

    def power(self, k):
        return np.linalg.matrix_power(self.a, int(k))

    def input_terms(self, k):
        """The matrices A^(k-1-j) B for j = 0..k-1 (empty list for k = 0)."""
        k = int(k)
        terms = [None] * k
        if k:
            acc = self.b
            terms[k - 1] = acc
            for j in range(k - 2, -1, -1):
                acc = self.a @ acc
                terms[j] = acc
        return terms

    def __repr__(self):
        return f"LtiSystem(n={self.n}, m={self.m}, p={self.p})"


class InputSet:
    """Time-invariant set of admissible controls, V-polytope or zonotope."""

    __slots__ = ("set",)

    def __init__(self, region):
        if isinstance(region, InputSet):
            region = region.set
        if not isinstance(region, (VPolytope, Zonotope)):
            raise GeometryError("admissible controls must be a VPolytope or Zonotope")
        object.__setattr__(self, "set", region)

    def __setattr__(self, name, value):
        raise AttributeError("InputSet is immutable")

    @classmethod
    def box(cls, lo, hi):
        return cls(VPolytope.from_box(lo, hi))

    @classmethod
    def singleton(cls, point):
        return cls(VPolytope.singleton(point))

    @classmethod
    def from_vertices(cls, vertices):
        return cls(VPolytope(vertices))

    @property
    def dim(self):
        return self.set.dim

    @property
    def is_singleton(self):
        s = self.set
        if isinstance(s, Zonotope):
            return s.ngens == 0 or not np.any(s.generators)
        return bool(np.all(s.vertices == s.vertices[0]))

    def vertices(self, tol: Tolerances = DEFAULT_TOL):
        s = self.set
        if isinstance(s, Zonotope):
            return zonotope_to_vpolytope(s, tol).vertices
        return s.vertices

    def __repr__(self):
        return f"InputSet({self.set!r})"


@dataclass(frozen=True)
class ReachProvenance:
    """Initial state and control sequence generating each reach-set vertex.

    x0 has shape (nv, n) and controls (nv, k, m); simulating row i from
    x0[i] under controls[i] lands exactly on vertex i of the reach set.
    """

    x0: np.ndarray
    controls: np.ndarray

    def __post_init__(self):
        x0 = np.asarray(self.x0, dtype=float)
        ctl = np.asarray(self.controls, dtype=float)
        if x0.ndim != 2 or ctl.ndim != 3 or ctl.shape[0] != x0.shape[0]:
            raise GeometryError("provenance arrays must be (nv,n) and (nv,k,m)")
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "controls", ctl)

    @property
    def horizon(self):
        return self.controls.shape[1]

    def select(self, idx):
        return ReachProvenance(self.x0[idx], self.controls[idx])


@dataclass(frozen=True)
class ReachSet:
    """A reachable set at a fixed time, in state or output space."""

    set: object
    time: int
    space: str = STATE
    fidelity: str = "exact"
    provenance: ReachProvenance | None = None

    def __post_init__(self):
        if not isinstance(self.set, (VPolytope, Zonotope)):
            raise GeometryError("reach set must be a VPolytope or Zonotope")
        if self.time < 0:
            raise GeometryError("time index must be nonnegative")
        if self.space not in (STATE, OUTPUT):
            raise GeometryError(f"unknown space {self.space!r}")
        if self.fidelity not in FIDELITIES:
            raise GeometryError(f"unknown fidelity {self.fidelity!r}")
        if self.provenance is not None:
            if not isinstance(self.set, VPolytope):
                raise GeometryError("provenance only applies to V-polytopes")
            if self.provenance.x0.shape[0] != self.set.nv:
                raise GeometryError("provenance rows must match vertex count")

    @property
    def dim(self):
        return self.set.dim

    def vertices(self, tol: Tolerances = DEFAULT_TOL):
        if isinstance(self.set, Zonotope):
            return zonotope_to_vpolytope(self.set, tol).vertices
        return self.set.vertices


class Scenario:
    """A verification instance: plant, secret and nonsecret initial sets,
    admissible controls, and the schedule of time indices to check.

    The two roles share the admissible-control set unless inputs_nonsecret
    is given.  Overlapping secret/nonsecret hulls are legal but unusual, so
    they raise a warning rather than an error.
    """

    __slots__ = ("sys", "secret", "nonsecret", "inputs", "inputs_nonsecret",
                 "schedule", "tol")

    def __init__(self, sys, secret, nonsecret, inputs, schedule,
                 tol: Tolerances = DEFAULT_TOL, inputs_nonsecret=None):
        if not isinstance(sys, LtiSystem):
            raise GeometryError("sys must be an LtiSystem")
        if not isinstance(secret, VPolytope) or not isinstance(nonsecret, VPolytope):
            raise GeometryError("secret and nonsecret sets must be V-polytopes")
        if secret.dim != sys.n or nonsecret.dim != sys.n:
            raise DimensionMismatch("initial sets must live in the state space")
        inputs = InputSet(inputs)
        if inputs.dim != sys.m:
            raise DimensionMismatch("control set must live in the input space")
        if inputs_nonsecret is not None:
            inputs_nonsecret = InputSet(inputs_nonsecret)
            if inputs_nonsecret.dim != sys.m:
                raise DimensionMismatch("control set must live in the input space")
        ks = tuple(sorted({int(k) for k in schedule}))
        if not ks or ks[0] < 1:
            raise GeometryError("schedule must be a nonempty set of integers >= 1")
        object.__setattr__(self, "sys", sys)
        object.__setattr__(self, "secret", secret)
        object.__setattr__(self, "nonsecret", nonsecret)
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "inputs_nonsecret", inputs_nonsecret)
        object.__setattr__(self, "schedule", ks)
        object.__setattr__(self, "tol", tol)
        if hulls_intersect(secret, nonsecret, tol):
            warnings.warn("secret and nonsecret initial sets overlap; "
                          "verdicts remain valid but the secret is weakly "
                          "protected at k = 0", stacklevel=2)

    def __setattr__(self, name, value):
        raise AttributeError("Scenario is immutable")

    def inputs_for(self, role):
        if role == "secret" or self.inputs_nonsecret is None:
            return self.inputs
        if role != "nonsecret":
            raise GeometryError(f"unknown role {role!r}")
        return self.inputs_nonsecret

    def observed_by(self, c):
        """The same scenario under a different output map."""
        return Scenario(self.sys.observed_by(c), self.secret, self.nonsecret,
                        self.inputs, self.schedule, self.tol,
                        self.inputs_nonsecret)

    def __repr__(self):
        return (f"Scenario(n={self.sys.n}, m={self.sys.m}, p={self.sys.p}, "
                f"schedule={self.schedule})")


def _check_time(k, lo=0):
    kk = int(k)
    if kk != k or kk < lo:
        raise GeometryError(f"time index must be an integer >= {lo}, got {k!r}")
    return kk


def _as_region(u):
    return u.set if isinstance(u, InputSet) else u


def reach_exact(sys: LtiSystem, x0, u, k, tol: Tolerances = DEFAULT_TOL,
                vertex_cap=4096, track=True) -> ReachSet:
    """The set of states reachable at time k from x0 under admissible controls.

    Exact for convex data: linear dynamics map the union over initial states
    and control sequences onto A^k x0 + sum_j A^(k-1-j) B U.  Runs in vertex
    representation when both sets are V-polytopes (with trajectory provenance
    when track is set) and in generator representation when both are
    zonotopes; mixed inputs are unified by enumerating the zonotope.  If the
    vertex count passes vertex_cap the run restarts on bounding-box zonotopes
    and the result is flagged fidelity="over".
    """
    k = _check_time(k)
    ur = _as_region(u)
    if x0.dim != sys.n:
        raise DimensionMismatch("initial set must live in the state space")
    if ur.dim != sys.m:
        raise DimensionMismatch("control set must live in the input space")
    if isinstance(x0, Zonotope) and isinstance(ur, Zonotope):
        return _reach_zono(sys, x0, ur, k, "exact")
    if isinstance(x0, Zonotope):
        x0 = zonotope_to_vpolytope(x0, tol)
    if isinstance(ur, Zonotope):
        ur = zonotope_to_vpolytope(ur, tol)
    try:
        return _reach_vertex(sys, x0, ur.vertices, k, tol, vertex_cap, track)
    except _VertexCapExceeded:
        z = _reach_zono(sys, vpolytope_to_zonotope_box(x0),
                        vpolytope_to_zonotope_box(ur), k, "over")
        return z


class _VertexCapExceeded(Exception):
    pass


def _reach_vertex(sys, x0, uv, k, tol, vertex_cap, track):
    pts = x0.vertices @ sys.power(k).T
    keep = prune_indices(pts, tol)
    pts = pts[keep]
    prov_x0 = x0.vertices[keep]
    prov_u = np.zeros((pts.shape[0], 0, sys.m))
    for term in sys.input_terms(k):
        contrib = uv @ term.T
        sums, ip, iq = minkowski_sum_points(pts, contrib)
        keep = prune_indices(sums, tol)
        if keep.shape[0] > vertex_cap:
            raise _VertexCapExceeded
        pts = sums[keep]
        ip, iq = ip[keep], iq[keep]
        prov_x0 = prov_x0[ip]
        prov_u = np.concatenate([prov_u[ip], uv[iq][:, None, :]], axis=1)
    prov = ReachProvenance(prov_x0, prov_u) if track else None
    return ReachSet(VPolytope(pts), k, STATE, "exact", prov)


def _reach_zono(sys, z0, zu, k, fidelity):
    z = z0.image(sys.power(k))
    for term in sys.input_terms(k):
        z = z.sum(zu.image(term))
    return ReachSet(z, k, STATE, fidelity, None)


def output_set(sys: LtiSystem, r: ReachSet, tol: Tolerances = DEFAULT_TOL) -> ReachSet:
    """Image of a state-space reach set under the output map C."""
    if r.space != STATE:
        raise GeometryError("output_set expects a state-space reach set")
    if r.dim != sys.n:
        raise DimensionMismatch("reach set does not match the state dimension")
    if isinstance(r.set, Zonotope):
        return ReachSet(r.set.image(sys.c), r.time, OUTPUT, r.fidelity, None)
    pts = r.set.vertices @ sys.c.T
    keep = prune_indices(pts, tol)
    prov = r.provenance.select(keep) if r.provenance is not None else None
    return ReachSet(VPolytope(pts[keep]), r.time, OUTPUT, r.fidelity, prov)


def simulate(sys: LtiSystem, x0, controls):
    """Roll the plant forward; returns (states, outputs) with k+1 rows each."""
    x = np.atleast_1d(np.asarray(x0, dtype=float))
    if x.shape != (sys.n,):
        raise DimensionMismatch("x0 must be a state-space point")
    ctl = np.asarray(controls, dtype=float)
    if ctl.size == 0:
        ctl = ctl.reshape(0, sys.m)
    if ctl.ndim == 1:
        ctl = ctl[:, None] if sys.m == 1 else ctl[None, :]
    if ctl.ndim != 2 or ctl.shape[1] != sys.m:
        raise DimensionMismatch("controls must be (k, m) rows")
    states = np.empty((ctl.shape[0] + 1, sys.n))
    states[0] = x
    for t in range(ctl.shape[0]):
        states[t + 1] = sys.a @ states[t] + sys.b @ ctl[t]
    return states, states @ sys.c.T


def input_reach(sys: LtiSystem, u, k, tol: Tolerances = DEFAULT_TOL):
    """The control contribution sum_{j<k} A^(k-1-j) B U, a state-space set.

    This is the reach set from the zero initial state; k = 0 gives the
    origin.  Representation follows the input set.
    """
    k = _check_time(k)
    ur = _as_region(u)
    if ur.dim != sys.m:
        raise DimensionMismatch("control set must live in the input space")
    if isinstance(ur, Zonotope):
        acc = Zonotope(np.zeros(sys.n))
        for term in sys.input_terms(k):
            acc = acc.sum(ur.image(term))
        return acc
    pts = np.zeros((1, sys.n))
    for term in sys.input_terms(k):
        sums, _, _ = minkowski_sum_points(pts, ur.vertices @ term.T)
        pts = sums[prune_indices(sums, tol)]
    return VPolytope(pts)


def _output_input_reach(sys, u, k, tol):
    r = input_reach(sys, u, k, tol)
    if isinstance(r, Zonotope):
        return r.image(sys.c)
    return linear_image(sys.c, r, tol)


def _is_single_point(s):
    if isinstance(s, Zonotope):
        return s.ngens == 0 or not np.any(s.generators)
    return bool(np.all(s.vertices == s.vertices[0]))


def _point_of(s):
    return s.center if isinstance(s, Zonotope) else s.vertices[0]


def pre0_output(sys: LtiSystem, y: HPolytope, u, k,
                tol: Tolerances = DEFAULT_TOL) -> HPolytope:
    """Initial states from which SOME admissible control reaches Y at time k.

    Equals {x0 : C A^k x0 in Y + (-C R_u)} where R_u is the control
    contribution.  The Minkowski sum is a translation when the control
    contribution is a point (exact in any output dimension); otherwise Y must
    be bounded and its sum with the reflected contribution is rebuilt as a
    hull, which limits the general path to output dimension <= 3.  The result
    may be unbounded: it is a halfspace system over the state space.
    """
    k = _check_time(k, lo=1)
    if y.dim != sys.p:
        raise DimensionMismatch("target set must live in the output space")
    cru = _output_input_reach(sys, u, k, tol)
    comp = sys.c @ sys.power(k)
    if _is_single_point(cru):
        t = _point_of(cru)
        return HPolytope(y.normals @ comp, y.offsets - y.normals @ t, dim=sys.n)
    if sys.p > 3:
        raise UnsupportedDimension(
            "summing the target with a non-degenerate control contribution "
            "needs a vertex hull, only available for output dimension <= 3")
    yv = hpoly_to_vpolytope(y, tol)
    if isinstance(cru, Zonotope):
        cru = zonotope_to_vpolytope(cru, tol)
    sums, _, _ = minkowski_sum_points(yv.vertices, -cru.vertices)
    hull = convex_hull_h(sums[prune_indices(sums, tol)], tol)
    return HPolytope(hull.normals @ comp, hull.offsets, dim=sys.n)


def pre0_output_robust(sys: LtiSystem, y: HPolytope, u, k,
                       tol: Tolerances = DEFAULT_TOL) -> HPolytope:
    """Initial states from which EVERY admissible control reaches Y at time k.

    Equals {x0 : C A^k x0 in Y eroded by C R_u}; the erosion of a halfspace
    system just lowers each offset by the support value of the control
    contribution in that normal direction, so this path is exact in any
    output dimension.  The result may be empty when the erosion exhausts Y;
    that is legal and callers test emptiness where it matters.
    """
    k = _check_time(k, lo=1)
    if y.dim != sys.p:
        raise DimensionMismatch("target set must live in the output space")
    cru = _output_input_reach(sys, u, k, tol)
    comp = sys.c @ sys.power(k)
    sup = support_values(cru, y.normals)
    return HPolytope(y.normals @ comp, y.offsets - sup, dim=sys.n)
