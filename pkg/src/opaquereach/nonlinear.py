"""Sampled falsification for nonlinear plants.

The exact engine needs linear dynamics; when the plant is nonlinear we fall
back to gridding: enumerate initial states on a lattice inside each initial
set, enumerate control sequences on a lattice inside the input set, push
every combination through the dynamics, and compare the resulting output
clouds.  A secret sample that sits farther than delta from every nonsecret
sample is a concrete counterexample, so the verdict is FAILS.  Nothing else
can be concluded from finitely many samples, so the only other answer is
UNKNOWN: this route never certifies opacity.

Every cloud point carries its provenance (the initial state and the control
sequence that produced it), and re-running a provenance through the
dynamics reproduces the point bit for bit.  No randomness is involved
anywhere, so clouds are identical across runs.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .expr import linear_exprs, parse_vector
from .geometry import DEFAULT_TOL, GeometryError, VPolytope, Zonotope, in_hull
from .opacity import FailureWitness, Status, Trajectory, Verdict, _as_vpoly, _check_horizon
from .system import ReachSet

__all__ = ["NlSystem", "SampleCloud", "merge_clouds", "nl_reach_samples", "nl_falsify"]

TRAJECTORY_CAP = 1_000_000


@dataclass(frozen=True)
class NlSystem:
    """A discrete-time plant x' = step(x, u), y = output(x).

    step and output are batched: step maps (N, n) states and (N, m)
    controls to (N, n), output maps (N, n) to (N, p).  The constructor
    probes both with zeros to catch shape bugs early, and warns when
    output(0) != 0 since the linear theory normalises the origin to the
    zero output and most comparisons silently assume it.
    """

    n: int
    m: int
    p: int
    step: object
    output: object

    def __post_init__(self):
        for name in ("n", "m", "p"):
            if int(getattr(self, name)) < 1:
                raise GeometryError(f"{name} must be a positive dimension")
            object.__setattr__(self, name, int(getattr(self, name)))
        probe_x = np.zeros((1, self.n))
        probe_u = np.zeros((1, self.m))
        nxt = np.asarray(self.step(probe_x, probe_u), dtype=float)
        if nxt.shape != (1, self.n):
            raise GeometryError(
                f"step must map (N, {self.n}) states to (N, {self.n}), got {nxt.shape}")
        y0 = np.asarray(self.output(probe_x), dtype=float)
        if y0.shape != (1, self.p):
            raise GeometryError(
                f"output must map (N, {self.n}) states to (N, {self.p}), got {y0.shape}")
        if np.abs(y0).max() > DEFAULT_TOL.geom_eps:
            warnings.warn("output(0) != 0; distances to linear baselines will be offset",
                          stacklevel=2)

    @classmethod
    def from_expressions(cls, n, m, p, f, h):
        """Build from expression trees (parsed Expr tuples or raw JSON lists)."""
        f = parse_vector(list(f), "f") if f and isinstance(f[0], dict) else tuple(f)
        h = parse_vector(list(h), "h") if h and isinstance(h[0], dict) else tuple(h)
        if len(f) != n:
            raise GeometryError(f"f must have {n} component expressions, got {len(f)}")
        if len(h) != p:
            raise GeometryError(f"h must have {p} component expressions, got {len(h)}")
        for e in f + h:
            xi, ui = e.max_indices()
            if xi >= n:
                raise GeometryError(f"expression references x_{xi} but n={n}")
            if ui >= m:
                raise GeometryError(f"expression references u_{ui} but m={m}")
        for i, e in enumerate(h):
            if e.max_indices()[1] >= 0:
                raise GeometryError(f"h[{i}] references controls; outputs depend on state only")

        def step(x, u):
            return np.stack([e.eval(x, u) for e in f], axis=1)

        def output(x):
            return np.stack([e.eval(x) for e in h], axis=1)

        return cls(n, m, p, step, output)

    @classmethod
    def from_linear(cls, sys):
        """Wrap an LTI plant; its clouds land inside the exact reach sets."""
        return cls.from_expressions(sys.n, sys.m, sys.p,
                                    linear_exprs(sys.a, sys.b), linear_exprs(sys.c))


@dataclass(frozen=True)
class SampleCloud:
    """Output samples at time k with full provenance per row.

    points[i] = output of the trajectory started at x0[i] and driven by
    controls[i] (shape (k, m)).  replay() recomputes a row from scratch.
    """

    points: np.ndarray
    x0: np.ndarray
    controls: np.ndarray
    k: int

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        x0 = np.atleast_2d(np.asarray(self.x0, dtype=float))
        ctl = np.asarray(self.controls, dtype=float)
        if ctl.ndim != 3:
            raise GeometryError("controls must be (N, k, m)")
        if not (pts.shape[0] == x0.shape[0] == ctl.shape[0]):
            raise GeometryError("points, x0 and controls must agree on the sample count")
        if ctl.shape[1] != self.k:
            raise GeometryError("controls row length must equal the horizon")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "controls", ctl)
        object.__setattr__(self, "k", int(self.k))

    def __len__(self):
        return self.points.shape[0]

    def replay(self, sys: NlSystem, i):
        """Recompute point i from its provenance; bitwise-equal by design."""
        x = self.x0[i:i + 1]
        for t in range(self.k):
            x = sys.step(x, self.controls[i:i + 1, t, :])
        return sys.output(x)[0]


def merge_clouds(*clouds) -> SampleCloud:
    """Concatenate clouds over one horizon, sorted by provenance, deduped."""
    ks = {c.k for c in clouds}
    if len(ks) != 1:
        raise GeometryError("cannot merge clouds over different horizons")
    pts = np.vstack([c.points for c in clouds])
    x0 = np.vstack([c.x0 for c in clouds])
    ctl = np.vstack([c.controls for c in clouds])
    prov = np.hstack([x0, ctl.reshape(len(pts), -1)])
    # lexsort keys run last-to-first, so feed reversed columns for row order
    order = np.lexsort(prov.T[::-1])
    keep = np.ones(len(order), dtype=bool)
    keep[1:] = np.any(prov[order[1:]] != prov[order[:-1]], axis=1)
    order = order[keep]
    return SampleCloud(pts[order], x0[order], ctl[order], ks.pop())


def _lattice(v: VPolytope, g, tol):
    """Axis-aligned lattice inside v; exact for boxes, filtered otherwise."""
    lo = v.vertices.min(axis=0)
    hi = v.vertices.max(axis=0)
    axes = [np.linspace(lo[d], hi[d], 1 if hi[d] - lo[d] <= tol.geom_eps else int(g))
            for d in range(v.dim)]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, v.dim)
    corners = {tuple(np.round(c, 9)) for c in
               itertools.product(*zip(lo, hi))}
    if {tuple(np.round(row, 9)) for row in v.vertices} == corners:
        return pts
    keep = [in_hull(p, v, tol) for p in pts]
    inside = pts[np.asarray(keep, dtype=bool)]
    # thin polytopes can slip between lattice points; the vertices are
    # always legitimate samples, so fall back to them
    return inside if len(inside) else v.vertices.copy()


def _grid_spec(grid):
    if isinstance(grid, (tuple, list)):
        if len(grid) != 2:
            raise GeometryError("grid must be one resolution or (state, control) pair")
        gx, gu = grid
    else:
        gx = gu = grid
    gx, gu = int(gx), int(gu)
    if min(gx, gu) < 2:
        raise GeometryError("grid resolution must be at least 2 points per axis")
    return gx, gu


def nl_reach_samples(sys: NlSystem, x0, u, k, grid=3, cap=TRAJECTORY_CAP,
                     tol=DEFAULT_TOL) -> SampleCloud:
    """Outputs of every gridded initial state under every gridded control run.

    grid is the lattice resolution per axis (one number, or a (state,
    control) pair).  The trajectory count is n_x0 * n_u**k and is refused
    beyond cap rather than silently thinned.
    """
    k = _check_horizon(k)
    gx, gu = _grid_spec(grid)
    x0 = _coerce_set(x0, sys.n, "initial set", tol)
    u = _coerce_set(u, sys.m, "input set", tol)
    xg = _lattice(x0, gx, tol)
    ug = _lattice(u, gu, tol)
    total = len(xg) * len(ug) ** k
    if total > cap:
        raise GeometryError(
            f"{total} trajectories exceed the cap of {cap} (suggests a coarser grid)")
    seq = np.array(list(itertools.product(range(len(ug)), repeat=k)), dtype=int)
    ctl = ug[seq]                                   # (n_seq, k, m)
    x = np.repeat(xg, len(seq), axis=0)
    ctl = np.tile(ctl, (len(xg), 1, 1))
    starts = x.copy()
    for t in range(k):
        x = np.asarray(sys.step(x, ctl[:, t, :]), dtype=float)
    return SampleCloud(np.asarray(sys.output(x), dtype=float), starts, ctl, k)


def _coerce_set(s, dim, what, tol):
    v, _ = _as_vpoly(s if isinstance(s, ReachSet) else _wrap(s), tol)
    if v.dim != dim:
        raise GeometryError(f"{what} lives in dimension {v.dim}, plant expects {dim}")
    return v


def _wrap(s):
    if hasattr(s, "set"):
        s = s.set
    if not isinstance(s, (VPolytope, Zonotope)):
        s = VPolytope(np.atleast_2d(np.asarray(s, dtype=float)))
    return ReachSet(s, 0)


def nl_falsify(sys: NlSystem, x_s, x_ns, u, k, delta, grid=3,
               grid_nonsecret=None, cap=TRAJECTORY_CAP, tol=DEFAULT_TOL) -> Verdict:
    """Hunt for a secret output sample no nonsecret sample comes close to.

    FAILS when some secret cloud point is farther than delta from the whole
    nonsecret cloud, with that point (and its provenance run) as witness.
    Otherwise UNKNOWN; a sample-based search cannot certify opacity.  The
    nonsecret cloud's dispersion (largest gap between a sample and its
    nearest neighbour) is reported so the caller can judge whether delta is
    meaningful at the chosen resolution.
    """
    k = _check_horizon(k)
    if not np.isfinite(delta) or float(delta) <= 0.0:
        raise GeometryError("delta must be a positive separation threshold")
    delta = float(delta)
    cloud_s = nl_reach_samples(sys, x_s, u, k, grid, cap, tol)
    cloud_ns = nl_reach_samples(sys, x_ns, u, k,
                                grid if grid_nonsecret is None else grid_nonsecret,
                                cap, tol)
    tree = cKDTree(cloud_ns.points)
    dists, nearest = tree.query(cloud_s.points)
    dists = np.atleast_1d(dists)
    nearest = np.atleast_1d(nearest)
    if len(cloud_ns) >= 2:
        gaps, _ = tree.query(cloud_ns.points, k=2)
        dispersion = float(gaps[:, 1].max())
    else:
        dispersion = 0.0
    note = (f"sampled clouds: {len(cloud_s)} secret / {len(cloud_ns)} nonsecret points; "
            f"nonsecret dispersion {dispersion:.6g}")
    worst = int(np.argmax(dists))
    if dists[worst] > delta:
        wit = FailureWitness(
            output=cloud_s.points[worst],
            distance=float(dists[worst]),
            nearest=cloud_ns.points[nearest[worst]],
            trajectory=Trajectory(cloud_s.x0[worst], cloud_s.controls[worst]),
        )
        return Verdict(Status.FAILS, "nonlinear", k, distance=float(dists[worst]),
                       witness=wit, note=note)
    return Verdict(Status.UNKNOWN, "nonlinear", k, distance=float(dists[worst]),
                   note=note + f"; no secret sample beyond delta={delta:g}")
