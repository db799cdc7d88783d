"""Dense two-phase simplex and the LP-backed set queries.

The solver always pivots with Bland's rule, trading speed for guaranteed
termination and bitwise-deterministic pivot sequences; every instance in
this codebase is tiny (tens of rows), so that trade is cheap.
"""

from __future__ import annotations

from itertools import combinations

import numpy as np

from .sets import (DEFAULT_TOL, EmptySetError, DimensionMismatch, GeometryError,
                   HPolytope, Tolerances, UnboundedSetError, UnsupportedDimension,
                   VPolytope, convex_hull_h, dedupe_indices, prune_indices)

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

_PIV_TOL = 1e-11


class LpNonConvergence(RuntimeError):
    """Iteration cap hit before the simplex reached a terminal status."""


class LpResult:
    __slots__ = ("status", "x", "fun")

    def __init__(self, status, x=None, fun=None):
        self.status = status
        self.x = x
        self.fun = fun

    def __repr__(self):
        return f"LpResult(status={self.status}, fun={self.fun})"


def _pivot_iterate(tableau, basis, cost, maxiter):
    """Bland-rule pivoting on a canonical tableau; returns terminal status."""
    ncols = tableau.shape[1] - 1
    for _ in range(maxiter):
        reduced = cost - cost[basis] @ tableau[:, :ncols]
        entering = -1
        for j in range(ncols):
            if reduced[j] < -_PIV_TOL:
                entering = j
                break
        if entering < 0:
            return OPTIMAL
        col = tableau[:, entering]
        rows = np.nonzero(col > _PIV_TOL)[0]
        if rows.size == 0:
            return UNBOUNDED
        ratios = tableau[rows, -1] / col[rows]
        best = ratios.min()
        # Bland tie-break: smallest basis variable index among the min ratios
        tied = rows[ratios <= best + _PIV_TOL * (1.0 + abs(best))]
        leave = tied[np.argmin([basis[i] for i in tied])]
        piv = tableau[leave, entering]
        tableau[leave] /= piv
        factor = tableau[:, entering].copy()
        factor[leave] = 0.0
        tableau -= np.outer(factor, tableau[leave])
        tableau[:, entering] = 0.0
        tableau[leave, entering] = 1.0
        basis[leave] = entering
    raise LpNonConvergence("simplex iteration cap exceeded")


def solve_lp(c, a_ub=None, b_ub=None, a_eq=None, b_eq=None, nonneg=None,
             feas_eps=1e-9, maxiter=None) -> LpResult:
    """Minimize c @ x subject to a_ub x <= b_ub and a_eq x = b_eq.

    Variables are free unless flagged in the boolean mask ``nonneg``.
    Two-phase dense simplex with Bland's rule; raises LpNonConvergence when
    the iteration cap is hit, which is reported distinctly from infeasible.
    """
    c = np.atleast_1d(np.asarray(c, dtype=float))
    nvar = c.shape[0]
    if nonneg is None:
        nonneg = np.zeros(nvar, dtype=bool)
    else:
        nonneg = np.asarray(nonneg, dtype=bool)
        if nonneg.shape != (nvar,):
            raise DimensionMismatch("nonneg mask must match the variable count")

    rows = []
    rhs = []
    n_ub = 0
    if a_ub is not None and np.size(a_ub):
        a_ub = np.atleast_2d(np.asarray(a_ub, dtype=float))
        b_ub = np.atleast_1d(np.asarray(b_ub, dtype=float))
        if a_ub.shape != (b_ub.shape[0], nvar):
            raise DimensionMismatch("inequality system shape mismatch")
        rows.append(a_ub)
        rhs.append(b_ub)
        n_ub = a_ub.shape[0]
    if a_eq is not None and np.size(a_eq):
        a_eq = np.atleast_2d(np.asarray(a_eq, dtype=float))
        b_eq = np.atleast_1d(np.asarray(b_eq, dtype=float))
        if a_eq.shape != (b_eq.shape[0], nvar):
            raise DimensionMismatch("equality system shape mismatch")
        rows.append(a_eq)
        rhs.append(b_eq)
    if not rows:
        x = np.zeros(nvar)
        return LpResult(OPTIMAL, x, 0.0)
    amat = np.vstack(rows)
    bvec = np.concatenate(rhs)
    m = amat.shape[0]

    # standard-form columns: nonneg vars map to one column, free vars to a +/- pair
    col_of = np.zeros(nvar, dtype=int)
    neg_col = np.full(nvar, -1, dtype=int)
    cols = []
    std_cost = []
    for i in range(nvar):
        col_of[i] = len(cols)
        cols.append(amat[:, i])
        std_cost.append(c[i])
        if not nonneg[i]:
            neg_col[i] = len(cols)
            cols.append(-amat[:, i])
            std_cost.append(-c[i])
    slack_at = np.full(m, -1, dtype=int)
    for r in range(n_ub):
        slack_at[r] = len(cols)
        e = np.zeros(m)
        e[r] = 1.0
        cols.append(e)
        std_cost.append(0.0)
    astd = np.column_stack(cols)
    cstd = np.asarray(std_cost)

    # scale rows to unit inf-norm, then flip signs so the rhs is nonnegative
    scale = np.maximum(np.abs(astd).max(axis=1), np.abs(bvec))
    scale[scale < 1e-300] = 1.0
    astd = astd / scale[:, None]
    bstd = bvec / scale
    flip = bstd < 0.0
    astd[flip] *= -1.0
    bstd[flip] = -bstd[flip]

    n_std = astd.shape[1]
    if maxiter is None:
        maxiter = 500 + 60 * (m + n_std)

    tableau = np.hstack([astd, np.eye(m), bstd[:, None]])
    basis = list(range(n_std, n_std + m))
    phase1 = np.concatenate([np.zeros(n_std), np.ones(m)])
    status = _pivot_iterate(tableau, basis, phase1, maxiter)
    if status == UNBOUNDED:  # pragma: no cover - phase 1 objective is bounded
        raise LpNonConvergence("phase-1 reported unbounded")
    if phase1[basis] @ tableau[:, -1] > feas_eps:
        return LpResult(INFEASIBLE)

    # drive remaining artificials out of the basis, drop redundant rows
    drop = []
    for i in range(m):
        if basis[i] >= n_std:
            row = tableau[i, :n_std]
            j = int(np.argmax(np.abs(row)))
            if abs(row[j]) > _PIV_TOL:
                piv = tableau[i, j]
                tableau[i] /= piv
                factor = tableau[:, j].copy()
                factor[i] = 0.0
                tableau -= np.outer(factor, tableau[i])
                tableau[:, j] = 0.0
                tableau[i, j] = 1.0
                basis[i] = j
            else:
                drop.append(i)
    if drop:
        keep = [i for i in range(m) if i not in drop]
        tableau = tableau[keep]
        basis = [basis[i] for i in keep]

    tableau = np.hstack([tableau[:, :n_std], tableau[:, -1:]])
    status = _pivot_iterate(tableau, basis, cstd, maxiter)
    if status == UNBOUNDED:
        return LpResult(UNBOUNDED)

    z = np.zeros(n_std)
    for i, bi in enumerate(basis):
        z[bi] = tableau[i, -1]
    x = np.empty(nvar)
    for i in range(nvar):
        x[i] = z[col_of[i]] if nonneg[i] else z[col_of[i]] - z[neg_col[i]]
    return LpResult(OPTIMAL, x, float(c @ x))


def lp_feasible_point(h: HPolytope, tol: Tolerances = DEFAULT_TOL):
    """A point of {x : N x <= o} or None; minimizes the max violation.

    None means infeasible beyond lp_eps; non-convergence raises instead.
    """
    d = h.dim
    if h.nrows == 0:
        return np.zeros(d)
    scale = max(1.0, float(np.abs(h.offsets).max()))
    c = np.zeros(d + 1)
    c[d] = 1.0
    a_ub = np.hstack([h.normals, -np.ones((h.nrows, 1))])
    nonneg = np.zeros(d + 1, dtype=bool)
    nonneg[d] = True
    res = solve_lp(c, a_ub, h.offsets, nonneg=nonneg, feas_eps=tol.lp_eps)
    if res.status != OPTIMAL:  # pragma: no cover - this LP is always feasible
        raise LpNonConvergence(f"violation LP ended with status {res.status}")
    if res.x[d] > tol.lp_eps * scale:
        return None
    return res.x[:d]


def lp_feasible_in_hull(h: HPolytope, v: VPolytope, tol: Tolerances = DEFAULT_TOL):
    """A point of conv(v) satisfying the halfspaces, or None.

    Searches over barycentric weights, so it works in any dimension.
    """
    if h.dim != v.dim:
        raise DimensionMismatch("halfspace and polytope dims differ")
    if h.nrows == 0:
        return v.vertices[0].copy()
    nv = v.nv
    scale = max(1.0, float(np.abs(h.offsets).max()))
    c = np.zeros(nv + 1)
    c[nv] = 1.0
    a_ub = np.hstack([h.normals @ v.vertices.T, -np.ones((h.nrows, 1))])
    a_eq = np.concatenate([np.ones(nv), [0.0]])[None, :]
    res = solve_lp(c, a_ub, h.offsets, a_eq, np.ones(1),
                   nonneg=np.ones(nv + 1, dtype=bool), feas_eps=tol.lp_eps)
    if res.status != OPTIMAL:  # pragma: no cover - always feasible over the hull
        raise LpNonConvergence(f"hull-restricted LP status {res.status}")
    if res.x[nv] > tol.lp_eps * scale:
        return None
    lam = res.x[:nv]
    lam = np.clip(lam, 0.0, None)
    lam /= lam.sum()
    return lam @ v.vertices


def in_hull(point, v: VPolytope, tol: Tolerances = DEFAULT_TOL) -> bool:
    """LP membership test: is the point a convex combination of vertices?"""
    x = np.atleast_1d(np.asarray(point, dtype=float))
    if x.shape[0] != v.dim:
        raise DimensionMismatch("point dimension does not match polytope")
    scale = max(1.0, float(np.abs(v.vertices).max()))
    a_eq = np.vstack([v.vertices.T, np.ones(v.nv)])
    b_eq = np.concatenate([x, [1.0]])
    res = solve_lp(np.zeros(v.nv), a_eq=a_eq, b_eq=b_eq,
                   nonneg=np.ones(v.nv, dtype=bool),
                   feas_eps=tol.lp_eps * scale)
    return res.status == OPTIMAL


def support_hpoly(h: HPolytope, direction, tol: Tolerances = DEFAULT_TOL):
    """(support value, maximizer) of a halfspace set; (inf, None) if unbounded."""
    d = np.atleast_1d(np.asarray(direction, dtype=float))
    if d.shape[0] != h.dim:
        raise DimensionMismatch("direction dimension mismatch")
    if h.nrows == 0:
        return np.inf, None
    res = solve_lp(-d, h.normals, h.offsets, feas_eps=tol.lp_eps)
    if res.status == UNBOUNDED:
        return np.inf, None
    if res.status == INFEASIBLE:
        raise EmptySetError("support query on an empty set")
    return float(d @ res.x), res.x


def hpoly_is_empty(h: HPolytope, tol: Tolerances = DEFAULT_TOL) -> bool:
    return lp_feasible_point(h, tol) is None


def hpoly_to_vpolytope(h: HPolytope, tol: Tolerances = DEFAULT_TOL) -> VPolytope:
    """Vertex enumeration of a bounded halfspace set, dims 1..3.

    Raises EmptySetError / UnboundedSetError / UnsupportedDimension for the
    respective degenerate inputs.  Vertices from candidate-plane crossings
    are accurate to about 10 * geom_eps.
    """
    d = h.dim
    if d > 3:
        raise UnsupportedDimension("vertex enumeration available for dim <= 3 only")
    if lp_feasible_point(h, tol) is None:
        raise EmptySetError("halfspace set is empty")
    for axis in range(d):
        u = np.zeros(d)
        for sign in (1.0, -1.0):
            u[axis] = sign
            val, _ = support_hpoly(h, u, tol)
            if not np.isfinite(val):
                raise UnboundedSetError("halfspace set is unbounded")
        u[axis] = 0.0

    scale = max(1.0, float(np.abs(h.offsets).max()))
    feas_eps = max(10.0 * tol.geom_eps, 1e-11) * scale
    if d == 1:
        n = h.normals[:, 0]
        upper = np.min(h.offsets[n > 0] / n[n > 0])
        lower = np.max(h.offsets[n < 0] / n[n < 0])
        if upper < lower - feas_eps:  # pragma: no cover - emptiness caught above
            raise EmptySetError("halfspace set is empty")
        pts = np.array([[lower], [upper]])
        return VPolytope(pts[dedupe_indices(pts, tol.geom_eps)])

    cand = []
    for combo in combinations(range(h.nrows), d):
        a = h.normals[list(combo)]
        if abs(np.linalg.det(a)) < 1e-10:
            continue
        x = np.linalg.solve(a, h.offsets[list(combo)])
        cand.append(x)
    if not cand:
        raise GeometryError("no candidate vertices found")
    cand = np.asarray(cand)
    ok = cand[h.contains(cand, eps=feas_eps)]
    if ok.shape[0] == 0:
        raise GeometryError("vertex enumeration found no feasible candidates")
    ok = ok[dedupe_indices(ok, tol.geom_eps)]
    return VPolytope(ok[prune_indices(ok, tol)])


def inscribed_box(v: VPolytope, tol: Tolerances = DEFAULT_TOL):
    """Large axis-aligned box inside conv(v), by LP over facets (dim <= 3).

    Maximizes the sum of the half-widths plus the smallest half-width, so
    the optimum does not collapse to a zero-width slab.  Returns (center,
    radii); radii may still be zero along genuinely flat directions.
    """
    d = v.dim
    if d > 3:
        raise UnsupportedDimension("inscribed box needs facet enumeration (dim <= 3)")
    h = convex_hull_h(v.vertices, tol)
    # variables: center (free), radii (nonneg), t = min radius (nonneg)
    c = np.concatenate([np.zeros(d), -np.ones(d), [-1.0]])
    a_ub = np.hstack([h.normals, np.abs(h.normals), np.zeros((h.nrows, 1))])
    tmin = np.hstack([np.zeros((d, d)), -np.eye(d), np.ones((d, 1))])
    a_ub = np.vstack([a_ub, tmin])
    b_ub = np.concatenate([h.offsets, np.zeros(d)])
    nonneg = np.concatenate([np.zeros(d, dtype=bool), np.ones(d + 1, dtype=bool)])
    res = solve_lp(c, a_ub, b_ub, nonneg=nonneg, feas_eps=tol.lp_eps)
    if res.status != OPTIMAL:  # pragma: no cover - hull is bounded and nonempty
        raise LpNonConvergence(f"inscribed-box LP status {res.status}")
    return res.x[:d], np.clip(res.x[d:2 * d], 0.0, None)
