"""Polytope and zonotope primitives used by the reachability engine.

Conventions
-----------
Points are rows.  A ``VPolytope`` is the convex hull of a finite vertex
array ``(nv, dim)``; an ``HPolytope`` is ``{x : N x <= o}`` with unit row
normals and may be unbounded or empty; a ``Zonotope`` is ``{c + G^T xi :
xi in [-1, 1]^g}`` with generators stored as rows ``(g, dim)``.

Exact hull facet enumeration is only available for ``dim <= 3`` (qhull
plus a degeneracy layer for flat point sets); higher dimensions keep
vertex representations unpruned.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull, QhullError


class GeometryError(ValueError):
    """Base class for geometric input errors."""


class DimensionMismatch(GeometryError):
    pass


class UnsupportedDimension(GeometryError):
    """Raised when an exact-hull operation is requested above dimension 3."""


class EmptySetError(GeometryError):
    pass


class UnboundedSetError(GeometryError):
    pass


@dataclass(frozen=True)
class Tolerances:
    """Numeric tolerances shared across the engine.

    geom_eps is the containment/touching tolerance, lp_eps the feasibility
    slack of the simplex solver, gjk_eps the relative termination tolerance
    of the distance kernel.
    """

    geom_eps: float = 1e-9
    lp_eps: float = 1e-9
    gjk_eps: float = 1e-10

    def __post_init__(self):
        for name in ("geom_eps", "lp_eps", "gjk_eps"):
            v = getattr(self, name)
            if not (0.0 < v < 1.0):
                raise GeometryError(f"{name} must be in (0, 1), got {v}")


DEFAULT_TOL = Tolerances()


def _as_points(arr, name="vertices"):
    pts = np.ascontiguousarray(np.asarray(arr, dtype=float))
    if pts.ndim == 1:
        pts = pts[None, :]
    if pts.ndim != 2 or pts.shape[1] == 0:
        raise GeometryError(f"{name} must be a (n, dim) array, got shape {pts.shape}")
    if pts.shape[0] == 0:
        raise EmptySetError(f"{name} must contain at least one point")
    if not np.all(np.isfinite(pts)):
        raise GeometryError(f"{name} must be finite")
    return pts


class VPolytope:
    """Convex hull of a finite, nonempty vertex set."""

    __slots__ = ("vertices",)

    def __init__(self, vertices):
        pts = _as_points(vertices)
        pts.setflags(write=False)
        object.__setattr__(self, "vertices", pts)

    def __setattr__(self, name, value):
        raise AttributeError("VPolytope is immutable")

    @property
    def dim(self):
        return self.vertices.shape[1]

    @property
    def nv(self):
        return self.vertices.shape[0]

    @classmethod
    def from_box(cls, lo, hi):
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise DimensionMismatch("box bounds must be equal-length vectors")
        if np.any(hi < lo):
            raise GeometryError("box upper bounds must dominate lower bounds")
        return cls(box_vertices(lo, hi))

    @classmethod
    def singleton(cls, point):
        return cls(np.atleast_1d(np.asarray(point, dtype=float))[None, :])

    def bounding_box(self):
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def centroid(self):
        return self.vertices.mean(axis=0)

    def translate(self, offset):
        return VPolytope(self.vertices + np.asarray(offset, dtype=float))

    def pruned(self, tol: Tolerances = DEFAULT_TOL):
        keep = prune_indices(self.vertices, tol)
        return VPolytope(self.vertices[keep])

    def __repr__(self):
        return f"VPolytope(nv={self.nv}, dim={self.dim})"


class HPolytope:
    """Intersection of halfspaces {x : N x <= o}; may be empty or unbounded."""

    __slots__ = ("normals", "offsets")

    def __init__(self, normals, offsets, dim=None):
        normals = np.ascontiguousarray(np.asarray(normals, dtype=float))
        offsets = np.atleast_1d(np.asarray(offsets, dtype=float))
        if normals.size == 0:
            if dim is None:
                raise GeometryError("empty halfspace list requires an explicit dim")
            normals = np.zeros((0, dim))
            offsets = np.zeros(0)
        if normals.ndim != 2:
            raise GeometryError("normals must be a (rows, dim) array")
        if offsets.shape != (normals.shape[0],):
            raise DimensionMismatch("offsets must match the number of normal rows")
        if not (np.all(np.isfinite(normals)) and np.all(np.isfinite(offsets))):
            raise GeometryError("halfspace data must be finite")
        normals.setflags(write=False)
        offsets.setflags(write=False)
        object.__setattr__(self, "normals", normals)
        object.__setattr__(self, "offsets", offsets)

    def __setattr__(self, name, value):
        raise AttributeError("HPolytope is immutable")

    @property
    def dim(self):
        return self.normals.shape[1]

    @property
    def nrows(self):
        return self.normals.shape[0]

    def contains(self, points, eps=0.0):
        """Vectorized membership test; points (n, dim) or (dim,)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[1] != self.dim:
            raise DimensionMismatch("point dimension does not match halfspaces")
        if self.nrows == 0:
            return np.ones(pts.shape[0], dtype=bool)
        slack = self.offsets[None, :] - pts @ self.normals.T
        return np.all(slack >= -eps, axis=1)

    def violation(self, points):
        """Max constraint violation per point (<= 0 means inside)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self.nrows == 0:
            return np.full(pts.shape[0], -np.inf)
        return np.max(pts @ self.normals.T - self.offsets[None, :], axis=1)

    def intersect(self, other: "HPolytope"):
        if other.dim != self.dim:
            raise DimensionMismatch("cannot intersect halfspace systems of different dims")
        return HPolytope(
            np.vstack([self.normals, other.normals]),
            np.concatenate([self.offsets, other.offsets]),
            dim=self.dim,
        )

    def __repr__(self):
        return f"HPolytope(rows={self.nrows}, dim={self.dim})"


class Zonotope:
    """Centrally symmetric set c + sum_i xi_i g_i with xi in [-1, 1]^g."""

    __slots__ = ("center", "generators")

    def __init__(self, center, generators=None):
        center = np.atleast_1d(np.asarray(center, dtype=float))
        if center.ndim != 1:
            raise GeometryError("center must be a vector")
        if generators is None:
            generators = np.zeros((0, center.shape[0]))
        gens = np.ascontiguousarray(np.asarray(generators, dtype=float))
        if gens.size == 0:
            gens = np.zeros((0, center.shape[0]))
        if gens.ndim != 2 or gens.shape[1] != center.shape[0]:
            raise DimensionMismatch("generators must be (g, dim) rows matching the center")
        if not (np.all(np.isfinite(center)) and np.all(np.isfinite(gens))):
            raise GeometryError("zonotope data must be finite")
        center.setflags(write=False)
        gens.setflags(write=False)
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "generators", gens)

    def __setattr__(self, name, value):
        raise AttributeError("Zonotope is immutable")

    @property
    def dim(self):
        return self.center.shape[0]

    @property
    def ngens(self):
        return self.generators.shape[0]

    @property
    def order(self):
        return self.ngens / self.dim

    @classmethod
    def from_box(cls, lo, hi):
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        if lo.shape != hi.shape:
            raise DimensionMismatch("box bounds must be equal-length vectors")
        if np.any(hi < lo):
            raise GeometryError("box upper bounds must dominate lower bounds")
        center = 0.5 * (lo + hi)
        radii = 0.5 * (hi - lo)
        gens = np.diag(radii)
        gens = gens[np.any(gens != 0.0, axis=1)]
        return cls(center, gens)

    def interval_hull(self):
        radius = np.sum(np.abs(self.generators), axis=0) if self.ngens else np.zeros(self.dim)
        return self.center - radius, self.center + radius

    def support(self, direction):
        d = np.asarray(direction, dtype=float)
        return float(self.center @ d + np.sum(np.abs(self.generators @ d)))

    def image(self, matrix):
        m = np.asarray(matrix, dtype=float)
        if m.shape[1] != self.dim:
            raise DimensionMismatch("matrix columns must match zonotope dim")
        return Zonotope(m @ self.center, self.generators @ m.T)

    def sum(self, other: "Zonotope"):
        if other.dim != self.dim:
            raise DimensionMismatch("cannot sum zonotopes of different dims")
        return Zonotope(self.center + other.center,
                        np.vstack([self.generators, other.generators]))

    def translate(self, offset):
        return Zonotope(self.center + np.asarray(offset, dtype=float), self.generators)

    def __repr__(self):
        return f"Zonotope(dim={self.dim}, ngens={self.ngens})"


def box_vertices(lo, hi):
    """Corner enumeration of an axis-aligned box, deterministic order."""
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    d = lo.shape[0]
    corners = np.empty((2 ** d, d))
    for i in range(2 ** d):
        for j in range(d):
            corners[i, j] = hi[j] if (i >> j) & 1 else lo[j]
    return corners


def dedupe_indices(points, tol=1e-9):
    """Indices of first occurrences after snapping coordinates to a tol grid."""
    pts = np.asarray(points, dtype=float)
    if pts.shape[0] <= 1:
        return np.arange(pts.shape[0])
    step = max(tol, 1e-15)
    keys = np.round(pts / step).astype(np.int64)
    _, first = np.unique(keys, axis=0, return_index=True)
    return np.sort(first)


def affine_basis(points, tol=1e-9):
    """Orthonormal basis of the affine span of a point set.

    Returns
    -------
    center : ndarray (dim,)
    basis : ndarray (dim, rank)
    complement : ndarray (dim, dim - rank)
    """
    pts = np.asarray(points, dtype=float)
    center = pts.mean(axis=0)
    m = pts - center
    _, svals, vt = np.linalg.svd(m, full_matrices=True)
    scale = max(1.0, float(np.abs(pts).max()))
    thresh = max(tol * scale, 1e-13 * scale)
    rank = int(np.sum(svals > thresh))
    basis = vt[:rank].T
    complement = vt[rank:].T
    return center, basis, complement


def prune_indices(points, tol: Tolerances = DEFAULT_TOL):
    """Indices of points that are extreme in their convex hull.

    Exact for affine rank <= 3 (qhull on subspace coordinates); for higher
    rank only duplicate points are removed.
    """
    pts = np.asarray(points, dtype=float)
    kept = dedupe_indices(pts, tol.geom_eps)
    sub = pts[kept]
    if sub.shape[0] <= 2:
        return kept
    center, basis, _ = affine_basis(sub, tol.geom_eps)
    rank = basis.shape[1]
    if rank == 0:
        return kept[:1]
    coords = (sub - center) @ basis
    if rank == 1:
        lohi = np.unique([int(np.argmin(coords[:, 0])), int(np.argmax(coords[:, 0]))])
        return kept[lohi]
    if rank > 3:
        return kept
    try:
        hull = ConvexHull(coords)
    except QhullError:
        return kept
    return kept[np.sort(hull.vertices)]


def convex_hull_h(points, tol: Tolerances = DEFAULT_TOL) -> HPolytope:
    """Facet (H-rep) description of the convex hull of a point set.

    Supports ambient dims 1..3.  Flat hulls are described exactly by paired
    opposing halfspaces padded by geom_eps along the degenerate directions.
    """
    pts = _as_points(points)
    d = pts.shape[1]
    if d > 3:
        raise UnsupportedDimension(f"hull facets only available for dim <= 3, got {d}")
    pts = pts[dedupe_indices(pts, tol.geom_eps)]
    center, basis, complement = affine_basis(pts, tol.geom_eps)
    rank = basis.shape[1]
    pad = tol.geom_eps
    normals = []
    offsets = []
    for j in range(complement.shape[1]):
        u = complement[:, j]
        c = float(u @ center)
        normals.extend([u, -u])
        offsets.extend([c + pad, -c + pad])
    if rank == 1:
        coords = (pts - center) @ basis
        u = basis[:, 0]
        c = float(u @ center)
        normals.extend([u, -u])
        offsets.extend([float(coords[:, 0].max()) + c, -(float(coords[:, 0].min()) + c)])
    elif rank >= 2:
        coords = (pts - center) @ basis
        try:
            hull = ConvexHull(coords)
        except QhullError as exc:
            raise GeometryError(f"hull construction failed: {exc}") from None
        for eq in hull.equations:
            a = eq[:-1]
            beta = -eq[-1]
            amb = basis @ a
            normals.append(amb)
            offsets.append(beta + float(amb @ center))
    if not normals:
        # single point: complement covers every axis already unless d == 0
        raise GeometryError("could not build halfspaces")
    normals = np.asarray(normals)
    offsets = np.asarray(offsets)
    norms = np.linalg.norm(normals, axis=1)
    good = norms > 1e-13
    normals = normals[good] / norms[good, None]
    offsets = offsets[good] / norms[good]
    keep = dedupe_indices(np.column_stack([normals, offsets]), 1e-12)
    return HPolytope(normals[keep], offsets[keep], dim=d)


def minkowski_sum_points(p, q):
    """Pairwise vertex sums of two point arrays.

    Returns
    -------
    sums : ndarray ((np*nq), dim)
    ip, iq : index arrays mapping each sum row to its source rows.
    """
    p = _as_points(p, "first operand")
    q = _as_points(q, "second operand")
    if p.shape[1] != q.shape[1]:
        raise DimensionMismatch("operands must share a dimension")
    np_, nq = p.shape[0], q.shape[0]
    ip = np.repeat(np.arange(np_), nq)
    iq = np.tile(np.arange(nq), np_)
    return p[ip] + q[iq], ip, iq


def minkowski_sum(p: VPolytope, q: VPolytope, tol: Tolerances = DEFAULT_TOL) -> VPolytope:
    pts, _, _ = minkowski_sum_points(p.vertices, q.vertices)
    if p.dim <= 3:
        pts = pts[prune_indices(pts, tol)]
    return VPolytope(pts)


def linear_image(matrix, p: VPolytope, tol: Tolerances = DEFAULT_TOL,
                 prune=True) -> VPolytope:
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2 or m.shape[1] != p.dim:
        raise DimensionMismatch(
            f"matrix shape {m.shape} does not apply to dim-{p.dim} polytope")
    pts = p.vertices @ m.T
    if prune and m.shape[0] <= 3:
        pts = pts[prune_indices(pts, tol)]
    return VPolytope(pts)


def interval_hull_points(points):
    pts = _as_points(points)
    return pts.min(axis=0), pts.max(axis=0)


def reduce_over(z: Zonotope, order: float) -> Zonotope:
    """Order reduction that over-approximates: smallest generators are merged
    into their interval hull (an axis-aligned box enclosing their sum)."""
    if order < 1.0:
        raise GeometryError("reduction order must be >= 1")
    budget = int(np.floor(order * z.dim))
    if z.ngens <= budget:
        return z
    norms = np.linalg.norm(z.generators, axis=1)
    idx = np.argsort(-norms, kind="stable")
    n_keep = max(budget - z.dim, 0)
    kept = z.generators[np.sort(idx[:n_keep])]
    rest = z.generators[np.sort(idx[n_keep:])]
    radii = np.sum(np.abs(rest), axis=0)
    box = np.diag(radii)
    box = box[np.any(box != 0.0, axis=1)]
    return Zonotope(z.center, np.vstack([kept, box]) if kept.size else box)


def reduce_under(z: Zonotope, order: float) -> Zonotope:
    """Order reduction that under-approximates: smallest generators dropped."""
    if order < 1.0:
        raise GeometryError("reduction order must be >= 1")
    budget = int(np.floor(order * z.dim))
    if z.ngens <= budget:
        return z
    norms = np.linalg.norm(z.generators, axis=1)
    idx = np.argsort(-norms, kind="stable")
    return Zonotope(z.center, z.generators[np.sort(idx[:budget])])


def zonotope_to_vpolytope(z: Zonotope, tol: Tolerances = DEFAULT_TOL,
                          max_generators=12) -> VPolytope:
    """Exact V-representation of a zonotope.

    Incremental with hull pruning for dim <= 3 (polynomial vertex growth);
    direct sign-pattern enumeration otherwise, capped at max_generators.
    """
    if z.ngens == 0:
        return VPolytope(z.center[None, :])
    if z.dim <= 3:
        pts = z.center[None, :]
        for g in z.generators:
            pts = np.vstack([pts - g, pts + g])
            pts = pts[prune_indices(pts, tol)]
        return VPolytope(pts)
    if z.ngens > max_generators:
        raise GeometryError(
            f"zonotope enumeration above dim 3 capped at {max_generators} "
            f"generators, got {z.ngens}")
    signs = box_vertices(-np.ones(z.ngens), np.ones(z.ngens))
    pts = z.center[None, :] + signs @ z.generators
    return VPolytope(pts[dedupe_indices(pts, tol.geom_eps)])


def vpolytope_to_zonotope_box(p: VPolytope) -> Zonotope:
    """Bounding-box zonotope of a V-polytope (an over-approximation)."""
    lo, hi = p.bounding_box()
    return Zonotope.from_box(lo, hi)


def support_values(s, directions):
    """Support function max_{x in s} d.x evaluated at each direction row."""
    dirs = np.atleast_2d(np.asarray(directions, dtype=float))
    if dirs.shape[0] == 0:
        return np.zeros(0)
    if isinstance(s, VPolytope):
        if dirs.shape[1] != s.dim:
            raise DimensionMismatch("direction dimension does not match the set")
        return np.max(dirs @ s.vertices.T, axis=1)
    if isinstance(s, Zonotope):
        if dirs.shape[1] != s.dim:
            raise DimensionMismatch("direction dimension does not match the set")
        return dirs @ s.center + np.sum(np.abs(dirs @ s.generators.T), axis=1)
    raise GeometryError(f"cannot evaluate support of {type(s).__name__}")
