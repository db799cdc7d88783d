"""GJK front end: backend selection and the hull predicates built on it.

The compiled kernel from ``_gjk_core`` is preferred when importable; the
numpy twin in ``_gjk_py`` is the fallback and can be forced by setting
``OPAQUE_REACH_PURE=1`` (useful for benchmarking and debugging).  Both
kernels implement the identical algorithm, so results agree to rounding.
"""

from __future__ import annotations

import os

import numpy as np

from . import _gjk_py
from .sets import DEFAULT_TOL, DimensionMismatch, Tolerances, VPolytope

try:
    from . import _gjk_core
except ImportError:  # pragma: no cover - build environment dependent
    _gjk_core = None

_FORCE_PURE = os.environ.get("OPAQUE_REACH_PURE", "") not in ("", "0")
_COMPILED_MAX_DIM = 16


def backend_name() -> str:
    return "pure" if (_gjk_core is None or _FORCE_PURE) else "compiled"


def _kernel(dim):
    if _gjk_core is None or _FORCE_PURE or dim > _COMPILED_MAX_DIM:
        return _gjk_py
    return _gjk_core


def gjk_distance(p: VPolytope, q: VPolytope, tol: Tolerances = DEFAULT_TOL) -> float:
    """Euclidean distance between two V-polytopes (0 when they intersect)."""
    if p.dim != q.dim:
        raise DimensionMismatch("polytopes live in different dimensions")
    dist, _, _ = _kernel(p.dim).gjk_pair(p.vertices, q.vertices, tol.gjk_eps)
    return dist


def gjk_closest(p: VPolytope, q: VPolytope, tol: Tolerances = DEFAULT_TOL):
    """Distance plus closest points and their barycentric weights.

    Returns
    -------
    dist : float
    cp, cq : closest points on conv(p) and conv(q)
    wp, wq : barycentric weights over the vertex rows realizing cp and cq
    """
    if p.dim != q.dim:
        raise DimensionMismatch("polytopes live in different dimensions")
    dist, wp, wq = _kernel(p.dim).gjk_pair(p.vertices, q.vertices, tol.gjk_eps)
    return dist, wp @ p.vertices, wq @ q.vertices, wp, wq


def point_hull_distance(point, q: VPolytope, tol: Tolerances = DEFAULT_TOL) -> float:
    pt = np.atleast_1d(np.asarray(point, dtype=float))
    if pt.shape[0] != q.dim:
        raise DimensionMismatch("point dimension mismatch")
    dist, _, _ = _kernel(q.dim).gjk_pair(pt[None, :], q.vertices, tol.gjk_eps)
    return dist


def vertex_hull_distances(p: VPolytope, q: VPolytope,
                          tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    """Distance from every vertex of p to conv(q); the hot batched query."""
    if p.dim != q.dim:
        raise DimensionMismatch("polytopes live in different dimensions")
    return np.asarray(
        _kernel(p.dim).point_hull_distances(p.vertices, q.vertices, tol.gjk_eps))


def hull_contains(inner: VPolytope, outer: VPolytope,
                  tol: Tolerances = DEFAULT_TOL) -> bool:
    """conv(inner) within conv(outer), up to geom_eps (touching counts)."""
    dists = vertex_hull_distances(inner, outer, tol)
    return bool(np.all(dists <= tol.geom_eps))


def hulls_intersect(p: VPolytope, q: VPolytope,
                    tol: Tolerances = DEFAULT_TOL) -> bool:
    """Nonempty intersection of two hulls, up to geom_eps (touching counts)."""
    return gjk_distance(p, q, tol) <= tol.geom_eps


def hulls_equal(p: VPolytope, q: VPolytope, tol: Tolerances = DEFAULT_TOL) -> bool:
    return hull_contains(p, q, tol) and hull_contains(q, p, tol)
