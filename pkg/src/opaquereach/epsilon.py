"""Quantitative opacity: how far can a secret output stray from cover?

The opacity radius is the largest distance from a secret output to the
nonsecret output set.  Distance to a convex set is a convex function, so
over the convex secret output polytope the maximum sits at a vertex; the
radius therefore reduces to one batched vertex-to-hull distance query, and
threshold checks compare it against epsilon.  Radius zero (up to
tolerance) is exactly the strong inclusion property.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import GeometryError, vertex_hull_distances
from .opacity import ScheduleVerdict, Status, _as_vpoly, _check_horizon, output_reach
from .system import Scenario

__all__ = ["EpsVerdict", "opacity_radius", "check_eps_k_iso", "check_eps_K_iso"]


@dataclass(frozen=True)
class EpsVerdict:
    """Radius-vs-threshold outcome at one time index."""

    radius: float
    threshold: float
    status: Status
    argmax_vertex: np.ndarray
    k: int

    def __bool__(self):
        return self.status is Status.HOLDS


def opacity_radius(sc: Scenario, k, vertex_cap=200_000):
    """Largest distance from a secret output vertex to the nonsecret hull.

    Returns (radius, attaining vertex).  The maximum over the whole secret
    output set is attained at a vertex because the distance function is
    convex; the test suite re-derives this against a dense grid search.
    """
    k = _check_horizon(k)
    tol = sc.tol
    vs, _ = _as_vpoly(output_reach(sc, k, "secret", vertex_cap=vertex_cap), tol)
    vn, _ = _as_vpoly(output_reach(sc, k, "nonsecret", vertex_cap=vertex_cap), tol)
    dists = vertex_hull_distances(vs, vn, tol)
    top = int(np.argmax(dists))
    return float(dists[top]), vs.vertices[top]


def check_eps_k_iso(sc: Scenario, k, eps, vertex_cap=200_000) -> EpsVerdict:
    """Is every secret output within eps of a nonsecret output at time k?"""
    if eps < 0.0:
        raise GeometryError("epsilon must be nonnegative")
    k = _check_horizon(k)
    radius, vertex = opacity_radius(sc, k, vertex_cap=vertex_cap)
    status = Status.HOLDS if radius <= eps + sc.tol.geom_eps else Status.FAILS
    return EpsVerdict(radius, float(eps), status, vertex, k)


def check_eps_K_iso(sc: Scenario, eps, vertex_cap=200_000) -> ScheduleVerdict:
    """The epsilon check at every time in the scenario schedule."""
    per_k = {k: check_eps_k_iso(sc, k, eps, vertex_cap=vertex_cap)
             for k in sc.schedule}
    bad = [k for k in sc.schedule if per_k[k].status is Status.FAILS]
    status = Status.FAILS if bad else Status.HOLDS
    return ScheduleVerdict("epsilon", per_k, status, bad[0] if bad else None)
