"""Geometric primitives: polytopes, zonotopes, LP queries, GJK distance."""

from .sets import (DEFAULT_TOL, DimensionMismatch, EmptySetError, GeometryError,
                   HPolytope, Tolerances, UnboundedSetError, UnsupportedDimension,
                   VPolytope, Zonotope, affine_basis, box_vertices, convex_hull_h,
                   dedupe_indices, interval_hull_points, linear_image,
                   minkowski_sum, minkowski_sum_points, prune_indices,
                   reduce_over, reduce_under, support_values,
                   vpolytope_to_zonotope_box, zonotope_to_vpolytope)
from .lp import (INFEASIBLE, OPTIMAL, UNBOUNDED, LpNonConvergence, LpResult,
                 hpoly_is_empty, hpoly_to_vpolytope, in_hull, inscribed_box,
                 lp_feasible_in_hull, lp_feasible_point, solve_lp, support_hpoly)
from .gjk import (backend_name, gjk_closest, gjk_distance, hull_contains,
                  hulls_equal, hulls_intersect, point_hull_distance,
                  vertex_hull_distances)

__all__ = [
    "DEFAULT_TOL", "DimensionMismatch", "EmptySetError", "GeometryError",
    "HPolytope", "Tolerances", "UnboundedSetError", "UnsupportedDimension",
    "VPolytope", "Zonotope", "affine_basis", "box_vertices", "convex_hull_h",
    "dedupe_indices", "interval_hull_points", "linear_image", "minkowski_sum",
    "minkowski_sum_points", "prune_indices", "reduce_over", "reduce_under",
    "support_values", "vpolytope_to_zonotope_box", "zonotope_to_vpolytope",
    "INFEASIBLE", "OPTIMAL", "UNBOUNDED", "LpNonConvergence", "LpResult",
    "hpoly_is_empty", "hpoly_to_vpolytope", "in_hull", "inscribed_box",
    "lp_feasible_in_hull", "lp_feasible_point", "solve_lp", "support_hpoly",
    "backend_name", "gjk_closest", "gjk_distance", "hull_contains",
    "hulls_equal", "hulls_intersect", "point_hull_distance",
    "vertex_hull_distances",
]
