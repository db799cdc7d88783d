"""Independent oracles used to derive expected values for the test suite.

Everything here must stay independent of the library code paths it checks:
distances come from brute-force barycentric grid refinement, reach clouds
from definition-level simulation of gridded initial states and controls,
memberships from direct halfspace evaluation.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree


def compositions(total, parts):
    """All nonnegative integer tuples of the given length summing to total."""
    if parts == 1:
        yield (total,)
        return
    for head in range(total + 1):
        for rest in compositions(total - head, parts - 1):
            yield (head,) + rest


def simplex_grid(nverts, steps):
    """Barycentric weight grid over the (nverts-1)-simplex."""
    return np.array(list(compositions(steps, nverts)), dtype=float) / steps


def grid_min_distance(p, q, steps=6, levels=52, max_evals=600):
    """Min distance between conv(p) and conv(q) by multilevel grid refinement.

    Pure grid minimization: a barycentric grid is evaluated inside a window
    around the incumbent; while a grid point improves, the window recenters
    at the same scale, and once a scale stalls the window halves.  Convexity
    of the squared distance drives the refined minima to the true minimum.
    """
    p = np.atleast_2d(np.asarray(p, dtype=float))
    q = np.atleast_2d(np.asarray(q, dtype=float))
    gp = simplex_grid(p.shape[0], steps)
    gq = simplex_grid(q.shape[0], steps)
    wp = np.full(p.shape[0], 1.0 / p.shape[0])
    wq = np.full(q.shape[0], 1.0 / q.shape[0])
    rho = 1.0
    best = np.inf
    level = 0
    evals = 0
    while level < levels and evals < max_evals:
        cand_p = (1.0 - rho) * wp[None, :] + rho * gp
        cand_q = (1.0 - rho) * wq[None, :] + rho * gq
        a = cand_p @ p
        b = cand_q @ q
        d2 = ((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=-1)
        i, j = np.unravel_index(int(np.argmin(d2)), d2.shape)
        evals += 1
        if d2[i, j] < best - 1e-30:
            best = d2[i, j]
            wp = cand_p[i]
            wq = cand_q[j]
        else:
            rho *= 0.5
            level += 1
    return float(np.sqrt(best))


def grid_max_vertex_distance(p, q, steps=6, levels=48):
    """Max over vertices of p of the distance to conv(q), by the grid oracle."""
    p = np.atleast_2d(np.asarray(p, dtype=float))
    return max(grid_min_distance(v[None, :], q, steps, levels) for v in p)


def brute_face_distance(p, q, max_support=5):
    """Exact hull distance by exhaustive face-pair enumeration.

    For every pair of vertex subsets (affinely independent candidate faces)
    solve the equality-constrained closest-point system between the two
    affine hulls; keep solutions whose barycentric coordinates are feasible.
    Exhaustive and direct, so it is independent of the iterative GJK path.
    """
    from itertools import combinations

    p = np.atleast_2d(np.asarray(p, dtype=float))
    q = np.atleast_2d(np.asarray(q, dtype=float))
    d = p.shape[1]
    best = np.inf
    cap = min(d + 1, max_support)
    subs_p = [list(s) for r in range(1, min(cap, p.shape[0]) + 1)
              for s in combinations(range(p.shape[0]), r)]
    subs_q = [list(s) for r in range(1, min(cap, q.shape[0]) + 1)
              for s in combinations(range(q.shape[0]), r)]
    for sp in subs_p:
        a = p[sp]
        for sq in subs_q:
            b = q[sq]
            na, nb = len(sp), len(sq)
            # KKT of min |a^T al - b^T be|^2 st sum al = 1, sum be = 1
            size = na + nb + 2
            kkt = np.zeros((size, size))
            kkt[:na, :na] = 2.0 * (a @ a.T)
            kkt[:na, na:na + nb] = -2.0 * (a @ b.T)
            kkt[na:na + nb, :na] = -2.0 * (b @ a.T)
            kkt[na:na + nb, na:na + nb] = 2.0 * (b @ b.T)
            kkt[:na, na + nb] = 1.0
            kkt[na + nb, :na] = 1.0
            kkt[na:na + nb, na + nb + 1] = 1.0
            kkt[na + nb + 1, na:na + nb] = 1.0
            rhs = np.zeros(size)
            rhs[na + nb] = 1.0
            rhs[na + nb + 1] = 1.0
            try:
                sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
            except np.linalg.LinAlgError:  # pragma: no cover
                continue
            resid_scale = 1.0 + np.abs(kkt).max() * (1.0 + np.abs(sol).max())
            if np.linalg.norm(kkt @ sol - rhs) > 1e-8 * resid_scale:
                continue  # singular system, not actually solved
            al, be = sol[:na], sol[na:na + nb]
            if np.any(al < -1e-9) or np.any(be < -1e-9):
                continue
            if abs(al.sum() - 1.0) > 1e-7 or abs(be.sum() - 1.0) > 1e-7:
                continue
            val = np.linalg.norm(al @ a - be @ b)
            if val < best:
                best = val
    return float(best)


def box_grid(lo, hi, pts_per_axis):
    """Regular lattice over an axis-aligned box, endpoints included."""
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    axes = [np.linspace(lo[j], hi[j], pts_per_axis) for j in range(lo.shape[0])]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([m.ravel() for m in mesh])


def _dedupe(points, decimals=9):
    return np.unique(np.round(points, decimals), axis=0)


def output_cloud(a, b, c, x0_lo, x0_hi, u_lo, u_hi, k, x_pts, u_pts):
    """All outputs y(k) reachable from gridded initial states and controls.

    Definition-level: y(k) = C A^k x0 + sum_j C A^(k-1-j) B u_j with x0 and
    every u_j on regular box lattices.  Control contributions are folded in
    one step at a time with deduplication, which keeps the cloud small.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    x0s = box_grid(x0_lo, x0_hi, x_pts)
    ak = np.linalg.matrix_power(a, k)
    cloud = _dedupe(x0s @ (c @ ak).T)
    if k > 0:
        ugrid = box_grid(u_lo, u_hi, u_pts)
        for j in range(k):
            m = c @ np.linalg.matrix_power(a, k - 1 - j) @ b
            contrib = _dedupe(ugrid @ m.T)
            cloud = _dedupe((cloud[:, None, :] + contrib[None, :, :])
                            .reshape(-1, cloud.shape[1]))
    return cloud


def covering_bound(a, b, c, x0_lo, x0_hi, u_lo, u_hi, k, x_pts, u_pts):
    """Upper bound on the covering radius of the gridded output cloud inside
    the exact output set: rounding x0 and every u_j to the lattice moves the
    output by at most this much."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    x0_lo = np.atleast_1d(np.asarray(x0_lo, dtype=float))
    x0_hi = np.atleast_1d(np.asarray(x0_hi, dtype=float))
    u_lo = np.atleast_1d(np.asarray(u_lo, dtype=float))
    u_hi = np.atleast_1d(np.asarray(u_hi, dtype=float))
    n = x0_lo.shape[0]
    m = u_lo.shape[0]
    sx = float(np.max((x0_hi - x0_lo))) / (x_pts - 1) if x_pts > 1 else 0.0
    su = float(np.max((u_hi - u_lo))) / (u_pts - 1) if u_pts > 1 else 0.0
    bound = np.linalg.norm(c @ np.linalg.matrix_power(a, k), 2) * 0.5 * sx * np.sqrt(n)
    for j in range(k):
        mj = c @ np.linalg.matrix_power(a, k - 1 - j) @ b
        bound += np.linalg.norm(mj, 2) * 0.5 * su * np.sqrt(m)
    return float(bound)


def max_nn_distance(cloud_a, cloud_b):
    """Max over cloud_a of the nearest-neighbour distance into cloud_b."""
    tree = cKDTree(cloud_b)
    d, _ = tree.query(cloud_a, k=1)
    return float(np.max(d))


def min_nn_distance(cloud_a, cloud_b):
    tree = cKDTree(cloud_b)
    d, _ = tree.query(cloud_a, k=1)
    return float(np.min(d))


def polygon_hull(points):
    """Counterclockwise hull vertices of a 2-D cloud (monotone chain)."""
    pts = sorted(map(tuple, np.asarray(points, dtype=float)))
    if len(pts) <= 2:
        return np.asarray(pts)

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower = []
    for pt in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], pt) <= 0:
            lower.pop()
        lower.append(pt)
    upper = []
    for pt in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], pt) <= 0:
            upper.pop()
        upper.append(pt)
    return np.asarray(lower[:-1] + upper[:-1])


def point_to_polygon_distance(point, poly):
    """Distance from a point to a convex polygon given by ccw vertices
    (0 inside), via elementary point-segment projections."""
    pt = np.asarray(point, dtype=float)
    poly = np.asarray(poly, dtype=float)
    nv = poly.shape[0]
    if nv == 1:
        return float(np.linalg.norm(pt - poly[0]))
    inside = True
    best = np.inf
    for i in range(nv):
        a = poly[i]
        bxt = poly[(i + 1) % nv]
        edge = bxt - a
        rel = pt - a
        if nv > 2:
            crossv = edge[0] * rel[1] - edge[1] * rel[0]
            if crossv < 0:
                inside = False
        ee = float(edge @ edge)
        t = 0.0 if ee == 0.0 else float(np.clip(rel @ edge / ee, 0.0, 1.0))
        best = min(best, float(np.linalg.norm(rel - t * edge)))
    if nv > 2 and inside:
        return 0.0
    return best
