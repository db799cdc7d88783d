"""Pure numpy GJK distance kernel.

Reference implementation of the same algorithm as the compiled core in
``_gjk_core.pyx``: GJK over the Minkowski difference of two vertex sets,
with the min-norm point of the working simplex found by subset enumeration
(solve the equality-constrained least-norm system per subset, keep the
best candidate whose barycentric coordinates are nonnegative and whose
projection supports the whole simplex).
"""

from __future__ import annotations

import numpy as np

_BARY_TOL = 1e-12


def _min_norm_simplex(w):
    """Min-norm point of conv(w) (rows).  Returns (v, lam over rows)."""
    ns = w.shape[0]
    scale2 = max(1.0, float(np.max(np.abs(w))) ** 2)
    gram = w @ w.T
    best_norm2 = np.inf
    best_lam = None
    fallback_norm2 = np.inf
    fallback_lam = None
    for mask in range(1, 1 << ns):
        idx = [i for i in range(ns) if (mask >> i) & 1]
        s = len(idx)
        kkt = np.empty((s + 1, s + 1))
        kkt[:s, :s] = 2.0 * gram[np.ix_(idx, idx)]
        kkt[:s, s] = 1.0
        kkt[s, :s] = 1.0
        kkt[s, s] = 0.0
        rhs = np.zeros(s + 1)
        rhs[s] = 1.0
        try:
            sol = np.linalg.solve(kkt, rhs)
        except np.linalg.LinAlgError:
            continue
        lam_s = sol[:s]
        if np.any(lam_s < -_BARY_TOL):
            continue
        v = lam_s @ w[idx]
        norm2 = float(v @ v)
        lam = np.zeros(ns)
        lam[idx] = np.clip(lam_s, 0.0, None)
        if norm2 < fallback_norm2:
            fallback_norm2 = norm2
            fallback_lam = lam
        # optimality over the full simplex: no vertex strictly closer side
        if np.all(w @ v >= norm2 - 1e-9 * scale2):
            if norm2 < best_norm2:
                best_norm2 = norm2
                best_lam = lam
    if best_lam is None:
        best_lam = fallback_lam
        best_norm2 = fallback_norm2
    if best_lam is None:  # pragma: no cover - size-1 subsets always solve
        best_lam = np.zeros(ns)
        best_lam[0] = 1.0
    s = best_lam.sum()
    if s > 0:
        best_lam = best_lam / s
    return best_lam @ w, best_lam


def gjk_pair(p, q, eps=1e-10, max_iter=200):
    """Distance between conv(p) and conv(q), with closest-point weights.

    Parameters
    ----------
    p, q : (n, d) vertex arrays.
    eps : relative termination tolerance.

    Returns
    -------
    dist : float
    wp, wq : barycentric weight vectors over the rows of p and q whose
        weighted sums are the closest points.
    """
    p = np.ascontiguousarray(p, dtype=float)
    q = np.ascontiguousarray(q, dtype=float)
    if p.ndim != 2 or q.ndim != 2 or p.shape[1] != q.shape[1]:
        raise ValueError("gjk_pair needs (n, d) arrays of equal dimension")
    d = p.shape[1]
    scale = max(1.0, float(np.max(np.abs(p))), float(np.max(np.abs(q))))
    zero2 = (eps * scale) ** 2

    pairs = [(0, 0)]
    w = (p[0] - q[0])[None, :]
    v = w[0]
    lam = np.ones(1)
    for _ in range(max_iter):
        v, lam = _min_norm_simplex(w)
        vv = float(v @ v)
        if vv <= zero2:
            break
        ip = int(np.argmax(p @ -v))
        iq = int(np.argmax(q @ v))
        wnew = p[ip] - q[iq]
        if vv - float(v @ wnew) <= eps * vv:
            break
        if (ip, iq) in pairs:
            break
        keep = lam > _BARY_TOL
        pairs = [pr for pr, k in zip(pairs, keep) if k]
        w = w[keep]
        pairs.append((ip, iq))
        w = np.vstack([w, wnew])
        if w.shape[0] > d + 1:
            drop = int(np.argmin(np.concatenate([lam[keep], [np.inf]])))
            sel = np.ones(w.shape[0], dtype=bool)
            sel[drop] = False
            w = w[sel]
            pairs = [pr for pr, k in zip(pairs, sel) if k]

    v, lam = _min_norm_simplex(w)
    wp = np.zeros(p.shape[0])
    wq = np.zeros(q.shape[0])
    for (ip, iq), l in zip(pairs, lam):
        wp[ip] += l
        wq[iq] += l
    return float(np.linalg.norm(v)), wp, wq


def point_hull_distances(pts, q, eps=1e-10, max_iter=200):
    """Distance from each row of pts to conv(q)."""
    pts = np.ascontiguousarray(pts, dtype=float)
    if pts.ndim == 1:
        pts = pts[None, :]
    out = np.empty(pts.shape[0])
    for i in range(pts.shape[0]):
        out[i], _, _ = gjk_pair(pts[i][None, :], q, eps, max_iter)
    return out
