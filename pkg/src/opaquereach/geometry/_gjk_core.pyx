# cython: language_level=3
"""Compiled GJK distance kernel.

Same algorithm as the numpy reference in ``_gjk_py.py`` (GJK over the
Minkowski difference, min-norm point by subset enumeration), with the
inner loops in C.  Supports ambient dimension up to 16; the dispatcher
falls back to the pure kernel above that.
"""

from libc.math cimport fabs, sqrt

import numpy as np

cimport numpy as cnp

cnp.import_array()

cdef enum:
    MAXD = 16        # max ambient dimension
    MAXS = 17        # max simplex size (d + 1)
    MAXK = 18        # max KKT system size (s + 1)

cdef double BARY_TOL = 1e-12


cdef bint _solve_dense(double* a, double* b, int n) noexcept nogil:
    """In-place Gaussian elimination with partial pivoting; False if singular."""
    cdef int i, j, k, piv
    cdef double amax, tmp, f
    for k in range(n):
        piv = k
        amax = fabs(a[k * n + k])
        for i in range(k + 1, n):
            if fabs(a[i * n + k]) > amax:
                amax = fabs(a[i * n + k])
                piv = i
        if amax < 1e-300:
            return False
        if piv != k:
            for j in range(n):
                tmp = a[k * n + j]
                a[k * n + j] = a[piv * n + j]
                a[piv * n + j] = tmp
            tmp = b[k]
            b[k] = b[piv]
            b[piv] = tmp
        for i in range(k + 1, n):
            f = a[i * n + k] / a[k * n + k]
            if f != 0.0:
                for j in range(k, n):
                    a[i * n + j] -= f * a[k * n + j]
                b[i] -= f * b[k]
    for k in range(n - 1, -1, -1):
        tmp = b[k]
        for j in range(k + 1, n):
            tmp -= a[k * n + j] * b[j]
        b[k] = tmp / a[k * n + k]
    return True


cdef double _min_norm_simplex(double* w, int ns, int d,
                              double* v_out, double* lam_out) noexcept nogil:
    """Min-norm point of conv(rows of w); fills v_out (d) and lam_out (ns)."""
    cdef double gram[289]          # MAXS * MAXS
    cdef double kkt[324]           # MAXK * MAXK
    cdef double rhs[18]            # MAXK
    cdef double lam_full[17]
    cdef double best_lam[17]
    cdef double fallback_lam[17]
    cdef int idx[17]
    cdef int i, j, s, mask, nmask, have_best, have_fb, ok
    cdef double scale2, norm2, acc, best_norm2, fallback_norm2, tot

    scale2 = 1.0
    for i in range(ns):
        for j in range(d):
            if fabs(w[i * d + j]) > scale2:
                scale2 = fabs(w[i * d + j])
    scale2 = scale2 * scale2
    for i in range(ns):
        for j in range(ns):
            acc = 0.0
            for s in range(d):
                acc += w[i * d + s] * w[j * d + s]
            gram[i * ns + j] = acc

    best_norm2 = 0.0
    fallback_norm2 = 0.0
    have_best = 0
    have_fb = 0
    nmask = (1 << ns) - 1
    for mask in range(1, nmask + 1):
        s = 0
        for i in range(ns):
            if (mask >> i) & 1:
                idx[s] = i
                s += 1
        for i in range(s):
            for j in range(s):
                kkt[i * (s + 1) + j] = 2.0 * gram[idx[i] * ns + idx[j]]
            kkt[i * (s + 1) + s] = 1.0
            rhs[i] = 0.0
        for j in range(s):
            kkt[s * (s + 1) + j] = 1.0
        kkt[s * (s + 1) + s] = 0.0
        rhs[s] = 1.0
        if not _solve_dense(kkt, rhs, s + 1):
            continue
        ok = 1
        for i in range(s):
            if rhs[i] < -BARY_TOL:
                ok = 0
                break
        if not ok:
            continue
        for i in range(ns):
            lam_full[i] = 0.0
        for i in range(s):
            lam_full[idx[i]] = rhs[i] if rhs[i] > 0.0 else 0.0
        norm2 = 0.0
        for j in range(d):
            acc = 0.0
            for i in range(s):
                acc += rhs[i] * w[idx[i] * d + j]
            v_out[j] = acc
            norm2 += acc * acc
        if (not have_fb) or norm2 < fallback_norm2:
            fallback_norm2 = norm2
            for i in range(ns):
                fallback_lam[i] = lam_full[i]
            have_fb = 1
        ok = 1
        for i in range(ns):
            acc = 0.0
            for j in range(d):
                acc += w[i * d + j] * v_out[j]
            if acc < norm2 - 1e-9 * scale2:
                ok = 0
                break
        if ok and ((not have_best) or norm2 < best_norm2):
            best_norm2 = norm2
            for i in range(ns):
                best_lam[i] = lam_full[i]
            have_best = 1
    if not have_best:
        if have_fb:
            best_norm2 = fallback_norm2
            for i in range(ns):
                best_lam[i] = fallback_lam[i]
        else:
            for i in range(ns):
                best_lam[i] = 0.0
            best_lam[0] = 1.0
    tot = 0.0
    for i in range(ns):
        tot += best_lam[i]
    if tot > 0.0:
        for i in range(ns):
            best_lam[i] /= tot
    norm2 = 0.0
    for j in range(d):
        acc = 0.0
        for i in range(ns):
            acc += best_lam[i] * w[i * d + j]
        v_out[j] = acc
        norm2 += acc * acc
    for i in range(ns):
        lam_out[i] = best_lam[i]
    return norm2


cdef double _gjk(const double[:, ::1] p, const double[:, ::1] q,
                 double eps, int max_iter,
                 double* wp, double* wq, bint need_w) noexcept nogil:
    cdef int n_p = p.shape[0]
    cdef int n_q = q.shape[0]
    cdef int d = p.shape[1]
    cdef double w[272]             # MAXS * MAXD simplex rows
    cdef double v[16]
    cdef double lam[17]
    cdef int pairs_p[17]
    cdef int pairs_q[17]
    cdef int ns, i, j, it, ip, iq, drop, kept
    cdef double scale, zero2, vv, acc, best, wnew_dot

    scale = 1.0
    for i in range(n_p):
        for j in range(d):
            if fabs(p[i, j]) > scale:
                scale = fabs(p[i, j])
    for i in range(n_q):
        for j in range(d):
            if fabs(q[i, j]) > scale:
                scale = fabs(q[i, j])
    zero2 = (eps * scale) * (eps * scale)

    ns = 1
    pairs_p[0] = 0
    pairs_q[0] = 0
    for j in range(d):
        w[j] = p[0, j] - q[0, j]
        v[j] = w[j]
    lam[0] = 1.0

    for it in range(max_iter):
        vv = _min_norm_simplex(w, ns, d, v, lam)
        if vv <= zero2:
            break
        # support of the difference set in direction -v
        best = 0.0
        ip = 0
        for i in range(n_p):
            acc = 0.0
            for j in range(d):
                acc += p[i, j] * (-v[j])
            if i == 0 or acc > best:
                best = acc
                ip = i
        best = 0.0
        iq = 0
        for i in range(n_q):
            acc = 0.0
            for j in range(d):
                acc += q[i, j] * v[j]
            if i == 0 or acc > best:
                best = acc
                iq = i
        wnew_dot = 0.0
        for j in range(d):
            wnew_dot += v[j] * (p[ip, j] - q[iq, j])
        if vv - wnew_dot <= eps * vv:
            break
        drop = 0
        for i in range(ns):
            if pairs_p[i] == ip and pairs_q[i] == iq:
                drop = 1
                break
        if drop:
            break
        # keep the supporting entries, append the new pair
        kept = 0
        for i in range(ns):
            if lam[i] > BARY_TOL:
                if kept != i:
                    pairs_p[kept] = pairs_p[i]
                    pairs_q[kept] = pairs_q[i]
                    for j in range(d):
                        w[kept * d + j] = w[i * d + j]
                    lam[kept] = lam[i]
                kept += 1
        ns = kept
        pairs_p[ns] = ip
        pairs_q[ns] = iq
        for j in range(d):
            w[ns * d + j] = p[ip, j] - q[iq, j]
        ns += 1
        if ns > d + 1:
            drop = 0
            for i in range(1, ns - 1):
                if lam[i] < lam[drop]:
                    drop = i
            for i in range(drop, ns - 1):
                pairs_p[i] = pairs_p[i + 1]
                pairs_q[i] = pairs_q[i + 1]
                lam[i] = lam[i + 1]
                for j in range(d):
                    w[i * d + j] = w[(i + 1) * d + j]
            ns -= 1

    vv = _min_norm_simplex(w, ns, d, v, lam)
    if need_w:
        for i in range(n_p):
            wp[i] = 0.0
        for i in range(n_q):
            wq[i] = 0.0
        for i in range(ns):
            wp[pairs_p[i]] += lam[i]
            wq[pairs_q[i]] += lam[i]
    return sqrt(vv)


def gjk_pair(p, q, double eps=1e-10, int max_iter=200):
    """Distance between conv(p) and conv(q) with closest-point weights."""
    cdef cnp.ndarray[double, ndim=2, mode="c"] pa = np.ascontiguousarray(p, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2, mode="c"] qa = np.ascontiguousarray(q, dtype=np.float64)
    if pa.ndim != 2 or qa.ndim != 2 or pa.shape[1] != qa.shape[1]:
        raise ValueError("gjk_pair needs (n, d) arrays of equal dimension")
    if pa.shape[1] > MAXD:
        raise ValueError(f"compiled kernel supports dim <= {MAXD}")
    cdef cnp.ndarray[double, ndim=1] wp = np.zeros(pa.shape[0])
    cdef cnp.ndarray[double, ndim=1] wq = np.zeros(qa.shape[0])
    cdef double dist = _gjk(pa, qa, eps, max_iter, &wp[0], &wq[0], True)
    return dist, wp, wq


def point_hull_distances(pts, q, double eps=1e-10, int max_iter=200):
    """Distance from each row of pts to conv(q)."""
    cdef cnp.ndarray[double, ndim=2, mode="c"] pa = np.ascontiguousarray(
        np.atleast_2d(np.asarray(pts, dtype=np.float64)))
    cdef cnp.ndarray[double, ndim=2, mode="c"] qa = np.ascontiguousarray(q, dtype=np.float64)
    if pa.shape[1] != qa.shape[1]:
        raise ValueError("dimension mismatch")
    if pa.shape[1] > MAXD:
        raise ValueError(f"compiled kernel supports dim <= {MAXD}")
    cdef cnp.ndarray[double, ndim=1] out = np.empty(pa.shape[0])
    cdef double dummy = 0.0
    cdef Py_ssize_t i
    for i in range(pa.shape[0]):
        out[i] = _gjk(pa[i:i + 1], qa, eps, max_iter, &dummy, &dummy, False)
    return out
