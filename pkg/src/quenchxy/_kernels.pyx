# cython: language_level=3
"""Compiled Monte Carlo kernels.

Every routine consumes random numbers in exactly the same order as its
twin in ``_pykernels`` so both backends produce identical chains.
"""

import numpy as np

cimport numpy as cnp
from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.math cimport M_PI, atan2, cos, exp, fmod, hypot, log, sin
from libc.stdlib cimport free, malloc
from numpy.random cimport bitgen_t

cnp.import_array()

cdef extern from "numpy/random/distributions.h":
    double random_standard_uniform(bitgen_t *bitgen_state) nogil
    double random_vonmises(bitgen_t *bitgen_state, double mu, double kappa) nogil

cdef double TWO_PI = 2.0 * M_PI


cdef bitgen_t *_bitgen(object gen) except NULL:
    capsule = gen.bit_generator.capsule
    return <bitgen_t *> PyCapsule_GetPointer(capsule, "BitGenerator")


cdef inline double _wrap(double t) nogil:
    t = fmod(t, TWO_PI)
    if t < 0.0:
        t += TWO_PI
    return t


def heatbath_sweep(const cnp.int64_t[::1] indptr, const cnp.int64_t[::1] indices,
                   const double[::1] weight, const double[::1] phase,
                   double[::1] theta, const cnp.int64_t[::1] order, object gen):
    cdef bitgen_t *bg = _bitgen(gen)
    cdef Py_ssize_t i, k, x, y
    cdef double hx, hy, a, mag
    with gen.bit_generator.lock, nogil:
        for i in range(order.shape[0]):
            x = order[i]
            hx = 0.0
            hy = 0.0
            for k in range(indptr[x], indptr[x + 1]):
                y = indices[k]
                a = theta[y] + phase[k]
                hx += weight[k] * cos(a)
                hy += weight[k] * sin(a)
            mag = hypot(hx, hy)
            theta[x] = _wrap(atan2(hy, hx) + random_vonmises(bg, 0.0, mag))


def metropolis_sweep(const cnp.int64_t[::1] indptr, const cnp.int64_t[::1] indices,
                     const double[::1] weight, const double[::1] phase,
                     double[::1] theta, const cnp.int64_t[::1] order, double eps, object gen):
    cdef bitgen_t *bg = _bitgen(gen)
    cdef Py_ssize_t i, k, x, y
    cdef double hx, hy, a, old, new, de
    cdef long accepted = 0
    with gen.bit_generator.lock, nogil:
        for i in range(order.shape[0]):
            x = order[i]
            hx = 0.0
            hy = 0.0
            for k in range(indptr[x], indptr[x + 1]):
                y = indices[k]
                a = theta[y] + phase[k]
                hx += weight[k] * cos(a)
                hy += weight[k] * sin(a)
            old = theta[x]
            new = _wrap(old + eps * (2.0 * random_standard_uniform(bg) - 1.0))
            de = -(hx * cos(new) + hy * sin(new)) + (hx * cos(old) + hy * sin(old))
            if de <= 0.0 or random_standard_uniform(bg) < exp(-de):
                theta[x] = new
                accepted += 1
    return accepted


def cluster_update(const cnp.int64_t[::1] indptr, const cnp.int64_t[::1] indices,
                   const double[::1] weight, double[::1] theta, object gen):
    """One embedded (Wolff) cluster reflection; returns the cluster size."""
    cdef bitgen_t *bg = _bitgen(gen)
    cdef Py_ssize_t n = theta.shape[0]
    cdef Py_ssize_t k, x, y, top, size, seed
    cdef double phi, px, py, prob
    cdef cnp.uint8_t[::1] inside = np.zeros(n, dtype=np.uint8)
    cdef cnp.int64_t[::1] stack = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] members = np.empty(n, dtype=np.int64)
    if n == 0:
        return 0
    with gen.bit_generator.lock, nogil:
        phi = TWO_PI * random_standard_uniform(bg)
        seed = <Py_ssize_t> (random_standard_uniform(bg) * n)
        if seed >= n:
            seed = n - 1
        inside[seed] = 1
        stack[0] = seed
        top = 1
        size = 0
        while top > 0:
            top -= 1
            x = stack[top]
            members[size] = x
            size += 1
            px = cos(theta[x] - phi)
            for k in range(indptr[x], indptr[x + 1]):
                y = indices[k]
                if inside[y]:
                    continue
                py = cos(theta[y] - phi)
                if px * py <= 0.0 or weight[k] <= 0.0:
                    continue
                prob = 1.0 - exp(-2.0 * weight[k] * px * py)
                if random_standard_uniform(bg) < prob:
                    inside[y] = 1
                    stack[top] = y
                    top += 1
        for k in range(size):
            x = members[k]
            theta[x] = _wrap(2.0 * phi + M_PI - theta[x])
    return size


cdef inline Py_ssize_t _find(cnp.int64_t[::1] parent, Py_ssize_t a) noexcept nogil:
    while parent[a] != a:
        parent[a] = parent[parent[a]]
        a = parent[a]
    return a


cdef inline void _union(cnp.int64_t[::1] parent, Py_ssize_t a, Py_ssize_t b) noexcept nogil:
    a = _find(parent, a)
    b = _find(parent, b)
    if a < b:
        parent[b] = a
    elif b < a:
        parent[a] = b


def union_find_labels(Py_ssize_t n, const cnp.int64_t[::1] eu, const cnp.int64_t[::1] ev,
                      const cnp.uint8_t[::1] open_edge):
    """Label = smallest vertex id of the component."""
    cdef cnp.int64_t[::1] parent = np.arange(n, dtype=np.int64)
    cdef Py_ssize_t e, i
    with nogil:
        for e in range(eu.shape[0]):
            if open_edge[e]:
                _union(parent, eu[e], ev[e])
        for i in range(n):
            parent[i] = _find(parent, i)
    return np.asarray(parent)


def fk_labels(Py_ssize_t n, const cnp.int64_t[::1] eu, const cnp.int64_t[::1] ev,
              const double[::1] weight, const double[::1] theta, double phi, object gen):
    """Embedded Fortuin-Kasteleyn clusters for reflection axis ``phi``."""
    cdef bitgen_t *bg = _bitgen(gen)
    cdef cnp.int64_t[::1] parent = np.arange(n, dtype=np.int64)
    cdef Py_ssize_t e, i, u, v
    cdef double pu, pv, prob
    with gen.bit_generator.lock, nogil:
        for e in range(eu.shape[0]):
            u = eu[e]
            v = ev[e]
            pu = cos(theta[u] - phi)
            pv = cos(theta[v] - phi)
            if pu * pv <= 0.0 or weight[e] <= 0.0:
                continue
            prob = 1.0 - exp(-2.0 * weight[e] * pu * pv)
            if random_standard_uniform(bg) < prob:
                _union(parent, u, v)
        for i in range(n):
            parent[i] = _find(parent, i)
    return np.asarray(parent)


def pregood_box(const cnp.uint8_t[::1] occ, const cnp.int64_t[::1] shape,
                const cnp.int64_t[::1] lo, Py_ssize_t side, Py_ssize_t divisor):
    """Pre-good test of the cube ``lo + {0..side-1}^d`` inside a C-ordered array.

    Returns (pregood, number of crossing clusters, crossing root or -1,
    largest L-infinity diameter among the other clusters, -1 if none).
    """
    cdef Py_ssize_t d = shape.shape[0]
    cdef Py_ssize_t m = 1, i, j, k, r, g, full, ncross = 0, cross = -1
    cdef Py_ssize_t other = -1, span, diam, root
    for k in range(d):
        m *= side
    cdef cnp.int64_t[::1] gstride = np.empty(d, dtype=np.int64)
    cdef cnp.int64_t[::1] lstride = np.empty(d, dtype=np.int64)
    cdef cnp.int64_t[::1] c = np.empty(d, dtype=np.int64)
    cdef cnp.int64_t[::1] parent = np.arange(m, dtype=np.int64)
    cdef cnp.int64_t[::1] gidx = np.empty(m, dtype=np.int64)
    cdef cnp.int64_t[::1] touch = np.zeros(m, dtype=np.int64)
    cdef cnp.int64_t[:, ::1] bmin = np.full((m, d), side, dtype=np.int64)
    cdef cnp.int64_t[:, ::1] bmax = np.full((m, d), -1, dtype=np.int64)
    gstride[d - 1] = 1
    lstride[d - 1] = 1
    for k in range(d - 2, -1, -1):
        gstride[k] = gstride[k + 1] * shape[k + 1]
        lstride[k] = lstride[k + 1] * side
    with nogil:
        for j in range(m):
            r = j
            g = 0
            for k in range(d - 1, -1, -1):
                c[k] = r % side
                r = r // side
                g += (lo[k] + c[k]) * gstride[k]
            gidx[j] = g
        for j in range(m):
            if not occ[gidx[j]]:
                continue
            r = j
            for k in range(d - 1, -1, -1):
                c[k] = r % side
                r = r // side
            for k in range(d):
                if c[k] + 1 < side and occ[gidx[j + lstride[k]]]:
                    _union(parent, j, j + lstride[k])
        for j in range(m):
            if not occ[gidx[j]]:
                continue
            root = _find(parent, j)
            r = j
            for k in range(d - 1, -1, -1):
                c[k] = r % side
                r = r // side
            for k in range(d):
                if c[k] == 0:
                    touch[root] |= 1 << (2 * k)
                if c[k] == side - 1:
                    touch[root] |= 1 << (2 * k + 1)
                if c[k] < bmin[root, k]:
                    bmin[root, k] = c[k]
                if c[k] > bmax[root, k]:
                    bmax[root, k] = c[k]
        full = (1 << (2 * d)) - 1
        for j in range(m):
            if not occ[gidx[j]] or parent[j] != j:
                continue
            if touch[j] == full:
                ncross += 1
                cross = j
        for j in range(m):
            if not occ[gidx[j]] or parent[j] != j or (ncross == 1 and j == cross):
                continue
            diam = 0
            for k in range(d):
                span = bmax[j, k] - bmin[j, k]
                if span > diam:
                    diam = span
            if diam > other:
                other = diam
    ok = ncross == 1 and other < (side - 1) // divisor
    return bool(ok), int(ncross), int(cross), int(other)


def height_sweep(const cnp.int64_t[::1] indptr, const cnp.int64_t[::1] indices,
                 const cnp.int64_t[::1] etype, cnp.int64_t[::1] h,
                 const cnp.int64_t[::1] order, const double[:, ::1] table,
                 Py_ssize_t window, object gen):
    """Exact conditional resampling of free faces.

    ``table[t, k]`` holds V_t(k) - V_t(0) for k = 0..K. Returns 0 on success,
    1 if a conditional needs a difference beyond K, 2 if the window tail
    is not negligible.
    """
    cdef bitgen_t *bg = _bitgen(gen)
    cdef Py_ssize_t K = table.shape[1] - 1
    cdef Py_ssize_t i, k, x, lo, hi, t, nw, diff
    cdef double emin, tot, u, acc
    cdef double *en = <double *> malloc((2 * K + 2 * window + 3) * sizeof(double))
    cdef int status = 0
    if en == NULL:
        raise MemoryError()
    try:
        with gen.bit_generator.lock, nogil:
            for i in range(order.shape[0]):
                x = order[i]
                lo = h[indices[indptr[x]]]
                hi = lo
                for k in range(indptr[x], indptr[x + 1]):
                    if h[indices[k]] < lo:
                        lo = h[indices[k]]
                    if h[indices[k]] > hi:
                        hi = h[indices[k]]
                lo -= window
                hi += window
                nw = hi - lo + 1
                if nw > 2 * K + 2 * window + 3:
                    status = 1
                    break
                emin = 1e300
                for t in range(nw):
                    en[t] = 0.0
                    for k in range(indptr[x], indptr[x + 1]):
                        diff = lo + t - h[indices[k]]
                        if diff < 0:
                            diff = -diff
                        if diff > K:
                            status = 1
                            break
                        en[t] += table[etype[k], diff]
                    if status:
                        break
                    if en[t] < emin:
                        emin = en[t]
                if status:
                    break
                tot = 0.0
                for t in range(nw):
                    en[t] = exp(-(en[t] - emin))
                    tot += en[t]
                if en[0] > 1e-14 * tot or en[nw - 1] > 1e-14 * tot:
                    status = 2
                    break
                u = random_standard_uniform(bg) * tot
                acc = 0.0
                for t in range(nw):
                    acc += en[t]
                    if u < acc:
                        break
                if t >= nw:
                    t = nw - 1
                h[x] = lo + t
    finally:
        free(en)
    return status


def phi4_sweep(const cnp.int64_t[::1] indptr, const cnp.int64_t[::1] indices,
               const double[::1] weight, double[::1] radius, double[::1] theta,
               double beta, double g, double hh, double step, object gen):
    """Angle heat-bath then log-space radius Metropolis at every vertex."""
    cdef bitgen_t *bg = _bitgen(gen)
    cdef Py_ssize_t x, k, y, n = theta.shape[0]
    cdef double fx, fy, mag, r, rn, proj, lr
    cdef long accepted = 0
    with gen.bit_generator.lock, nogil:
        for x in range(n):
            fx = 0.0
            fy = 0.0
            for k in range(indptr[x], indptr[x + 1]):
                y = indices[k]
                fx += weight[k] * radius[y] * cos(theta[y])
                fy += weight[k] * radius[y] * sin(theta[y])
            mag = hypot(fx, fy)
            r = radius[x]
            theta[x] = _wrap(atan2(fy, fx) + random_vonmises(bg, 0.0, beta * r * mag))
            proj = fx * cos(theta[x]) + fy * sin(theta[x])
            rn = r * exp(step * (2.0 * random_standard_uniform(bg) - 1.0))
            lr = (2.0 * log(rn) - g * rn * rn * rn * rn - hh * rn * rn + beta * rn * proj) \
                - (2.0 * log(r) - g * r * r * r * r - hh * r * r + beta * r * proj)
            if lr >= 0.0 or random_standard_uniform(bg) < exp(lr):
                radius[x] = rn
                accepted += 1
    return accepted
