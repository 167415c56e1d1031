"""Pure-Python twins of the compiled kernels.

Same signatures, same arithmetic order, same random draws: a chain run on
either backend is bitwise identical. Used when the extension is absent or
when ``QUENCHXY_BACKEND=python``.
"""

from __future__ import annotations

import math

import numpy as np

TWO_PI = 2.0 * math.pi


def _wrap(t: float) -> float:
    t = math.fmod(t, TWO_PI)
    if t < 0.0:
        t += TWO_PI
    return t


def heatbath_sweep(indptr, indices, weight, phase, theta, order, gen):
    ip = indptr.tolist()
    ind = indices.tolist()
    w = weight.tolist()
    ph = phase.tolist()
    th = theta.tolist()
    for x in order.tolist():
        hx = 0.0
        hy = 0.0
        for k in range(ip[x], ip[x + 1]):
            a = th[ind[k]] + ph[k]
            hx += w[k] * math.cos(a)
            hy += w[k] * math.sin(a)
        mag = math.hypot(hx, hy)
        th[x] = _wrap(math.atan2(hy, hx) + gen.vonmises(0.0, mag))
    theta[:] = th


def metropolis_sweep(indptr, indices, weight, phase, theta, order, eps, gen):
    ip = indptr.tolist()
    ind = indices.tolist()
    w = weight.tolist()
    ph = phase.tolist()
    th = theta.tolist()
    accepted = 0
    for x in order.tolist():
        hx = 0.0
        hy = 0.0
        for k in range(ip[x], ip[x + 1]):
            a = th[ind[k]] + ph[k]
            hx += w[k] * math.cos(a)
            hy += w[k] * math.sin(a)
        old = th[x]
        new = _wrap(old + eps * (2.0 * gen.random() - 1.0))
        de = -(hx * math.cos(new) + hy * math.sin(new)) + (hx * math.cos(old) + hy * math.sin(old))
        if de <= 0.0 or gen.random() < math.exp(-de):
            th[x] = new
            accepted += 1
    theta[:] = th
    return accepted


def cluster_update(indptr, indices, weight, theta, gen):
    n = theta.shape[0]
    if n == 0:
        return 0
    ip = indptr.tolist()
    ind = indices.tolist()
    w = weight.tolist()
    th = theta.tolist()
    phi = TWO_PI * gen.random()
    seed = min(int(gen.random() * n), n - 1)
    inside = [False] * n
    inside[seed] = True
    stack = [seed]
    members = []
    while stack:
        x = stack.pop()
        members.append(x)
        px = math.cos(th[x] - phi)
        for k in range(ip[x], ip[x + 1]):
            y = ind[k]
            if inside[y]:
                continue
            py = math.cos(th[y] - phi)
            if px * py <= 0.0 or w[k] <= 0.0:
                continue
            prob = 1.0 - math.exp(-2.0 * w[k] * px * py)
            if gen.random() < prob:
                inside[y] = True
                stack.append(y)
    for x in members:
        th[x] = _wrap(2.0 * phi + math.pi - th[x])
    theta[:] = th
    return len(members)


def _find(parent, a):
    while parent[a] != a:
        parent[a] = parent[parent[a]]
        a = parent[a]
    return a


def _union(parent, a, b):
    a = _find(parent, a)
    b = _find(parent, b)
    if a < b:
        parent[b] = a
    elif b < a:
        parent[a] = b


def union_find_labels(n, eu, ev, open_edge):
    parent = list(range(n))
    for u, v, o in zip(eu.tolist(), ev.tolist(), open_edge.tolist()):
        if o:
            _union(parent, u, v)
    return np.array([_find(parent, i) for i in range(n)], dtype=np.int64)


def fk_labels(n, eu, ev, weight, theta, phi, gen):
    parent = list(range(n))
    th = theta.tolist()
    for u, v, w in zip(eu.tolist(), ev.tolist(), weight.tolist()):
        pu = math.cos(th[u] - phi)
        pv = math.cos(th[v] - phi)
        if pu * pv <= 0.0 or w <= 0.0:
            continue
        prob = 1.0 - math.exp(-2.0 * w * pu * pv)
        if gen.random() < prob:
            _union(parent, u, v)
    return np.array([_find(parent, i) for i in range(n)], dtype=np.int64)


def pregood_box(occ, shape, lo, side, divisor):
    d = len(shape)
    full_shape = tuple(int(s) for s in shape)
    arr = np.asarray(occ).reshape(full_shape)
    sl = tuple(slice(int(lo[k]), int(lo[k]) + side) for k in range(d))
    sub = arr[sl].ravel().tolist()
    m = side**d
    lstride = [side ** (d - 1 - k) for k in range(d)]

    def coords(j):
        c = [0] * d
        for k in range(d - 1, -1, -1):
            c[k] = j % side
            j //= side
        return c

    parent = list(range(m))
    for j in range(m):
        if not sub[j]:
            continue
        c = coords(j)
        for k in range(d):
            if c[k] + 1 < side and sub[j + lstride[k]]:
                _union(parent, j, j + lstride[k])
    touch = {}
    bmin = {}
    bmax = {}
    for j in range(m):
        if not sub[j]:
            continue
        root = _find(parent, j)
        c = coords(j)
        t = touch.get(root, 0)
        for k in range(d):
            if c[k] == 0:
                t |= 1 << (2 * k)
            if c[k] == side - 1:
                t |= 1 << (2 * k + 1)
        touch[root] = t
        lo_c = bmin.setdefault(root, list(c))
        hi_c = bmax.setdefault(root, list(c))
        for k in range(d):
            lo_c[k] = min(lo_c[k], c[k])
            hi_c[k] = max(hi_c[k], c[k])
    full = (1 << (2 * d)) - 1
    crossing = sorted(r for r, t in touch.items() if t == full)
    ncross = len(crossing)
    cross = crossing[0] if ncross == 1 else -1
    other = -1
    for r in sorted(touch):
        if ncross == 1 and r == cross:
            continue
        other = max(other, max(bmax[r][k] - bmin[r][k] for k in range(d)))
    ok = ncross == 1 and other < (side - 1) // divisor
    return bool(ok), ncross, cross, other


def height_sweep(indptr, indices, etype, h, order, table, window, gen):
    K = table.shape[1] - 1
    ip = indptr.tolist()
    ind = indices.tolist()
    et = etype.tolist()
    tab = table.tolist()
    hh = h.tolist()
    status = 0
    for x in order.tolist():
        nb = [hh[ind[k]] for k in range(ip[x], ip[x + 1])]
        lo = min(nb) - window
        hi = max(nb) + window
        nw = hi - lo + 1
        if nw > 2 * K + 2 * window + 3:
            status = 1
            break
        en = []
        for t in range(nw):
            e = 0.0
            for k in range(ip[x], ip[x + 1]):
                diff = abs(lo + t - hh[ind[k]])
                if diff > K:
                    status = 1
                    break
                e += tab[et[k]][diff]
            if status:
                break
            en.append(e)
        if status:
            break
        emin = min(en)
        wts = [math.exp(-(e - emin)) for e in en]
        tot = 0.0
        for v in wts:
            tot += v
        if wts[0] > 1e-14 * tot or wts[-1] > 1e-14 * tot:
            status = 2
            break
        u = gen.random() * tot
        acc = 0.0
        pick = nw - 1
        for t in range(nw):
            acc += wts[t]
            if u < acc:
                pick = t
                break
        hh[x] = lo + pick
    h[:] = hh
    return status


def phi4_sweep(indptr, indices, weight, radius, theta, beta, g, hh, step, gen):
    ip = indptr.tolist()
    ind = indices.tolist()
    w = weight.tolist()
    rad = radius.tolist()
    th = theta.tolist()
    accepted = 0
    for x in range(len(th)):
        fx = 0.0
        fy = 0.0
        for k in range(ip[x], ip[x + 1]):
            y = ind[k]
            fx += w[k] * rad[y] * math.cos(th[y])
            fy += w[k] * rad[y] * math.sin(th[y])
        mag = math.hypot(fx, fy)
        r = rad[x]
        th[x] = _wrap(math.atan2(fy, fx) + gen.vonmises(0.0, beta * r * mag))
        proj = fx * math.cos(th[x]) + fy * math.sin(th[x])
        rn = r * math.exp(step * (2.0 * gen.random() - 1.0))
        lr = (2.0 * math.log(rn) - g * rn * rn * rn * rn - hh * rn * rn + beta * rn * proj) - (
            2.0 * math.log(r) - g * r * r * r * r - hh * r * r + beta * r * proj
        )
        if lr >= 0.0 or gen.random() < math.exp(lr):
            rad[x] = rn
            accepted += 1
    radius[:] = rad
    theta[:] = th
    return accepted
