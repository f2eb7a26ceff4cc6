"""Compiled lattice kernels.

All kernels work on three-dimensional arrays; one- and two-dimensional
fields are padded with trailing axes of length 1 (see ``as3d``). Every
kernel writes one output per node from a fixed loop order, so results do
not depend on the number of threads.
"""
import math

import numpy as np
from numba import njit, prange

# Relative slack for "distance <= radius" tests on lattice offsets
RADIUS_SLACK = 1e-12


def as3d(values: np.ndarray) -> np.ndarray:
    """View a 1-, 2- or 3-D array as 3-D with trailing unit axes."""
    values = np.ascontiguousarray(values, dtype=np.float64)
    return values.reshape(values.shape + (1,) * (3 - values.ndim))


def spacing3(spacing) -> np.ndarray:
    out = np.ones(3)
    out[: len(spacing)] = spacing
    return out


@njit(cache=True)
def _reach(radius, h):
    return int(math.floor(radius / h * (1.0 + RADIUS_SLACK)))


@njit(parallel=True, cache=True)
def ball_sums(values, spacing, radius, targets):
    """Sums and node counts of ``values`` over closed balls centred at ``targets``.

    Balls are clipped to the lattice.
    """
    n0, n1, n2 = values.shape
    m = targets.shape[0]
    sums = np.zeros(m)
    counts = np.zeros(m, dtype=np.int64)
    r2 = radius * radius * (1.0 + RADIUS_SLACK)
    reach0 = _reach(radius, spacing[0]) if n0 > 1 else 0
    reach1 = _reach(radius, spacing[1]) if n1 > 1 else 0
    reach2 = _reach(radius, spacing[2]) if n2 > 1 else 0
    for t in prange(m):
        i = targets[t, 0]
        j = targets[t, 1]
        k = targets[t, 2]
        s = 0.0
        c = 0
        for a in range(max(0, i - reach0), min(n0, i + reach0 + 1)):
            da = (a - i) * spacing[0]
            for b in range(max(0, j - reach1), min(n1, j + reach1 + 1)):
                db = (b - j) * spacing[1]
                for e in range(max(0, k - reach2), min(n2, k + reach2 + 1)):
                    de = (e - k) * spacing[2]
                    if da * da + db * db + de * de <= r2:
                        s += values[a, b, e]
                        c += 1
        sums[t] = s
        counts[t] = c
    return sums, counts


@njit(parallel=True, cache=True)
def uncentered_max(base, means, stride, spacing, radii):
    """Per node, the largest mean over candidate balls containing it.

    ``means[r, a, b, e]`` is the mean over the ball of radius ``radii[r]``
    centred at node ``(a*stride0, b*stride1, e*stride2)``. The result starts
    from ``base``.
    """
    n0, n1, n2 = base.shape
    out = base.copy()
    nr = radii.shape[0]
    for flat in prange(n0 * n1 * n2):
        i = flat // (n1 * n2)
        rem = flat - i * n1 * n2
        j = rem // n2
        k = rem - j * n2
        best = out[i, j, k]
        for r in range(nr):
            radius = radii[r]
            r2 = radius * radius * (1.0 + RADIUS_SLACK)
            reach0 = _reach(radius, spacing[0]) if n0 > 1 else 0
            reach1 = _reach(radius, spacing[1]) if n1 > 1 else 0
            reach2 = _reach(radius, spacing[2]) if n2 > 1 else 0
            lo0 = max(0, i - reach0)
            lo1 = max(0, j - reach1)
            lo2 = max(0, k - reach2)
            a0 = ((lo0 + stride[0] - 1) // stride[0]) * stride[0]
            b0 = ((lo1 + stride[1] - 1) // stride[1]) * stride[1]
            e0 = ((lo2 + stride[2] - 1) // stride[2]) * stride[2]
            for a in range(a0, min(n0, i + reach0 + 1), stride[0]):
                da = (a - i) * spacing[0]
                for b in range(b0, min(n1, j + reach1 + 1), stride[1]):
                    db = (b - j) * spacing[1]
                    for e in range(e0, min(n2, k + reach2 + 1), stride[2]):
                        de = (e - k) * spacing[2]
                        if da * da + db * db + de * de <= r2:
                            cand = means[r, a // stride[0], b // stride[1], e // stride[2]]
                            if cand > best:
                                best = cand
        out[i, j, k] = best
    return out


@njit(parallel=True, cache=True)
def level_set_counts(values, spacing, lam, beta, reach, self_cell, region):
    """Per node x, the number of nodes y != x with |f(x)-f(y)| > lam |x-y|^beta.

    Both x and y range over nodes where ``region`` is nonzero; other nodes get 0.
    Only y inside the index box ``reach`` around x are visited. With
    ``self_cell`` the node's own cell is added once when an axis neighbour
    qualifies.
    """
    n0, n1, n2 = values.shape
    counts = np.zeros(n0 * n1 * n2, dtype=np.int64)
    half_beta = 0.5 * beta
    for flat in prange(n0 * n1 * n2):
        i = flat // (n1 * n2)
        rem = flat - i * n1 * n2
        j = rem // n2
        k = rem - j * n2
        if region[i, j, k] == 0.0:
            continue
        fx = values[i, j, k]
        c = 0
        neighbour = False
        for a in range(max(0, i - reach[0]), min(n0, i + reach[0] + 1)):
            da = (a - i) * spacing[0]
            for b in range(max(0, j - reach[1]), min(n1, j + reach[1] + 1)):
                db = (b - j) * spacing[1]
                for e in range(max(0, k - reach[2]), min(n2, k + reach[2] + 1)):
                    if (a == i and b == j and e == k) or region[a, b, e] == 0.0:
                        continue
                    de = (e - k) * spacing[2]
                    d2 = da * da + db * db + de * de
                    if abs(fx - values[a, b, e]) > lam * d2 ** half_beta:
                        c += 1
                        if abs(a - i) + abs(b - j) + abs(e - k) == 1:
                            neighbour = True
        if self_cell and neighbour:
            c += 1
        counts[flat] = c
    return counts


@njit(parallel=True, cache=True)
def difference_quotient_sums(values, spacing, q, exponent):
    """Per node x, the sum over y != x of |f(x)-f(y)|^q / |x-y|^exponent."""
    n0, n1, n2 = values.shape
    out = np.zeros(n0 * n1 * n2)
    half_exp = 0.5 * exponent
    for flat in prange(n0 * n1 * n2):
        i = flat // (n1 * n2)
        rem = flat - i * n1 * n2
        j = rem // n2
        k = rem - j * n2
        fx = values[i, j, k]
        s = 0.0
        for a in range(n0):
            da = (a - i) * spacing[0]
            for b in range(n1):
                db = (b - j) * spacing[1]
                for e in range(n2):
                    if a == i and b == j and e == k:
                        continue
                    de = (e - k) * spacing[2]
                    diff = abs(fx - values[a, b, e])
                    if diff > 0.0:
                        s += diff ** q / (da * da + db * db + de * de) ** half_exp
        out[flat] = s
    return out


@njit(parallel=True, cache=True)
def riesz_sums(values, spacing, sources, kernel_exp, self_term):
    """Per node x, sum over source nodes y != x of g(y) |x-y|^(-kernel_exp), plus g(x) self_term."""
    n0, n1, n2 = values.shape
    out = np.zeros(n0 * n1 * n2)
    m = sources.shape[0]
    half_exp = 0.5 * kernel_exp
    for flat in prange(n0 * n1 * n2):
        i = flat // (n1 * n2)
        rem = flat - i * n1 * n2
        j = rem // n2
        k = rem - j * n2
        s = values[i, j, k] * self_term
        for t in range(m):
            a = sources[t, 0]
            b = sources[t, 1]
            e = sources[t, 2]
            if a == i and b == j and e == k:
                continue
            da = (a - i) * spacing[0]
            db = (b - j) * spacing[1]
            de = (e - k) * spacing[2]
            d2 = da * da + db * db + de * de
            if half_exp == 0.0:
                s += values[a, b, e]
            else:
                s += values[a, b, e] / d2 ** half_exp
        out[flat] = s
    return out


@njit(cache=True)
def _phi(t, family, p):
    if family == 0:
        return t ** p
    return t ** p * math.log(math.e + t)


@njit(cache=True)
def _local_luxemburg(vals, wts, m, family, p, rel_tol, max_iter):
    """Luxemburg norm of the first m entries of vals with quadrature weights wts."""
    top = 0.0
    for t in range(m):
        if vals[t] > top:
            top = vals[t]
    if top == 0.0:
        return 0.0
    if family == 0:
        s = 0.0
        for t in range(m):
            s += wts[t] * vals[t] ** p
        return s ** (1.0 / p)
    hi = top
    while True:
        s = 0.0
        for t in range(m):
            s += wts[t] * _phi(vals[t] / hi, family, p)
        if s <= 1.0:
            break
        hi *= 2.0
    lo = hi
    while True:
        lo *= 0.5
        s = 0.0
        for t in range(m):
            s += wts[t] * _phi(vals[t] / lo, family, p)
        if s > 1.0:
            break
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        s = 0.0
        for t in range(m):
            s += wts[t] * _phi(vals[t] / mid, family, p)
        if s > 1.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= rel_tol * hi:
            break
    return 0.5 * (lo + hi)


@njit(cache=True)
def _indicator_luxemburg(measure, family, p, rel_tol, max_iter):
    """Luxemburg norm of an indicator of the given measure: 1 / phi^{-1}(1/measure)."""
    if family == 0:
        return measure ** (1.0 / p)
    target = 1.0 / measure
    lo = 0.0
    hi = 1.0
    while _phi(hi, family, p) < target:
        hi *= 2.0
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if _phi(mid, family, p) < target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= rel_tol * hi:
            break
    return 1.0 / (0.5 * (lo + hi))


@njit(parallel=True, cache=True)
def slice_ratios(values, weights, spacing, radius, family, p, rel_tol, max_iter):
    """Per node x, ||f 1_B(x,t)||_Phi / ||1_B(x,t)||_Phi with quadrature weights."""
    n0, n1, n2 = values.shape
    out = np.zeros(n0 * n1 * n2)
    r2 = radius * radius * (1.0 + RADIUS_SLACK)
    reach0 = _reach(radius, spacing[0]) if n0 > 1 else 0
    reach1 = _reach(radius, spacing[1]) if n1 > 1 else 0
    reach2 = _reach(radius, spacing[2]) if n2 > 1 else 0
    size = (2 * reach0 + 1) * (2 * reach1 + 1) * (2 * reach2 + 1)
    for flat in prange(n0 * n1 * n2):
        i = flat // (n1 * n2)
        rem = flat - i * n1 * n2
        j = rem // n2
        k = rem - j * n2
        vals = np.empty(size)
        wts = np.empty(size)
        m = 0
        measure = 0.0
        for a in range(max(0, i - reach0), min(n0, i + reach0 + 1)):
            da = (a - i) * spacing[0]
            for b in range(max(0, j - reach1), min(n1, j + reach1 + 1)):
                db = (b - j) * spacing[1]
                for e in range(max(0, k - reach2), min(n2, k + reach2 + 1)):
                    de = (e - k) * spacing[2]
                    if da * da + db * db + de * de <= r2:
                        vals[m] = values[a, b, e]
                        wts[m] = weights[a, b, e]
                        measure += weights[a, b, e]
                        m += 1
        num = _local_luxemburg(vals, wts, m, family, p, rel_tol, max_iter)
        den = _indicator_luxemburg(measure, family, p, rel_tol, max_iter)
        out[flat] = num / den
    return out
