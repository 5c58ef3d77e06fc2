"""Dense symmetric eigensolver: Householder tridiagonalization + implicit-shift QL."""
import numpy as np
from numba import njit

EPS = np.finfo(float).eps


@njit(cache=True)
def tred2(z, d, e):
    """Reduce symmetric z in place; on exit z holds the orthogonal transform, d/e the tridiagonal."""
    n = z.shape[0]
    for i in range(n - 1, 0, -1):
        l = i - 1
        h = 0.0
        scale = 0.0
        if l > 0:
            for k in range(i):
                scale += abs(z[i, k])
            if scale == 0.0:
                e[i] = z[i, l]
            else:
                for k in range(i):
                    z[i, k] /= scale
                    h += z[i, k] * z[i, k]
                f = z[i, l]
                g = -np.sqrt(h) if f >= 0.0 else np.sqrt(h)
                e[i] = scale * g
                h -= f * g
                z[i, l] = f - g
                f = 0.0
                for j in range(i):
                    z[j, i] = z[i, j] / h
                    g = 0.0
                    for k in range(j + 1):
                        g += z[j, k] * z[i, k]
                    for k in range(j + 1, i):
                        g += z[k, j] * z[i, k]
                    e[j] = g / h
                    f += e[j] * z[i, j]
                hh = f / (h + h)
                for j in range(i):
                    f = z[i, j]
                    g = e[j] - hh * f
                    e[j] = g
                    for k in range(j + 1):
                        z[j, k] -= f * e[k] + g * z[i, k]
        else:
            e[i] = z[i, l]
        d[i] = h
    d[0] = 0.0
    e[0] = 0.0
    for i in range(n):
        if d[i] != 0.0:
            for j in range(i):
                g = 0.0
                for k in range(i):
                    g += z[i, k] * z[k, j]
                for k in range(i):
                    z[k, j] -= g * z[k, i]
        d[i] = z[i, i]
        z[i, i] = 1.0
        for j in range(i):
            z[j, i] = 0.0
            z[i, j] = 0.0


@njit(cache=True)
def _hypot(a, b):
    return np.sqrt(a * a + b * b) if abs(a) < 1e150 and abs(b) < 1e150 else np.hypot(a, b)


@njit(cache=True)
def tqli(d, e, zt, max_iter):
    """Implicit QL on the tridiagonal (d, e); rotations applied to the rows of zt.

    Returns the total number of QL sweeps, or -1 when max_iter is exceeded.
    An off-diagonal e[m] is treated as zero once |e[m]| <= eps (|d[m]| + |d[m+1]|).
    """
    n = len(d)
    for i in range(1, n):
        e[i - 1] = e[i]
    e[n - 1] = 0.0
    total = 0
    for l in range(n):
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= EPS * dd:
                    break
                m += 1
            if m == l:
                break
            total += 1
            if total > max_iter:
                return -1
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = _hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + (abs(r) if g >= 0.0 else -abs(r)))
            s = 1.0
            c = 1.0
            p = 0.0
            early = False
            i = m - 1
            while i >= l:
                f = s * e[i]
                b = c * e[i]
                r = _hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    early = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                for k in range(n):
                    f = zt[i + 1, k]
                    zt[i + 1, k] = s * zt[i, k] + c * f
                    zt[i, k] = c * zt[i, k] - s * f
                i -= 1
            if early:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    return total


def eigh_ql(M: np.ndarray, max_iter=None):
    """All eigenpairs of symmetric M, ascending. Returns (w, V, sweeps)."""
    n = M.shape[0]
    z = np.array(M, dtype=float, order="C")
    d = np.zeros(n)
    e = np.zeros(n)
    tred2(z, d, e)
    zt = np.ascontiguousarray(z.T)
    sweeps = tqli(d, e, zt, 64 * n if max_iter is None else max_iter)
    order = np.argsort(d, kind="stable")
    return d[order], zt[order].T, sweeps
