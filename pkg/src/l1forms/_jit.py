"""Hot loops with a numba implementation and a pure-numpy twin.

Set ``L1FORMS_NO_NUMBA=1`` to force the numpy versions (also used when numba
is not importable).  Both backends implement the same arithmetic and agree
to round-off.
"""

from __future__ import annotations

import os

import numpy as np

try:  # pragma: no cover - exercised through the backend flag
    if os.environ.get("L1FORMS_NO_NUMBA", "") not in ("", "0"):
        raise ImportError("numba disabled by L1FORMS_NO_NUMBA")
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False


def backend() -> str:
    return "numba" if HAVE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# direct summation oracle for linear convolution


def _multi_index(N, n):
    """Integer coordinates of the flattened N^n grid, shape (N^n, n)."""
    return np.stack(np.unravel_index(np.arange(N ** n), (N,) * n), axis=1).astype(np.int64)


def _direct_convolve_numpy(weights, u, N, n):
    M = 2 * N
    idx = _multi_index(N, n)
    strides = M ** np.arange(n - 1, -1, -1)
    flat_w = weights.reshape(-1)
    out = np.zeros(N ** n)
    chunk = max(1, 2 ** 22 // max(N ** n, 1))
    for start in range(0, N ** n, chunk):
        rows = idx[start:start + chunk]
        diff = (rows[:, None, :] - idx[None, :, :]) % M
        out[start:start + chunk] = flat_w[diff @ strides] @ u
    return out


if HAVE_NUMBA:

    @njit(cache=True)
    def _direct_convolve_numba(weights, u, N, n):  # pragma: no cover - compiled
        M = 2 * N
        total = N ** n
        flat_w = weights.reshape(-1)
        idx = np.empty((total, n), dtype=np.int64)
        for p in range(total):
            r = p
            for a in range(n - 1, -1, -1):
                idx[p, a] = r % N
                r //= N
        out = np.zeros(total)
        for i in range(total):
            acc = 0.0
            for j in range(total):
                uj = u[j]
                if uj == 0.0:
                    continue
                w = 0
                for a in range(n):
                    w = w * M + (idx[i, a] - idx[j, a]) % M
                acc += flat_w[w] * uj
            out[i] = acc
        return out


def direct_convolve(weights: np.ndarray, u: np.ndarray) -> np.ndarray:
    """``out[i] = sum_j weights[(i - j) mod 2N] u[j]`` by brute force.

    ``weights`` has shape ``(2N,)*n`` in FFT order; ``u`` has shape ``(N,)*n``.
    """
    n = u.ndim
    N = u.shape[0]
    w = np.ascontiguousarray(weights, dtype=float)
    flat_u = np.ascontiguousarray(u, dtype=float).reshape(-1)
    if HAVE_NUMBA:
        out = _direct_convolve_numba(w, flat_u, N, n)
    else:
        out = _direct_convolve_numpy(w, flat_u, N, n)
    return out.reshape(u.shape)


# ---------------------------------------------------------------------------
# cone quadrature: sum_k w_k int_0^1 t^(h-1) i_{x - y_k} a(y_k + t (x - y_k)) dt


def _lagrange4(f):
    """Cubic Lagrange weights at nodes -1, 0, 1, 2 for offset f in [0, 1)."""
    return (
        -f * (f - 1) * (f - 2) / 6,
        (f + 1) * (f - 1) * (f - 2) / 2,
        -(f + 1) * f * (f - 2) / 2,
        (f + 1) * f * (f - 1) / 6,
    )


def _cone_numpy(data, x0, spacing, points, ys, yw, tn, tw, table, out_count, h):
    C, n = data.shape[0], points.shape[1]
    N = data.shape[1]
    flat = data.reshape(C, -1)
    strides = N ** np.arange(n - 1, -1, -1)
    P = points.shape[0]
    out = np.zeros((out_count, P))
    offsets = np.stack(np.meshgrid(*([np.arange(4)] * n), indexing="ij")).reshape(n, -1).T
    for k in range(ys.shape[0]):
        v = points - ys[k]
        for t, w in zip(tn, tw):
            p = ys[k] + t * v
            u = (p - x0) / spacing
            base = np.floor(u)
            lw = np.stack(_lagrange4(u - base), axis=-1)  # (P, n, 4)
            base = base.astype(np.int64) - 1
            vals = np.zeros((C, P))
            for off in offsets:
                ii = np.clip(base + off, 0, N - 1)
                wt = np.prod(lw[:, np.arange(n), off], axis=1)
                vals += wt * flat[:, ii @ strides]
            scale = yw[k] * w * t ** (h - 1)
            for up, lo, j, sign in table:
                out[lo] += (scale * sign) * v[:, j] * vals[up]
    return out


if HAVE_NUMBA:

    @njit(cache=True)
    def _cone_numba(data, x0, spacing, points, ys, yw, tn, tw, table, out_count, h):  # pragma: no cover
        C = data.shape[0]
        N = data.shape[1]
        n = points.shape[1]
        flat = data.reshape(C, -1)
        P = points.shape[0]
        out = np.zeros((out_count, P))
        strides = np.empty(n, dtype=np.int64)
        s = 1
        for a in range(n - 1, -1, -1):
            strides[a] = s
            s *= N
        lw = np.empty((n, 4))
        base = np.empty(n, dtype=np.int64)
        vals = np.empty(C)
        v = np.empty(n)
        counter = np.empty(n, dtype=np.int64)
        stencil = 4 ** n
        for pi in range(P):
            for k in range(ys.shape[0]):
                for a in range(n):
                    v[a] = points[pi, a] - ys[k, a]
                for q in range(tn.shape[0]):
                    t = tn[q]
                    for a in range(n):
                        u = (ys[k, a] + t * v[a] - x0) / spacing
                        fl = np.floor(u)
                        f = u - fl
                        base[a] = np.int64(fl) - 1
                        lw[a, 0] = -f * (f - 1) * (f - 2) / 6
                        lw[a, 1] = (f + 1) * (f - 1) * (f - 2) / 2
                        lw[a, 2] = -(f + 1) * f * (f - 2) / 2
                        lw[a, 3] = (f + 1) * f * (f - 1) / 6
                    for c in range(C):
                        vals[c] = 0.0
                    for m in range(stencil):
                        r = m
                        for a in range(n - 1, -1, -1):
                            counter[a] = r % 4
                            r //= 4
                        wt = 1.0
                        lin = 0
                        for a in range(n):
                            wt *= lw[a, counter[a]]
                            ii = base[a] + counter[a]
                            if ii < 0:
                                ii = 0
                            elif ii > N - 1:
                                ii = N - 1
                            lin += ii * strides[a]
                        for c in range(C):
                            vals[c] += wt * flat[c, lin]
                    scale = yw[k] * tw[q] * t ** (h - 1)
                    for row in range(table.shape[0]):
                        up = table[row, 0]
                        lo = table[row, 1]
                        j = table[row, 2]
                        sign = table[row, 3]
                        out[lo, pi] += scale * sign * v[j] * vals[up]
        return out


if HAVE_NUMBA:

    @njit(cache=True, fastmath=True)
    def _cone_numba3(data, x0, spacing, points, ys, yw, tn, tw, table, out_count, h):  # pragma: no cover
        # separable tensor stencil for n = 3
        C = data.shape[0]
        N = data.shape[1]
        P = points.shape[0]
        out = np.zeros((out_count, P))
        idx = np.empty((3, 4), dtype=np.int64)
        lw = np.empty((3, 4))
        vals = np.empty(C)
        v = np.empty(3)
        for pi in range(P):
            for k in range(ys.shape[0]):
                for a in range(3):
                    v[a] = points[pi, a] - ys[k, a]
                for q in range(tn.shape[0]):
                    t = tn[q]
                    for a in range(3):
                        u = (ys[k, a] + t * v[a] - x0) / spacing
                        fl = np.floor(u)
                        f = u - fl
                        b = np.int64(fl) - 1
                        for m in range(4):
                            ii = b + m
                            idx[a, m] = 0 if ii < 0 else (N - 1 if ii > N - 1 else ii)
                        lw[a, 0] = -f * (f - 1) * (f - 2) / 6
                        lw[a, 1] = (f + 1) * (f - 1) * (f - 2) / 2
                        lw[a, 2] = -(f + 1) * f * (f - 2) / 2
                        lw[a, 3] = (f + 1) * f * (f - 1) / 6
                    for c in range(C):
                        acc = 0.0
                        for i in range(4):
                            wi = lw[0, i]
                            ii = idx[0, i]
                            for j in range(4):
                                wij = wi * lw[1, j]
                                jj = idx[1, j]
                                for m in range(4):
                                    acc += wij * lw[2, m] * data[c, ii, jj, idx[2, m]]
                        vals[c] = acc
                    scale = yw[k] * tw[q] * t ** (h - 1)
                    for row in range(table.shape[0]):
                        out[table[row, 1], pi] += scale * table[row, 3] * v[table[row, 2]] * vals[table[row, 0]]
        return out


def cone_quadrature(data, x0, spacing, points, ys, yw, tn, tw, table, out_count, h):
    """Averaged cone integral at ``points`` (shape (P, n)).

    ``data`` holds the h-form components on the grid, ``table`` the rows
    ``(upper, lower, axis, sign)`` of the contraction ``i_v``.  Values between
    grid nodes come from tensor cubic Lagrange interpolation, clamped at the
    grid edge.
    """
    args = (
        np.ascontiguousarray(data, dtype=float),
        float(x0),
        float(spacing),
        np.ascontiguousarray(points, dtype=float),
        np.ascontiguousarray(ys, dtype=float),
        np.ascontiguousarray(yw, dtype=float),
        np.ascontiguousarray(tn, dtype=float),
        np.ascontiguousarray(tw, dtype=float),
        np.ascontiguousarray(table, dtype=np.int64),
        int(out_count),
        int(h),
    )
    if HAVE_NUMBA:
        if points.shape[1] == 3:
            return _cone_numba3(*args)
        return _cone_numba(*args)
    return _cone_numpy(*args)
