"""Batched solver for scalar Volterra equations of the second kind.

Solves, independently for every column,

    y(t) = f(t) + int_0^t K(t - s) y(s) ds,      K(0) = 0,

with the trapezoidal rule on a uniform grid.  Because ``K(0) = 0`` the rule
is explicit:

    y_n = f_n + (h/2) K_n y_0 + h sum_{j=1}^{n-1} K_{n-j} y_j.

The history sum is a causal convolution, evaluated by divide and conquer
with FFT products, so the cost is ``O(N log^2 N)`` per column instead of
``O(N^2)``.  The trapezoidal error expands in even powers of ``h``, which
:func:`solve_richardson` removes by extrapolation over ``h, h/2, h/4``.
"""

from __future__ import annotations

import numpy as np
from scipy import fft as sfft

__all__ = ["solve_trapezoid", "solve_richardson", "solve_columns", "residual"]

_BASE = 64


def _conv_tail(y_blk, K, out_len, offset, cache):
    """``sum_j K[n - j] y_blk[j]`` for ``n = offset .. offset + out_len - 1``.

    Arrays are laid out as ``(ncols, time)`` so transforms run contiguously.
    """
    m = y_blk.shape[1]
    need = offset + out_len
    n = sfft.next_fast_len(m + need - 1, real=True)
    Y = sfft.rfft(y_blk, n, axis=1)
    key = (need, n)
    if key not in cache:
        # Blocks of equal size reuse the same kernel transform.
        cache[key] = sfft.rfft(K[:, :need], n, axis=1)
    return sfft.irfft(Y * cache[key], n, axis=1)[:, offset:need]


def solve_trapezoid(K, f, h):
    """Trapezoidal solution for real arrays of shape ``(N, ncols)``.

    Parameters
    ----------
    K : ndarray
        Kernel samples ``K(n h)``; ``K[0]`` must vanish.
    f : ndarray
        Forcing samples, same shape.
    h : float
        Step.

    Returns
    -------
    ndarray
        ``y`` on the same grid.
    """
    K = np.asarray(K, dtype=float)
    f = np.asarray(f, dtype=float)
    squeeze = K.ndim == 1
    if squeeze:
        K, f = K[:, None], f[:, None]
    K, f = np.broadcast_arrays(K, f)
    if np.any(K[0] != 0):
        raise ValueError("the kernel must vanish at t = 0")
    N = K.shape[0]
    Kh = np.ascontiguousarray(h * K.T)
    acc = np.ascontiguousarray((f + 0.5 * h * K * f[0]).T)  # j = 0 end weight; y_0 = f_0
    acc[:, 0] = f[0]
    y = np.zeros_like(acc)
    cache = {}

    def rec(lo, hi):
        if hi - lo <= _BASE:
            j0 = max(lo, 1)
            for n in range(j0, hi):
                if n > j0:
                    acc[:, n] += np.einsum("ij,ij->i", Kh[:, n - j0:0:-1], y[:, j0:n])
                y[:, n] = acc[:, n]
            if lo == 0:
                y[:, 0] = acc[:, 0]
            return
        mid = (lo + hi) // 2
        rec(lo, mid)
        src = y[:, lo:mid].copy()
        if lo == 0:
            src[:, 0] = 0.0  # the j = 0 term is already in acc
        acc[:, mid:hi] += _conv_tail(src, Kh, hi - mid, mid - lo, cache)
        rec(mid, hi)

    rec(0, N)
    y = y.T
    return y[:, 0] if squeeze else np.ascontiguousarray(y)


def solve_richardson(Kfun, ffun, T, h, levels=3, return_error=False):
    """Trapezoidal solves at ``h, h/2, ...`` combined by Richardson extrapolation.

    ``Kfun(t)`` and ``ffun(t)`` map a time vector of shape ``(N,)`` to arrays
    of shape ``(N, ncols)``.  Returns ``(t, y)`` on the coarse grid, plus the
    magnitude of the last extrapolation step when ``return_error`` is set.
    """
    N = int(round(T / h))
    if abs(N * h - T) > 1e-9 * max(T, 1.0):
        raise ValueError("T must be a multiple of h")
    if levels < 1:
        raise ValueError("levels must be at least 1")
    sols = []
    for lev in range(levels):
        k = 2**lev
        t = np.arange(N * k + 1) * (h / k)
        sols.append(solve_trapezoid(Kfun(t), ffun(t), h / k)[::k])
    # Romberg table in even powers of h.
    table = sols
    err = np.full_like(sols[0], np.inf)
    for p in range(1, levels):
        fac = 4.0**p
        nxt = [(fac * table[i + 1] - table[i]) / (fac - 1) for i in range(len(table) - 1)]
        err = np.abs(nxt[-1] - table[-1])
        table = nxt
    t = np.arange(N + 1) * h
    return (t, table[0], err) if return_error else (t, table[0])


def solve_columns(Kfun, ffun, params, T, h, levels=4, chunk=32, start=40.0, decay_tol=1e-18):
    """Richardson solves for many independent columns, in memory-bounded chunks.

    Parameters
    ----------
    Kfun, ffun : callable
        ``Kfun(t, p)`` returns the kernel for times ``t`` (shape ``(N,)``)
        and column parameters ``p`` (shape ``(m,)``) as an ``(N, m)`` array;
        ``ffun`` likewise for the forcing.
    params : array_like
        One parameter per column.  Columns are grouped in the given order, so
        passing them sorted by expected decay speeds up early stopping.
    T, h, levels
        As in :func:`solve_richardson`.
    chunk : int
        Columns per solve.
    start : float
        First trial horizon.  A chunk whose solution, kernel and forcing
        have all fallen below ``decay_tol`` times their maxima over the last
        tenth of the trial horizon is stopped there and padded with zeros;
        otherwise
        the horizon doubles (capped at ``T``).

    Returns
    -------
    t : ndarray, shape (N + 1,)
    y : ndarray, shape (N + 1, len(params))
    stop : ndarray
        Horizon actually integrated for each column.
    """
    params = np.asarray(params, dtype=float)
    N = int(round(T / h))
    if abs(N * h - T) > 1e-9 * T:
        raise ValueError("T must be a multiple of h")
    t = np.arange(N + 1) * h
    out = np.zeros((N + 1, len(params)))
    stop = np.full(len(params), float(T))
    for c0 in range(0, len(params), chunk):
        p = params[c0:c0 + chunk]
        horizon = min(T, max(h, round(start / h) * h))
        while True:
            n = int(round(horizon / h))
            _, y = solve_richardson(lambda s: Kfun(s, p), lambda s: ffun(s, p), n * h, h, levels)
            if n >= N:
                break
            tail = slice(int(0.9 * n), n + 1)
            quiet = True
            for arr in (y, Kfun(t[: n + 1], p), ffun(t[: n + 1], p)):
                peak = np.abs(arr).max(axis=0)
                quiet &= bool(np.all(np.abs(arr[tail]).max(axis=0) <= decay_tol * np.maximum(peak, 1e-300)))
            if quiet:
                break
            horizon = min(T, 2 * horizon)
        out[: n + 1, c0:c0 + chunk] = y
        stop[c0:c0 + chunk] = n * h
    return t, out, stop


def residual(K, f, y, h, idx):
    """Residual of ``y = f + K * y`` at grid indices ``idx``.

    The history integral is re-evaluated with a fourth-order Gregory rule
    (trapezoid plus end corrections), independent of the solver's rule.
    """
    K = np.asarray(K)
    y = np.asarray(y)
    f = np.asarray(f)
    out = []
    # Gregory end corrections for the trapezoid: weights at the first/last 3 nodes.
    c = np.array([-3.0, 4.0, -1.0]) / 24.0  # Gregory weights 3/8, 7/6, 23/24
    for n in idx:
        if n < 6:
            continue
        g = K[n - np.arange(n + 1)] * y[: n + 1]
        w = np.ones(n + 1)
        w[0] = w[-1] = 0.5
        w[:3] += c
        w[-3:] += c[::-1]
        integral = h * np.dot(w, g)
        out.append(abs(y[n] - f[n] - integral))
    return np.array(out)
