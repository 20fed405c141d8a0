"""Laplace-type integrals of the Fourier profile.

All symbols reduce, after the substitution ``u = s |xi|``, to integrals

    L_k^B(w) = int_0^inf exp(-w u) u^k B(u) du,      w = z / |xi|,

with ``B = M`` or ``B = 2 M' + u M''``.  They are evaluated by composite
Gauss-Legendre quadrature on panels no longer than half an oscillation
period, with dyadic refinement at the origin.  When ``M`` extends
analytically, the path is rotated into the complex plane so that the
oscillation turns into decay; this keeps the cost bounded as ``|w|`` grows.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import QuadratureError

__all__ = ["laplace", "gauss_panels", "principal_value"]

_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)
_MAX_NODES = 2_000_000
_ASYMPTOTIC_W = 60.0


def gauss_panels(edges, order: int = 16):
    """Nodes and weights of composite Gauss-Legendre rules on ``edges``."""
    edges = np.asarray(edges, dtype=float)
    if order == 16:
        x, w = _GL_X, _GL_W
    else:
        x, w = np.polynomial.legendre.leggauss(order)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    return (mid[:, None] + half[:, None] * x).ravel(), (half[:, None] * w).ravel()


def _base(eq, u, which):
    if which == "M":
        return eq.M(u, 0)
    return 2 * eq.M(u, 1) + u * eq.M(u, 2)


def _asymptotic(eq, w, terms):
    """Large-``|w|`` series from the even Taylor coefficients of ``M``."""
    out = []
    for which, k in terms:
        acc = 0j
        for p in range(0, 5):
            cp = 1.0 if p == 0 else eq.moments[p]
            a = (-1) ** p * cp / math.factorial(2 * p)  # coefficient of u^{2p} in M
            if which == "M":
                acc += a * math.factorial(2 * p + k) / w ** (2 * p + k + 1)
            elif p > 0:
                # 2M' + uM'' has coefficient a (2p)(2p+1) at u^{2p-1}
                n = 2 * p - 1 + k
                acc += a * (2 * p) * (2 * p + 1) * math.factorial(n) / w ** (n + 1)
        out.append(acc)
    return np.array(out)


def _choose_angle(eq, w):
    if eq.theta_max <= 0:
        return 0.0
    th = eq.theta_max
    a, b = w.real, w.imag
    if a * math.cos(th) + b * math.sin(th) > max(a, 0.0) + 1.0:
        return -th
    return 0.0


def laplace(eq, w: complex, terms, rtol: float = 1e-13, refine: int = 1):
    """Evaluate ``int_0^inf e^{-wu} u^k B(u) du`` for several ``(B, k)``.

    Parameters
    ----------
    eq : Equilibrium
    w : complex
        Scaled frequency; the integral must converge, ``Re w > -R0``.
    terms : sequence of (str, int)
        ``("M", k)`` or ``("KE", k)`` with ``KE = 2M' + uM''``.
    rtol : float
        Target relative accuracy, used for the truncation point.
    refine : int
        Panel subdivision factor; ``refine=2`` is used for error estimates.

    Returns
    -------
    ndarray of complex, one entry per term.
    """
    w = complex(w)
    if w.imag < 0:
        return np.conj(laplace(eq, w.conjugate(), terms, rtol, refine))
    if (
        eq.theta_max == 0
        and abs(w) > _ASYMPTOTIC_W
        and all(p in eq.moments for p in range(1, 5))
    ):
        return _asymptotic(eq, w, terms)

    theta = _choose_angle(eq, w)
    rot = complex(math.cos(theta), math.sin(theta))
    om = w * rot
    alpha, beta = om.real, abs(om.imag)
    kmax = max(k for _, k in terms)

    # Truncation from a geometric probe of the integrand envelope.
    probe = np.geomspace(1e-3, 4000.0, 481)
    up = probe * rot
    with np.errstate(all="ignore"):
        env = np.abs(_base(eq, up, "M")) + np.abs(_base(eq, up, "KE"))
        logE = np.log(env) - alpha * probe + kmax * np.log1p(probe)
    logE[~np.isfinite(logE) | (env == 0)] = -np.inf
    peak = logE.max()
    if not np.isfinite(peak):
        raise QuadratureError(f"integrand not finite for w={w}")
    eps = math.log(min(rtol, 1e-13) * 1e-4)
    tail = np.maximum.accumulate(logE[::-1])[::-1]
    ok = np.nonzero(tail < peak + eps)[0]
    if len(ok) == 0:
        raise QuadratureError(f"Laplace integral does not decay for w={w}; outside the domain?")
    L = probe[ok[0]]

    H = 1.0
    if beta > 0:
        H = min(H, math.pi / beta)
    if alpha > 0:
        H = min(H, 4.0 / alpha)
    H /= refine
    n = math.ceil(L / H)
    if n * 16 > _MAX_NODES:
        raise QuadratureError(f"too many quadrature nodes for w={w}")
    first = H * 2.0 ** -np.arange(12, -1, -1)
    edges = np.concatenate([[0.0], first, H * np.arange(2, n + 1)])
    rho, wt = gauss_panels(edges)
    u = rho * rot
    out = np.empty(len(terms), dtype=complex)
    cache = {}
    with np.errstate(all="ignore"):
        for j, (which, k) in enumerate(terms):
            if which not in cache:
                cache[which] = _base(eq, u, which).astype(complex)
            f = cache[which] * u**k
            val = np.exp(np.log(f) - om * rho)
            val[f == 0] = 0
            out[j] = rot * np.sum(wt * val)
    if not np.all(np.isfinite(out)):
        raise QuadratureError(f"non-finite Laplace integral for w={w}")
    return out


def principal_value(g, c: float, a: float, b: float, window: float = 1.0, rtol: float = 1e-12):
    """``p.v. int_a^b g(u) / (u - c) du`` with ``a < c < b``.

    On a symmetric window around ``c`` the odd part is removed analytically,
    ``int_0^h (g(c+s) - g(c-s)) / s ds``; outside, plain Gauss-Legendre
    panels.  ``g`` must be vectorized.
    """
    h = min(window, c - a, b - c)
    if h <= 0:
        raise QuadratureError("pole must lie strictly inside the interval")
    s, ws = gauss_panels(h * np.linspace(0.0, 1.0, 17) ** 2, order=24)
    inner = np.sum(ws * (g(c + s) - g(c - s)) / s)

    def plain(lo, hi):
        if hi <= lo:
            return 0.0
        npan = max(4, math.ceil((hi - lo) / 0.25))
        x, wx = gauss_panels(np.linspace(lo, hi, npan + 1), order=24)
        return np.sum(wx * g(x) / (x - c))

    return inner + plain(a, c - h) + plain(c + h, b)
