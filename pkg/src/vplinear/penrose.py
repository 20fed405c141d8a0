"""Stability checks: the Penrose-Nyquist condition and the zero of m_KE at 0.

``check_h1`` counts zeros of ``1 - m_VP(., xi)`` in the closed right
half-plane by the argument principle on a rectangle.  On the segment
``Re z = 0`` the symbol is evaluated through the Plemelj boundary formula,
whose imaginary part is known with full relative accuracy even when it is
exponentially small; the winding number is then decided by the signs of the
real part where the image crosses the real axis.  Those crossings give the
certification margin.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize

from .equilibrium import sphere_area
from .errors import InconclusiveError
from .quadrature import laplace
from .symbols import dz_m_ke, mke_imaginary_axis

__all__ = [
    "H1Record",
    "H2Record",
    "StabilityReport",
    "check_h1",
    "check_h2",
    "check_stability",
    "winding_number",
    "default_radii",
]

MARGIN = 1e-8
_MAX_STEP = math.pi / 4


@dataclass
class H1Record:
    """Nyquist result for one radius ``|xi|``."""

    xi_norm: float
    winding_number: int
    min_modulus: float
    crossing_margin: float
    status: str
    curve: list = field(default_factory=list, repr=False)


@dataclass
class H2Record:
    """Zero structure of ``1 - m_KE`` on the imaginary axis at ``|xi| = 1``."""

    zero_locations: list
    dz_at_zero: complex
    d2z_at_zero: complex
    d2z_closed_form: float
    dz_closed_form: float
    min_modulus_away: float
    status: str


@dataclass
class StabilityReport:
    h1: list
    h2: H2Record | None
    verdict: str


def default_radii(n: int = 24, lo: float = 0.05, hi: float = 20.0):
    """Log-spaced radii used when no sample is given."""
    return list(np.geomspace(lo, hi, n))


def winding_number(f, path, t0=0.0, t1=1.0, n0=64, exact_sign=None, max_depth=40):
    """Winding number of ``f(path(t))``, ``t`` in ``[t0, t1]``, around 0.

    The parameter interval is refined until consecutive arguments differ by
    less than pi/4.  If ``exact_sign(t)`` is supplied it must return the sign
    of ``Im f`` exactly; a step between two points whose imaginary parts have
    the same strict sign on a dense sub-grid is then accepted without further
    refinement (the image stays inside one half-plane).

    Returns
    -------
    total_angle : float
        Accumulated argument change (radians).
    samples : list of (t, complex)
        The accepted sample points, in order.
    """
    ts = list(np.linspace(t0, t1, n0 + 1))
    vals = [complex(f(path(t))) for t in ts]
    out_t, out_v = [ts[0]], [vals[0]]
    total = 0.0
    stack = list(zip(zip(ts[:-1], vals[:-1]), zip(ts[1:], vals[1:]), [0] * n0))[::-1]
    while stack:
        (ta, fa), (tb, fb), depth = stack.pop()
        if fa == 0 or fb == 0:
            raise InconclusiveError("contour passes through a zero")
        step = float(np.angle(fb / fa))
        ok = abs(step) <= _MAX_STEP
        if not ok and exact_sign is not None and depth >= 6:
            sub = np.linspace(ta, tb, 65)
            signs = np.array([exact_sign(t) for t in sub])
            ok = bool(np.all(signs == signs[0]) and signs[0] != 0)
        if ok or depth >= max_depth:
            if not ok:
                raise InconclusiveError("argument step unresolved after refinement")
            total += step
            out_t.append(tb)
            out_v.append(fb)
            continue
        tm = 0.5 * (ta + tb)
        fm = complex(f(path(tm)))
        stack.append(((tm, fm), (tb, fb), depth + 1))
        stack.append(((ta, fa), (tm, fm), depth + 1))
    return total, list(zip(out_t, out_v))


def _h1_one(eq, r, tau_max, gamma_max, keep_curve):
    # Work in w = z / r; then 1 - m_VP = 1 + L_1(w) / r^2.
    W, G = tau_max / r, gamma_max / r

    def interior(w):
        return 1 + laplace(eq, w, [("M", 1)])[0] / r**2

    small = 0.05

    def axis(w):
        t = w.imag
        if abs(t) < small:
            return interior(complex(0.0, t))
        mk = mke_imaginary_axis(eq, t)
        return 1 - (1 - mk) / (r * r * t * t)

    def axis_sign(s):
        t = -W + 2 * W * (1 - s)  # matches the axis path below
        if abs(t) < small:
            return np.sign(interior(complex(0.0, t)).imag)
        return np.sign(t * float(eq.dphi(t * t / 2)))

    # Ends of the contour: large-frequency bound |m_VP| < 1/2.
    ends = [complex(g, s * W) for g in np.linspace(0, G, 9) for s in (-1, 1)]
    worst = max(abs(interior(w) - 1) for w in ends)
    if worst >= 0.5:
        raise ValueError(f"tau_max = {tau_max} too small at |xi| = {r}: |m_VP| reaches {worst:.3g}")

    segments = [
        (lambda s: complex(G * s, -W), interior, None),
        (lambda s: complex(G, -W + 2 * W * s), interior, None),
        (lambda s: complex(G * (1 - s), W), interior, None),
        (lambda s: complex(0.0, -W + 2 * W * (1 - s)), axis, axis_sign),
    ]
    total = 0.0
    curve = []
    axis_vals = []
    for k, (path, fn, sgn) in enumerate(segments):
        ang, pts = winding_number(fn, path, exact_sign=sgn)
        total += ang
        if keep_curve:
            curve.extend((k, path(t), v) for t, v in pts)
        if fn is axis:
            axis_vals = pts
    wind = total / (2 * math.pi)
    n = int(round(wind))
    mods = [abs(v) for _, v in axis_vals]
    # Real-axis crossings of the Nyquist image: where the exact sign of Im f flips.
    margins = [abs(axis(complex(0, 0)))]
    signs = [axis_sign(t) for t, _ in axis_vals]
    for (ta, _), (tb, _), sa, sb in zip(axis_vals[:-1], axis_vals[1:], signs[:-1], signs[1:]):
        if sa != sb and not (ta <= 0.5 <= tb):
            tc = optimize.brentq(lambda s: float(np.imag(axis(complex(0, -W + 2 * W * (1 - s))))), ta, tb)
            margins.append(abs(axis(complex(0, -W + 2 * W * (1 - tc))).real))
    margin = min(margins)
    status = "certified"
    if abs(wind - n) > 0.05 or margin < MARGIN:
        status = "inconclusive"
    return H1Record(
        xi_norm=float(r),
        winding_number=n,
        min_modulus=float(min(mods)),
        crossing_margin=float(margin),
        status=status,
        curve=curve,
    )


def check_h1(eq, xi_list=None, tau_max=None, gamma_max=3.0, workers=1, keep_curve=False):
    """Nyquist winding of ``1 - m_VP`` for each radius in ``xi_list``.

    Parameters
    ----------
    eq : Equilibrium
    xi_list : sequence of float, optional
        Positive radii; defaults to 24 log-spaced values in ``[0.05, 20]``.
    tau_max : float, optional
        Half-height of the rectangle; default ``4 + 4|xi|``.
    gamma_max : float
        Width of the rectangle.
    workers : int
        Thread count; results keep the order of ``xi_list``.

    Returns
    -------
    list of H1Record
    """
    radii = default_radii() if xi_list is None else [float(x) for x in xi_list]
    if any(r <= 0 for r in radii):
        raise ValueError("radii must be positive")

    def one(r):
        tm = 4.0 + 4.0 * r if tau_max is None else float(tau_max)
        return _h1_one(eq, r, tm, float(gamma_max), keep_curve)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(one, radii))
    return [one(r) for r in radii]


def check_h2(eq, tau_grid=None, tol=1e-6) -> H2Record:
    """Zeros of ``1 - m_KE(i tau)`` and the derivatives of ``m_KE`` at 0.

    Zeros are bracketed by sign changes of the (exact) imaginary part and
    accepted where the modulus falls below ``1e-8``.  The derivatives at 0
    are computed both from :func:`dz_m_ke` and from the closed forms
    ``dz m_KE(0) = i int u Phi'(u^2/2) du`` (zero by symmetry) and
    ``dz^2 m_KE(0) = 2 int F'(|v|^2/2) dv``; they must agree to ``tol``.

    Raises
    ------
    ArithmeticError
        If the two routes disagree.
    """
    if tau_grid is None:
        tau_grid = np.linspace(-10, 10, 401)
    tau = np.asarray(tau_grid, dtype=float)
    g = 1 - mke_imaginary_axis(eq, tau)
    im = g.imag
    zeros = []
    for i in range(len(tau)):
        if abs(g[i]) < 1e-8:
            zeros.append(float(tau[i]))
    for i in range(len(tau) - 1):
        if im[i] * im[i + 1] < 0:
            tc = optimize.brentq(lambda t: (1 - mke_imaginary_axis(eq, t)).imag, tau[i], tau[i + 1], xtol=1e-14)
            if abs(1 - mke_imaginary_axis(eq, tc)) < 1e-8:
                zeros.append(float(tc))
    zeros = sorted(set(round(z, 10) + 0.0 for z in zeros))
    away = np.abs(g[np.abs(tau) > 0.5]) if np.any(np.abs(tau) > 0.5) else np.array([np.inf])

    d1 = complex(dz_m_ke(eq, 0.0, 1.0, order=1))
    d2 = complex(dz_m_ke(eq, 0.0, 1.0, order=2))
    d = eq.d
    val, _ = integrate.quad(
        lambda v: float(eq.dF(v * v / 2)) * v ** (d - 1), 0, np.inf, epsabs=0, epsrel=1e-12, limit=500
    )
    d2_closed = 2 * sphere_area(d) * val
    d1_closed = 0.0  # i int u Phi'(u^2/2) du vanishes: the integrand is odd
    if abs(d2 - d2_closed) > tol * abs(d2_closed) or abs(d1 - d1_closed) > 1e-8:
        raise ArithmeticError(
            f"derivative routes disagree: dz2 {d2} vs {d2_closed}, dz {d1} vs {d1_closed}"
        )
    ok = zeros == [0.0] and abs(d1) < 1e-8 and abs(d2) > 1e-6
    return H2Record(
        zero_locations=zeros,
        dz_at_zero=d1,
        d2z_at_zero=d2,
        d2z_closed_form=float(d2_closed),
        dz_closed_form=d1_closed,
        min_modulus_away=float(away.min()),
        status="pass" if ok else "fail",
    )


def check_stability(eq, xi_list=None, tau_max=None, gamma_max=3.0, tau_grid=None, workers=1, keep_curve=False):
    """Run both checks and combine them into a verdict.

    ``stable`` needs certified winding 0 at every radius and a passing zero
    check; any certified positive winding gives ``unstable``; everything
    else is ``inconclusive``.
    """
    h1 = check_h1(eq, xi_list, tau_max, gamma_max, workers=workers, keep_curve=keep_curve)
    h2 = check_h2(eq, tau_grid)
    if any(r.status == "certified" and r.winding_number > 0 for r in h1):
        verdict = "unstable"
    elif all(r.status == "certified" and r.winding_number == 0 for r in h1) and h2.status == "pass":
        verdict = "stable"
    else:
        verdict = "inconclusive"
    return StabilityReport(h1=h1, h2=h2, verdict=verdict)
