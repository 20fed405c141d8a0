"""Green kernel of the linearized density equation and its regular/singular split.

Per frequency the kernel solves the scalar Volterra equation

    G^(t) = K^(t) + int_0^t K^(t - s) G^(s) ds,      K^(t) = -t M(t |xi|),

which is the convention-free anchor for everything else.  The same function
is also the inverse Laplace transform of ``m_VP / (1 - m_VP)``; on a line
left of the two Langmuir roots it splits into residues
``a_+- exp(Z_+- t)`` plus a remainder.  The singular part

    G^S_+-(t, xi) = a_+-(xi) chi(|xi| / delta) exp(Z_+-(xi) t)

is a dispersive wave; the regular part is ``G^R = G - G^S_+ - G^S_-``.
Physical fields come from radial Fourier inversion with the inverse
transform ``(2 pi)^{-d} int e^{i x.xi} (.) dxi``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special
from scipy.integrate import trapezoid as _trapezoid

from .dispersion import track_branch
from .equilibrium import sphere_area
from .errors import (
    ConvergenceError,
    DomainError,
    InconclusiveError,
    QuadratureError,
    ResolutionError,
)
from .fitting import fit_decay, loglog_slope
from .penrose import winding_number
from .quadrature import gauss_panels, laplace
from .volterra import residual, solve_columns, solve_richardson

__all__ = [
    "KernelFrequencySample",
    "KernelDecomposition",
    "BranchPair",
    "DeltaReport",
    "khat",
    "chi",
    "ghat_volterra",
    "ghat_volterra_array",
    "ghat_table",
    "ghat_contour",
    "resolvent_residual",
    "short_time_constant",
    "select_delta",
    "branch_pair",
    "RadialInverter",
    "gs_field",
    "gr_field",
    "decompose_kernel",
    "kernel_reports",
]

MIN_MODULUS = 1e-6
DELTA_START = 0.1


@dataclass(frozen=True)
class KernelFrequencySample:
    """One value of ``G^(t, xi)``.

    ``route`` is ``"volterra"``, ``"contour"`` or ``"residue_plus_contour"``;
    ``error`` is the route's own error estimate.
    """

    t: float
    xi_norm: float
    ghat: float
    route: str
    error: float = float("nan")


@dataclass
class BranchPair:
    """Langmuir roots on a uniform radial grid starting at 0.

    Only the ``+`` branch is stored; the ``-`` branch is its complex
    conjugate because ``m_VP(conj z) = conj m_VP(z)`` for real profiles.
    """

    rho: np.ndarray
    Z_plus: np.ndarray
    a_plus: np.ndarray
    certified_radius: float = 0.0

    @property
    def Z_minus(self):
        return np.conj(self.Z_plus)

    @property
    def a_minus(self):
        return np.conj(self.a_plus)


@dataclass
class DeltaReport:
    delta: float
    ok: bool
    attempts: list = field(default_factory=list)


@dataclass
class KernelDecomposition:
    """Sampled kernel pieces on a radial physical grid.

    ``x_grid`` holds radii ``|x|`` (the fields are radial).  ``norms`` maps a
    piece name (``"G"``, ``"GR"``, ``"GS_plus"``, ``"GS_minus"``) to a dict
    of per-time arrays ``"L1"``, ``"L2"``, ``"Linf"``; ``L2`` is computed on
    the frequency side (Plancherel) and ``L1`` on the truncated grid.
    """

    d: int
    delta: float
    t_grid: np.ndarray
    x_grid: np.ndarray
    xi_grid: np.ndarray
    GS_plus: np.ndarray | None = None
    GS_minus: np.ndarray | None = None
    GR: np.ndarray | None = None
    G: np.ndarray | None = None
    norms: dict = field(default_factory=dict)
    info: dict = field(default_factory=dict)

    def slopes(self, window=(20.0, 500.0)) -> dict:
        """Plain and log-corrected log-log slopes of every recorded norm."""
        t = self.t_grid
        sel = (t >= window[0]) & (t <= window[1])
        out = {}
        for piece, norms in self.norms.items():
            for name, vals in norms.items():
                v = np.asarray(vals)[sel]
                if len(v) >= 2 and np.all(v > 0):
                    out[f"{piece}.{name}"] = {
                        "slope": loglog_slope(t[sel], v)[0],
                        "slope_log_corrected": loglog_slope(t[sel], v, True)[0],
                    }
        return out


# ------------------------------------------------------------------ basics

def khat(eq, t, xi_norm):
    """``K^(t, xi) = -t M(t |xi|)``, the spatial transform of the free kernel.

    Examples
    --------
    >>> from vplinear.equilibrium import make_maxwellian
    >>> float(khat(make_maxwellian(1), 2.0, 0.0))
    -2.0
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be non-negative")
    return -t * np.real(eq.M(t * np.asarray(xi_norm, dtype=float)))


def _psi(x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = np.exp(-1.0 / x[pos])
    return out


def chi(s):
    """Smooth cutoff: 1 on ``s <= 1``, 0 on ``s >= 2``."""
    s = np.asarray(s, dtype=float)
    a, b = _psi(2.0 - s), _psi(s - 1.0)
    return a / (a + b)


def _uniform_step(t_grid):
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or len(t) < 3 or t[0] != 0:
        raise ValueError("t_grid must be a 1-D grid starting at 0")
    h = float(t[1] - t[0])
    if not np.allclose(np.diff(t), h, rtol=1e-9, atol=1e-12):
        raise ValueError("t_grid must be uniform")
    return t, h


# ---------------------------------------------------------- Volterra route

def ghat_volterra_array(eq, xi_norm, t_grid, levels: int = 3):
    """Volterra solution as arrays.

    Returns ``(ghat, err)`` with shape ``(len(t_grid), len(xi))``; ``err``
    is the change of the last Richardson step.
    """
    t, h = _uniform_step(t_grid)
    xs = np.atleast_1d(np.asarray(xi_norm, dtype=float))

    def K(s):
        return khat(eq, s[:, None], xs[None, :])

    _, y, err = solve_richardson(K, K, t[-1], h, levels, return_error=True)
    return y, err


def ghat_volterra(eq, xi_norm, t_grid, levels: int = 3, tol: float = 1e-8):
    """Samples of ``G^`` from the Volterra equation.

    Parameters
    ----------
    eq : Equilibrium
    xi_norm : float or array_like
        One or several radii ``|xi|``.
    t_grid : array_like
        Uniform grid from 0 with step at most 0.01.
    levels : int
        Richardson levels (steps ``h, h/2, ...``).
    tol : float
        Largest accepted Richardson error estimate.

    Returns
    -------
    list of KernelFrequencySample
        Ordered by ``xi`` first, then ``t``.

    Raises
    ------
    ResolutionError
        If the step exceeds 0.01 or the error estimate exceeds ``tol``.
    """
    t, h = _uniform_step(t_grid)
    if h > 0.01 + 1e-12:
        raise ResolutionError(f"time step {h} above 0.01")
    xs = np.atleast_1d(np.asarray(xi_norm, dtype=float))
    y, err = ghat_volterra_array(eq, xs, t, levels)
    if err.max() > tol:
        raise ResolutionError(f"Richardson error estimate {err.max():.2e} above {tol:.1e}")
    return [
        KernelFrequencySample(float(t[i]), float(x), float(y[i, j]), "volterra", float(err[i, j]))
        for j, x in enumerate(xs)
        for i in range(len(t))
    ]


def resolvent_residual(eq, xi_norm, t_grid, ghat, idx=None):
    """Largest residual of ``G^ = K^ + K^ * G^`` re-evaluated by a Gregory rule."""
    t, h = _uniform_step(t_grid)
    g = np.asarray(ghat, dtype=float)
    K = khat(eq, t, xi_norm)
    if idx is None:
        idx = np.unique(np.linspace(6, len(t) - 1, 25).astype(int))
    return float(residual(K, K, g, h, idx).max())


_TABLE_CACHE: dict = {}


def ghat_table(eq, rho, t_out, h: float = 0.08, levels: int = 4, chunk: int = 32):
    """``G^(t, rho_j)`` for many radii at the output times ``t_out``.

    Every output time must be a multiple of ``h``.  Columns are solved in
    decreasing ``rho`` so that fast-decaying frequencies stop early.  Results
    are cached by Fourier profile, grids and step.

    Returns
    -------
    ndarray, shape (len(t_out), len(rho))
    """
    rho = np.asarray(rho, dtype=float)
    t_out = np.asarray(t_out, dtype=float)
    idx = np.rint(t_out / h).astype(int)
    if np.any(np.abs(idx * h - t_out) > 1e-9 * np.maximum(t_out, 1)):
        raise ValueError("output times must be multiples of h")
    key = (eq.profile_key(), rho.tobytes(), t_out.tobytes(), h, levels)
    if key in _TABLE_CACHE:
        return _TABLE_CACHE[key].copy()
    T = idx.max() * h
    order = np.argsort(-rho, kind="stable")

    def K(s, p):
        return khat(eq, s[:, None], p[None, :])

    _, y, _ = solve_columns(K, K, rho[order], T, h, levels=levels, chunk=chunk)
    out = np.empty((len(t_out), len(rho)))
    out[:, order] = y[idx]
    if len(_TABLE_CACHE) > 8:
        _TABLE_CACHE.clear()
    _TABLE_CACHE[key] = out
    return out.copy()


def short_time_constant(eq, xi_max: float = 5.0, n_xi: int = 101, T: float = 1.0, h: float = 0.01):
    """Smallest ``C`` with ``|G^(t, xi)| <= C t`` on ``(0, T] x [0, xi_max]``.

    Returns a dict with ``C`` and the maximizing ``(t, xi)``.
    """
    xs = np.linspace(0.0, xi_max, n_xi)
    t = np.arange(int(round(T / h)) + 1) * h
    y, _ = ghat_volterra_array(eq, xs, t)
    ratio = np.abs(y[1:]) / t[1:, None]
    i, j = np.unravel_index(np.argmax(ratio), ratio.shape)
    return {"C": float(ratio[i, j]), "t": float(t[1 + i]), "xi": float(xs[j])}


# ----------------------------------------------------------- contour route

def _tau_edges(T, H, features):
    """Panel edges on ``[0, T]``: uniform width ``H`` plus geometric grading
    towards each ``(center, scale)`` feature."""
    pts = list(np.linspace(0.0, T, max(2, math.ceil(T / H)) + 1))
    for c, s in features:
        s = max(s, 1e-9)
        pts.append(c)
        k = 0
        while s * 2**k < H:
            pts.extend([c - s * 2**k, c + s * 2**k])
            k += 1
    pts = np.unique(np.clip(pts, 0.0, T))
    keep = np.concatenate([[True], np.diff(pts) > 1e-12])
    return pts[keep]


def _resolvent_series(eq, r):
    """Coefficients ``s_n`` of ``m/(1-m) ~ sum_n s_n z^{-2n}``, ``n = 1..l+1``.

    Built from ``m = -z^{-2} + z^{-2} m_KE`` and the large-``z`` expansion
    ``m_KE ~ sum_p Q_{2p} z^{-2p}``, as far as the moments allow (``l <= 2``).
    """
    l = 0
    while l < 2 and (l + 1) in eq.moments:
        l += 1
    L = l + 1
    # power series in u = z^{-2}, index = power of u
    m = np.zeros(L + 1)
    m[1] = -1.0
    for p in range(1, l + 1):
        m[p + 1] += (-1) ** (p + 1) * (2 * p + 1) * eq.moments[p] * r ** (2 * p)
    out = np.zeros(L + 1)
    power = m.copy()
    for _ in range(L):
        out += power
        power = np.convolve(power, m)[: L + 1]
    return out[1:]


def _subtraction(series, p):
    """Coefficients ``c_k`` (``k = 2..K``) of ``sum c_k (z-p)^{-k}`` matching
    the even series through ``z^{-K}``."""
    K = 2 * len(series) + 1
    target = np.zeros(K + 1)
    target[2::2] = series
    c = np.zeros(K + 1)
    for n in range(2, K + 1):
        # coefficient of z^{-n} from c_k (z-p)^{-k}: binom(n-1, k-1) p^{n-k}
        acc = sum(c[k] * math.comb(n - 1, k - 1) * p ** (n - k) for k in range(2, n))
        c[n] = target[n] - acc
    return c


def _line_values(eq, r, c, p, nodes):
    z = c + 1j * nodes
    F = np.empty(len(nodes), dtype=complex)
    mod = np.empty(len(nodes))
    for k, zk in enumerate(z):
        m = -laplace(eq, zk / r, [("M", 1)])[0] / (r * r)
        F[k] = m / (1 - m)
        mod[k] = abs(1 - m)
    # Rational terms reproducing the large-z expansion, with poles right of
    # the line only: their line integral vanishes for t > 0.
    coef = _subtraction(_resolvent_series(eq, r), p)
    for k in range(2, len(coef)):
        F -= coef[k] / (z - p) ** k
    return F, mod


def _decay_order(x, F):
    a = np.abs(F)
    if len(x) < 2 or np.any(a == 0):
        return 4.0
    return float(-np.polyfit(np.log(x), np.log(a), 1)[0])


def _line_integral(eq, r, c, p, ts, features, tol):
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    H = min(0.5, 8.0 / ts.max())
    T = 16.0
    while True:
        edges = _tau_edges(T, H, features)
        x1, w1 = gauss_panels(edges)
        mids = 0.5 * (edges[1:] + edges[:-1])
        x2, w2 = gauss_panels(np.sort(np.concatenate([edges, mids])))
        F1, mod1 = _line_values(eq, r, c, p, x1)
        F2, mod2 = _line_values(eq, r, c, p, x2)
        far = x2 >= T / 2
        # Remaining decay is at least |tau|^-4; measure the actual rate.
        q = max(4.0, _decay_order(x2[far], F2[far]))
        Ctail = float(np.max(np.abs(F2[far]) * x2[far] ** q))
        tail = math.exp(c * ts.max()) * Ctail / ((q - 1) * math.pi * T ** (q - 1))
        if tail < 0.1 * tol or T >= 4096:
            break
        T *= 2
    minmod = float(min(mod1.min(), mod2.min()))
    if minmod < MIN_MODULUS:
        raise InconclusiveError(f"contour passes within {minmod:.1e} of a zero of 1 - m_VP")
    ph1 = np.exp(np.outer(ts, c + 1j * x1))
    ph2 = np.exp(np.outer(ts, c + 1j * x2))
    v1 = (ph1 * (w1 * F1)).sum(axis=1).real / math.pi
    v2 = (ph2 * (w2 * F2)).sum(axis=1).real / math.pi
    err = np.abs(v2 - v1) + tail
    return v2, err, minmod


def ghat_contour(eq, xi_norm, t, mode: str = "contour", delta: float = DELTA_START, tol: float = 1e-9, roots=None):
    """``G^(t, xi)`` as an inverse Laplace integral of ``m_VP / (1 - m_VP)``.

    Parameters
    ----------
    eq : Equilibrium
    xi_norm : float
        ``|xi| > 0``.
    t : float or array_like
        Positive times; several times share the symbol evaluations.
    mode : {"contour", "residue_plus_contour"}
        ``"contour"`` integrates on the line ``Re z = 1 / t_max`` right of
        every zero (stable equilibrium).  ``"residue_plus_contour"`` moves the line to
        ``Re z = -delta^{3/2} |xi|`` and adds the two Langmuir residues
        ``a_+- exp(Z_+- t)``; it needs ``|xi| <= delta``.
    delta : float
        Split radius for the residue mode.
    tol : float
        Target absolute accuracy; the panel-halving estimate must stay below
        ``max(tol, 1e-6 |G^|)``.
    roots : (complex, complex), optional
        ``(Z_+, a_+)`` if already known.

    Returns
    -------
    KernelFrequencySample or list of them (array ``t``).

    Raises
    ------
    InconclusiveError
        The line passes within ``1e-6`` of a zero of ``1 - m_VP``.
    QuadratureError
        Error estimate above tolerance.
    """
    r = float(xi_norm)
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(ts <= 0):
        raise ValueError("t must be positive")
    if r <= 0:
        vals = [-math.sin(s) for s in ts]
        errs = [0.0] * len(ts)
    elif mode == "contour":
        c = 1.0 / ts.max()
        p = c + 1.0
        feats = [(0.0, 0.25 * min(r, 1.0)), (1.0, 0.25 * c), (math.sqrt(1 + 3 * eq.C * r * r), 0.25 * c)]
        vals, errs, _ = _line_integral(eq, r, c, p, ts, feats, tol)
    elif mode == "residue_plus_contour":
        if r > delta:
            raise DomainError(f"residue mode needs |xi| <= delta = {delta}")
        if roots is None:
            br = track_branch(eq, 1, np.geomspace(min(0.01, r), r, 8), check_window=False)
            Z, a = br.samples[-1].Z, br.samples[-1].a
        else:
            Z, a = roots
        c = -delta**1.5 * r
        if not Z.real > c:
            raise DomainError("the Langmuir root lies left of the shifted line")
        dist = Z.real - c
        feats = [(0.0, 0.25 * r), (1.0, 0.25 * dist), (abs(Z.imag), 0.25 * dist)]
        v, e, _ = _line_integral(eq, r, c, 1.0, ts, feats, tol)
        vals = v + 2 * (a * np.exp(Z * ts)).real
        errs = e
    else:
        raise ValueError(f"unknown mode {mode!r}")
    out = []
    for s, val, er in zip(ts, vals, errs):
        if er > max(tol, 1e-6 * abs(val)):
            raise QuadratureError(f"contour error estimate {er:.1e} at t={s}, |xi|={r}")
        out.append(KernelFrequencySample(float(s), r, float(val), mode, float(er)))
    return out[0] if np.ndim(t) == 0 else out


# ------------------------------------------------------------- delta choice

def _count_zeros_strip(eq, r, half_width, tau_max):
    """Zeros of ``1 - m_VP`` with ``|Re z| <= half_width |xi|``, ``|Im z| <= tau_max``."""
    W = tau_max / r

    def f(w):
        return 1 + laplace(eq, w, [("M", 1)])[0] / (r * r)

    for w in (complex(x, s * W) for x in np.linspace(-half_width, half_width, 5) for s in (-1, 1)):
        if abs(f(w) - 1) >= 0.5:
            raise InconclusiveError(f"|m_VP| not below 1/2 at the strip ends (|xi| = {r})")
    a, b = half_width, W
    corners = [complex(-a, -b), complex(a, -b), complex(a, b), complex(-a, b)]
    total = 0.0
    for k in range(4):
        p0, p1 = corners[k], corners[(k + 1) % 4]
        ang, _ = winding_number(f, lambda s, p0=p0, p1=p1: p0 + (p1 - p0) * s)
        total += ang
    wind = total / (2 * math.pi)
    n = int(round(wind))
    if abs(wind - n) > 0.05:
        raise InconclusiveError(f"non-integer winding {wind}")
    return n


def _line_min_modulus(eq, r, c, Zim, tau_max):
    taus = np.concatenate(
        [np.linspace(0.0, tau_max, 401), Zim + np.linspace(-1, 1, 201) * 20 * abs(c)]
    )
    taus = taus[taus >= 0]
    vals = [abs(1 + laplace(eq, complex(c, s) / r, [("M", 1)])[0] / (r * r)) for s in taus]
    return float(min(vals))


def select_delta(eq, delta0: float = DELTA_START, min_delta: float = 0.005, n_radii: int = 3) -> DeltaReport:
    """Pick the low-frequency split radius.

    Starting from ``delta0`` the radius is halved until (a) both Langmuir
    branches can be tracked up to ``2 delta``, (b) the strip
    ``|Re z| <= delta |xi|`` holds exactly two zeros of ``1 - m_VP`` at
    sampled ``|xi| <= delta``, and (c) ``|1 - m_VP| > 1e-6`` on the shifted
    line ``Re z = -delta^{3/2} |xi|``.
    """
    report = DeltaReport(delta=float("nan"), ok=False)
    delta = float(delta0)
    while delta >= min_delta:
        att = {"delta": delta}
        try:
            br = track_branch(eq, 1, np.geomspace(1e-3, 2 * delta, 24), check_window=4)
            att["tracked_to"] = br.samples[-1].r
            att["window_certified_to"] = br.certified_radius
            radii = np.geomspace(delta / 8, delta, n_radii)
            counts, mins = [], []
            for r in radii:
                counts.append(_count_zeros_strip(eq, r, delta, 4.0 + 4.0 * r))
                Zr = track_branch(eq, 1, np.geomspace(min(1e-3, r), r, 6), check_window=False).samples[-1].Z
                mins.append(_line_min_modulus(eq, r, -(delta**1.5) * r, Zr.imag, 4.0 + 4.0 * r))
            att["zero_counts"] = counts
            att["line_min_modulus"] = min(mins)
            ok = all(c == 2 for c in counts) and min(mins) > MIN_MODULUS
        except (ConvergenceError, DomainError, InconclusiveError, QuadratureError) as exc:
            att["failure"] = f"{type(exc).__name__}: {exc}"
            ok = False
        att["ok"] = ok
        report.attempts.append(att)
        if ok:
            report.delta, report.ok = delta, True
            return report
        delta /= 2
    return report


def branch_pair(eq, rho, check_every: int = 32) -> BranchPair:
    """Roots and residue amplitudes on a uniform grid ``rho`` with ``rho[0] = 0``."""
    rho = np.asarray(rho, dtype=float)
    if rho[0] != 0:
        raise ValueError("the radial grid must start at 0")
    Z = np.empty(len(rho), dtype=complex)
    a = np.empty(len(rho), dtype=complex)
    Z[0], a[0] = 1j, 0.5j
    cert = 0.0
    if len(rho) > 1:
        br = track_branch(eq, 1, rho[1:], check_window=check_every)
        _, Z[1:], a[1:] = br.arrays()
        cert = br.certified_radius
    return BranchPair(rho=rho, Z_plus=Z, a_plus=a, certified_radius=cert)


# ------------------------------------------------------ physical inversion

class RadialInverter:
    """Inverse Fourier transform of radial functions sampled on a uniform grid.

    ``rho`` must start at 0 with constant step; values beyond the last node
    are taken as zero.  The trapezoid rule is used, which is spectrally
    accurate for the even integrands of ``d = 1, 3``; for ``d = 2`` the
    leading Euler-Maclaurin end correction is added.
    """

    def __init__(self, d: int, rho, x):
        rho = np.asarray(rho, dtype=float)
        x = np.asarray(x, dtype=float)
        if rho[0] != 0 or not np.allclose(np.diff(rho), rho[1] - rho[0]):
            raise ValueError("rho must be uniform and start at 0")
        self.d, self.rho, self.x = d, rho, x
        self.step = float(rho[1] - rho[0])
        w = np.full(len(rho), self.step)
        w[0] = w[-1] = 0.5 * self.step
        arg = np.outer(rho, x)
        if d == 1:
            self.B = np.cos(arg)
            self.c = 1 / math.pi
            self.w = w
        elif d == 2:
            self.B = special.j0(arg)
            self.c = 1 / (2 * math.pi)
            self.w = w * rho
        elif d == 3:
            self.B = np.sinc(arg / math.pi)
            self.c = 1 / (2 * math.pi**2)
            self.w = w * rho**2
        else:
            raise ValueError("d must be 1, 2 or 3")

    def __call__(self, values):
        v = np.atleast_2d(values)
        if np.iscomplexobj(v):
            return self(v.real) + 1j * self(v.imag)
        out = self.c * ((v * self.w) @ self.B)
        if self.d == 2:
            out += self.c * self.step**2 / 12 * v[:, :1]
        return out

    def l2_frequency(self, values):
        """``||f||_{L^2}`` from the frequency samples (Plancherel)."""
        v = np.atleast_2d(values)
        w = np.full(len(self.rho), self.step)
        w[0] = w[-1] = 0.5 * self.step
        dens = (np.abs(v) ** 2 * w * self.rho ** (self.d - 1)).sum(axis=1)
        if self.d == 2:
            dens = dens + self.step**2 / 12 * np.abs(v[:, 0]) ** 2
        return np.sqrt(sphere_area(self.d) * dens / (2 * math.pi) ** self.d)

    def l1_grid(self, field):
        f = np.abs(np.atleast_2d(field))
        return sphere_area(self.d) * _trapezoid(f * self.x ** (self.d - 1), self.x, axis=1)


def _norms(inv, fhat, field):
    return {
        "L1": inv.l1_grid(field),
        "L2": inv.l2_frequency(fhat),
        "Linf": np.abs(field).max(axis=1),
    }


def _default_x(rho, x_max=None, dx=None):
    step = rho[1] - rho[0]
    if dx is None:
        dx = min(0.5, math.pi / (4 * rho[-1]))
    if x_max is None:
        x_max = 0.95 * math.pi / step
    return np.arange(0.0, x_max + 0.5 * dx, dx)


def gs_field(eq, pair: BranchPair, delta: float, t_grid, x_grid, inverter=None) -> KernelDecomposition:
    """Singular parts ``G^S_+-`` on the radial grid ``x_grid``.

    Raises
    ------
    ResolutionError
        If the phase of ``exp(Z t)`` changes by more than ``pi/4`` between
        neighbouring frequency nodes, or the branches stop more than one
        node short of ``2 delta`` (where ``chi`` vanishes).
    """
    t = np.asarray(t_grid, dtype=float)
    rho = pair.rho
    step = np.diff(rho).max(initial=0.0)
    if rho[-1] + step < 2 * delta * (1 - 1e-12):
        raise ResolutionError(f"branches cover |xi| <= {rho[-1]}, need {2 * delta}")
    sel = rho <= 2 * delta
    phase_step = t.max() * np.abs(np.diff(pair.Z_plus[sel].imag)).max(initial=0.0)
    if phase_step > math.pi / 4:
        raise ResolutionError(f"phase changes by {phase_step:.2f} between frequency nodes")
    inv = inverter or RadialInverter(eq.d, rho[sel], x_grid)
    amp = pair.a_plus[sel] * chi(rho[sel] / delta)
    hat = amp[None, :] * np.exp(np.outer(t, pair.Z_plus[sel]))
    gp = inv(hat)
    gm = np.conj(gp)
    dec = KernelDecomposition(d=eq.d, delta=delta, t_grid=t, x_grid=inv.x, xi_grid=rho[sel], GS_plus=gp, GS_minus=gm)
    dec.norms["GS_plus"] = _norms(inv, hat, gp)
    dec.norms["GS_minus"] = _norms(inv, np.conj(hat), gm)
    dec.info["gs_hat"] = hat
    dec.info["phase_step"] = float(phase_step)
    return dec


def gr_field(eq, delta: float, t_grid, x_grid, ghat, rho, gs: KernelDecomposition, inverter=None) -> KernelDecomposition:
    """Regular part ``G^R = G - G^S_+ - G^S_-`` and the full kernel ``G``.

    ``ghat`` holds ``G^(t, rho)`` (from :func:`ghat_table`); the singular part
    is subtracted on the frequency side and both are inverted with the same
    quadrature.
    """
    t = np.asarray(t_grid, dtype=float)
    rho = np.asarray(rho, dtype=float)
    inv = inverter or RadialInverter(eq.d, rho, x_grid)
    gs_hat = np.zeros((len(t), len(rho)), dtype=complex)
    gs_hat[:, : gs.info["gs_hat"].shape[1]] = gs.info["gs_hat"]
    sing = 2 * gs_hat.real
    gr_hat = ghat - sing
    G = inv(ghat)
    GR = inv(gr_hat)
    dec = KernelDecomposition(d=eq.d, delta=delta, t_grid=t, x_grid=inv.x, xi_grid=rho, GR=GR, G=G)
    dec.norms["G"] = _norms(inv, ghat, G)
    dec.norms["GR"] = _norms(inv, gr_hat, GR)
    return dec


def decompose_kernel(
    eq,
    t_grid,
    n_xi: int = 2048,
    xi_max: float = 2.0,
    delta: float | None = None,
    h: float = 0.08,
    levels: int = 4,
    x_max: float | None = None,
    dx: float | None = None,
    max_retries: int = 3,
) -> KernelDecomposition:
    """Full pipeline: Volterra table, delta, branches, singular and regular parts.

    Parameters
    ----------
    eq : Equilibrium
    t_grid : array_like
        Output times, multiples of ``h`` (rounded if not).
    n_xi, xi_max : int, float
        Radial frequency grid ``linspace(0, xi_max, n_xi)``.  The measured
        size of ``G^`` on the last 5% of the grid is reported as
        ``info["tail"]``.
    delta : float, optional
        Split radius; chosen by :func:`select_delta` when omitted.
    h, levels : float, int
        Coarse Volterra step and Richardson levels.
    max_retries : int
        If ``||G^R||_Linf`` does not decay over the grid, ``delta`` is halved
        up to this many times.

    Returns
    -------
    KernelDecomposition
    """
    t = np.rint(np.asarray(t_grid, dtype=float) / h) * h
    rho = np.linspace(0.0, xi_max, n_xi)
    x = _default_x(rho, x_max, dx)
    ghat = ghat_table(eq, rho, t, h, levels)
    info = {"tail": float(np.abs(ghat[:, rho >= 0.95 * xi_max]).max()), "h": h, "levels": levels}
    if delta is None:
        rep = select_delta(eq)
        if not rep.ok:
            raise ConvergenceError(f"no admissible delta: {rep.attempts}")
        delta = rep.delta
        info["delta_report"] = rep.attempts
    inv_full = RadialInverter(eq.d, rho, x)
    retries = 0
    while True:
        sel = rho <= 2 * delta + 1e-15
        pair = branch_pair(eq, rho[sel])
        inv_low = RadialInverter(eq.d, rho[sel], x)
        gs = gs_field(eq, pair, delta, t, x, inverter=inv_low)
        gr = gr_field(eq, delta, t, x, ghat, rho, gs, inverter=inv_full)
        lin = gr.norms["GR"]["Linf"]
        decaying = len(t) < 2 or lin[-1] < lin[0]
        if decaying or retries >= max_retries:
            break
        delta /= 2
        retries += 1
    dec = KernelDecomposition(
        d=eq.d,
        delta=delta,
        t_grid=t,
        x_grid=x,
        xi_grid=rho,
        GS_plus=gs.GS_plus,
        GS_minus=gs.GS_minus,
        GR=gr.GR,
        G=gr.G,
        norms={**gr.norms, **gs.norms},
        info={**info, "delta_retries": retries, "phase_step": gs.info["phase_step"],
              "branch_certified_radius": pair.certified_radius},
    )
    dec.info["composition_residual"] = float(
        np.abs(dec.G - (dec.GR + (dec.GS_plus + dec.GS_minus).real)).max()
    )
    dec.info["realness_residual"] = float(np.abs((dec.GS_plus + dec.GS_minus).imag).max())
    return dec


def kernel_reports(dec: KernelDecomposition, window=(20.0, 500.0), slope_tolerance: float = 0.15,
                   l2_tolerance: float = 0.2, regular_tolerance: float = 0.2) -> dict:
    """Decay verdicts for a decomposition.

    * ``||G^S_+||_Linf``: log-corrected slope within ``-d/2 +- slope_tolerance``.
    * ``||G^S_+||_L2``: every sample in the window within ``l2_tolerance``
      (relative) of the window mean.
    * ``||G^R||_Linf``: plain slope at most ``-(d+1) + regular_tolerance``.

    Returns
    -------
    dict
        ``{"reports": [DecayReport, ...], "l2": {...}, "verdict": "pass"|"fail"}``.
    """
    t = dec.t_grid
    d = dec.d
    gs = fit_decay(zip(t, dec.norms["GS_plus"]["Linf"]), -d / 2, True, window, slope_tolerance,
                   component="GS_plus", norm="Linf")
    gr = fit_decay(zip(t, dec.norms["GR"]["Linf"]), -(d + 1), False, window, regular_tolerance,
                   mode="at_most", component="GR", norm="Linf")
    sel = (t >= window[0]) & (t <= window[1])
    l2 = np.asarray(dec.norms["GS_plus"]["L2"])[sel]
    dev = float(np.max(np.abs(l2 / l2.mean() - 1)))
    l2_rep = {
        "component": "GS_plus",
        "norm": "L2",
        "mean": float(l2.mean()),
        "max_relative_deviation": dev,
        "tolerance": float(l2_tolerance),
        "verdict": "pass" if dev <= l2_tolerance else "fail",
    }
    ok = gs.verdict == gr.verdict == l2_rep["verdict"] == "pass"
    return {"reports": [gs, gr], "l2": l2_rep, "verdict": "pass" if ok else "fail"}
