"""Radial velocity equilibria and their Fourier profiles.

An equilibrium is a radial probability density ``mu(v) = F(|v|^2 / 2)`` on
``R^d``.  Everything downstream only needs the radial Fourier transform
``M(r) = int exp(-i zeta.v) mu(v) dv`` at ``|zeta| = r`` and a few of its
derivatives, the one-dimensional marginal ``Phi`` and the even moments.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, interpolate, special

from .errors import CertificationError, DivergentMomentError, QuadratureError

__all__ = [
    "Equilibrium",
    "make_maxwellian",
    "make_power_law",
    "make_custom",
    "load_custom",
    "two_stream_table",
    "radial_fourier",
    "moment",
    "sphere_area",
]

MAX_MOMENT = 4


def sphere_area(n: int) -> float:
    """Surface area of the unit sphere ``S^{n-1}`` in ``R^n``."""
    return 2.0 * math.pi ** (n / 2) / math.gamma(n / 2)


@dataclass(frozen=True, eq=False)
class Equilibrium:
    """Immutable description of a radial equilibrium.

    Attributes
    ----------
    d : int
        Velocity (and space) dimension, 1 to 3.
    kind : str
        ``"maxwellian"``, ``"power_law"`` or ``"custom"``.
    params : dict
        Construction parameters, used for manifests and caching.
    F, dF : callable
        Profile ``F(s)`` and its derivative, ``s = |v|^2/2``.
    phi, dphi : callable
        Marginal ``Phi(s) = int_{R^{d-1}} F(s + |w|^2/2) dw`` and derivative.
    R0 : float
        Certified exponential decay rate of ``M``.
    C0 : float
        Constant in ``|M(r)| <= C0 exp(-R0 r)`` on the certification grid.
    moments : dict
        ``p -> C^p = int v_1^{2p} mu dv`` for every finite ``p <= 4``.
    theta_max : float
        Largest angle by which Laplace integrals of ``M`` may be rotated off
        the real axis (zero when ``M`` is only known on the real axis).
    log_abs_dphi : callable, optional
        ``log |Phi'(s)|`` where it would underflow in double precision.
    """

    def log_abs_phi_prime(self, s):
        """``log |Phi'(s)|``, exact even where ``Phi'`` underflows."""
        if self.log_abs_dphi is not None:
            return self.log_abs_dphi(s)
        with np.errstate(divide="ignore"):
            return np.log(np.abs(self.dphi(s)))

    d: int
    kind: str
    params: dict
    F: Callable
    dF: Callable
    phi: Callable
    dphi: Callable
    R0: float
    moments: dict
    theta_max: float
    _M: Callable = field(repr=False)
    C0: float = float("nan")
    log_abs_dphi: Callable | None = field(default=None, repr=False)

    def M(self, r, k: int = 0):
        """k-th derivative of the Fourier profile at radius ``r``.

        ``r`` may be complex when ``theta_max > 0``.
        """
        if not 0 <= k <= 4:
            raise ValueError("derivative order must be in 0..4")
        return self._M(np.asarray(r), k)

    @property
    def C(self) -> float:
        """Second moment ``C_mu = C^1``."""
        return self.moments[1]

    def describe(self) -> dict:
        return {"kind": self.kind, "d": self.d, "R0": self.R0, **self.params}

    def profile_key(self) -> tuple:
        """Hashable key identifying the Fourier profile ``M`` alone.

        Per-frequency quantities depend on the equilibrium only through
        ``M``, which for the Maxwellian is the same in every dimension and
        for the power law depends on ``m - d/2`` only.
        """
        if self.kind == "maxwellian":
            return ("maxwellian",)
        if self.kind == "power_law":
            return ("power_law", round(self.params["m"] - self.d / 2, 12))
        return (self.kind, id(self))


def _check_dim(d):
    if d not in (1, 2, 3):
        raise ValueError(f"unsupported dimension {d!r}; expected 1, 2 or 3")


def _certify(M, R0, kind):
    r = np.logspace(-2, np.log10(50.0), 200)
    ratio = np.abs(M(r, 0)) * np.exp(R0 * r)
    if not np.all(np.isfinite(ratio)):
        raise CertificationError(f"{kind}: Fourier profile is not finite on the grid")
    # A maximum pinned at the end of the grid means M decays slower than R0.
    if np.argmax(ratio) >= len(r) - 3 and ratio[-1] > 1e-12:
        raise CertificationError(
            f"{kind}: |M(r)| exp({R0} r) still grows at r = 50; decay rate too small"
        )
    return float(ratio.max()) * (1.0 + 1e-6)


# ---------------------------------------------------------------- Maxwellian

def _maxwell_M(r, k):
    g = np.exp(-r * r / 2)
    if k == 0:
        return g
    if k == 1:
        return -r * g
    if k == 2:
        return (r * r - 1) * g
    if k == 3:
        return (3 * r - r**3) * g
    return (r**4 - 6 * r * r + 3) * g


@functools.lru_cache(maxsize=None)
def make_maxwellian(d: int, R0: float = 1.0) -> Equilibrium:
    """Unit-temperature Maxwellian ``mu = (2 pi)^{-d/2} exp(-|v|^2/2)``.

    Examples
    --------
    >>> eq = make_maxwellian(1)
    >>> float(eq.M(0.0))
    1.0
    """
    _check_dim(d)
    if not R0 > 0:
        raise ValueError("R0 must be positive")
    c = (2 * math.pi) ** (-d / 2)
    c1 = (2 * math.pi) ** -0.5
    moments = {p: float(math.prod(range(1, 2 * p, 2))) for p in range(1, MAX_MOMENT + 1)}
    eq = Equilibrium(
        d=d,
        kind="maxwellian",
        params={},
        F=lambda s: c * np.exp(-np.asarray(s)),
        dF=lambda s: -c * np.exp(-np.asarray(s)),
        phi=lambda s: c1 * np.exp(-np.asarray(s)),
        dphi=lambda s: -c1 * np.exp(-np.asarray(s)),
        R0=float(R0),
        moments=moments,
        theta_max=math.pi / 6,
        _M=_maxwell_M,
        log_abs_dphi=lambda s: math.log(c1) - np.asarray(s),
    )
    object.__setattr__(eq, "C0", _certify(eq._M, eq.R0, eq.kind))
    return eq


# ----------------------------------------------------------------- power law

def _bessel_power(mu, r):
    """``r^mu K_|mu|(r)`` for real or complex ``r``."""
    return r**mu * special.kv(abs(mu), r)


def _power_law_M(nu):
    c = 2.0 ** (1 - nu) / math.gamma(nu)
    P = functools.partial(_bessel_power)
    limits = {}
    # Values at r = 0: M^{(2j)}(0) = (-1)^j C^j with C^j from the Bessel limits.
    for j in range(3):
        if nu - j > 0:
            limits[2 * j] = (-1) ** j * c * math.gamma(nu - j) * 2.0 ** (nu - j - 1) * (
                math.factorial(2 * j) / (math.factorial(j) * 2**j)
            )
    limits[1] = limits[3] = 0.0

    def M(r, k):
        r = np.asarray(r)
        zero = r == 0
        rs = np.where(zero, 1.0, r)
        if k == 0:
            out = c * P(nu, rs)
        elif k == 1:
            out = -c * rs * P(nu - 1, rs)
        elif k == 2:
            out = -c * (P(nu - 1, rs) - rs**2 * P(nu - 2, rs))
        elif k == 3:
            out = c * (3 * rs * P(nu - 2, rs) - rs**3 * P(nu - 3, rs))
        else:
            out = c * (3 * P(nu - 2, rs) - 6 * rs**2 * P(nu - 3, rs) + rs**4 * P(nu - 4, rs))
        if np.any(zero):
            out = np.where(zero, limits.get(k, np.inf), out)
        return out

    return M


@functools.lru_cache(maxsize=None)
def make_power_law(d: int, m: float, R0: float = 0.9, strict: bool = False) -> Equilibrium:
    """Power-law equilibrium ``mu = c_d (1 + |v|^2)^{-m}``.

    The Fourier profile is the Matern function
    ``M(r) = 2^{1-nu} r^nu K_nu(r) / Gamma(nu)`` with ``nu = m - d/2``; it is
    certified against :func:`radial_fourier` at a few radii.

    Parameters
    ----------
    d : int
        Dimension.
    m : float
        Exponent; must satisfy ``2m > d`` (normalizable).  With
        ``strict=True`` the stronger ``2m > d + 8`` is enforced so that all
        moments through order 4 exist.
    R0 : float
        Decay rate to certify; the true rate is 1.
    """
    _check_dim(d)
    m = float(m)
    if 2 * m <= d or (strict and 2 * m <= d + 8):
        need = d + 8 if strict else d
        raise ValueError(f"exponent too small: need 2m > {need}, got m = {m}")
    if not 0 < R0 < 1:
        raise ValueError("R0 must lie in (0, 1) for a power law")
    nu = m - d / 2
    cd = math.gamma(m) / (math.pi ** (d / 2) * math.gamma(nu))
    q = m - (d - 1) / 2
    A = cd * math.pi ** ((d - 1) / 2) * math.gamma(q) / math.gamma(m)

    def F(s):
        return cd * (1 + 2 * np.asarray(s)) ** -m

    Mfun = _power_law_M(nu)
    moments = {}
    for p in range(1, MAX_MOMENT + 1):
        if 2 * m > 2 * p + d:
            # int v_1^{2p} mu = (2p-1)!! Gamma(nu - p) / (2^p Gamma(nu))
            moments[p] = float(
                special.factorial2(2 * p - 1) * math.gamma(nu - p) / (2**p * math.gamma(nu))
            )
    eq = Equilibrium(
        d=d,
        kind="power_law",
        params={"m": m},
        F=F,
        dF=lambda s: -2 * m * cd * (1 + 2 * np.asarray(s)) ** (-m - 1),
        phi=lambda s: A * (1 + 2 * np.asarray(s)) ** -q,
        dphi=lambda s: -2 * q * A * (1 + 2 * np.asarray(s)) ** (-q - 1),
        R0=float(R0),
        moments=moments,
        theta_max=math.pi / 3,
        _M=Mfun,
    )
    object.__setattr__(eq, "C0", _certify(eq._M, eq.R0, eq.kind))
    radii = (0.5, 3.0) if d == 2 else (0.5, 2.0, 6.0)
    for r in radii:
        ref = radial_fourier(F, d, r, rtol=1e-10, strip=None if d == 2 else 1.0)
        val = float(Mfun(np.asarray(r), 0))
        if abs(val - ref) > 1e-7 * abs(ref) + 1e-14:
            raise CertificationError(
                f"power law: closed-form M({r}) = {val} disagrees with quadrature {ref}"
            )
    return eq


# -------------------------------------------------------------------- custom

def _gl_panels(a, b, n_panels, order=16):
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(a, b, n_panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def make_custom(d: int, s, F, R0: float = 0.5, name: str = "table") -> Equilibrium:
    """Equilibrium from tabulated ``(s, F(s))`` pairs.

    ``F`` is interpolated by a cubic spline and taken to vanish beyond the
    last abscissa.  The profile need not be normalized: it is rescaled so
    that ``M(0) = 1``.  ``M`` and its derivatives are tabulated by
    Gauss-Legendre cosine transforms of the marginal and splined, so they are
    only available on the real axis.
    """
    _check_dim(d)
    s = np.asarray(s, dtype=float)
    Fv = np.asarray(F, dtype=float)
    if s.ndim != 1 or s.shape != Fv.shape or len(s) < 8:
        raise ValueError("need at least 8 (s, F) pairs of matching length")
    if s[0] != 0 or np.any(np.diff(s) <= 0):
        raise ValueError("s must start at 0 and be strictly increasing")
    smax = s[-1]
    spl = interpolate.CubicSpline(s, Fv)

    # Marginal on the table abscissae.
    if d == 1:
        phi_tab = Fv.copy()
    elif d == 3:
        anti = spl.antiderivative()
        phi_tab = 2 * math.pi * (anti(smax) - anti(s))
    else:
        y, wy = np.polynomial.legendre.leggauss(64)
        phi_tab = np.empty_like(s)
        for i, si in enumerate(s):
            ymax = math.sqrt(2 * (smax - si))
            yy = 0.5 * ymax * (y + 1)
            phi_tab[i] = 2 * np.sum(0.5 * ymax * wy * spl(si + yy**2 / 2))
    phi_spl = interpolate.CubicSpline(s, phi_tab)

    umax = math.sqrt(2 * smax)
    u, wu = _gl_panels(0.0, umax, max(64, int(umax / 0.05)))
    weight = 2 * wu * phi_spl(u**2 / 2)
    norm = float(weight.sum())
    if not norm > 0:
        raise ValueError("tabulated profile has non-positive mass")

    dr = 0.005
    rgrid = np.arange(0.0, 60.0 + dr / 2, dr)
    # d^k/dr^k cos(ru) = u^k cos(ru + k pi/2)
    signs = (1, -1, -1, 1, 1)
    tabs = np.empty((5, len(rgrid)))
    for lo in range(0, len(rgrid), 512):
        ru = np.outer(rgrid[lo:lo + 512], u)
        cs, sn = np.cos(ru), np.sin(ru)
        for k in range(5):
            trig = cs if k % 2 == 0 else sn
            tabs[k, lo:lo + 512] = signs[k] * (trig @ (weight * u**k)) / norm
    env = np.max(np.abs(tabs), axis=0)
    tail = np.maximum.accumulate(env[::-1])[::-1]
    cut = np.nonzero(tail < 1e-15)[0]
    rmax = rgrid[cut[0]] if len(cut) else rgrid[-1]
    splines = [interpolate.CubicSpline(rgrid, t) for t in tabs]

    def M(r, k):
        r = np.asarray(r)
        if np.iscomplexobj(r):
            if np.any(np.imag(r) != 0):
                raise ValueError("tabulated profile cannot be evaluated off the real axis")
            r = r.real
        out = splines[k](np.abs(r)) * (np.sign(r) ** k if k % 2 else 1.0)
        return np.where(np.abs(r) > rmax, 0.0, out)

    scale = 1.0 / norm

    def Ff(x):
        x = np.asarray(x, dtype=float)
        return np.where((x >= 0) & (x <= smax), scale * spl(np.clip(x, 0, smax)), 0.0)

    def dFf(x):
        x = np.asarray(x, dtype=float)
        return np.where((x >= 0) & (x <= smax), scale * spl(np.clip(x, 0, smax), 1), 0.0)

    def phif(x):
        x = np.asarray(x, dtype=float)
        return np.where((x >= 0) & (x <= smax), scale * phi_spl(np.clip(x, 0, smax)), 0.0)

    def dphif(x):
        x = np.asarray(x, dtype=float)
        return np.where((x >= 0) & (x <= smax), scale * phi_spl(np.clip(x, 0, smax), 1), 0.0)

    moments = {
        p: float(np.sum(weight * u ** (2 * p)) / norm) for p in range(1, MAX_MOMENT + 1)
    }
    eq = Equilibrium(
        d=d,
        kind="custom",
        params={"name": name},
        F=Ff,
        dF=dFf,
        phi=phif,
        dphi=dphif,
        R0=float(R0),
        moments=moments,
        theta_max=0.0,
        _M=M,
    )
    object.__setattr__(eq, "C0", _certify(eq._M, eq.R0, eq.kind))
    return eq


def load_custom(path, d: int, R0: float = 0.5) -> Equilibrium:
    """Read a two-column ``s F(s)`` text file and build the equilibrium."""
    data = np.loadtxt(path, ndmin=2)
    if data.shape[1] != 2:
        raise ValueError(f"{path}: expected two numeric columns")
    return make_custom(d, data[:, 0], data[:, 1], R0=R0, name=str(path))


def two_stream_table(separation: float = 2.0, vmax: float = 12.0, n: int = 12001):
    """Tabulated ``(s, F)`` for the symmetric two-beam profile in one dimension.

    ``mu(v) = (g(v - separation) + g(v + separation)) / 2`` with ``g`` the
    unit Gaussian.  Returned on ``s = v^2/2`` for ``v`` in ``[0, vmax]``.
    """
    v = np.linspace(0.0, vmax, n)
    g = lambda x: np.exp(-x * x / 2) / math.sqrt(2 * math.pi)  # noqa: E731
    return v * v / 2, 0.5 * (g(v - separation) + g(v + separation))


# ---------------------------------------------------------- radial transform

def _qawf(f, r, epsabs):
    """``int_0^inf f(x) cos(rx) dx`` and the sine analogue for complex ``f``."""
    out = []
    for wt in ("cos", "sin"):
        parts = []
        for part in (np.real, np.imag):
            g = lambda x, part=part: float(part(f(x)))  # noqa: E731
            if r == 0:
                if wt == "sin":
                    parts.append(0.0)
                    continue
                val, err = integrate.quad(g, 0, np.inf, epsabs=epsabs, epsrel=1e-13, limit=500)
            else:
                val, err = integrate.quad(g, 0, np.inf, weight=wt, wvar=r, epsabs=epsabs, limlst=200)
            if not np.isfinite(val) or err > 100 * max(epsabs, 1e-13 * abs(val)):
                raise QuadratureError(f"oscillatory quadrature did not converge (r={r})")
            parts.append(val)
        out.append(parts[0] + 1j * parts[1])
    return out


def radial_fourier(F, d: int, r: float, rtol: float = 1e-10, strip: float | None = None) -> float:
    """Fourier transform of the radial density ``F(|v|^2/2)`` at radius ``r``.

    The transform is reduced to a one-dimensional integral along the real
    line, ``int e^{-irv} h(v) dv``.  If ``F`` extends analytically to
    complex arguments, pass the half-width ``strip`` of the analyticity strip
    of ``v -> F(v^2/2)`` (``np.inf`` for entire profiles): the path is then
    shifted down by ``min(r, 0.9 strip)``, which removes the exponential
    cancellation for large ``r``.

    Parameters
    ----------
    F : callable
        Profile of ``s = |v|^2/2``; must accept complex input if ``strip``.
    d : int
        Dimension, 1 to 3.
    r : float
        Radius ``|zeta| >= 0``.
    rtol : float
        Relative tolerance.
    strip : float, optional
        Analyticity half-width, see above.

    Returns
    -------
    float
    """
    _check_dim(d)
    if r < 0:
        raise ValueError("radius must be non-negative")
    if r == 0:
        g = lambda v: F(v * v / 2) * v ** (d - 1)  # noqa: E731
        val, err = integrate.quad(g, 0, np.inf, epsabs=0, epsrel=rtol, limit=500)
        return float(sphere_area(d) * val)

    if d == 1:
        h = lambda v: F(v * v / 2)  # noqa: E731
        pref = 1.0
    elif d == 3:
        h = lambda v: v * F(v * v / 2)  # noqa: E731
        pref = 2j * math.pi / r
    elif strip is None:
        # Hankel form; the integrand is absolutely integrable.
        val, err = integrate.quad(
            lambda v: special.j0(r * v) * F(v * v / 2) * v, 0, np.inf, epsabs=0, epsrel=rtol, limit=2000
        )
        return float(2 * math.pi * val)
    else:
        def h(v):
            s = v * v / 2

            def part(fn):
                return integrate.quad(
                    lambda y: fn(F(s + y * y / 2)), 0, np.inf, epsabs=0, epsrel=1e-13, limit=200
                )[0]

            return 2 * (part(np.real) + 1j * part(np.imag))

        pref = 1.0

    c = 0.0 if strip is None else min(r, 0.9 * strip)

    def shifted(x):
        return h(complex(x, -c)) if c else h(x)

    def even(x):
        return shifted(x) + shifted(-x)

    def odd(x):
        return shifted(x) - shifted(-x)

    scale = abs(even(0.0)) + 1e-300
    for _ in range(2):
        epsabs = max(rtol * scale, 1e-300)
        ce, _s = _qawf(even, r, epsabs)
        _c, so = _qawf(odd, r, epsabs)
        total = ce - 1j * so
        scale = abs(total)
    return float(np.real(pref * math.exp(-r * c) * total))


# ------------------------------------------------------------------ moments

def moment(eq: Equilibrium, p: int) -> float:
    """Even marginal moment ``C^p = int v_1^{2p} mu(v) dv``.

    Computed by quadrature of the marginal, ``2 int_0^inf u^{2p} Phi(u^2/2) du``.
    ``C^1`` is cross-checked against ``-M''(0)``.

    Raises
    ------
    DivergentMomentError
        If the moment is infinite for this profile.
    """
    if not 1 <= p <= MAX_MOMENT:
        raise ValueError("moment order must be in 1..4")
    if p not in eq.moments:
        raise DivergentMomentError(f"moment C^{p} diverges for {eq.kind} d={eq.d} {eq.params}")
    val, _err = integrate.quad(
        lambda u: u ** (2 * p) * float(eq.phi(u * u / 2)), 0, np.inf, epsabs=0, epsrel=1e-12, limit=500
    )
    val *= 2
    if p == 1:
        ref = -float(np.real(eq.M(0.0, 2)))
        if abs(val - ref) > 1e-6 * abs(ref):
            raise CertificationError(f"C^1 = {val} but -M''(0) = {ref}")
    return float(val)
