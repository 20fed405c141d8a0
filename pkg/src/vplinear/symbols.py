"""The three linear symbols and their expansions.

With ``w = z/|xi|`` and ``L_k^B`` the Laplace integrals of
:mod:`vplinear.quadrature`,

    m_VP(z, xi) = -L_1^M(w) / |xi|^2,
    m_VB(z, xi) = -L_1^M(w),
    m_KE(z, xi) = -L_0^{KE}(w),        KE = 2M' + uM''.

``m_KE`` is computed from its own integrand rather than from
``1 + z^2 m_VP``, which would cancel catastrophically at small ``|xi|``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .quadrature import gauss_panels, laplace, principal_value

__all__ = [
    "SymbolQuery",
    "SymbolValue",
    "ExpansionCoefficients",
    "m_vp",
    "m_vb",
    "m_ke",
    "dz_m_ke",
    "dz_m_vp",
    "evaluate",
    "mke_imaginary_axis",
    "large_z_expansion",
    "check_domain",
]

DEFAULT_RTOL = 1e-12


@dataclass(frozen=True)
class SymbolQuery:
    """A point ``(z, |xi|)`` at which to evaluate the symbols."""

    z: complex
    xi_norm: float
    rtol: float = DEFAULT_RTOL


@dataclass(frozen=True)
class SymbolValue:
    """All three symbols at one query, with a quadrature error estimate."""

    query: SymbolQuery
    m_vp: complex
    m_vb: complex
    m_ke: complex
    error: float


def check_domain(eq, z, xi_norm, margin: float = 0.05):
    """Raise :class:`DomainError` unless ``Re z > -(1 - margin) R0 |xi|``."""
    z = complex(z)
    if xi_norm < 0:
        raise DomainError("|xi| must be non-negative")
    if xi_norm == 0:
        if not z.real > 0:
            raise DomainError("at xi = 0 the symbols require Re z > 0")
        return
    bound = -(1 - margin) * eq.R0 * xi_norm
    if not z.real > bound:
        raise DomainError(f"Re z = {z.real:.6g} not above {bound:.6g} (holomorphy domain)")


def _unpack(q, xi_norm, rtol):
    if isinstance(q, SymbolQuery):
        return q.z, q.xi_norm, q.rtol
    if xi_norm is None:
        raise TypeError("xi_norm is required when z is given directly")
    return q, xi_norm, (DEFAULT_RTOL if rtol is None else rtol)


def _vectorize(fn):
    """Apply a scalar evaluator elementwise over broadcast ``z`` and ``xi``."""

    def wrapper(eq, q, xi_norm=None, rtol=None, **kw):
        z, xi, tol = _unpack(q, xi_norm, rtol)
        if np.ndim(z) == 0 and np.ndim(xi) == 0:
            return fn(eq, complex(z), float(xi), tol, **kw)
        zb, xb = np.broadcast_arrays(np.asarray(z, dtype=complex), np.asarray(xi, dtype=float))
        out = np.empty(zb.shape, dtype=complex)
        for idx in np.ndindex(zb.shape):
            out[idx] = fn(eq, complex(zb[idx]), float(xb[idx]), tol, **kw)
        return out

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


@_vectorize
def m_vp(eq, z, r, rtol):
    """Vlasov-Poisson symbol ``-int_0^inf e^{-zs} s M(s|xi|) ds``.

    Accepts a :class:`SymbolQuery` or ``(z, xi_norm)``; arrays broadcast.

    Examples
    --------
    >>> from vplinear.equilibrium import make_maxwellian
    >>> complex(m_vp(make_maxwellian(1), 2.0, 0.0))
    (-0.25+0j)
    """
    check_domain(eq, z, r)
    if r == 0:
        return -1.0 / z**2
    return -laplace(eq, z / r, [("M", 1)], rtol)[0] / r**2


@_vectorize
def m_vb(eq, z, r, rtol):
    """Vlasov-Benney symbol ``|xi|^2 m_VP``; 0 at ``xi = 0`` (its limit for ``Re z > 0``)."""
    check_domain(eq, z, r)
    if r == 0:
        return 0j
    return -laplace(eq, z / r, [("M", 1)], rtol)[0]


@_vectorize
def m_ke(eq, z, r, rtol):
    """Kinetic Euler symbol, equal to ``1 + z^2 m_VP``."""
    check_domain(eq, z, r)
    if r == 0:
        return 0j
    return -laplace(eq, z / r, [("KE", 0)], rtol)[0]


@_vectorize
def dz_m_vp(eq, z, r, rtol, order=1):
    """``d^k m_VP / dz^k`` for ``k`` = 1 or 2."""
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    check_domain(eq, z, r, margin=0.1)
    if r == 0:
        return 2 / z**3 if order == 1 else -6 / z**4
    val = laplace(eq, z / r, [("M", 1 + order)], rtol)[0]
    return (-1) ** (order + 1) * val / r ** (2 + order)


@_vectorize
def dz_m_ke(eq, z, r, rtol, order=1, route="direct"):
    """``d^k m_KE / dz^k`` for ``k`` = 1 or 2.

    ``route="direct"`` differentiates the kinetic-Euler integrand; with
    ``route="algebraic"`` the derivative is assembled from those of
    ``m_VP`` through ``m_KE = 1 + z^2 m_VP``.
    """
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    check_domain(eq, z, r, margin=0.1)
    if r == 0:
        return 0j
    w = z / r
    if route == "algebraic":
        v0, v1, v2 = laplace(eq, w, [("M", 1), ("M", 2), ("M", 3)], rtol) * np.array([-1, 1, -1])
        mv = v0 / r**2
        d1 = v1 / r**3
        if order == 1:
            return 2 * z * mv + z * z * d1
        d2 = v2 / r**4
        return 2 * mv + 4 * z * d1 + z * z * d2
    if route != "direct":
        raise ValueError(f"unknown route {route!r}")
    val = laplace(eq, w, [("KE", order)], rtol)[0]
    return (-1) ** (order + 1) * val / r**order


def evaluate(eq, q: SymbolQuery) -> SymbolValue:
    """All three symbols at ``q`` with an a-posteriori error estimate.

    The estimate is the change under halving every quadrature panel.
    """
    z, r = complex(q.z), float(q.xi_norm)
    check_domain(eq, z, r)
    if r == 0:
        v = -1 / z**2
        return SymbolValue(q, v, 0j, 0j, 0.0)
    w = z / r
    terms = [("M", 1), ("KE", 0)]
    a = laplace(eq, w, terms, q.rtol)
    b = laplace(eq, w, terms, q.rtol, refine=2)
    err = float(np.max(np.abs(a - b) / np.maximum(np.abs(a), 1e-300)))
    return SymbolValue(q, -a[0] / r**2, -a[0], -a[1], err)


# ------------------------------------------------------------ imaginary axis

def _axis_extent(eq):
    """Half-width beyond which ``u^3 Phi'(u^2/2)`` is negligible."""
    u = np.geomspace(1.0, 1e4, 400)
    g = np.abs(u**4 * eq.dphi(u * u / 2))
    big = g.max()
    small = np.nonzero(np.maximum.accumulate(g[::-1])[::-1] < 1e-17 * big)[0]
    return float(u[small[0]]) if len(small) else 1e4


def mke_imaginary_axis(eq, tau):
    """Boundary value ``m_KE(i tau, eta)`` on ``Re z = 0`` at ``|xi| = 1``.

    Uses the Plemelj form

        m_KE(i tau) = -p.v. int u^3 Phi'(u^2/2) / (tau + u) du
                      + i pi tau^3 Phi'(tau^2/2),

    which is the limit of :func:`m_ke` as ``Re z`` decreases to 0.  For a
    decreasing profile the imaginary part therefore has the sign of
    ``-tau``.  Accepts scalar or array ``tau``.
    """
    if np.ndim(tau):
        return np.array([mke_imaginary_axis(eq, float(t)) for t in np.ravel(tau)]).reshape(np.shape(tau))
    tau = float(tau)
    U = _axis_extent(eq)

    def g(u):
        return u**3 * eq.dphi(u * u / 2)

    c = -tau
    if abs(c) < U - 1e-9:
        pv = principal_value(g, c, -U, U)
    else:
        lo, hi = -U, U
        npan = max(4, math.ceil((hi - lo) / 0.25))
        x, wx = gauss_panels(np.linspace(lo, hi, npan + 1), order=24)
        pv = np.sum(wx * g(x) / (x - c))
    imag = math.pi * tau**3 * float(eq.dphi(tau * tau / 2))
    return complex(-pv, imag)


# ---------------------------------------------------------------- expansion

@dataclass(frozen=True)
class ExpansionCoefficients:
    """Large-``z`` expansion ``m_KE ~ sum_p Q_{2p}(xi) / z^{2p}``.

    ``Q_{2p}(xi) = coeffs[p] * |xi|^{2p}``.  ``remainder_bound`` bounds
    ``|m_KE - partial sum| * |z/xi|^{2l+2}`` over the sampled region
    ``|z| >= region_ratio * |xi|``, ``Re z >= 0``.
    """

    l: int
    coeffs: dict
    remainder_bound: float
    region_ratio: float
    fitted: dict = field(default_factory=dict)

    def Q(self, p: int, xi_norm):
        return self.coeffs[p] * np.asarray(xi_norm, dtype=float) ** (2 * p)

    def partial_sum(self, z, xi_norm):
        z = np.asarray(z, dtype=complex)
        return sum(self.Q(p, xi_norm) / z ** (2 * p) for p in range(1, self.l + 1))


def large_z_expansion(eq, l: int) -> ExpansionCoefficients:
    """Coefficients ``Q_{2p} = (-1)^{p+1} (2p+1) C^p |xi|^{2p}`` for ``p <= l``.

    The sign convention is verified on the fly: ``z^2 m_KE`` is fitted at
    ``z = 10, 20, 40`` (``|xi| = 1``) and the leading coefficient must match
    ``3 C_mu``.  The remainder bound is measured on a ring of sample points.
    """
    if l not in (1, 2):
        raise ValueError("expansion order must be 1 or 2")
    for p in range(1, l + 2):
        if p not in eq.moments:
            raise ValueError(f"order {l} needs the moment C^{p}, which diverges")
    coeffs = {p: (-1) ** (p + 1) * (2 * p + 1) * eq.moments[p] for p in range(1, l + 1)}

    zs = np.array([10.0, 20.0, 40.0])
    y = np.array([complex(m_ke(eq, z, 1.0)) * z * z for z in zs]).real
    A = np.vstack([zs ** (-2 * j) for j in range(3)]).T
    fit = np.linalg.lstsq(A, y, rcond=None)[0]
    if abs(fit[0] - coeffs[1]) > 1e-4 * abs(coeffs[1]):
        raise ArithmeticError(f"fitted Q2 = {fit[0]} disagrees with 3 C_mu = {coeffs[1]}")

    ratio = 10.0
    worst = 0.0
    for ang in np.linspace(-math.pi / 2, math.pi / 2, 13):
        for rad in (ratio, 2 * ratio, 4 * ratio):
            z = rad * complex(math.cos(ang), math.sin(ang))
            partial = sum(coeffs[p] / z ** (2 * p) for p in range(1, l + 1))
            worst = max(worst, abs(complex(m_ke(eq, z, 1.0)) - partial) * rad ** (2 * l + 2))
    return ExpansionCoefficients(
        l=l,
        coeffs=coeffs,
        remainder_bound=2.0 * worst,
        region_ratio=ratio,
        fitted={"Q2": float(fit[0]), "Q4": float(fit[1])},
    )
