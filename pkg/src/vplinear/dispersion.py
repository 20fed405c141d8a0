"""Langmuir root branches ``Z_+-(|xi|)`` and their residue amplitudes.

The roots solve ``g(z) = z^2 + 1 - m_KE(z, xi) = 0``.  They are continued in
``r = |xi|`` with a tangent predictor and a Newton corrector.  Close to the
imaginary axis the damping ``Re Z`` is exponentially small and cannot be
resolved from ``g`` itself in double precision; there it is obtained from
the first-order correction ``-g(i Omega) / g'(i Omega)``, whose numerator is
the exactly known boundary imaginary part.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, DomainError, InconclusiveError
from .penrose import winding_number
from .quadrature import laplace

__all__ = [
    "BranchSample",
    "LangmuirBranch",
    "track_branch",
    "branch_quadratic_fit",
    "damping_flatness_check",
    "count_zeros_box",
    "dispersion_function",
    "residue_amplitude",
]

RESIDUAL_TOL = 1e-11
_AXIS_SWITCH = 1e-7


@dataclass(frozen=True)
class BranchSample:
    """One converged root.

    ``log_abs_gamma`` is ``log |Re Z|``; it stays finite when the damping
    rate itself underflows to zero.
    """

    r: float
    Z: complex
    a: complex
    newton_residual: float
    log_abs_gamma: float
    window_unique: bool | None = None

    @property
    def Gamma(self) -> float:
        return self.Z.real

    @property
    def T(self) -> float:
        return abs(self.Z.imag) - 1.0


@dataclass
class LangmuirBranch:
    sign: int
    samples: list = field(default_factory=list)
    eps3: float = 1.0

    def arrays(self):
        """``(r, Z, a)`` as numpy arrays."""
        r = np.array([s.r for s in self.samples])
        Z = np.array([s.Z for s in self.samples])
        a = np.array([s.a for s in self.samples])
        return r, Z, a

    @property
    def certified_radius(self) -> float:
        """Largest ``r`` up to which every uniqueness check passed."""
        best = 0.0
        for s in self.samples:
            if s.window_unique is False:
                break
            if s.window_unique:
                best = s.r
        return best


def dispersion_function(eq, z, r):
    """``(g, dg/dz, dm_KE/dz)`` at ``z`` for radius ``r > 0``."""
    w = z / r
    l0, l1 = laplace(eq, w, [("KE", 0), ("KE", 1)])
    mke, dmke = -l0, l1 / r
    return z * z + 1 - mke, 2 * z - dmke, dmke


def residue_amplitude(Z, dmke):
    """``a = Z^2 / (2Z - dz m_KE(Z))``."""
    return Z * Z / (2 * Z - dmke)


def count_zeros_box(eq, r, re_lo, re_hi, im_lo, im_hi, n0=32):
    """Number of zeros of ``g`` inside a rectangle, by the argument principle."""
    if re_lo <= -eq.R0 * r:
        raise DomainError("box leaves the holomorphy domain")

    def g(z):
        return dispersion_function(eq, z, r)[0]

    corners = [complex(re_lo, im_lo), complex(re_hi, im_lo), complex(re_hi, im_hi), complex(re_lo, im_hi)]
    total = 0.0
    for k in range(4):
        a, b = corners[k], corners[(k + 1) % 4]
        ang, _ = winding_number(g, lambda s, a=a, b=b: a + (b - a) * s, n0=n0)
        total += ang
    wind = total / (2 * math.pi)
    n = int(round(wind))
    if abs(wind - n) > 0.05:
        raise InconclusiveError(f"non-integer winding {wind}")
    return n


def _axis_refine(eq, Z, r):
    """Recompute an almost-undamped root from the exact boundary values.

    ``Omega`` solves ``Re g(i Omega) = 0``; the damping is
    ``Re(-g(i Omega) / g'(i Omega))`` where ``Im g(i Omega)`` comes from the
    Plemelj formula.  Returns ``(Z, log|Re Z|, dm_KE)``.
    """
    om = Z.imag
    for _ in range(50):
        gv, dg, _ = dispersion_function(eq, complex(0.0, om), r)
        step = gv.real / (1j * dg).real
        om -= step
        if abs(step) < 1e-15 * abs(om):
            break
    w = abs(om) / r
    gv, dg, dmke = dispersion_function(eq, complex(0.0, om), r)
    # Im m_KE(i w) = pi w^3 Phi'(w^2/2) sgn(w); Im g = -Im m_KE
    s = w * w / 2
    log_im = math.log(math.pi * w**3) + float(eq.log_abs_phi_prime(s))
    sign_phi = -1.0 if float(eq.dphi(s)) <= 0 else 1.0
    im_g = -math.copysign(1.0, om) * sign_phi  # sign of Im g, magnitude exp(log_im)
    q = (-1j / dg).real  # Gamma = Im g * q
    log_gamma = log_im + math.log(abs(q)) if q != 0 else -math.inf
    gamma = im_g * math.copysign(1.0, q) * math.exp(log_gamma)
    return complex(gamma, om), log_gamma, dmke


def _newton(eq, z, r, maxit=40):
    for _ in range(maxit):
        gv, dg, dmke = dispersion_function(eq, z, r)
        step = gv / dg
        z = z - step
        if not np.isfinite(z) or z.real <= -0.9 * eq.R0 * r:
            raise ConvergenceError("Newton left the holomorphy domain")
        if abs(step) < 1e-14 * max(1.0, abs(z)):
            gv, dg, dmke = dispersion_function(eq, z, r)
            return z, gv, dmke
    raise ConvergenceError(f"Newton did not converge at r={r}")


def _solve_at(eq, sign, r, guess, eps3):
    Z, gv, dmke = _newton(eq, guess, r)
    if sign * Z.imag <= 0:
        raise ConvergenceError("converged to the wrong branch")
    if abs(Z.real) < _AXIS_SWITCH:
        Z, log_gamma, dmke = _axis_refine(eq, Z, r)
        gv = dispersion_function(eq, Z, r)[0]
    else:
        log_gamma = math.log(abs(Z.real)) if Z.real != 0 else -math.inf
    res = abs(gv)
    if res >= RESIDUAL_TOL:
        raise ConvergenceError(f"residual {res:.2e} at r={r}")
    if Z.real < -0.5 * eq.R0 * r:
        raise DomainError(f"root left the tracking region (Re Z = {Z.real:.4g} < -R0 r / 2 at r={r})")
    if abs(abs(Z.imag) - 1) > eps3 * r:
        raise DomainError(f"root left the window |Im Z -+ 1| <= {eps3} r at r={r}")
    return Z, res, log_gamma, dmke


def track_branch(eq, sign, r_grid, eps3: float = 1.0, check_window: bool | int = True) -> LangmuirBranch:
    """Continue the root ``Z_sign(r)`` along an increasing radius grid.

    Parameters
    ----------
    eq : Equilibrium
    sign : {+1, -1}
        Branch near ``+i`` or ``-i``.
    r_grid : sequence of float
        Increasing radii in ``(0, r_max]``.
    eps3 : float
        Localization window ``| |Im Z| - 1 | <= eps3 r``.
    check_window : bool or int
        Run the argument-principle uniqueness check in a box around each
        root (``True``), never (``False``), or every ``n``-th sample.

    Returns
    -------
    LangmuirBranch
    """
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    r_grid = np.asarray(r_grid, dtype=float)
    if r_grid.ndim != 1 or len(r_grid) == 0 or r_grid[0] <= 0 or np.any(np.diff(r_grid) <= 0):
        raise ValueError("r_grid must be increasing and positive")
    every = 1 if check_window is True else (0 if check_window is False else int(check_window))
    C = eq.moments[1]
    branch = LangmuirBranch(sign=sign, eps3=eps3)
    prev = None  # (r, Z, dZ/dr)
    for k, r in enumerate(r_grid):
        targets = [r]
        while targets:
            rt = targets[-1]
            if prev is None:
                guess = sign * 1j * (1 + 1.5 * C * rt * rt)
            else:
                guess = prev[1] + prev[2] * (rt - prev[0])
            try:
                Z, res, log_gamma, dmke = _solve_at(eq, sign, rt, guess, eps3)
            except ConvergenceError:
                lo = prev[0] if prev is not None else 0.0
                if rt - lo < 1e-6 * max(rt, 1e-3):
                    raise
                targets.append(0.5 * (lo + rt))
                continue
            targets.pop()
            # Tangent of the branch: dZ/dr = -(dg/dr)/(dg/dz), dg/dr = J'(w) Z / r^2.
            jp = dmke * rt
            dZ = -(jp * Z / rt**2) / (2 * Z - dmke)
            prev = (rt, Z, dZ)
        unique = None
        if every and k % every == 0:
            h = min(0.25 * r, 0.5 * (0.9 * eq.R0 * r + Z.real))
            n = count_zeros_box(eq, r, Z.real - h, Z.real + h, Z.imag - h, Z.imag + h)
            unique = n == 1
        branch.samples.append(
            BranchSample(
                r=float(r),
                Z=complex(Z),
                a=complex(residue_amplitude(Z, dmke)),
                newton_residual=float(res),
                log_abs_gamma=float(log_gamma),
                window_unique=unique,
            )
        )
    return branch


def branch_quadratic_fit(branch: LangmuirBranch, r_max: float = 0.1, quartic: bool = True) -> dict:
    """Least-squares fit of ``|Im Z| - 1`` over samples with ``r <= r_max``.

    With ``quartic`` the model is ``c2 r^2 + c4 r^4``; otherwise ``c2 r^2``
    alone, whose ``c2`` absorbs the ``r^4`` term (about 1% for the
    Maxwellian at ``r_max = 0.1``).  Both estimates are returned.
    """
    r, Z, _ = branch.arrays()
    sel = r <= r_max
    if sel.sum() < 8:
        raise ValueError(f"need at least 8 samples with r <= {r_max}, have {int(sel.sum())}")
    x = r[sel] ** 2
    y = np.abs(Z[sel].imag) - 1
    c2_pure = float(np.dot(x, y) / np.dot(x, x))
    A = np.vstack([x, x * x]).T
    (c2_q, c4), *_ = np.linalg.lstsq(A, y, rcond=None)
    c2 = float(c2_q) if quartic else c2_pure
    model = A @ [c2_q, c4] if quartic else c2_pure * x
    rms = float(np.sqrt(np.mean((y - model) ** 2)))
    return {
        "c2": c2,
        "c2_quadratic_only": c2_pure,
        "c4": float(c4) if quartic else float("nan"),
        "quartic": bool(quartic),
        "rms": rms,
        "n": int(sel.sum()),
    }


def damping_flatness_check(branch: LangmuirBranch, r_max: float = 0.5, min_slope: float = 2.7) -> dict:
    """Slope of ``log|Gamma|`` against ``log r`` and the sign checks.

    Reports the fitted slope over ``r <= r_max``, whether every sample is
    damped, and whether the two branches are conjugate when both are given.
    """
    r = np.array([s.r for s in branch.samples])
    lg = np.array([s.log_abs_gamma for s in branch.samples])
    sel = (r <= r_max) & np.isfinite(lg)
    slope = float(np.polyfit(np.log(r[sel]), lg[sel], 1)[0]) if sel.sum() >= 2 else float("nan")
    damped = all(
        np.isfinite(s.log_abs_gamma) and (s.Z.real < 0 or (s.Z.real == 0 and s.log_abs_gamma < -700))
        for s in branch.samples
    )
    return {
        "slope": slope,
        "all_damped": bool(damped),
        "slope_ok": bool(slope >= min_slope),
        "r_range": [float(r[sel].min()), float(r[sel].max())] if sel.any() else [],
    }
