"""Log-log decay fits with an optional logarithmic correction."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["DecayReport", "fit_decay", "loglog_slope"]

MIN_SAMPLES = 10
MIN_TIME = 20.0


def loglog_slope(t, v, log_correction=False):
    """Least-squares slope of ``log v`` (or ``log(v / log t)``) against ``log t``.

    Returns ``(slope, residual_rms)``.
    """
    t = np.asarray(t, dtype=float)
    v = np.asarray(v, dtype=float)
    y = np.log(v)
    if log_correction:
        y = y - np.log(np.log(t))
    x = np.log(t)
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    rms = float(np.sqrt(np.mean((A @ coef - y) ** 2)))
    return float(coef[0]), rms


@dataclass
class DecayReport:
    """Outcome of one decay fit.

    ``slope`` is the fit selected by ``log_correction``; ``alt_slope`` is the
    other variant, reported because desk-scale data cannot separate a
    ``log t`` factor from a small change of exponent.  ``mode`` is
    ``"within"`` (pass iff ``|slope - target| <= tolerance``) or
    ``"at_most"`` (pass iff ``slope <= target + tolerance``).
    """

    component: str
    norm: str
    samples: list
    window: tuple
    slope: float
    log_correction: bool
    residual_rms: float
    target: float
    tolerance: float
    mode: str = "within"
    alt_slope: float = float("nan")
    verdict: str = field(init=False)

    def __post_init__(self):
        if self.mode == "within":
            ok = abs(self.slope - self.target) <= self.tolerance
        elif self.mode == "at_most":
            ok = self.slope <= self.target + self.tolerance
        else:
            raise ValueError(f"unknown mode {self.mode!r}")
        self.verdict = "pass" if ok else "fail"

    def to_dict(self) -> dict:
        return {
            "component": self.component,
            "norm": self.norm,
            "window": list(self.window),
            "slope": self.slope,
            "alt_slope": self.alt_slope,
            "log_correction": self.log_correction,
            "residual_rms": self.residual_rms,
            "target": self.target,
            "tolerance": self.tolerance,
            "mode": self.mode,
            "verdict": self.verdict,
            "n_samples": len(self.samples),
        }


def fit_decay(
    samples,
    target: float,
    log_correction: bool,
    window=(20.0, 500.0),
    tolerance: float = 0.15,
    mode: str = "within",
    component: str = "",
    norm: str = "",
) -> DecayReport:
    """Fit a power law to ``(t, value)`` samples inside ``window``.

    Parameters
    ----------
    samples : sequence of (float, float)
    target : float
        Expected exponent (negative for decay).
    log_correction : bool
        Fit ``value / log t`` instead of ``value``.
    window : (float, float)
        Inclusive time window; only samples with ``t >= 20`` count.

    Raises
    ------
    ValueError
        Fewer than 10 usable samples, or a non-positive value in the window.

    Examples
    --------
    >>> t = [20.0 * 1.3**k for k in range(12)]
    >>> round(fit_decay([(s, s**-2) for s in t], -2, False).slope, 6)
    -2.0
    """
    pts = [(float(t), float(v)) for t, v in samples if window[0] <= t <= window[1] and t >= MIN_TIME]
    if len(pts) < MIN_SAMPLES:
        raise ValueError(f"need at least {MIN_SAMPLES} samples with t >= {MIN_TIME} in {window}, have {len(pts)}")
    t = np.array([p[0] for p in pts])
    v = np.array([p[1] for p in pts])
    if np.any(~(v > 0)):
        raise ValueError("non-positive norm values in the fit window")
    slope, rms = loglog_slope(t, v, log_correction)
    alt, _ = loglog_slope(t, v, not log_correction)
    return DecayReport(
        component=component,
        norm=norm,
        samples=pts,
        window=(float(window[0]), float(window[1])),
        slope=slope,
        log_correction=bool(log_correction),
        residual_rms=rms,
        target=float(target),
        tolerance=float(tolerance),
        mode=mode,
        alt_slope=alt,
    )
