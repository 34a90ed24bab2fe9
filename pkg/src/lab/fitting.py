"""
Least-squares fits that turn simulated series into reported constants.

Exponential rates and power laws are straight-line fits in log space; the
confidence envelope is a joint nonlinear fit over every (t, N, epsilon) cell.
"""

import logging
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import curve_fit
from scipy.stats import linregress

from kinetics.exceptions import KineticsError

logger = logging.getLogger(__name__)

MIN_RATE_POINTS = 4
MIN_POWERLAW_POINTS = 3


class FitError(KineticsError, ValueError):
    """Not enough usable points, or values that have no logarithm."""


def _r_squared(y, predicted):
    total = float(np.sum((y - y.mean()) ** 2))
    if total == 0.0:
        return 1.0
    residual = float(np.sum((y - predicted) ** 2))
    return float(np.clip(1.0 - residual / total, 0.0, 1.0))


def _log_line(x, values):
    values = np.asarray(values, dtype=float)
    if np.any(~np.isfinite(values)) or np.any(values <= 0):
        raise FitError('Fitted values must be finite and > 0.')
    y = np.log(values)
    if np.ptp(x) == 0:
        raise FitError('Fit abscissae must not all coincide.')
    line = linregress(x, y)
    return line.slope, line.intercept, _r_squared(y, line.intercept + line.slope * x)


@dataclass(frozen=True)
class ExponentialFit:
    rate: float
    prefactor: float
    r_squared: float
    points: int

    def as_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class PowerLawFit:
    slope: float
    prefactor: float
    r_squared: float
    points: int

    def as_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class EnvelopeFit:
    A: float
    B: float
    chi: float
    r_squared: float
    cells: int

    def as_dict(self):
        return asdict(self)


def default_window(t):
    """Last half of a time grid."""
    t = np.asarray(t, dtype=float)
    return float(t[len(t) // 2]), float(t[-1])


def fit_exponential_rate(t, values, window=None):
    """
    value ~ prefactor * exp(-rate * t), by least squares on (t, ln value).

    Only points with window[0] <= t <= window[1] are used; the default window
    is the last half of the grid.

    Raises:
        FitError: fewer than four points in the window, or a value <= 0.
    """
    t = np.asarray(t, dtype=float)
    values = np.asarray(values, dtype=float)
    lo, hi = window if window is not None else default_window(t)
    mask = (t >= lo) & (t <= hi)
    if mask.sum() < MIN_RATE_POINTS:
        raise FitError(f"Need at least {MIN_RATE_POINTS} points in [{lo:g}, {hi:g}], got {int(mask.sum())}.")
    slope, intercept, r_squared = _log_line(t[mask], values[mask])
    return ExponentialFit(rate=-float(slope), prefactor=float(np.exp(intercept)),
                          r_squared=r_squared, points=int(mask.sum()))


def fit_powerlaw(n, values):
    """value ~ prefactor * N ** slope, by least squares on (ln N, ln value)."""
    n = np.asarray(n, dtype=float)
    if len(np.unique(n)) < MIN_POWERLAW_POINTS:
        raise FitError(f"Need at least {MIN_POWERLAW_POINTS} distinct N values.")
    if np.any(n <= 0):
        raise FitError('Particle counts must be > 0.')
    slope, intercept, r_squared = _log_line(np.log(n), values)
    return PowerLawFit(slope=float(slope), prefactor=float(np.exp(intercept)),
                       r_squared=r_squared, points=len(n))


def _envelope(cells, A, B, chi):
    t, n, eps = cells
    return (A * np.exp(-chi * t) + B / n) / eps ** 2


def fit_confidence_envelope(t, n, epsilon, frequency, chi_guess=0.5):
    """
    Joint fit of P(W2 >= eps) ~ A exp(-chi t) / eps^2 + B / (N eps^2).

    The three arrays index the cells; A, B and chi are constrained to be
    non-negative. The fit says nothing about how the mass splits between
    the two terms beyond what the data forces.
    """
    t, n, epsilon, frequency = (np.asarray(a, dtype=float) for a in (t, n, epsilon, frequency))
    if t.size < 3:
        raise FitError('Need at least three cells for the envelope fit.')
    try:
        params, _ = curve_fit(
            _envelope, (t, n, epsilon), frequency,
            p0=(max(frequency.max(), 1e-3), 1.0, chi_guess),
            bounds=([0.0, 0.0, 0.0], [np.inf, np.inf, np.inf]),
        )
    except (RuntimeError, ValueError) as error:
        logger.warning("Envelope fit failed: %s", error)
        raise FitError(f"Envelope fit failed: {error}") from error
    A, B, chi = (float(p) for p in params)
    predicted = _envelope((t, n, epsilon), A, B, chi)
    return EnvelopeFit(A=A, B=B, chi=chi, r_squared=_r_squared(frequency, predicted), cells=int(t.size))
