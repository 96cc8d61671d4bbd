"""Readouts from fidelity traces: plateau values, decay fits, slopes, resonance peaks."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def resonance_mask(times, resonances, n_widths: float = 3.0) -> np.ndarray:
    """True where t is farther than n_widths * width from every (time, width) pair."""
    times = np.asarray(times, dtype=float)
    keep = np.ones(times.size, dtype=bool)
    for tr, w in resonances:
        keep &= np.abs(times - tr) > n_widths * w
    return keep


def _window(times, t_lo, t_hi, resonances, n_widths):
    times = np.asarray(times, dtype=float)
    sel = (times >= t_lo) & (times <= t_hi)
    if resonances:
        sel &= resonance_mask(times, resonances, n_widths)
    return sel


@dataclass(frozen=True)
class PlateauEstimate:
    value: float
    raw_median: float
    decay_rate: float
    n_points: int
    flagged: bool = False


def plateau_estimate(times, F, t_lo, t_hi, resonances=(), n_widths: float = 3.0) -> PlateauEstimate:
    """Plateau readout over [t_lo, t_hi] with resonance neighbourhoods removed.

    ``raw_median`` is the median of F in the window.  ``value`` first removes
    the onset of the slow Gaussian decay: c is the least-squares slope of
    -ln F against t^2 in the window (clipped at 0) and the median is taken of
    F exp(c t^2).  A window with t_hi <= t_lo is flagged and returns NaN.
    """
    times = np.asarray(times, dtype=float)
    F = np.asarray(F, dtype=float)
    if not t_hi > t_lo:
        return PlateauEstimate(np.nan, np.nan, np.nan, 0, True)
    sel = _window(times, t_lo, t_hi, resonances, n_widths) & (F > 0)
    if sel.sum() < 3:
        return PlateauEstimate(np.nan, np.nan, np.nan, int(sel.sum()), True)
    t2 = times[sel] ** 2
    y = -np.log(F[sel])
    c = max(0.0, float(np.polyfit(t2, y, 1)[0]))
    return PlateauEstimate(float(np.median(F[sel] * np.exp(c * t2))), float(np.median(F[sel])),
                           c, int(sel.sum()))


@dataclass(frozen=True)
class GaussianFit:
    t_decay: float
    intercept: float
    t_lo: float
    t_hi: float


def fit_gaussian_decay(times, F, upper: float = 0.8, lower: float = 0.1, resonances=(),
                       n_widths: float = 3.0) -> GaussianFit:
    """Fit -ln F = a + (t/t_decay)^2 over the final descent from ``upper`` to ``lower``.

    Samples within ``n_widths`` widths of a resonance are dropped first.  Of
    the rest, the window opens after the last one above ``upper`` (so earlier
    dips, e.g. pi resonances, are skipped) and closes at the first later one
    below ``lower``.
    """
    times = np.asarray(times, dtype=float)
    F = np.asarray(F, dtype=float)
    keep = resonance_mask(times, resonances, n_widths) if resonances else np.ones(F.size, dtype=bool)
    idx = np.flatnonzero(keep)
    below = idx[F[idx] < lower]
    end = below[0] if below.size else F.size
    above = idx[(idx < end) & (F[idx] > upper)]
    start = above[-1] + 1 if above.size else 0
    sel = np.zeros(F.size, dtype=bool)
    sel[start:end] = True
    sel &= keep
    if sel.sum() < 3:
        raise ValueError("too few points in the Gaussian fit window")
    b, a = np.polyfit(times[sel] ** 2, -np.log(F[sel]), 1)
    return GaussianFit(float(1 / np.sqrt(b)) if b > 0 else np.inf, float(np.exp(-a)),
                       float(times[sel][0]), float(times[sel][-1]))


def loglog_slope(times, F, t_lo, t_hi) -> float:
    times = np.asarray(times, dtype=float)
    F = np.asarray(F, dtype=float)
    sel = (times >= t_lo) & (times <= t_hi) & (F > 0) & (times > 0)
    return float(np.polyfit(np.log(times[sel]), np.log(F[sel]), 1)[0])


def peak_near(times, F, center: float, half_width: float):
    """(t_peak, F_peak) of the maximum within |t - center| <= half_width."""
    times = np.asarray(times, dtype=float)
    sel = np.flatnonzero(np.abs(times - center) <= half_width)
    if sel.size == 0:
        raise ValueError("no samples near the requested center")
    i = sel[np.argmax(np.asarray(F)[sel])]
    return float(times[i]), float(F[i])


def ridge_profiles(C: np.ndarray):
    """Shift-averaged |C| profiles of a square correlation surface.

    Returns (diag, g) with diag[t] = |C(t, t)| and g[d] = mean_t |C(t + d, t)|.
    """
    A = np.abs(C)
    n = A.shape[0]
    diag = np.diag(A).copy()
    g = np.array([np.mean(np.diagonal(A, offset=-d)) for d in range(n)])
    return diag, g
