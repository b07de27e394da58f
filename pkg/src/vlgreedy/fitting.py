"""Least-squares power-law fits in log-log coordinates."""

from __future__ import annotations

from typing import NamedTuple, Sequence

import numpy as np

from .errors import FitError


class FitResult(NamedTuple):
    slope: float
    intercept: float
    r_squared: float


def loglog_fit(x: Sequence[float], y: Sequence[float]) -> FitResult:
    """Fit log(y) = intercept + slope * log(x).

    R^2 is reported as 1 when the data have no spread in log(y) and the fit
    is exact (a flat line is perfectly explained).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise FitError("x and y must be 1-D sequences of equal length")
    if x.size < 3:
        raise FitError(f"need at least 3 points, got {x.size}")
    if np.any(~np.isfinite(x)) or np.any(~np.isfinite(y)) or np.any(x <= 0) or np.any(y <= 0):
        raise FitError("log-log fit needs finite positive data")
    lx, ly = np.log(x), np.log(y)
    if np.ptp(lx) == 0:
        raise FitError("all x values coincide")
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (intercept + slope * lx)
    ss_res = float(resid @ resid)
    ss_tot = float(((ly - ly.mean()) ** 2).sum())
    if ss_tot <= 1e-30:
        r2 = 1.0 if ss_res <= 1e-30 else 0.0
    else:
        r2 = 1.0 - ss_res / ss_tot
    return FitResult(float(slope), float(intercept), float(r2))
