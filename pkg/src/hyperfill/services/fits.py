from __future__ import annotations

import math

import numpy as np
from scipy.optimize import linprog
from scipy.stats import linregress

from hyperfill.domain.models import SlopeFit


def chebyshev_line(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    """Minimax line fit: (slope, intercept, worst absolute residual)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size == 0:
        return 0.0, 0.0, 0.0
    if np.ptp(x) == 0:
        return 0.0, float(0.5 * (y.max() + y.min())), float(0.5 * np.ptp(y))
    ones = np.ones_like(x)
    # variables: intercept, slope, deviation
    a_ub = np.vstack(
        [
            np.column_stack([-ones, -x, -ones]),
            np.column_stack([ones, x, -ones]),
        ]
    )
    b_ub = np.concatenate([-y, y])
    result = linprog(
        c=[0.0, 0.0, 1.0],
        A_ub=a_ub,
        b_ub=b_ub,
        bounds=[(None, None), (None, None), (0, None)],
        method="highs",
    )
    if not result.success:
        fit = linregress(x, y)
        residual = float(np.max(np.abs(y - fit.intercept - fit.slope * x)))
        return float(fit.slope), float(fit.intercept), residual
    intercept, slope, deviation = result.x
    return float(slope), float(intercept), float(deviation)


def _envelope(
    x: np.ndarray, y: np.ndarray, *, lower: bool, anchored: bool = True
) -> tuple[np.ndarray, np.ndarray]:
    keys = np.round(x, 9)
    xs, ys = ([0.0], [0.0]) if anchored else ([], [])
    for key in np.unique(keys):
        if key == 0:
            continue
        chunk = y[keys == key]
        xs.append(float(key))
        ys.append(float(chunk.min() if lower else chunk.max()))
    return np.array(xs), np.array(ys)


def lower_decay_order(
    log_radius_ratio: np.ndarray, log_mass_ratio: np.ndarray, *, anchored: bool = True
) -> tuple[float, float]:
    """Fit (Q, C) with mass ratio >= C^-1 (radius ratio)^Q on every sample.

    Inputs are log(r'/r) <= 0 and log(mu(B')/mu(B)) for concentric pairs. An anchored
    fit passes through the origin; otherwise the intercept is free and only
    the worst-case envelope shape sets Q.
    """
    x = np.asarray(log_radius_ratio, dtype=float)
    y = np.asarray(log_mass_ratio, dtype=float)
    ex, ey = _envelope(x, y, lower=True, anchored=anchored)
    order, _, _ = chebyshev_line(ex, ey)
    order = max(order, 0.0)
    log_constant = max(0.0, float(np.max(order * x - y))) if x.size else 0.0
    return order, math.exp(log_constant)


def upper_growth_order(
    log_radius_ratio: np.ndarray, log_mass_ratio: np.ndarray
) -> tuple[float, float]:
    """Fit (eta, C) with mass ratio <= C (radius ratio)^eta on every sample."""
    x = np.asarray(log_radius_ratio, dtype=float)
    y = np.asarray(log_mass_ratio, dtype=float)
    ex, ey = _envelope(x, y, lower=False)
    order, _, _ = chebyshev_line(ex, ey)
    order = max(order, 0.0)
    log_constant = max(0.0, float(np.max(y - order * x))) if x.size else 0.0
    return order, math.exp(log_constant)


def slope_fit(x: np.ndarray, y: np.ndarray) -> SlopeFit | None:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = np.isfinite(x) & np.isfinite(y)
    x, y = x[keep], y[keep]
    if x.size < 2 or np.ptp(x) == 0:
        return None
    if np.ptp(y) == 0:
        return SlopeFit(slope=0.0, intercept=float(y[0]), stderr=0.0, r2=0.0)
    fit = linregress(x, y)
    return SlopeFit(
        slope=float(fit.slope),
        intercept=float(fit.intercept),
        stderr=float(fit.stderr),
        r2=float(fit.rvalue**2),
    )
