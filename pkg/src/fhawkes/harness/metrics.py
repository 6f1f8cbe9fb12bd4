"""Accuracy metrics and robust summaries."""

from __future__ import annotations

import numpy as np

from ..errors import MetricError


def relative_error(theta_hat, theta0) -> float:
    """``sum_j |theta_hat_j - theta0_j| / |theta0_j|``."""
    est = np.asarray(theta_hat, dtype=float)
    true = np.asarray(theta0, dtype=float)
    if est.shape != true.shape:
        raise MetricError(f"length mismatch: {est.shape} vs {true.shape}")
    if np.any(true == 0):
        raise MetricError("relative error is undefined for a zero true component")
    return float(np.sum(np.abs(est - true) / np.abs(true)))


def median_iqr(values) -> tuple[float, float]:
    """Median and interquartile range; values are sorted first so order never matters."""
    v = np.sort(np.asarray(values, dtype=float))
    if v.size == 0:
        return float("nan"), float("nan")
    q1, med, q3 = np.percentile(v, [25, 50, 75])
    return float(med), float(q3 - q1)
