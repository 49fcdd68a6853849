"""Unsupervised threshold tuning from a robust normal fit.

The similarity sample is assumed to be dominated by different-place pairs.
A normal model is fitted with the median and the normalized median absolute
deviation, and the threshold is the model quantile at probability ``p``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

MADN_CONSTANT = 0.675
P_INTRA_DB = 1.0 - 1e-6
P_RELOC = 0.95

# Acklam's rational approximation, lower region and central region
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425
_SQRT2 = math.sqrt(2.0)
_SQRT2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class ThresholdModel:
    mu: float
    sigma: float
    probability: float
    theta: float


def robust_fit(samples) -> tuple[float, float]:
    """Return ``(median, MAD / 0.675)`` of ``samples``."""
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size == 0:
        raise DomainError("robust_fit needs at least one sample")
    if not np.all(np.isfinite(x)):
        raise DomainError("robust_fit got non-finite samples")
    mu = float(np.median(x))
    dev = np.abs(x - mu)
    sigma = float(np.median(dev)) / MADN_CONSTANT
    return mu, sigma


def _lower_quantile(p: float) -> float:
    """Standard normal quantile for ``0 < p <= 0.5``."""
    if p < _P_LOW:
        q = math.sqrt(-2.0 * math.log(p))
        x = (((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / (
            (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0
        )
    else:
        q = p - 0.5
        r = q * q
        x = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q / (
            ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0
        )
    # one Halley step on the CDF; erfc keeps the lower tail at full relative precision
    e = 0.5 * math.erfc(-x / _SQRT2) - p
    u = e * _SQRT2PI * math.exp(0.5 * x * x)
    return x - u / (1.0 + 0.5 * x * u)


def normal_quantile(p: float) -> float:
    """Inverse of the standard normal CDF, absolute error below 1e-8."""
    p = float(p)
    if not 0.0 < p < 1.0:
        raise DomainError(f"probability must lie in (0, 1), got {p}")
    if p == 0.5:
        return 0.0
    if p > 0.5:
        # 1 - p is exact for p >= 0.5
        return -_lower_quantile(1.0 - p)
    return _lower_quantile(p)


def autotune(samples, p: float) -> ThresholdModel:
    """Fit the robust normal model to ``samples`` and place ``theta`` at quantile ``p``."""
    z = normal_quantile(p)
    mu, sigma = robust_fit(samples)
    return ThresholdModel(mu=mu, sigma=sigma, probability=float(p), theta=mu + sigma * z)
