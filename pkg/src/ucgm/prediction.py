"""Conversions between raw estimator outputs and data/noise predictions.

With an interpolated state x_t = alpha z + gamma x and a raw output F that
approximates the target alpha_hat z + gamma_hat x, solving the 2x2 system for
(x, z) gives

    x_pred = (alpha * F - alpha_hat * x_t) / d
    z_pred = (gamma_hat * x_t - gamma * F) / d
    d      = alpha * gamma_hat - alpha_hat * gamma

Both are exact whenever F is exact, and for ARBITRARY F they satisfy
alpha * z_pred + gamma * x_pred == x_t, so reconstruction through the
predictions never leaves the interpolation line. Computation follows the
dtype of the state arrays (float32 in, float32 out) so cancellation behaviour
can be probed at reduced precision.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .transport import Coefficients

__all__ = ["StatePair", "interpolate", "target_field", "predict_x", "predict_z"]

# Below this the 2x2 coefficient system is treated as numerically singular.
SINGULAR_EPS = 1e-12


class StatePair(NamedTuple):
    x: np.ndarray
    z: np.ndarray


def _pair(a, b, name_a, name_b):
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"{name_a} and {name_b} shapes differ: "
                         f"{a.shape} vs {b.shape}")
    return a, b


def _coef(value, like):
    """Cast a coefficient to the data dtype, adding a trailing axis when the
    coefficient is per-sample and the data has feature dimensions."""
    c = np.asarray(value, dtype=like.dtype)
    if c.ndim and c.ndim < like.ndim:
        c = c.reshape(c.shape + (1,) * (like.ndim - c.ndim))
    return c


def _denominator(coeffs: Coefficients, like):
    d = _coef(coeffs.denominator, like)
    if np.any(np.abs(d) < SINGULAR_EPS):
        raise ValueError("coupling determinant is numerically zero; "
                         "predictions are undefined at this time")
    return d


def interpolate(x, z, coeffs: Coefficients):
    """State on the interpolation line: alpha * z + gamma * x."""
    x, z = _pair(x, z, "x", "z")
    return _coef(coeffs.alpha, z) * z + _coef(coeffs.gamma, x) * x


def target_field(x, z, coeffs: Coefficients):
    """Regression target: alpha_hat * z + gamma_hat * x."""
    x, z = _pair(x, z, "x", "z")
    return _coef(coeffs.alpha_hat, z) * z + _coef(coeffs.gamma_hat, x) * x


def predict_x(F, x_t, coeffs: Coefficients):
    """Data prediction recovered from a raw output F at state x_t."""
    F, x_t = _pair(F, x_t, "F", "x_t")
    d = _denominator(coeffs, x_t)
    return (_coef(coeffs.alpha, F) * F - _coef(coeffs.alpha_hat, x_t) * x_t) / d


def predict_z(F, x_t, coeffs: Coefficients):
    """Noise prediction recovered from a raw output F at state x_t."""
    F, x_t = _pair(F, x_t, "F", "x_t")
    d = _denominator(coeffs, x_t)
    return (_coef(coeffs.gamma_hat, x_t) * x_t - _coef(coeffs.gamma, F) * F) / d
