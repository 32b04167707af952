"""Interpolation coefficient families.

A family supplies four time-dependent coefficients. The first pair builds the
interpolated state ``x_t = alpha(t) * z + gamma(t) * x`` between a data point
x (at t=0) and a noise draw z (at t=1); the second pair defines the regression
target ``alpha_hat(t) * z + gamma_hat(t) * x`` that the estimator learns. The
hat pair does not have to be the time derivative of the first pair. The one
hard requirement is that the coupling determinant

    alpha * gamma_hat - alpha_hat * gamma

stays away from zero inside (0, 1); that is what lets a raw network output be
converted back into data and noise estimates.

Built-in families:

- ``linear``      straight interpolation with velocity-style targets;
                  determinant is the constant -1.
- ``relinear``    time-reversed linear. Deliberately breaks the boundary
                  conventions (data sits at t=1 here) while keeping the
                  coupling invertible; determinant is the constant +1.
- ``trigflow``    quarter-circle interpolation, targets are the 90-degree
                  rotation of the state; determinant is the constant -1.
- ``edm``         log-linear noise level sigma(t) with the state normalized
                  to a data scale of 0.5; determinant is exactly 2. Its
                  boundary values are only approximate (alpha(0) ~ 3.5e-3,
                  gamma(0) ~ 2), which the validator reports honestly.
- ``triglinear``  trigonometric interpolation paired with linear targets;
                  the determinant varies with t inside [-sqrt(2), -1].
- ``random``      an intentionally ad-hoc hat pair demonstrating that
                  targets need not match any derivative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "Coefficients",
    "TransportFamily",
    "ConstraintCheck",
    "ValidationReport",
    "edm_sigma",
    "family_names",
    "get_family",
    "validate_family",
]

# Data scale the edm family is calibrated to.
EDM_DATA_STD = 0.5

_HALF_PI = math.pi / 2.0


def _check_time(t):
    """Validate t against the closed unit interval and return it as float64."""
    arr = np.asarray(t, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError("time values must be finite")
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        raise ValueError(f"time values must lie in [0, 1], got range "
                         f"[{arr.min()}, {arr.max()}]")
    return arr


def edm_sigma(t):
    """Noise level sigma(t) = exp(4 * (2.68 t - 1.59)) of the edm family."""
    t = _check_time(t)
    return np.exp(4.0 * (2.68 * t - 1.59))


@dataclass(frozen=True)
class Coefficients:
    """Coefficient values evaluated at one time (or an array of times)."""

    alpha: np.ndarray
    gamma: np.ndarray
    alpha_hat: np.ndarray
    gamma_hat: np.ndarray

    @property
    def denominator(self):
        """Coupling determinant alpha * gamma_hat - alpha_hat * gamma."""
        return self.alpha * self.gamma_hat - self.alpha_hat * self.gamma


@dataclass(frozen=True)
class TransportFamily:
    """A named set of the four coefficient functions."""

    name: str
    alpha: Callable
    gamma: Callable
    alpha_hat: Callable
    gamma_hat: Callable

    def coefficients(self, t) -> Coefficients:
        """Evaluate all four coefficients at t (scalar or array in [0, 1])."""
        t = _check_time(t)
        return Coefficients(
            alpha=np.asarray(self.alpha(t), dtype=np.float64),
            gamma=np.asarray(self.gamma(t), dtype=np.float64),
            alpha_hat=np.asarray(self.alpha_hat(t), dtype=np.float64),
            gamma_hat=np.asarray(self.gamma_hat(t), dtype=np.float64),
        )

    def denominator(self, t):
        return self.coefficients(t).denominator


def _edm_root(t):
    s = edm_sigma(t)
    return np.sqrt(s * s + EDM_DATA_STD * EDM_DATA_STD)


_FAMILIES: dict[str, TransportFamily] = {}


def _register(family: TransportFamily) -> TransportFamily:
    _FAMILIES[family.name] = family
    return family


LINEAR = _register(TransportFamily(
    name="linear",
    alpha=lambda t: t,
    gamma=lambda t: 1.0 - t,
    alpha_hat=lambda t: np.ones_like(t),
    gamma_hat=lambda t: -np.ones_like(t),
))

RELINEAR = _register(TransportFamily(
    name="relinear",
    alpha=lambda t: 1.0 - t,
    gamma=lambda t: t,
    alpha_hat=lambda t: -np.ones_like(t),
    gamma_hat=lambda t: np.ones_like(t),
))

TRIGFLOW = _register(TransportFamily(
    name="trigflow",
    alpha=lambda t: np.sin(t * _HALF_PI),
    gamma=lambda t: np.cos(t * _HALF_PI),
    alpha_hat=lambda t: np.cos(t * _HALF_PI),
    gamma_hat=lambda t: -np.sin(t * _HALF_PI),
))

EDM = _register(TransportFamily(
    name="edm",
    alpha=lambda t: edm_sigma(t) / _edm_root(t),
    gamma=lambda t: 1.0 / _edm_root(t),
    alpha_hat=lambda t: -EDM_DATA_STD / _edm_root(t),
    gamma_hat=lambda t: 2.0 * edm_sigma(t) / _edm_root(t),
))

TRIGLINEAR = _register(TransportFamily(
    name="triglinear",
    alpha=lambda t: np.sin(t * _HALF_PI),
    gamma=lambda t: np.cos(t * _HALF_PI),
    alpha_hat=lambda t: np.ones_like(t),
    gamma_hat=lambda t: -np.ones_like(t),
))

RANDOM = _register(TransportFamily(
    name="random",
    alpha=lambda t: np.sin(t * _HALF_PI),
    gamma=lambda t: 1.0 - t,
    alpha_hat=lambda t: np.ones_like(t),
    gamma_hat=lambda t: -1.0 - np.exp(-5.0 * t),
))


def family_names() -> tuple[str, ...]:
    return tuple(_FAMILIES)


def get_family(name: str) -> TransportFamily:
    """Look up a built-in family by name (case-insensitive)."""
    try:
        return _FAMILIES[name.lower()]
    except KeyError:
        raise ValueError(
            f"unknown transport family {name!r}; "
            f"choose from {', '.join(_FAMILIES)}") from None


@dataclass(frozen=True)
class ConstraintCheck:
    name: str
    passed: bool
    worst_t: float
    worst_value: float
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    family: str
    checks: tuple[ConstraintCheck, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def lines(self) -> list[str]:
        out = [f"family {self.family}: "
               f"{'PASS' if self.passed else 'FAIL'}"]
        for c in self.checks:
            status = "pass" if c.passed else "FAIL"
            out.append(f"  [{status}] {c.name}: {c.detail}")
        return out


def _boundary_check(name, value, expected, tol):
    err = abs(float(value) - expected)
    return ConstraintCheck(
        name=name,
        passed=err <= tol,
        worst_t=0.0 if name.endswith("(0)") else 1.0,
        worst_value=float(value),
        detail=f"value {float(value):.6g}, expected {expected:g} "
               f"(abs err {err:.3g})",
    )


def _monotone_check(name, t, values, direction, tol):
    diffs = np.diff(values) * direction
    worst = int(np.argmin(diffs))
    passed = bool(diffs.min() >= -tol)
    word = "nondecreasing" if direction > 0 else "nonincreasing"
    return ConstraintCheck(
        name=name,
        passed=passed,
        worst_t=float(t[worst]),
        worst_value=float(diffs.min()),
        detail=f"{word}; worst step {diffs.min():.3g} at t={t[worst]:.4f}",
    )


def _continuity_check(name, t, values, bound):
    jumps = np.abs(np.diff(values))
    worst = int(np.argmax(jumps))
    return ConstraintCheck(
        name=name,
        passed=bool(np.all(np.isfinite(values)) and jumps.max() <= bound),
        worst_t=float(t[worst]),
        worst_value=float(jumps.max()),
        detail=f"max grid jump {jumps.max():.3g} at t={t[worst]:.4f} "
               f"(bound {bound:g})",
    )


def validate_family(family: TransportFamily | str, grid_points: int = 1024,
                    boundary_tol: float = 1e-9) -> ValidationReport:
    """Check the shape constraints of a family on a uniform grid.

    The alpha leg must run continuously and monotonically from 0 at t=0 to 1
    at t=1; the gamma leg from 1 down to 0; and the coupling determinant must
    stay away from zero strictly inside the interval. Families may violate
    individual checks on purpose (relinear reverses both legs, edm only
    approximates the boundary values); the report records measured values
    instead of raising.
    """
    if isinstance(family, str):
        family = get_family(family)
    t = np.linspace(0.0, 1.0, grid_points)
    c = family.coefficients(t)
    # A smooth coefficient moves O(1/grid) between neighbours; a generous
    # fixed bound still catches genuine discontinuities.
    jump_bound = 50.0 / grid_points

    inner = t[1:-1]
    denom = np.abs(family.coefficients(inner).denominator)
    dworst = int(np.argmin(denom))
    coupling = ConstraintCheck(
        name="coupling-nonzero",
        passed=bool(denom.min() > 1e-6),
        worst_t=float(inner[dworst]),
        worst_value=float(denom.min()),
        detail=f"min |determinant| {denom.min():.6g} at t={inner[dworst]:.4f}",
    )

    checks = (
        _boundary_check("alpha(0)", c.alpha[0], 0.0, boundary_tol),
        _boundary_check("alpha(1)", c.alpha[-1], 1.0, boundary_tol),
        _monotone_check("alpha-monotone", t, c.alpha, +1, 1e-12),
        _continuity_check("alpha-continuous", t, c.alpha, jump_bound),
        _boundary_check("gamma(0)", c.gamma[0], 1.0, boundary_tol),
        _boundary_check("gamma(1)", c.gamma[-1], 0.0, boundary_tol),
        _monotone_check("gamma-monotone", t, c.gamma, -1, 1e-12),
        _continuity_check("gamma-continuous", t, c.gamma, jump_bound),
        coupling,
    )
    return ValidationReport(family=family.name, checks=checks)
