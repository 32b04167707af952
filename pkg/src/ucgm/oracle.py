"""Closed-form references for Gaussian-mixture diffusions.

Everything here is independent of the learned estimator: exact scores,
posterior means, probability-flow drifts, special-case closed forms, and a
small RK4 integrator. The trainer and sampler are tested against these
references rather than against themselves.

Conventions. A forward schedule carries data (t=0) toward noise (t=1) through
x_t = gamma(t) * x_0 + alpha(t) * z with z standard normal. The time-t
marginal of a Gaussian mixture is again a Gaussian mixture with means
gamma * m_j and covariances gamma^2 * S_j + alpha^2 * I, which makes every
quantity below available in closed form.

The probability-flow drift is provided in two algebraically identical forms:

- ``pf_ode_drift``: (gamma'/gamma) x - [alpha alpha' - (gamma'/gamma) alpha^2]
  * score, which divides by gamma and is singular where gamma(t) = 0;
- ``velocity_drift``: -alpha alpha' * score + gamma' * E[x_0 | x_t], which is
  regular on the whole of [0, 1] for all built-in schedules.

Schedules expose the product alpha * alpha' as a single closed form, because
alpha'(t) alone diverges at t=0 for the OU schedule while the product stays
finite; no consumer ever needs the bare derivative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.special import ndtr

__all__ = [
    "GaussianMixture",
    "Schedule",
    "ou_schedule",
    "triangular_schedule",
    "linear_schedule",
    "marginal_mixture",
    "gmm_log_density",
    "gmm_score",
    "gmm_marginal_score",
    "posterior_mean_x",
    "posterior_mean_z",
    "pf_ode_drift",
    "velocity_drift",
    "bimodal_drift",
    "hermite_drift",
    "hermite_trajectory",
    "rk4_integrate",
    "mixture_cdf",
    "mixture_quantile",
    "quantile_transport",
    "gaussian_optimal_predictor",
    "difference_order_probe",
]


@dataclass(frozen=True)
class GaussianMixture:
    """A mixture of Gaussians with full covariances.

    Attributes:
        weights: Component weights, shape (J,), nonnegative, summing to one.
        means: Component means, shape (J, d).
        covs: Component covariances, shape (J, d, d), symmetric positive
            definite.
    """

    weights: np.ndarray
    means: np.ndarray
    covs: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        m = np.asarray(self.means, dtype=np.float64)
        c = np.asarray(self.covs, dtype=np.float64)
        if m.ndim == 1:
            m = m[:, None]
        if c.ndim == 1:
            c = c[:, None, None]
        if w.ndim != 1 or m.ndim != 2 or c.ndim != 3:
            raise ValueError("weights must be (J,), means (J, d), covs (J, d, d)")
        J, d = m.shape
        if w.shape[0] != J or c.shape != (J, d, d):
            raise ValueError("component counts/dimensions are inconsistent")
        if np.any(w < 0.0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be nonnegative and sum to 1")
        for j in range(J):
            if not np.allclose(c[j], c[j].T, atol=1e-12):
                raise ValueError(f"covariance {j} is not symmetric")
            try:
                np.linalg.cholesky(c[j])
            except np.linalg.LinAlgError:
                raise ValueError(f"covariance {j} is not positive definite")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", m)
        object.__setattr__(self, "covs", c)

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    @property
    def n_components(self) -> int:
        return self.means.shape[0]

    @staticmethod
    def bimodal(m: float, sigma: float, standardized: bool = False
                ) -> "GaussianMixture":
        """Equal-weight 1D pair N(-m, sigma^2), N(+m, sigma^2).

        Args:
            m: Mode offset.
            sigma: Common component standard deviation.
            standardized: If True, rescale so the mixture has unit variance
                (divide both m and sigma by sqrt(m^2 + sigma^2)).
        """
        if standardized:
            scale = math.sqrt(m * m + sigma * sigma)
            m, sigma = m / scale, sigma / scale
        return GaussianMixture(
            weights=np.array([0.5, 0.5]),
            means=np.array([[-m], [m]]),
            covs=np.array([[[sigma ** 2]], [[sigma ** 2]]]),
        )


@dataclass(frozen=True)
class Schedule:
    """Forward noising schedule: coefficient functions of t in [0, 1].

    ``alpha_alpha_prime`` is the closed form of alpha(t) * alpha'(t); see the
    module docstring for why the product is the primitive.
    """

    name: str
    alpha: Callable
    gamma: Callable
    gamma_prime: Callable
    alpha_alpha_prime: Callable


def ou_schedule(s: float) -> Schedule:
    """Ornstein-Uhlenbeck schedule gamma = exp(-s t), alpha^2 = 1 - exp(-2 s t).

    Its drift bracket alpha alpha' - (gamma'/gamma) alpha^2 collapses to the
    constant s, which several tests exploit. Note gamma(1) = exp(-s) > 0: the
    unit-time marginal is close to, but not exactly, standard normal.
    """
    if not (math.isfinite(s) and s > 0.0):
        raise ValueError("OU rate s must be positive")
    return Schedule(
        name=f"ou(s={s:g})",
        # max() guards the sqrt against roundoff-negative t from ODE steppers
        alpha=lambda t: np.sqrt(np.maximum(
            -np.expm1(-2.0 * s * np.asarray(t, np.float64)), 0.0)),
        gamma=lambda t: np.exp(-s * np.asarray(t, np.float64)),
        gamma_prime=lambda t: -s * np.exp(-s * np.asarray(t, np.float64)),
        alpha_alpha_prime=lambda t: s * np.exp(-2.0 * s * np.asarray(t, np.float64)),
    )


def triangular_schedule() -> Schedule:
    """gamma = cos(pi t / 2), alpha = sin(pi t / 2); exact endpoint attainment."""
    half_pi = math.pi / 2.0
    return Schedule(
        name="triangular",
        alpha=lambda t: np.sin(half_pi * np.asarray(t, np.float64)),
        gamma=lambda t: np.cos(half_pi * np.asarray(t, np.float64)),
        gamma_prime=lambda t: -half_pi * np.sin(half_pi * np.asarray(t, np.float64)),
        alpha_alpha_prime=lambda t: (half_pi * np.sin(half_pi * np.asarray(t, np.float64))
                                     * np.cos(half_pi * np.asarray(t, np.float64))),
    )


def linear_schedule() -> Schedule:
    """gamma = 1 - t, alpha = t; drift bracket t / (1 - t), singular at t=1."""
    return Schedule(
        name="linear",
        alpha=lambda t: np.asarray(t, np.float64) + 0.0,
        gamma=lambda t: 1.0 - np.asarray(t, np.float64),
        gamma_prime=lambda t: -np.ones_like(np.asarray(t, np.float64)),
        alpha_alpha_prime=lambda t: np.asarray(t, np.float64) + 0.0,
    )


def marginal_mixture(mixture: GaussianMixture, schedule: Schedule,
                     t: float) -> GaussianMixture:
    """Exact time-t marginal of the forward process started at `mixture`."""
    g = float(schedule.gamma(t))
    a = float(schedule.alpha(t))
    d = mixture.dim
    covs = g * g * mixture.covs + a * a * np.eye(d)[None]
    return GaussianMixture(weights=mixture.weights, means=g * mixture.means,
                           covs=covs)


def _as_points(x, dim: int):
    """Normalize input to (n, d); remember how to restore the caller shape."""
    arr = np.asarray(x, dtype=np.float64)
    if dim == 1 and (arr.ndim == 0 or arr.shape[-1] != 1):
        lead = arr.shape
        return arr.reshape(-1, 1), lead, True
    if arr.ndim == 1:
        if arr.shape[0] != dim:
            raise ValueError(f"point has dimension {arr.shape[0]}, "
                             f"mixture has {dim}")
        return arr.reshape(1, dim), (), False
    if arr.shape[-1] != dim:
        raise ValueError(f"points have dimension {arr.shape[-1]}, "
                         f"mixture has {dim}")
    lead = arr.shape[:-1]
    return arr.reshape(-1, dim), lead, False


def _restore(values, lead, squeezed, vector: bool):
    if vector and not squeezed:
        return values.reshape(lead + (values.shape[-1],))
    return values.reshape(lead)


def _component_stats(mixture: GaussianMixture):
    """Per-component inverse covariances and log normalizers."""
    J, d = mixture.n_components, mixture.dim
    invs = np.empty((J, d, d))
    log_norm = np.empty(J)
    for j in range(J):
        invs[j] = np.linalg.inv(mixture.covs[j])
        sign, logdet = np.linalg.slogdet(mixture.covs[j])
        log_norm[j] = -0.5 * (d * math.log(2.0 * math.pi) + logdet)
    return invs, log_norm


def _log_resp(points, mixture, invs, log_norm):
    """Log of weighted component densities, shape (n, J)."""
    diffs = points[:, None, :] - mixture.means[None, :, :]       # (n, J, d)
    maha = np.einsum("njd,jde,nje->nj", diffs, invs, diffs)
    logs = np.log(np.maximum(mixture.weights, 1e-300))[None, :] \
        + log_norm[None, :] - 0.5 * maha
    return logs, diffs


def gmm_log_density(x, mixture: GaussianMixture):
    """Log density of a static Gaussian mixture at x."""
    points, lead, squeezed = _as_points(x, mixture.dim)
    invs, log_norm = _component_stats(mixture)
    logs, _ = _log_resp(points, mixture, invs, log_norm)
    top = logs.max(axis=1)
    out = top + np.log(np.exp(logs - top[:, None]).sum(axis=1))
    return _restore(out, lead, squeezed, vector=False)


def gmm_score(x, mixture: GaussianMixture):
    """Score (gradient of log density) of a static Gaussian mixture at x."""
    points, lead, squeezed = _as_points(x, mixture.dim)
    invs, log_norm = _component_stats(mixture)
    logs, diffs = _log_resp(points, mixture, invs, log_norm)
    top = logs.max(axis=1, keepdims=True)
    resp = np.exp(logs - top)
    resp /= resp.sum(axis=1, keepdims=True)
    comp_scores = -np.einsum("jde,nje->njd", invs, diffs)        # (n, J, d)
    out = np.einsum("nj,njd->nd", resp, comp_scores)
    return _restore(out, lead, squeezed, vector=True)


def gmm_marginal_score(x, t: float, mixture: GaussianMixture,
                       schedule: Schedule):
    """Score of the time-t marginal: gmm_score against the pushed mixture."""
    return gmm_score(x, marginal_mixture(mixture, schedule, t))


def posterior_mean_x(x, t: float, mixture: GaussianMixture,
                     schedule: Schedule):
    """E[x_0 | x_t = x] under the forward process. Regular on all of [0, 1].

    Per component the posterior is Gaussian with mean
    m_j + gamma S_j (gamma^2 S_j + alpha^2 I)^{-1} (x - gamma m_j); the
    mixture posterior mean weighs these by the time-t responsibilities.
    """
    g = float(schedule.gamma(t))
    marg = marginal_mixture(mixture, schedule, t)
    points, lead, squeezed = _as_points(x, mixture.dim)
    invs, log_norm = _component_stats(marg)
    logs, diffs = _log_resp(points, marg, invs, log_norm)
    top = logs.max(axis=1, keepdims=True)
    resp = np.exp(logs - top)
    resp /= resp.sum(axis=1, keepdims=True)
    gains = np.einsum("jde,jef->jdf", mixture.covs, invs)        # S_j M_j^{-1}
    pulls = np.einsum("jdf,njf->njd", gains, diffs)
    comp_means = mixture.means[None, :, :] + g * pulls
    out = np.einsum("nj,njd->nd", resp, comp_means)
    return _restore(out, lead, squeezed, vector=True)


def posterior_mean_z(x, t: float, mixture: GaussianMixture,
                     schedule: Schedule):
    """E[z | x_t = x] = -alpha(t) * score_t(x); zero at t=0 by construction."""
    a = float(schedule.alpha(t))
    return -a * gmm_marginal_score(x, t, mixture, schedule)


def pf_ode_drift(x, t: float, mixture: GaussianMixture, schedule: Schedule):
    """Probability-flow drift in bracket form; requires gamma(t) != 0.

    dx/dt = (gamma'/gamma) x - [alpha alpha' - (gamma'/gamma) alpha^2] * score.
    """
    g = float(schedule.gamma(t))
    if abs(g) < 1e-300:
        raise ValueError(f"pf_ode_drift is singular where gamma(t)=0 (t={t}); "
                         "use velocity_drift there")
    ratio = float(schedule.gamma_prime(t)) / g
    a = float(schedule.alpha(t))
    bracket = float(schedule.alpha_alpha_prime(t)) - ratio * a * a
    score = gmm_marginal_score(x, t, mixture, schedule)
    return ratio * np.asarray(x, np.float64) - bracket * score


def velocity_drift(x, t: float, mixture: GaussianMixture, schedule: Schedule):
    """Probability-flow drift in posterior-mean form; regular on [0, 1].

    dx/dt = -alpha alpha' * score + gamma' * E[x_0 | x_t]. Identical to
    pf_ode_drift wherever both are defined.
    """
    aap = float(schedule.alpha_alpha_prime(t))
    gp = float(schedule.gamma_prime(t))
    score = gmm_marginal_score(x, t, mixture, schedule)
    return -aap * score + gp * posterior_mean_x(x, t, mixture, schedule)


def bimodal_drift(x, t: float, m: float, sigma2: float, schedule: Schedule):
    """Closed-form probability-flow drift for the symmetric 1D pair.

    For data (1/2) N(-m, sigma2) + (1/2) N(+m, sigma2) the mixture score
    reduces to a tanh and the drift becomes

        (gamma'/gamma) x + bracket * (x - gamma m tanh(gamma m x / S_t)) / S_t

    with S_t = gamma^2 sigma2 + alpha^2. Verified against the generic mixture
    route in the tests.
    """
    g = float(schedule.gamma(t))
    if abs(g) < 1e-300:
        raise ValueError("bimodal_drift is singular where gamma(t)=0")
    a = float(schedule.alpha(t))
    ratio = float(schedule.gamma_prime(t)) / g
    bracket = float(schedule.alpha_alpha_prime(t)) - ratio * a * a
    s_t = g * g * sigma2 + a * a
    arr = np.asarray(x, np.float64)
    gm = g * m
    score = -(arr - gm * np.tanh(gm * arr / s_t)) / s_t
    return ratio * arr - bracket * score


def hermite_drift(x, t, s: float):
    """Degree-one positive-axis drift -s / x (state must stay positive)."""
    return -s / np.asarray(x, np.float64)


def hermite_trajectory(x1, s: float, t):
    """Closed-form solution x(t) = sqrt(x1^2 + 2 s (1 - t)) with x(1) = x1."""
    x1 = np.asarray(x1, np.float64)
    return np.sqrt(x1 * x1 + 2.0 * s * (1.0 - np.asarray(t, np.float64)))


def rk4_integrate(drift: Callable, init, t_start: float, t_end: float,
                  steps: int):
    """Classic fourth-order Runge-Kutta from t_start to t_end (any direction).

    Args:
        drift: Callable (x, t) -> dx/dt, vectorized over the state array.
        init: Initial state at t_start (scalar or array).
        t_start: Starting time.
        t_end: Final time; may be smaller than t_start.
        steps: Number of equal steps.

    Returns:
        State at t_end, same shape as init.

    Raises:
        FloatingPointError: If the state stops being finite mid-integration.
    """
    if steps < 1:
        raise ValueError("need at least one step")
    x = np.asarray(init, dtype=np.float64).copy()
    h = (t_end - t_start) / steps
    t = t_start
    for i in range(steps):
        k1 = drift(x, t)
        k2 = drift(x + 0.5 * h * k1, t + 0.5 * h)
        k3 = drift(x + 0.5 * h * k2, t + 0.5 * h)
        k4 = drift(x + h * k3, t + h)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t = t_start + (i + 1) * h
        if not np.all(np.isfinite(x)):
            raise FloatingPointError(f"integration diverged at t={t:.6g}")
    return x


def mixture_cdf(x, mixture: GaussianMixture):
    """CDF of a one-dimensional Gaussian mixture."""
    if mixture.dim != 1:
        raise ValueError("mixture_cdf is defined for 1D mixtures only")
    arr = np.asarray(x, dtype=np.float64)
    mus = mixture.means[:, 0]
    sds = np.sqrt(mixture.covs[:, 0, 0])
    vals = np.sum(mixture.weights * ndtr((arr[..., None] - mus) / sds), axis=-1)
    return vals if arr.ndim else float(vals)


def mixture_quantile(u, mixture: GaussianMixture, tol: float = 1e-12):
    """Inverse CDF of a 1D Gaussian mixture by bisection.

    Args:
        u: Probability levels strictly inside (0, 1).
        mixture: One-dimensional mixture.
        tol: Absolute bracket width at which bisection stops.

    Returns:
        Quantiles with the same shape as u.
    """
    if mixture.dim != 1:
        raise ValueError("mixture_quantile is defined for 1D mixtures only")
    u_arr = np.asarray(u, dtype=np.float64)
    if np.any(u_arr <= 0.0) or np.any(u_arr >= 1.0):
        raise ValueError("quantile levels must lie strictly inside (0, 1)")
    mus = mixture.means[:, 0]
    sds = np.sqrt(mixture.covs[:, 0, 0])
    lo = np.full(u_arr.shape, float(np.min(mus - 14.0 * sds)))
    hi = np.full(u_arr.shape, float(np.max(mus + 14.0 * sds)))
    # 14 sigma brackets every representable level; halve until tol
    iters = max(1, int(math.ceil(math.log2((hi.flat[0] - lo.flat[0]) / tol))))
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        below = mixture_cdf(mid, mixture) < u_arr
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    out = 0.5 * (lo + hi)
    return out if u_arr.ndim else float(out)


def quantile_transport(x1, mixture: GaussianMixture):
    """Monotone map from standard normal points to mixture samples.

    g(x1) = F0^{-1}(Phi(x1)), the unique increasing transport from N(0, 1) to
    the mixture. When a forward schedule attains an exactly standard normal
    unit-time marginal, integrating the probability flow backward from x1
    lands on g(x1) regardless of which such schedule was used.
    """
    return mixture_quantile(ndtr(np.asarray(x1, dtype=np.float64)), mixture)


def gaussian_optimal_predictor(x_t, t, mu: float, mode: str,
                               horizon: float | None = None):
    """Optimal data predictions for unit-variance Gaussian data N(mu, 1).

    Under the quarter-circle schedule (gamma = cos(pi t / 2)) the optimal
    predictor has the closed forms

        diffusion:     mu + gamma(t) * (x_t - gamma(t) mu)
        consistency:   mu + (x_t - gamma(t) mu)
        interpolated:  mu + c(t) * (x_t - gamma(t) mu),  c(t) = cos(t / T)^T

    with T = horizon (radians) bridging the two regimes.

    Args:
        x_t: Interpolated states.
        t: Times in [0, 1], broadcastable against x_t.
        mu: Data mean.
        mode: One of "diffusion", "consistency", "interpolated".
        horizon: T for the interpolated mode; ignored otherwise.

    Returns:
        Optimal data predictions, same shape as the broadcast of x_t and t.
    """
    x_arr = np.asarray(x_t, dtype=np.float64)
    t_arr = np.asarray(t, dtype=np.float64)
    g = np.cos(0.5 * math.pi * t_arr)
    centred = x_arr - g * mu
    if mode == "diffusion":
        coef = g
    elif mode == "consistency":
        coef = np.ones_like(t_arr)
    elif mode == "interpolated":
        if horizon is None or horizon <= 0.0:
            raise ValueError("interpolated mode needs a positive horizon")
        coef = np.cos(t_arr / horizon) ** horizon
    else:
        raise ValueError(f"unknown predictor mode {mode!r}")
    return mu + coef * centred


def _richardson_derivative(f: Callable, t: float, h0: float = 1e-3) -> float:
    """Machine-accurate f'(t) by two Richardson levels on central quotients."""
    def central(h):
        return (f(t + h) - f(t - h)) / (2.0 * h)

    d0, d1, d2 = central(h0), central(h0 / 2.0), central(h0 / 4.0)
    r0 = (4.0 * d1 - d0) / 3.0
    r1 = (4.0 * d2 - d1) / 3.0
    return (16.0 * r1 - r0) / 15.0


def difference_order_probe(f: Callable, t: float,
                           eps_ladder: Sequence[float]):
    """Empirical convergence orders of forward and central quotients.

    Args:
        f: Smooth scalar function.
        t: Point at which to probe.
        eps_ladder: Decreasing step sizes; errors are measured against a
            Richardson-extrapolated reference derivative.

    Returns:
        Tuple (forward_slope, central_slope) of log-log regression slopes;
        roughly 1 and 2 for smooth f.
    """
    ladder = np.asarray(list(eps_ladder), dtype=np.float64)
    if ladder.ndim != 1 or ladder.size < 2 or np.any(ladder <= 0.0):
        raise ValueError("eps_ladder must hold at least two positive steps")
    ref = _richardson_derivative(f, t)
    fwd = np.array([(f(t + h) - f(t)) / h for h in ladder])
    ctr = np.array([(f(t + h) - f(t - h)) / (2.0 * h) for h in ladder])
    fwd_err = np.maximum(np.abs(fwd - ref), 1e-300)
    ctr_err = np.maximum(np.abs(ctr - ref), 1e-300)
    fwd_slope = float(np.polyfit(np.log(ladder), np.log(fwd_err), 1)[0])
    ctr_slope = float(np.polyfit(np.log(ladder), np.log(ctr_err), 1)[0])
    return fwd_slope, ctr_slope
