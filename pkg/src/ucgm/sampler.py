"""Unified sampler: one loop covering ODE, SDE, and few-step regimes.

Each step converts the raw estimator output at the current time into data and
noise predictions. With kappa > 0 it also decomposes the PREVIOUS step's raw
output at the current state and extrapolates each prediction by kappa times
the difference; anchoring both decompositions at the same state turns the
update into a two-step multistep scheme whose leading truncation term cancels
at kappa = 1/2 (differencing predictions made from different states instead
feeds each step's correction back into the next difference and loses that
cancellation). The state is then rebuilt at the next time with a controllable
amount of fresh noise:

    x' = alpha(t') * (sqrt(1 - rho) zhat + sqrt(rho) z) + gamma(t') * xhat

rho = 0 is deterministic transport, rho = 1 full renoising (the few-step
regime), and the "sde" policy picks a step-size-matched value

    rho = clip(|t - t'| * 2 alpha(t) / alpha(t'), 0, 1)

(an alternative derivation divides by alpha(t')^2 instead; available behind
`sde_appendix=True`). The default policy, "equal_lambda", sets rho to the
consistency ratio the estimator was trained with; numerically it is just a
constant. The terminal step always uses rho = 0 so no noise is injected at
the data end.

With nu = 2 the requested step count N is first halved to floor((N+1)/2) and
each non-terminal step refreshes its prediction midway with a LIVE-weight
evaluation, averaging the two x-predictions:

    x' = xtilde * gamma(t')/gamma(t)
         + (alpha(t') - gamma(t') alpha(t)/gamma(t)) * (xhat + xhat') / 2

This line is implemented exactly as printed even though the coefficient in
front of the average looks like it belongs to the noise predictions; see the
repository notes. When gamma(t) = 0 (a boundary-attaining family at t = 1)
the ratio is undefined and the corrector is skipped for that step. The total
evaluation budget never exceeds N + 1 network calls.

Frozen-weight (EMA) parameters drive the main predictions; the live weights
only serve the nu = 2 refresh, mirroring training-time roles. A plain
callable (x, t) -> F can stand in for both, which is how the closed-form
oracle drives the order-of-accuracy studies.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import estimator as est
from .prediction import interpolate, predict_x, predict_z
from .timedist import build_schedule
from .transport import TransportFamily, get_family

__all__ = [
    "EstimatorSnapshot",
    "SamplerConfig",
    "SamplingTrace",
    "plan_steps",
    "rho_sde",
    "sample",
    "euler_reference",
]


@dataclass
class EstimatorSnapshot:
    """Live and frozen (EMA) weights of a trained estimator."""
    live: est.MLPParams
    ema: est.MLPParams = None

    @property
    def frozen(self) -> est.MLPParams:
        return self.ema if self.ema is not None else self.live


@dataclass(frozen=True)
class SamplerConfig:
    steps: int = 64
    nu: int = 1
    kappa: float = 0.4
    rho_mode: str = "equal_lambda"  # "constant", "sde", or "equal_lambda"
    rho_value: float = 0.0          # rho itself, or the trained lambda
    sde_appendix: bool = False
    schedule: np.ndarray = None     # strictly decreasing times; None = uniform
    seed: int = 0

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be at least 1")
        if self.nu not in (1, 2):
            raise ValueError("nu must be 1 or 2")
        if self.rho_mode not in ("constant", "sde", "equal_lambda"):
            raise ValueError(
                "rho_mode must be 'constant', 'sde', or 'equal_lambda'")
        if self.rho_mode != "sde" and not 0.0 <= self.rho_value <= 1.0:
            raise ValueError("rho (or lambda) must lie in [0, 1]")


def plan_steps(n_steps: int, nu: int) -> int:
    """Steps actually taken: floor((N+1)/2) when nu=2, N otherwise."""
    if n_steps < 1:
        raise ValueError("need at least one step")
    if nu not in (1, 2):
        raise ValueError("nu must be 1 or 2")
    return (n_steps + 1) // 2 if nu == 2 else n_steps


def rho_sde(t_i: float, t_next: float, family: TransportFamily,
            appendix_form: bool = False) -> float:
    """Step-size-matched mixing ratio, clipped to [0, 1]."""
    a_i = float(family.coefficients(t_i).alpha)
    a_n = float(family.coefficients(t_next).alpha)
    if a_n == 0.0:
        return 0.0
    r = abs(t_i - t_next) * 2.0 * a_i / (a_n * a_n if appendix_form else a_n)
    return float(np.clip(r, 0.0, 1.0))


def _resolve_schedule(config: SamplerConfig, plan: int) -> np.ndarray:
    if config.schedule is None:
        return build_schedule(plan)
    ts = np.asarray(config.schedule, dtype=np.float64)
    if ts.ndim != 1 or ts.size < 2:
        raise ValueError("schedule must be a 1D array of at least two times")
    if np.any(ts < 0.0) or np.any(ts > 1.0) or not np.all(np.diff(ts) < 0.0):
        raise ValueError("schedule must decrease strictly within [0, 1]")
    if ts.size < plan + 1:
        raise ValueError(f"schedule has {ts.size} points; the plan needs "
                         f"{plan + 1}")
    if ts.size > plan + 1:
        keep = np.round(np.linspace(0, ts.size - 1, plan + 1)).astype(int)
        if len(set(keep.tolist())) != plan + 1:
            raise ValueError("cannot thin schedule evenly to the plan size")
        ts = ts[keep]
    return ts


def _model_fns(model, cond):
    """Return (frozen_fn, live_fn), each mapping (x, t) -> F."""
    if callable(model):
        return model, model
    if isinstance(model, EstimatorSnapshot):
        frozen, live = model.frozen, model.live
    elif isinstance(model, est.MLPParams):
        frozen = live = model
    else:
        raise TypeError(f"cannot sample from model of type {type(model)!r}")
    return (lambda x, t: est.forward(frozen, x, t, cond),
            lambda x, t: est.forward(live, x, t, cond))


@dataclass
class SamplingTrace:
    final: np.ndarray
    history: np.ndarray       # per-step raw x-predictions, (plan, ...) shaped
    times: np.ndarray
    n_evals: int


def sample(model, config: SamplerConfig, family, init,
           cond=None) -> SamplingTrace:
    """Run the sampler from `init` (the state at the schedule's first time).

    Args:
        model: EstimatorSnapshot, bare MLPParams, or a callable (x, t) -> F.
        config: Sampler settings; `config.steps` is the requested budget N.
        family: Transport family or name.
        init: Initial state array, normally standard normal draws.
        cond: Optional class labels forwarded to the network.

    Returns:
        SamplingTrace with the final state, the per-step data predictions,
        the resolved schedule, and the network evaluation count.
    """
    if isinstance(family, str):
        family = get_family(family)
    plan = plan_steps(config.steps, config.nu)
    ts = _resolve_schedule(config, plan)
    frozen_fn, live_fn = _model_fns(model, cond)
    rng = np.random.default_rng(config.seed)

    x = np.asarray(init, dtype=np.float64).copy()
    prev_F = None
    history = np.empty((plan,) + x.shape)
    n_evals = 0

    for i in range(plan):
        t_i, t_next = float(ts[i]), float(ts[i + 1])
        c_i = family.coefficients(t_i)
        F = frozen_fn(x, t_i)
        n_evals += 1
        xhat_i = predict_x(F, x, c_i)
        zhat_i = predict_z(F, x, c_i)
        history[i] = xhat_i

        if i >= 1 and config.kappa != 0.0:
            # previous output decomposed at the CURRENT state; differencing
            # two predictions with a shared anchor is what makes kappa=1/2
            # cancel the leading truncation term (a two-step multistep
            # scheme), whereas anchoring at the previous state feeds each
            # step's correction back into the next difference
            xhat_prev = predict_x(prev_F, x, c_i)
            zhat_prev = predict_z(prev_F, x, c_i)
            xhat = xhat_i + config.kappa * (xhat_i - xhat_prev)
            zhat = zhat_i + config.kappa * (zhat_i - zhat_prev)
        else:
            xhat, zhat = xhat_i, zhat_i
        prev_F = F

        terminal = i == plan - 1
        if terminal:
            rho = 0.0
        elif config.rho_mode == "sde":
            rho = rho_sde(t_i, t_next, family, config.sde_appendix)
        else:
            rho = config.rho_value

        if rho > 0.0:
            z_mix = (np.sqrt(1.0 - rho) * zhat
                     + np.sqrt(rho) * rng.standard_normal(x.shape))
        else:
            z_mix = zhat
        c_n = family.coefficients(t_next)
        x_new = interpolate(xhat, z_mix, c_n)

        if config.nu == 2 and not terminal:
            g_i = float(c_i.gamma)
            if abs(g_i) > 1e-12:
                F2 = live_fn(x_new, t_next)
                n_evals += 1
                xhat2 = predict_x(F2, x_new, c_n)
                ratio = float(c_n.gamma) / g_i
                coef = float(c_n.alpha) - float(c_n.gamma) * float(c_i.alpha) / g_i
                x_new = x * ratio + coef * 0.5 * (xhat + xhat2)
        x = x_new

    return SamplingTrace(final=x, history=history, times=ts, n_evals=n_evals)


def euler_reference(drift: Callable, init, schedule) -> np.ndarray:
    """Explicit Euler along a time grid: x += drift(x, t_i) * (t_{i+1} - t_i).

    The reference against which the deterministic linear-family sampler is
    checked for exact (bit-level, up to roundoff) agreement.
    """
    ts = np.asarray(schedule, dtype=np.float64)
    if ts.ndim != 1 or ts.size < 2:
        raise ValueError("schedule must be a 1D array of at least two times")
    x = np.asarray(init, dtype=np.float64).copy()
    for i in range(ts.size - 1):
        x = x + drift(x, float(ts[i])) * (ts[i + 1] - ts[i])
    return x
