"""Unified trainer covering the multi-step and few-step regimes.

One loss family drives everything. Per step: draw data x, noise z, and a
Beta-distributed time t; build the interpolated state x_t; evaluate the live
network F_t = F(x_t, t); then form a target

    target = F_t - (4 alpha(t) / d(t)) * clip(delta, -B, B) / sin(t)

where delta is a finite-difference estimate of how the data prediction moves
along the interpolation path, and d is the coupling determinant. The blend
parameter lambda selects the regime:

- lambda = 0: delta reduces to (x-prediction - x) / t; minimizing the loss is
  algebraically a regression of F onto the target field (verified in tests).
- lambda in (0, 1): delta compares the prediction at t against a
  gradient-stopped prediction at lambda*t (evaluated at the UN-enhanced
  interpolant, with the enhanced interpolant in the prediction slot).
- lambda = 1: delta is a central difference of gradient-stopped predictions
  at t +- eps; this is the boundary-consistency regime used for 1-2 step
  samplers.

The target is treated as a constant during differentiation (the classic
stop-gradient); in this numpy implementation that simply means the adjoint is
2 cos(t) (F_t - target) / batch and no gradient flows through the target's
ingredients. The delta evaluations use the CURRENT weights, merely shielded
from the gradient. Substituting the EMA shadow there turns the
self-referential update into a delayed-feedback loop: the network grows a
time-oscillation that the clipped loss never sees, and the few-step regime
diverges. The EMA enters training only as the unconditional reference inside
the enhancement map.

Optional guidance-style enhancement (zeta > 0) replaces the anchors (x, z)
with pulled-apart versions built from conditional and unconditional
predictions; the self variant requires zeta in (0, 1), while a provided
teacher network admits any zeta >= 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import estimator as est
from .prediction import interpolate, predict_x, predict_z
from .timedist import BetaParams, sample_beta
from .transport import TransportFamily, get_family

__all__ = [
    "TrainerConfig",
    "TrainState",
    "TrainingLog",
    "TrainResult",
    "TrainingDivergedError",
    "default_trainer_config",
    "enhance_pair",
    "delta_fx_multistep",
    "delta_fx_consistency",
    "compute_target",
    "loss_and_grad",
    "init_train_state",
    "train_step",
    "train",
]


class TrainingDivergedError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainerConfig:
    lam: float = 0.0
    zeta: float = 0.0
    s_threshold: float = 0.75
    epsilon: float = 0.005
    theta1: float = 1.0
    theta2: float = 1.0
    lr: float = 2e-4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.95
    adam_eps: float = 1e-8
    weight_decay: float = 0.0
    warmup_steps: int = 0
    batch_size: int = 256
    steps: int = 20000
    ema_decay: float = 0.9999
    clip_bound: float = 1.0
    null_cond_dropout: float = 0.1
    time_floor_low: float = 0.004
    time_floor_high: float = 0.996
    hidden: tuple = (64, 64, 64)
    activation: str = "tanh"
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("lambda must lie in [0, 1]")
        if self.zeta < 0.0:
            raise ValueError("zeta must be nonnegative")
        if not 0.0 < self.s_threshold < 1.0:
            raise ValueError("s_threshold must lie in (0, 1)")
        if not 0.0 < self.epsilon < 0.5:
            raise ValueError("epsilon must lie in (0, 0.5)")
        if self.clip_bound <= 0.0:
            raise ValueError("clip bound must be positive")
        if not 0.0 < self.time_floor_low < self.time_floor_high < 1.0:
            raise ValueError("time floor must satisfy 0 < low < high < 1")
        if self.batch_size < 1 or self.steps < 1:
            raise ValueError("batch_size and steps must be positive")
        if self.lr <= 0.0:
            raise ValueError("learning rate must be positive")

    @property
    def beta_params(self) -> BetaParams:
        return BetaParams(self.theta1, self.theta2)


def default_trainer_config(lam: float = 0.0, **overrides) -> TrainerConfig:
    """Mode-dependent defaults: the few-step regime (lambda=1) switches to a
    smaller rate, slower second moment, 500 warmup steps, and a time law
    tilted toward t=0; the multi-step regime keeps the flat time law."""
    if lam == 1.0:
        base = dict(lam=1.0, lr=1e-4, adam_beta2=0.999, warmup_steps=500,
                    theta1=0.8, theta2=1.0)
    else:
        base = dict(lam=lam, lr=2e-4, adam_beta2=0.95, warmup_steps=0,
                    theta1=1.0, theta2=1.0)
    base.update(overrides)
    return TrainerConfig(**base)


def _per_sample(values, like):
    """Reshape a per-sample vector so it broadcasts over feature axes."""
    v = np.asarray(values, dtype=np.float64)
    if v.ndim and v.ndim < np.ndim(like):
        v = v.reshape(v.shape + (1,) * (np.ndim(like) - v.ndim))
    return v


def _xi(anchor, above, pulled, reference, zeta):
    """The enhancement map.

    xi(a, t, b, d) = a + (zeta + 1[t>s] (1/2 - zeta))
                       * (b - 1[t>s] a - d (1 - 1[t>s]))

    which branches to a + zeta (b - d) for t <= s and a + (b - a)/2 for
    t > s. `above` is the indicator array 1[t > s].
    """
    ind = _per_sample(above.astype(np.float64), anchor)
    coef = zeta + ind * (0.5 - zeta)
    inner = pulled - ind * anchor - reference * (1.0 - ind)
    return anchor + coef * inner


def enhance_pair(x, z, x_t, t, F_cond, F_uncond, zeta, s_threshold, coeffs):
    """Pull the anchors apart along the guidance direction.

    F_cond is the (detached) conditional output, F_uncond the EMA-weight
    unconditional one. Passing F_uncond=None selects the teacher form, where
    the reference prediction is the anchor itself and zeta may exceed 1.
    """
    above = np.asarray(t, dtype=np.float64) > s_threshold
    b_x = predict_x(F_cond, x_t, coeffs)
    b_z = predict_z(F_cond, x_t, coeffs)
    if F_uncond is None:
        d_x, d_z = x, z
    else:
        d_x = predict_x(F_uncond, x_t, coeffs)
        d_z = predict_z(F_uncond, x_t, coeffs)
    return (_xi(x, above, b_x, d_x, zeta),
            _xi(z, above, b_z, d_z, zeta))


def delta_fx_multistep(F_t, F_lam, x_t_star, x_lam_star, t, lam,
                       family: TransportFamily):
    """Path difference of x-predictions between times t and lambda*t.

    Each term is multiplied by 1/(t - lambda t) separately (the distributive
    form; the two-term structure is what the clip acts through). At lambda=0
    the second term needs no network: the data prediction at time zero is the
    anchor state itself, provided the family attains alpha(0)=0, gamma(0)=1.
    """
    t = np.asarray(t, dtype=np.float64)
    inv = _per_sample(1.0 / (t - lam * t), x_t_star)
    term1 = predict_x(F_t, x_t_star, family.coefficients(t)) * inv
    if lam == 0.0:
        term2 = x_lam_star * inv
    else:
        term2 = predict_x(F_lam, x_lam_star,
                          family.coefficients(lam * t)) * inv
    return term1 - term2


def delta_fx_consistency(F_plus, F_minus, x_plus_star, x_minus_star, t,
                         epsilon, family: TransportFamily):
    """Central difference of gradient-stopped x-predictions at t +- eps.

    t is clamped into [eps, 1-eps] (idempotent for the trainer, which clamps
    before building the interpolants)."""
    t = np.clip(np.asarray(t, dtype=np.float64), epsilon, 1.0 - epsilon)
    inv = 1.0 / (2.0 * epsilon)
    term1 = predict_x(F_plus, x_plus_star,
                      family.coefficients(t + epsilon)) * inv
    term2 = predict_x(F_minus, x_minus_star,
                      family.coefficients(t - epsilon)) * inv
    return term1 - term2


def compute_target(F_t, delta, t, family: TransportFamily, clip_bound):
    """target = F_t - (4 alpha / determinant) * clip(delta) / sin(t).

    Angles are radians; t must be positive (the trainer's time floor
    guarantees it). F_t enters as a constant (stop-gradient semantics)."""
    t = np.asarray(t, dtype=np.float64)
    if np.any(t <= 0.0):
        raise ValueError("target construction needs t > 0")
    c = family.coefficients(t)
    clipped = np.clip(delta, -clip_bound, clip_bound)
    coef = _per_sample(4.0 * c.alpha / (c.denominator * np.sin(t)), F_t)
    return F_t - coef * clipped


def loss_and_grad(F_t, target, t):
    """Mean of cos(t) * ||F - target||^2 over the batch, and dloss/dF."""
    t = np.asarray(t, dtype=np.float64)
    diff = F_t - target
    w = np.cos(t)
    n = diff.shape[0] if diff.ndim > 1 else 1
    loss = float(np.mean(w * np.sum(np.atleast_2d(diff) ** 2, axis=-1)))
    adjoint = 2.0 * _per_sample(w, diff) * diff / n
    return loss, adjoint


@dataclass
class _AdamW:
    m: list
    v: list
    step: int = 0


def _init_adamw(params: est.MLPParams) -> _AdamW:
    return _AdamW(m=[np.zeros_like(a) for _, a in params.tensors()],
                  v=[np.zeros_like(a) for _, a in params.tensors()])


def _adamw_update(params, grads, opt, lr, cfg: TrainerConfig):
    opt.step += 1
    k = opt.step
    bc1 = 1.0 - cfg.adam_beta1 ** k
    bc2 = 1.0 - cfg.adam_beta2 ** k
    for i, ((_, p), (_, g)) in enumerate(zip(params.tensors(),
                                             grads.tensors())):
        opt.m[i] = cfg.adam_beta1 * opt.m[i] + (1.0 - cfg.adam_beta1) * g
        opt.v[i] = cfg.adam_beta2 * opt.v[i] + (1.0 - cfg.adam_beta2) * g * g
        update = (opt.m[i] / bc1) / (np.sqrt(opt.v[i] / bc2) + cfg.adam_eps)
        p -= lr * update
        if cfg.weight_decay > 0.0:
            p -= lr * cfg.weight_decay * p


@dataclass
class TrainState:
    params: est.MLPParams
    ema: est.EMAState
    opt: _AdamW
    rng: np.random.Generator
    step: int = 0


@dataclass
class TrainingLog:
    step: np.ndarray
    loss: np.ndarray
    grad_norm: np.ndarray
    clip_rate: np.ndarray


@dataclass
class TrainResult:
    live: est.MLPParams
    ema: est.MLPParams
    log: TrainingLog


def init_train_state(config: TrainerConfig, dim: int,
                     n_classes: int = 0) -> TrainState:
    params = est.init_mlp(dim, hidden=tuple(config.hidden),
                          n_classes=n_classes, seed=config.seed,
                          activation=config.activation)
    return TrainState(
        params=params,
        ema=est.init_ema(params, config.ema_decay),
        opt=_init_adamw(params),
        rng=np.random.default_rng(config.seed),
    )


def _ema_reference(state: TrainState) -> est.MLPParams:
    """Debiased EMA snapshot for the enhancement's unconditional branch.

    Falls back to the live weights before the first update so
    self-enhancement is defined from step zero."""
    if state.ema.num_updates == 0:
        return state.params
    return est.ema_snapshot(state.ema)


def _grad_norm(grads: est.MLPParams) -> float:
    total = 0.0
    for _, g in grads.tensors():
        total += float(np.sum(g * g))
    return math.sqrt(total)


def train_step(state: TrainState, x, cond, config: TrainerConfig,
               family: TransportFamily, teacher: est.MLPParams = None):
    """One optimizer step on a prepared batch. Returns (loss, grad_norm,
    clip_rate); mutates the state in place."""
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    rng = state.rng
    z = rng.standard_normal(x.shape)
    t = sample_beta(config.beta_params, rng, (n,))
    t = np.clip(t, config.time_floor_low, config.time_floor_high)
    if config.lam == 1.0:
        t = np.clip(t, config.epsilon, 1.0 - config.epsilon)

    coeffs_t = family.coefficients(t)
    x_t = interpolate(x, z, coeffs_t)
    F_t, cache = est.forward(state.params, x_t, t, cond, want_cache=True)

    if config.zeta > 0.0:
        if teacher is not None:
            F_guide = est.forward(teacher, x_t, t, cond)
            x_s, z_s = enhance_pair(x, z, x_t, t, F_guide, None,
                                    config.zeta, config.s_threshold, coeffs_t)
        else:
            if config.zeta >= 1.0:
                raise ValueError("self-enhancement needs zeta in (0, 1); "
                                 "larger ratios require a teacher")
            F_uncond = est.forward(_ema_reference(state), x_t, t, None)
            x_s, z_s = enhance_pair(x, z, x_t, t, F_t, F_uncond,
                                    config.zeta, config.s_threshold, coeffs_t)
    else:
        x_s, z_s = x, z

    if config.lam < 1.0:
        lam_t = config.lam * t
        x_t_star = interpolate(x_s, z_s, coeffs_t)
        x_lam_star = interpolate(x_s, z_s, family.coefficients(lam_t))
        if config.lam > 0.0:
            x_lam = interpolate(x, z, family.coefficients(lam_t))
            F_lam = est.forward(state.params, x_lam, lam_t, cond)
        else:
            F_lam = None
        delta = delta_fx_multistep(F_t, F_lam, x_t_star, x_lam_star, t,
                                   config.lam, family)
    else:
        eps = config.epsilon
        c_p, c_m = family.coefficients(t + eps), family.coefficients(t - eps)
        x_p_star = interpolate(x_s, z_s, c_p)
        x_m_star = interpolate(x_s, z_s, c_m)
        F_p = est.forward(state.params, interpolate(x, z, c_p), t + eps, cond)
        F_m = est.forward(state.params, interpolate(x, z, c_m), t - eps, cond)
        delta = delta_fx_consistency(F_p, F_m, x_p_star, x_m_star, t, eps,
                                     family)

    target = compute_target(F_t, delta, t, family, config.clip_bound)
    clip_rate = float(np.mean(np.abs(delta) > config.clip_bound))
    loss, adjoint = loss_and_grad(F_t, target, t)
    if not math.isfinite(loss):
        raise TrainingDivergedError(
            f"non-finite loss at step {state.step}: {loss}")

    grads = est.backward(state.params, cache, adjoint)
    gnorm = _grad_norm(grads)
    lr = config.lr
    if config.warmup_steps > 0:
        lr *= min(1.0, (state.step + 1) / config.warmup_steps)
    _adamw_update(state.params, grads, state.opt, lr, config)
    est.ema_update(state.ema, state.params)
    state.step += 1
    return loss, gnorm, clip_rate


def train(config: TrainerConfig, family, data, labels=None,
          n_classes: int = 0, teacher: est.MLPParams = None,
          init_from: est.MLPParams = None) -> TrainResult:
    """Full training loop over `config.steps` uniformly resampled batches.

    Args:
        config: Trainer configuration.
        family: Transport family or its name.
        data: Array (N, d) of training points (already standardized).
        labels: Optional int array (N,) of class labels; entries are dropped
            to the null label with probability config.null_cond_dropout.
        n_classes: Number of classes when labels are given.
        teacher: Optional frozen guidance network (enables zeta >= 1).
        init_from: Optional weights to warm-start from instead of a fresh
            seed init. The boundary-consistency regime rarely trains well
            from scratch at this scale: starting from a converged
            multi-step model hands it the correct basin, and the run then
            bends that solution toward the integrated few-step map.

    Returns:
        TrainResult with live weights, the debiased EMA snapshot, and the
        per-step log.
    """
    if isinstance(family, str):
        family = get_family(family)
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2:
        raise ValueError("data must be (N, d)")
    if labels is not None:
        labels = np.asarray(labels)
        if labels.shape[0] != data.shape[0]:
            raise ValueError("labels length must match data")
        if n_classes < 1:
            raise ValueError("labels given but n_classes < 1")
    if config.zeta >= 1.0 and teacher is None:
        raise ValueError("zeta >= 1 requires a teacher network")

    state = init_train_state(config, data.shape[1], n_classes)
    if init_from is not None:
        names = [n for n, _ in state.params.tensors()]
        if names != [n for n, _ in init_from.tensors()]:
            raise ValueError("init_from weights do not match the configured "
                             "estimator shape")
        for (_, p), (_, q) in zip(state.params.tensors(),
                                  init_from.tensors()):
            if p.shape != q.shape:
                raise ValueError("init_from weights do not match the "
                                 "configured estimator shape")
            p[...] = q
        state.ema = est.init_ema(state.params, config.ema_decay)
    steps = np.empty(config.steps, dtype=np.int64)
    losses = np.empty(config.steps)
    gnorms = np.empty(config.steps)
    crates = np.empty(config.steps)
    for k in range(config.steps):
        idx = state.rng.integers(0, data.shape[0], size=config.batch_size)
        xb = data[idx]
        cb = None
        if labels is not None:
            cb = labels[idx].astype(np.int64).copy()
            drop = state.rng.random(config.batch_size) < config.null_cond_dropout
            cb[drop] = -1
        loss, gnorm, crate = train_step(state, xb, cb, config, family,
                                        teacher=teacher)
        steps[k], losses[k], gnorms[k], crates[k] = k, loss, gnorm, crate
    log = TrainingLog(step=steps, loss=losses, grad_norm=gnorms,
                      clip_rate=crates)
    return TrainResult(live=state.params, ema=est.ema_snapshot(state.ema),
                       log=log)
