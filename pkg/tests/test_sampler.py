"""Sampler loop: step planning, noise policy, extrapolation order, nu=2."""

import numpy as np
import pytest

from ucgm.estimator import init_mlp
from ucgm.oracle import (
    GaussianMixture,
    linear_schedule,
    rk4_integrate,
    velocity_drift,
)
from ucgm.sampler import (
    EstimatorSnapshot,
    SamplerConfig,
    euler_reference,
    plan_steps,
    rho_sde,
    sample,
)
from ucgm.transport import get_family

LINEAR = get_family("linear")


def det_config(**overrides):
    """Deterministic transport: no noise, no extrapolation unless asked."""
    base = dict(steps=16, kappa=0.0, rho_mode="constant", rho_value=0.0)
    base.update(overrides)
    return SamplerConfig(**base)


# ---------------------------------------------------------------- planning

def test_plan_steps():
    assert plan_steps(64, 1) == 64
    assert plan_steps(9, 2) == 5
    assert plan_steps(2, 2) == 1
    assert plan_steps(1, 1) == 1


def test_plan_steps_validation():
    with pytest.raises(ValueError):
        plan_steps(0, 1)
    with pytest.raises(ValueError):
        plan_steps(4, 3)


def test_config_validation():
    with pytest.raises(ValueError):
        SamplerConfig(steps=0)
    with pytest.raises(ValueError):
        SamplerConfig(nu=3)
    with pytest.raises(ValueError):
        SamplerConfig(rho_mode="brownian")
    with pytest.raises(ValueError):
        SamplerConfig(rho_mode="constant", rho_value=1.5)
    # under the "sde" policy rho_value is unused, so it is not range-checked
    SamplerConfig(rho_mode="sde", rho_value=7.0)


# ------------------------------------------------------------ noise policy

def test_rho_sde_frozen_value():
    assert abs(rho_sde(0.5, 0.4, LINEAR) - 0.25) < 1e-12
    assert abs(rho_sde(0.5, 0.4, LINEAR, appendix_form=True) - 0.625) < 1e-12


def test_rho_sde_clipping_and_degenerate_cases():
    assert rho_sde(1.0, 0.2, LINEAR) == 1.0          # big step saturates
    assert rho_sde(0.5, 0.0, LINEAR) == 0.0          # alpha(t') = 0
    assert rho_sde(0.4, 0.4, LINEAR) == 0.0          # zero-width step


def test_equal_lambda_policy_is_a_constant():
    drift = lambda x, t: -x
    init = np.random.default_rng(0).standard_normal((8, 2))
    a = sample(drift, SamplerConfig(steps=8, kappa=0.0, rho_mode="constant",
                                    rho_value=0.5, seed=11), LINEAR, init)
    b = sample(drift, SamplerConfig(steps=8, kappa=0.0, rho_mode="equal_lambda",
                                    rho_value=0.5, seed=11), LINEAR, init)
    assert np.array_equal(a.final, b.final)


def test_noise_is_seeded():
    drift = lambda x, t: -x
    init = np.zeros((16, 1))
    cfg = lambda s: SamplerConfig(steps=8, kappa=0.0, rho_mode="constant",
                                  rho_value=0.3, seed=s)
    one = sample(drift, cfg(5), LINEAR, init).final
    two = sample(drift, cfg(5), LINEAR, init).final
    other = sample(drift, cfg(6), LINEAR, init).final
    assert np.array_equal(one, two)
    assert not np.array_equal(one, other)


def test_variance_contract():
    # F(x, t) = -x/(1-t) makes zhat vanish and xhat = x/(1-t); starting from
    # zeros over [0.5, 0.25, 0] the only randomness is the injected noise and
    # the final state is sqrt(rho)/3 * z exactly.
    drift = lambda x, t: -x / (1.0 - t)
    sched = np.array([0.5, 0.25, 0.0])
    init = np.zeros((100000, 1))

    out = sample(drift, det_config(steps=2, rho_value=0.36, schedule=sched,
                                   seed=3), LINEAR, init)
    assert abs(out.final.std() / 0.2 - 1.0) < 0.02

    out = sample(drift, det_config(steps=2, rho_mode="sde", schedule=sched,
                                   seed=3), LINEAR, init)
    # rho_sde(0.5, 0.25) clips to 1, so the std is 1/3
    assert abs(out.final.std() * 3.0 - 1.0) < 0.02


def test_rho_zero_is_noise_free():
    drift = lambda x, t: -x / (1.0 - t)
    out = sample(drift, det_config(steps=2, schedule=np.array([0.5, 0.25, 0.0])),
                 LINEAR, np.zeros((64, 1)))
    assert np.all(out.final == 0.0)


# --------------------------------------------------- deterministic transport

def test_euler_equivalence_on_linear_family():
    rng = np.random.default_rng(7)
    init = rng.standard_normal((32, 2))
    drift = lambda x, t: np.tanh(x) * (1.0 + t) - 0.3 * x
    out = sample(drift, det_config(steps=64), LINEAR, init)
    ref = euler_reference(drift, init, out.times)
    assert np.max(np.abs(out.final - ref)) <= 1e-12


def test_single_step_returns_data_prediction():
    rng = np.random.default_rng(2)
    init = rng.standard_normal((8, 3))
    drift = lambda x, t: np.sin(x) + t
    out = sample(drift, det_config(steps=1), LINEAR, init)
    # one step from t=1 lands directly on predict_x = x - F
    assert np.allclose(out.final, init - drift(init, 1.0), atol=1e-15)
    assert out.n_evals == 1


def test_constant_state_when_field_is_zero():
    init = np.random.default_rng(4).standard_normal((5, 2))
    drift = lambda x, t: np.zeros_like(x)
    out = sample(drift, det_config(steps=6, kappa=0.4), LINEAR, init)
    # F = 0 predicts the state itself on both ends, so nothing moves beyond
    # the ulp-level roundoff of re-interpolating alpha*x + gamma*x each step
    assert np.allclose(out.final, init, rtol=0, atol=1e-14)
    assert np.allclose(out.history, init[None], rtol=0, atol=1e-14)


def test_trace_shapes_and_times():
    init = np.zeros((10, 2))
    out = sample(lambda x, t: np.zeros_like(x), det_config(steps=5),
                 LINEAR, init)
    assert out.history.shape == (5, 10, 2)
    assert out.times.shape == (6,)
    assert out.times[0] == 1.0 and out.times[-1] == 0.0
    assert np.all(np.diff(out.times) < 0.0)


# ------------------------------------------------------------ extrapolation

def test_extrapolation_differences_share_an_anchor():
    # F(x, t) = t on a uniform 3-step grid, kappa=1, x0=0 discriminates the
    # update variants: no extrapolation gives -2/3 (plain Euler), differencing
    # predictions decomposed at the CURRENT state gives -4/9, differencing
    # against the previous step's own predictions would give -1/3.
    drift = lambda x, t: t * np.ones_like(x)
    x0 = np.zeros((1,))
    plain = sample(drift, det_config(steps=3), LINEAR, x0)
    assert abs(plain.final[0] + 2.0 / 3.0) < 1e-12
    extr = sample(drift, det_config(steps=3, kappa=1.0), LINEAR, x0)
    assert abs(extr.final[0] + 4.0 / 9.0) < 1e-12


def test_extrapolation_inactive_on_first_step():
    drift = lambda x, t: t * x + 1.0
    x0 = np.full((3,), 0.7)
    # a single step has no history to difference, so kappa must not matter
    sched = np.array([1.0, 0.5])
    half = sample(drift, det_config(steps=1, schedule=sched, kappa=0.9),
                  LINEAR, x0)
    assert np.allclose(half.final, euler_reference(drift, x0, sched),
                       atol=1e-15)
    # from the second step on it does
    two = sample(drift, det_config(steps=2, kappa=0.9), LINEAR, x0)
    assert not np.allclose(two.final, euler_reference(drift, x0, two.times))


def test_convergence_order_first_and_second():
    # exact velocity field for the bimodal mixture; terminal error against a
    # fine RK4 reference should scale like h at kappa=0 and h^2 at kappa=1/2
    mix = GaussianMixture.bimodal(2.0, 0.3)
    sched = linear_schedule()
    drift = lambda x, t: velocity_drift(x, t, mix, sched)
    init = np.linspace(-2.5, 2.5, 9)[:, None]
    ref = rk4_integrate(drift, init, 1.0, 0.0, 5000)

    def slope(kappa):
        errs = []
        for n in (16, 32, 64, 128):
            out = sample(drift, det_config(steps=n, kappa=kappa), LINEAR, init)
            errs.append(np.max(np.abs(out.final - ref)))
        hs = 1.0 / np.array([16.0, 32.0, 64.0, 128.0])
        return np.polyfit(np.log(hs), np.log(errs), 1)[0]

    assert 0.8 <= slope(0.0) <= 1.2
    assert 1.7 <= slope(0.5) <= 2.3


def test_kappa_one_remains_stable():
    mix = GaussianMixture.bimodal(2.0, 0.3)
    sched = linear_schedule()
    drift = lambda x, t: velocity_drift(x, t, mix, sched)
    init = np.linspace(-2.0, 2.0, 7)[:, None]
    ref = rk4_integrate(drift, init, 1.0, 0.0, 5000)
    out = sample(drift, det_config(steps=128, kappa=1.0), LINEAR, init)
    assert np.max(np.abs(out.final - ref)) < 0.05


# ------------------------------------------------------------------- nu = 2

def test_nu2_halves_the_plan():
    out = sample(lambda x, t: np.zeros_like(x),
                 det_config(steps=9, nu=2), LINEAR, np.zeros((4, 1)))
    assert out.history.shape[0] == 5
    assert out.times.shape == (6,)


def test_nu2_corrector_hand_value():
    # relinear, N=3 -> plan 2 over [1, 0.5, 0], F(x, t) = x + 1, x0 = 1:
    # step one reconstructs 0, the live refresh averages the two data
    # predictions back up to 0.875, and the terminal step emits -1/16.
    out = sample(lambda x, t: x + 1.0, det_config(steps=3, nu=2),
                 "relinear", np.ones((1,)))
    assert abs(out.final[0] + 0.0625) < 1e-15
    assert out.n_evals == 3


def test_nu2_eval_budget():
    zero = lambda x, t: np.zeros_like(x)
    # trigflow has gamma(1) ~ 1e-17, so the refresh is skipped on the first
    # step: 5 main evaluations + 3 refreshes
    out = sample(zero, det_config(steps=9, nu=2), "trigflow", np.ones((4,)))
    assert out.n_evals == 8
    # relinear has gamma(1) = 1 and refreshes every non-terminal step
    out = sample(zero, det_config(steps=9, nu=2), "relinear", np.ones((4,)))
    assert out.n_evals == 9
    for n in (2, 5, 16):
        for fam in ("linear", "trigflow", "relinear"):
            out = sample(zero, det_config(steps=n, nu=2), fam, np.ones((2,)))
            assert out.n_evals <= n + 1


def test_nu1_budget_is_exactly_plan():
    out = sample(lambda x, t: np.zeros_like(x), det_config(steps=12),
                 LINEAR, np.zeros((2,)))
    assert out.n_evals == 12


# ---------------------------------------------------------------- schedules

def test_custom_schedule_is_thinned_to_plan():
    drift = lambda x, t: -0.5 * x + t
    init = np.full((6,), 1.3)
    dense = np.linspace(1.0, 0.0, 129)
    out = sample(drift, det_config(steps=64, schedule=dense), LINEAR, init)
    assert out.times.shape == (65,)
    assert np.allclose(out.times, np.linspace(1.0, 0.0, 65))
    ref = euler_reference(drift, init, out.times)
    assert np.max(np.abs(out.final - ref)) <= 1e-12


def test_schedule_validation():
    bad = [
        np.array([1.0]),                      # too short
        np.array([[1.0, 0.0]]),               # not 1D
        np.array([0.0, 1.0]),                 # increasing
        np.array([1.0, 0.5, 0.5, 0.0]),       # not strict
        np.array([1.2, 0.5, 0.0]),            # outside [0, 1]
    ]
    for sched in bad:
        with pytest.raises(ValueError):
            sample(lambda x, t: x, det_config(steps=2, schedule=sched),
                   LINEAR, np.zeros((2,)))
    with pytest.raises(ValueError, match="needs"):
        sample(lambda x, t: x,
               det_config(steps=8, schedule=np.linspace(1.0, 0.0, 5)),
               LINEAR, np.zeros((2,)))


# ------------------------------------------------------------ model plumbing

def test_snapshot_falls_back_to_live_weights():
    params = init_mlp(dim=2, hidden=(6,), seed=1)
    snap = EstimatorSnapshot(live=params, ema=None)
    init = np.random.default_rng(0).standard_normal((5, 2))
    a = sample(snap, det_config(steps=4), LINEAR, init)
    b = sample(params, det_config(steps=4), LINEAR, init)
    assert np.array_equal(a.final, b.final)


def test_ema_weights_drive_the_main_predictions():
    live = init_mlp(dim=1, hidden=(6,), seed=1)
    ema = init_mlp(dim=1, hidden=(6,), seed=2)
    snap = EstimatorSnapshot(live=live, ema=ema)
    init = np.random.default_rng(3).standard_normal((5, 1))
    via_snap = sample(snap, det_config(steps=4), LINEAR, init)
    via_ema = sample(ema, det_config(steps=4), LINEAR, init)
    assert np.array_equal(via_snap.final, via_ema.final)


def test_conditional_labels_are_forwarded():
    params = init_mlp(dim=2, hidden=(6,), n_classes=3, seed=0)
    # the class table starts at zero; give it content so labels matter
    params.cond_table[:] = np.random.default_rng(9).standard_normal(
        params.cond_table.shape)
    init = np.random.default_rng(1).standard_normal((4, 2))
    labels = np.array([0, 1, 2, 0])
    out = sample(params, det_config(steps=3), LINEAR, init, cond=labels)
    null = sample(params, det_config(steps=3), LINEAR, init)
    assert out.final.shape == (4, 2)
    assert not np.array_equal(out.final, null.final)


def test_rejects_unknown_model_type():
    with pytest.raises(TypeError):
        sample("weights.bin", det_config(), LINEAR, np.zeros((2,)))


def test_family_accepted_by_name():
    drift = lambda x, t: -x
    init = np.ones((3,))
    by_name = sample(drift, det_config(steps=4), "linear", init)
    by_obj = sample(drift, det_config(steps=4), LINEAR, init)
    assert np.array_equal(by_name.final, by_obj.final)


# ------------------------------------------------------------- euler helper

def test_euler_reference_validation():
    with pytest.raises(ValueError):
        euler_reference(lambda x, t: x, np.zeros(3), np.array([1.0]))
    with pytest.raises(ValueError):
        euler_reference(lambda x, t: x, np.zeros(3), np.eye(2))


def test_euler_reference_linear_decay():
    # dx/dt = -x backwards from 1 to 0 with two steps of 0.5
    got = euler_reference(lambda x, t: -x, np.ones(1), np.array([1.0, 0.5, 0.0]))
    assert abs(got[0] - 2.25) < 1e-15
