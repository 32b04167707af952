"""Network plumbing: init, forward/backward, EMA, weight files."""

import math

import numpy as np
import pytest

from ucgm.estimator import (N_TIME_FEATURES, MLPParams, backward, ema_snapshot,
                            ema_update, forward, init_ema, init_mlp,
                            lipschitz_bound, load_weights, save_weights,
                            time_features)


def loss_value(params, x, t, cond, adjoint):
    out = forward(params, x, t, cond)
    return float(np.sum(adjoint * out))


# ------------------------------------------------------------------- init

def test_init_is_seed_deterministic():
    a = init_mlp(2, hidden=(8, 8), seed=7)
    b = init_mlp(2, hidden=(8, 8), seed=7)
    c = init_mlp(2, hidden=(8, 8), seed=8)
    for (_, ta), (_, tb) in zip(a.tensors(), b.tensors()):
        assert np.array_equal(ta, tb)
    assert any(not np.array_equal(ta, tc)
               for (_, ta), (_, tc) in zip(a.tensors(), c.tensors()))


def test_init_validation():
    with pytest.raises(ValueError):
        init_mlp(2, activation="relu")
    with pytest.raises(ValueError):
        init_mlp(2, hidden=())


def test_init_shapes_and_metadata():
    params = init_mlp(3, hidden=(10, 6), n_classes=4, seed=0)
    assert params.dim == 3
    assert params.out_dim == 3
    assert params.hidden == (10, 6)
    assert params.n_classes == 4
    assert params.weights[0].shape == (3 + N_TIME_FEATURES, 10)
    assert params.cond_table.shape == (5, 10)
    assert all(np.all(b == 0.0) for b in params.biases)


def test_zeroed_network_outputs_zero():
    params = init_mlp(2, hidden=(8,), seed=0)
    for _, arr in params.tensors():
        arr[...] = 0.0
    out = forward(params, np.ones((5, 2)), 0.5)
    assert np.array_equal(out, np.zeros((5, 2)))


# ---------------------------------------------------------------- forward

def test_forward_shapes():
    params = init_mlp(2, hidden=(8, 8), seed=1)
    single = forward(params, np.array([0.3, -0.2]), 0.5)
    assert single.shape == (2,)
    batch = forward(params, np.zeros((7, 2)), np.linspace(0, 1, 7))
    assert batch.shape == (7, 2)


def test_forward_single_matches_batch_row():
    # BLAS may reorder sums between the two matmul shapes; allow an ulp
    params = init_mlp(2, hidden=(8, 8), seed=1)
    x = np.array([[0.3, -0.2], [1.0, 0.4]])
    batch = forward(params, x, 0.25)
    assert np.allclose(forward(params, x[0], 0.25), batch[0],
                       rtol=0.0, atol=1e-14)


def test_null_label_conventions_agree():
    params = init_mlp(2, hidden=(8,), n_classes=3, seed=2)
    params.cond_table[...] = np.random.default_rng(0).normal(
        size=params.cond_table.shape)
    x = np.random.default_rng(1).normal(size=(4, 2))
    via_none = forward(params, x, 0.5, cond=None)
    via_minus_one = forward(params, x, 0.5, cond=np.array([-1, -1, -1, -1]))
    assert np.array_equal(via_none, via_minus_one)
    scalar = forward(params, x, 0.5, cond=2)
    array = forward(params, x, 0.5, cond=np.array([2, 2, 2, 2]))
    assert np.array_equal(scalar, array)


def test_forward_validation():
    params = init_mlp(2, hidden=(8,), n_classes=3, seed=2)
    with pytest.raises(ValueError):
        forward(params, np.zeros((4, 5)), 0.5)
    with pytest.raises(ValueError):
        forward(params, np.zeros((4, 2)), 0.5, cond=np.array([0, 1, 2, 4]))


def test_time_features_form():
    feats = time_features(np.array([0.0, 0.31, 1.0]))
    assert feats.shape == (3, N_TIME_FEATURES)
    assert np.max(np.abs(feats)) <= 1.0 + 1e-15
    assert np.allclose(feats[0, 0::2], 0.0, atol=1e-15)   # sin parts at t=0
    assert np.allclose(feats[0, 1::2], 1.0, atol=1e-15)   # cos parts at t=0


# --------------------------------------------------------------- gradients

def test_backward_matches_finite_differences():
    rng = np.random.default_rng(31)
    h = 1e-6
    for trial in range(20):
        dim = int(rng.integers(1, 4))
        hidden = tuple(int(rng.integers(3, 7))
                       for _ in range(int(rng.integers(1, 4))))
        n_classes = int(rng.integers(0, 3))
        activation = "tanh" if trial % 2 == 0 else "silu"
        params = init_mlp(dim, hidden=hidden, n_classes=n_classes,
                          seed=trial, activation=activation)
        if n_classes:
            params.cond_table[...] = rng.normal(
                size=params.cond_table.shape) * 0.3
        n = int(rng.integers(1, 5))
        x = rng.normal(size=(n, dim))
        t = rng.uniform(size=n)
        cond = (rng.integers(-1, n_classes, size=n) if n_classes else None)
        adjoint = rng.normal(size=(n, dim))

        out, cache = forward(params, x, t, cond, want_cache=True)
        grads = backward(params, cache, adjoint)

        for (name, tensor), (_, grad) in zip(params.tensors(),
                                             grads.tensors()):
            flat = tensor.reshape(-1)
            gflat = grad.reshape(-1)
            for k in rng.choice(flat.size,
                                size=min(4, flat.size), replace=False):
                orig = flat[k]
                flat[k] = orig + h
                up = loss_value(params, x, t, cond, adjoint)
                flat[k] = orig - h
                down = loss_value(params, x, t, cond, adjoint)
                flat[k] = orig
                numeric = (up - down) / (2.0 * h)
                denom = max(abs(numeric), abs(gflat[k]), 1e-4)
                assert abs(numeric - gflat[k]) / denom < 1e-6, (
                    trial, name, k, numeric, gflat[k])


def test_zero_adjoint_gives_zero_gradient():
    params = init_mlp(2, hidden=(6, 6), n_classes=2, seed=3)
    x = np.random.default_rng(4).normal(size=(3, 2))
    _, cache = forward(params, x, 0.4, cond=np.array([0, 1, -1]),
                       want_cache=True)
    grads = backward(params, cache, np.zeros((3, 2)))
    assert all(np.all(arr == 0.0) for _, arr in grads.tensors())


def test_backward_single_input_matches_batch_of_one():
    params = init_mlp(2, hidden=(6,), seed=5)
    x = np.array([0.3, -0.7])
    adjoint = np.array([1.0, -2.0])
    _, cache_s = forward(params, x, 0.6, want_cache=True)
    grads_s = backward(params, cache_s, adjoint)
    _, cache_b = forward(params, x[None, :], 0.6, want_cache=True)
    grads_b = backward(params, cache_b, adjoint[None, :])
    for (_, gs), (_, gb) in zip(grads_s.tensors(), grads_b.tensors()):
        assert np.array_equal(gs, gb)


def test_cond_gradient_lands_only_on_used_rows():
    params = init_mlp(1, hidden=(5,), n_classes=3, seed=6)
    x = np.random.default_rng(7).normal(size=(4, 1))
    _, cache = forward(params, x, 0.5, cond=np.array([1, 1, -1, 0]),
                       want_cache=True)
    grads = backward(params, cache, np.ones((4, 1)))
    assert np.all(grads.cond_table[2] == 0.0)     # class 2 never appeared
    assert np.any(grads.cond_table[0] != 0.0)
    assert np.any(grads.cond_table[1] != 0.0)
    assert np.any(grads.cond_table[3] != 0.0)     # null row


# --------------------------------------------------------------------- EMA

def test_ema_decay_zero_tracks_live():
    params = init_mlp(1, hidden=(4,), seed=8)
    state = init_ema(params, decay=0.0)
    ema_update(state, params)
    snap = ema_snapshot(state)
    for (_, s), (_, p) in zip(snap.tensors(), params.tensors()):
        assert np.array_equal(s, p)


def test_ema_first_snapshot_equals_live_for_any_decay():
    # shadow = (1 - d) * live after one update; debiasing divides by (1 - d)
    params = init_mlp(1, hidden=(4,), seed=9)
    for decay in (0.5, 0.99, 0.9999):
        state = init_ema(params, decay=decay)
        ema_update(state, params)
        snap = ema_snapshot(state)
        for (_, s), (_, p) in zip(snap.tensors(), params.tensors()):
            assert np.allclose(s, p, rtol=1e-12, atol=0.0)


def test_ema_two_step_arithmetic():
    params = init_mlp(1, hidden=(4,), seed=10)
    other = init_mlp(1, hidden=(4,), seed=11)
    state = init_ema(params, decay=0.5)
    ema_update(state, params)
    ema_update(state, other)
    snap = ema_snapshot(state)
    # shadow = 0.25 p1 + 0.5 p2, debias by 1 - 0.25
    for (_, s), (_, p1), (_, p2) in zip(snap.tensors(), params.tensors(),
                                        other.tensors()):
        assert np.allclose(s, (0.25 * p1 + 0.5 * p2) / 0.75, rtol=1e-12)


def test_ema_guards():
    params = init_mlp(1, hidden=(4,), seed=12)
    with pytest.raises(ValueError):
        init_ema(params, decay=1.5)
    state = init_ema(params, decay=0.999)
    with pytest.raises(ValueError):
        ema_snapshot(state)
    stuck = init_ema(params, decay=1.0)
    ema_update(stuck, params)
    with pytest.raises(ValueError):
        ema_snapshot(stuck)


# -------------------------------------------------------------- weight files

def test_save_load_round_trip_bitwise(tmp_path):
    params = init_mlp(2, hidden=(8, 6), n_classes=3, seed=13)
    params.cond_table[...] = np.random.default_rng(14).normal(
        size=params.cond_table.shape)
    path = tmp_path / "net.ucgmw"
    save_weights(params, path)
    loaded = load_weights(path)
    assert loaded.dim == 2 and loaded.n_classes == 3
    assert loaded.hidden == (8, 6)
    for (_, a), (_, b) in zip(params.tensors(), loaded.tensors()):
        assert np.array_equal(a, b)


def test_load_rejects_corrupt_files(tmp_path):
    params = init_mlp(1, hidden=(4,), seed=15)
    good = tmp_path / "net.ucgmw"
    save_weights(params, good)
    blob = good.read_bytes()

    truncated = tmp_path / "short.ucgmw"
    truncated.write_bytes(blob[:-16])
    with pytest.raises(ValueError, match="truncated"):
        load_weights(truncated)

    bad_magic = tmp_path / "magic.ucgmw"
    bad_magic.write_bytes(b"NOTAFILE" + blob[8:])
    with pytest.raises(ValueError, match="magic"):
        load_weights(bad_magic)

    padded = tmp_path / "padded.ucgmw"
    padded.write_bytes(blob + b"\x00")
    with pytest.raises(ValueError, match="trailing"):
        load_weights(padded)


def test_loaded_network_evaluates_identically(tmp_path):
    params = init_mlp(2, hidden=(8, 8), seed=16)
    path = tmp_path / "net.ucgmw"
    save_weights(params, path)
    loaded = load_weights(path)
    x = np.random.default_rng(17).normal(size=(5, 2))
    assert np.array_equal(forward(params, x, 0.3), forward(loaded, x, 0.3))


# ------------------------------------------------------------- Lipschitz cap

def test_lipschitz_bound_dominates_observed_ratios():
    rng = np.random.default_rng(18)
    params = init_mlp(2, hidden=(10, 10), seed=19)
    bound = lipschitz_bound(params)
    assert bound > 0.0
    for _ in range(200):
        x1 = rng.normal(size=2) * 2.0
        x2 = rng.normal(size=2) * 2.0
        t = float(rng.uniform())
        gap_out = np.linalg.norm(forward(params, x1, t)
                                 - forward(params, x2, t))
        gap_in = np.linalg.norm(x1 - x2)
        assert gap_out <= bound * gap_in * (1.0 + 1e-12)
