"""Pure-numpy MLP estimator with exact manual gradients.

The network maps (state, time, optional class label) to a raw output F of the
same dimension as the state. Time enters as 16 sinusoidal features
sin(2^k pi t), cos(2^k pi t) for k = 0..7, concatenated onto the state; the
label enters as a learned row added to the first hidden pre-activation, with
one extra "null" row (the last one) for unconditional evaluation.

backward() computes exact parameter gradients from cached activations; there
is no autograd anywhere. The EMA shadow starts at zero and snapshots divide by
(1 - decay^k) so the average covers the actual iterates only; at k=1 the
snapshot equals the live weights exactly.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

__all__ = [
    "MLPParams",
    "EMAState",
    "time_features",
    "init_mlp",
    "forward",
    "backward",
    "init_ema",
    "ema_update",
    "ema_snapshot",
    "lipschitz_bound",
    "save_weights",
    "load_weights",
]

N_TIME_FEATURES = 16
WEIGHT_MAGIC = b"UCGMW1\n"


@dataclass
class MLPParams:
    weights: list        # chain matrices, each (fan_in, fan_out)
    biases: list         # per-matrix bias vectors
    cond_table: np.ndarray  # (n_classes + 1, first hidden width); last row = null
    activation: str = "tanh"

    @property
    def dim(self):
        return self.weights[0].shape[0] - N_TIME_FEATURES

    @property
    def out_dim(self):
        return self.weights[-1].shape[1]

    @property
    def n_classes(self):
        return self.cond_table.shape[0] - 1

    @property
    def hidden(self):
        return tuple(w.shape[1] for w in self.weights[:-1])

    def copy(self):
        return MLPParams([w.copy() for w in self.weights],
                         [b.copy() for b in self.biases],
                         self.cond_table.copy(), self.activation)

    def tensors(self):
        """(name, array) pairs in a fixed order; shared by optimizers/EMA."""
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            yield f"w{i}", w
            yield f"b{i}", b
        yield "cond", self.cond_table


def time_features(t):
    """Sinusoidal embedding of t, shape (..., 16), frequencies pi * 2^k."""
    t = np.asarray(t, dtype=np.float64)
    ang = np.pi * t[..., None] * (2.0 ** np.arange(8))
    out = np.empty(t.shape + (N_TIME_FEATURES,))
    out[..., 0::2] = np.sin(ang)
    out[..., 1::2] = np.cos(ang)
    return out


def init_mlp(dim, hidden=(64, 64, 64), n_classes=0, seed=0,
             activation="tanh"):
    """Scaled-uniform fan-in init; biases and the label table start at zero."""
    if activation not in ("tanh", "silu"):
        raise ValueError(f"unknown activation {activation!r}")
    if not hidden:
        raise ValueError("need at least one hidden layer")
    rng = np.random.default_rng(seed)
    sizes = [dim + N_TIME_FEATURES, *hidden, dim]
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    table = np.zeros((n_classes + 1, hidden[0]))
    return MLPParams(weights, biases, table, activation)


def _act(pre, kind):
    if kind == "tanh":
        a = np.tanh(pre)
        return a, 1.0 - a * a
    sig = 1.0 / (1.0 + np.exp(-pre))
    return pre * sig, sig * (1.0 + pre * (1.0 - sig))


def _cond_indices(cond, n, n_classes):
    null = n_classes
    if cond is None:
        return np.full(n, null, dtype=np.intp)
    idx = np.asarray(cond)
    if idx.ndim == 0:
        idx = np.full(n, int(idx), dtype=np.intp)
    idx = idx.astype(np.intp).copy()
    idx[idx < 0] = null
    if np.any(idx > null):
        raise ValueError(f"label out of range: table has {n_classes} classes")
    return idx


def forward(params, x, t, cond=None, want_cache=False):
    """Evaluate the network.

    x is (n, d) or (d,); t is a scalar or (n,); cond is None (all null),
    a scalar label, or an int array with -1 marking null entries.
    Returns (n, d) (or (d,) for single inputs), plus a cache when asked.
    """
    x_arr = np.asarray(x, dtype=np.float64)
    single = x_arr.ndim == 1
    if single:
        x_arr = x_arr[None, :]
    n = x_arr.shape[0]
    if x_arr.shape[1] != params.dim:
        raise ValueError(f"state dim {x_arr.shape[1]} != network dim {params.dim}")
    t_arr = np.asarray(t, dtype=np.float64)
    if t_arr.ndim == 0:
        t_arr = np.full(n, float(t_arr))
    idx = _cond_indices(cond, n, params.n_classes)

    h = np.concatenate([x_arr, time_features(t_arr)], axis=1)
    inputs = [h]
    dacts = []
    a = h
    for li in range(len(params.weights) - 1):
        pre = a @ params.weights[li] + params.biases[li]
        if li == 0:
            pre = pre + params.cond_table[idx]
        a, da = _act(pre, params.activation)
        inputs.append(a)
        dacts.append(da)
    out = a @ params.weights[-1] + params.biases[-1]
    if single:
        out = out[0]
    if not want_cache:
        return out
    return out, {"inputs": inputs, "dacts": dacts, "idx": idx, "single": single}


def backward(params, cache, out_adjoint):
    """Exact parameter gradients given d(loss)/d(output)."""
    dout = np.asarray(out_adjoint, dtype=np.float64)
    if cache["single"]:
        dout = dout[None, :]
    inputs, dacts, idx = cache["inputs"], cache["dacts"], cache["idx"]
    gw = [None] * len(params.weights)
    gb = [None] * len(params.biases)
    gtable = np.zeros_like(params.cond_table)

    da = dout
    for li in range(len(params.weights) - 1, -1, -1):
        if li == len(params.weights) - 1:
            dpre = da                       # linear head
        else:
            dpre = da * dacts[li]
        gw[li] = inputs[li].T @ dpre
        gb[li] = dpre.sum(axis=0)
        if li == 0:
            np.add.at(gtable, idx, dpre)
        else:
            da = dpre @ params.weights[li].T
    return MLPParams(gw, gb, gtable, params.activation)


@dataclass
class EMAState:
    shadow: MLPParams
    decay: float
    num_updates: int = 0


def init_ema(params, decay=0.9999):
    if not 0.0 <= decay <= 1.0:
        raise ValueError("decay must lie in [0, 1]")
    zero = MLPParams([np.zeros_like(w) for w in params.weights],
                     [np.zeros_like(b) for b in params.biases],
                     np.zeros_like(params.cond_table), params.activation)
    return EMAState(shadow=zero, decay=decay)


def ema_update(state, live):
    """shadow <- decay * shadow + (1 - decay) * live, applied in place."""
    d = state.decay
    for (_, s), (_, p) in zip(state.shadow.tensors(), live.tensors()):
        s *= d
        s += (1.0 - d) * p
    state.num_updates += 1


def ema_snapshot(state):
    """Debiased average: shadow / (1 - decay^k). Needs at least one update."""
    if state.num_updates == 0:
        raise ValueError("EMA snapshot requested before any update")
    corr = 1.0 - state.decay ** state.num_updates
    if corr <= 0.0:          # decay == 1 keeps the shadow at zero forever
        raise ValueError("EMA with decay 1.0 never accumulates; no snapshot")
    out = state.shadow.copy()
    for _, arr in out.tensors():
        arr /= corr
    return out


def lipschitz_bound(params):
    """Upper bound on the state-to-output Lipschitz constant.

    Product of spectral norms of the chain matrices restricted to the state
    columns for the first layer, times the activation slope bound (1 for
    tanh, ~1.1 for silu) per hidden layer.
    """
    slope = 1.0 if params.activation == "tanh" else 1.1
    bound = np.linalg.norm(params.weights[0][:params.dim, :], 2)
    for w in params.weights[1:]:
        bound *= np.linalg.norm(w, 2)
    return float(bound * slope ** (len(params.weights) - 1))


def _write_record(fh, matrix, bias):
    rows, cols = matrix.shape
    fh.write(struct.pack("<QQ", rows, cols))
    fh.write(np.ascontiguousarray(matrix, dtype="<f8").tobytes())
    fh.write(np.ascontiguousarray(bias, dtype="<f8").tobytes())


def save_weights(params, path):
    """Binary weight file: magic, record count, then (rows, cols, matrix,
    bias) per record, all little-endian; the label table is the final record
    with a zero bias."""
    with open(path, "wb") as fh:
        fh.write(WEIGHT_MAGIC)
        fh.write(struct.pack("<Q", len(params.weights) + 1))
        for w, b in zip(params.weights, params.biases):
            _write_record(fh, w, b)
        _write_record(fh, params.cond_table,
                      np.zeros(params.cond_table.shape[1]))


def _read_exact(fh, count, what):
    data = fh.read(count)
    if len(data) != count:
        raise ValueError(f"weight file truncated while reading {what}")
    return data


def load_weights(path, activation="tanh"):
    """Parse a weight file back into MLPParams.

    The file stores no activation tag; pass the right one (default tanh).
    Network dims are reconstructed from the matrix shapes: state dim is
    first-matrix rows minus the 16 time features, class count is table rows
    minus the null row.
    """
    with open(path, "rb") as fh:
        magic = fh.read(len(WEIGHT_MAGIC))
        if magic != WEIGHT_MAGIC:
            raise ValueError(f"not a weight file (bad magic {magic!r})")
        (n_records,) = struct.unpack("<Q", _read_exact(fh, 8, "record count"))
        if n_records < 3:
            raise ValueError("weight file must hold at least two chain "
                             "matrices plus the label table")
        records = []
        for r in range(n_records):
            rows, cols = struct.unpack(
                "<QQ", _read_exact(fh, 16, f"record {r} header"))
            if rows == 0 or cols == 0 or rows * cols > 1 << 32:
                raise ValueError(f"record {r} has implausible shape "
                                 f"({rows}, {cols})")
            mat = np.frombuffer(
                _read_exact(fh, 8 * rows * cols, f"record {r} matrix"),
                dtype="<f8").reshape(rows, cols).astype(np.float64)
            bias = np.frombuffer(
                _read_exact(fh, 8 * cols, f"record {r} bias"),
                dtype="<f8").astype(np.float64)
            records.append((mat, bias))
        if fh.read(1):
            raise ValueError("trailing bytes after the last record")

    *chain, (table, _) = records
    weights = [m for m, _ in chain]
    biases = [b for _, b in chain]
    for left, right in zip(weights[:-1], weights[1:]):
        if left.shape[1] != right.shape[0]:
            raise ValueError("matrix chain does not compose: "
                             f"{left.shape} then {right.shape}")
    if weights[0].shape[0] <= N_TIME_FEATURES:
        raise ValueError("first matrix too small to include time features")
    if table.shape[1] != weights[0].shape[1]:
        raise ValueError("label table width does not match the first "
                         "hidden width")
    params = MLPParams(weights, biases, table, activation)
    if params.out_dim != params.dim:
        raise ValueError(f"output dim {params.out_dim} != state dim "
                         f"{params.dim}")
    return params
