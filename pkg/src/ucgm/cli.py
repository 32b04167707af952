"""Command-line front end.

Subcommands: validate-transport, train, sample, oracle, eval, fit-schedule,
plot. Every run that produces files also writes a `run.meta` next to them: a
flat key=value echo of the fully resolved configuration (it parses back
through the same config reader), the effective seed, and the package version.

Exit codes: 0 success, 1 configuration or usage error, 2 runtime failure
(diverged training, non-finite numerics, integration blowup). Diagnostics go
to standard error as a single line.

Seeding: the `UCGM_SEED` environment variable, when set, overrides any seed
from flags or config files. CSV floats are written with repr, the shortest
decimal that round-trips in 64-bit.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from pathlib import Path

import numpy as np
from scipy.special import ndtri

from . import __version__
from . import estimator as est
from .config import check_keys, load_config, parse_config_text, parse_scalar
from .data_metrics import (DATASET_KINDS, energy_distance, make_dataset,
                           wasserstein1_1d)
from .oracle import (GaussianMixture, linear_schedule, ou_schedule,
                     quantile_transport, rk4_integrate, triangular_schedule,
                     velocity_drift)
from .sampler import SamplerConfig, plan_steps, sample
from .timedist import KumaParams, build_schedule, fit_kuma_to_target, \
    kumaraswamy, timeshift
from .trainer import default_trainer_config, train
from .transport import family_names, get_family, validate_family

__all__ = ["main"]


class _CliError(Exception):
    """Configuration/usage problem: maps to exit code 1."""


# ---------------------------------------------------------------- meta/CSV

def _fmt_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    s = str(v)
    if "#" in s or "\n" in s:
        raise _CliError(f"cannot store value {s!r} in run.meta")
    if isinstance(parse_scalar(s), str) and parse_scalar(s) == s and s:
        return s
    return f"'{s}'"


def format_meta(entries: dict) -> str:
    lines = [f"{k} = {_fmt_value(v)}" for k, v in sorted(entries.items())]
    return "\n".join(lines) + "\n"


def write_meta(directory: Path, command: str, seed, entries: dict) -> None:
    meta = {"command": command, "artifact_version": __version__,
            "seed": seed}
    meta.update(entries)
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "run.meta").write_text(format_meta(meta), encoding="utf-8")


def _cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def write_csv(path, header, rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])


def _point_rows(arr):
    for i, row in enumerate(np.atleast_2d(arr)):
        yield (i, *row)


def read_points_csv(path) -> np.ndarray:
    """Read a samples CSV back into an (n, d) array (dim_* columns)."""
    try:
        with open(path, "r", newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise _CliError(f"cannot read {path}: {exc}")
    if not rows:
        raise _CliError(f"{path}: empty file")
    header = rows[0]
    cols = [i for i, name in enumerate(header) if name.startswith("dim_")]
    if not cols:
        # oracle outputs: fall back to an x0 (endpoint) column
        cols = [i for i, name in enumerate(header) if name == "x0"]
    if not cols:
        raise _CliError(f"{path}: no dim_* (or x0) columns in header")
    try:
        data = [[float(r[i]) for i in cols] for r in rows[1:] if r]
    except (ValueError, IndexError) as exc:
        raise _CliError(f"{path}: malformed row: {exc}")
    return np.asarray(data, dtype=np.float64).reshape(-1, len(cols))


def read_history_csv(path) -> np.ndarray:
    """Read a per-step history CSV into (steps, n, d)."""
    try:
        with open(path, "r", newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise _CliError(f"cannot read {path}: {exc}")
    if not rows or rows[0][:2] != ["step", "sample_index"]:
        raise _CliError(f"{path}: expected step,sample_index,dim_* header")
    dim = len(rows[0]) - 2
    body = [r for r in rows[1:] if r]
    if not body:
        raise _CliError(f"{path}: no history rows")
    try:
        steps = max(int(r[0]) for r in body) + 1
        n = max(int(r[1]) for r in body) + 1
        out = np.full((steps, n, dim), np.nan)
        for r in body:
            out[int(r[0]), int(r[1])] = [float(v) for v in r[2:]]
    except (ValueError, IndexError) as exc:
        raise _CliError(f"{path}: malformed row: {exc}")
    if np.any(np.isnan(out)):
        raise _CliError(f"{path}: history grid has holes")
    return out


def _resolve_seed(explicit) -> int:
    env = os.environ.get("UCGM_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise _CliError(f"UCGM_SEED must be an integer, got {env!r}")
    return int(explicit)


# ------------------------------------------------------- validate-transport

def cmd_validate_transport(args) -> int:
    try:
        family = get_family(args.transport)
    except (KeyError, ValueError) as exc:
        raise _CliError(str(exc))
    report = validate_family(family, grid_points=args.grid)
    for line in report.lines():
        print(line)
    n_pass = sum(1 for c in report.checks if c.passed)
    print(f"{family.name}: {n_pass}/{len(report.checks)} checks passed")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.txt").write_text(
            "\n".join(report.lines()) + "\n", encoding="utf-8")
        write_meta(out, "validate-transport", 0,
                   {"transport": family.name, "grid": args.grid})
    return 0


# ----------------------------------------------------------------- train

_TRAIN_TRAINER_KEYS = {
    "trainer.lam": "lam", "trainer.zeta": "zeta",
    "trainer.s_threshold": "s_threshold", "trainer.epsilon": "epsilon",
    "trainer.theta1": "theta1", "trainer.theta2": "theta2",
    "trainer.lr": "lr", "trainer.adam_beta1": "adam_beta1",
    "trainer.adam_beta2": "adam_beta2", "trainer.adam_eps": "adam_eps",
    "trainer.weight_decay": "weight_decay",
    "trainer.warmup_steps": "warmup_steps",
    "trainer.batch_size": "batch_size", "trainer.steps": "steps",
    "trainer.ema_decay": "ema_decay", "trainer.clip_bound": "clip_bound",
    "trainer.null_cond_dropout": "null_cond_dropout",
    "trainer.time_floor_low": "time_floor_low",
    "trainer.time_floor_high": "time_floor_high",
}

_TRAIN_KEYS = set(_TRAIN_TRAINER_KEYS) | {
    "seed", "out", "transport",
    "dataset.kind", "dataset.n", "dataset.seed",
    "dataset.noise", "dataset.m", "dataset.sigma",
    "estimator.hidden", "estimator.activation",
}


def _parse_hidden(value):
    if isinstance(value, int):
        return (value,)
    try:
        return tuple(int(p) for p in str(value).split(","))
    except ValueError:
        raise _CliError(f"estimator.hidden must be ints, got {value!r}")


def cmd_train(args) -> int:
    path = Path(args.config)
    if not path.is_file():
        raise _CliError(f"config file not found: {path}")
    try:
        raw = load_config(path)
        check_keys(raw, _TRAIN_KEYS, source=str(path))
    except ValueError as exc:
        raise _CliError(str(exc))

    out_spec = args.out or raw.get("out")
    if not out_spec:
        raise _CliError("no output directory: set `out` or pass --out")
    out = Path(str(out_spec))
    seed = _resolve_seed(raw.get("seed", 0))
    transport = str(raw.get("transport", "linear"))
    try:
        family = get_family(transport)
    except (KeyError, ValueError) as exc:
        raise _CliError(str(exc))

    kind = raw.get("dataset.kind")
    if kind not in DATASET_KINDS or kind == "gmm":
        raise _CliError("dataset.kind must be one of "
                        + ", ".join(k for k in DATASET_KINDS if k != "gmm"))
    ds_n = int(raw.get("dataset.n", 20000))
    ds_seed = int(raw.get("dataset.seed", seed))
    ds_params = {}
    for key, name in (("dataset.noise", "noise"), ("dataset.m", "m"),
                      ("dataset.sigma", "sigma")):
        if key in raw:
            ds_params[name] = float(raw[key])

    lam = float(raw.get("trainer.lam", 0.0))
    overrides = {"seed": seed}
    for key, name in _TRAIN_TRAINER_KEYS.items():
        if key in raw and name != "lam":
            overrides[name] = raw[key]
    if "estimator.hidden" in raw:
        overrides["hidden"] = _parse_hidden(raw["estimator.hidden"])
    if "estimator.activation" in raw:
        overrides["activation"] = str(raw["estimator.activation"])
    try:
        config = default_trainer_config(lam, **overrides)
    except (TypeError, ValueError) as exc:
        raise _CliError(str(exc))

    # resolve phase done; anything from here on is a runtime failure
    try:
        dataset = make_dataset(kind, ds_n, seed=ds_seed, **ds_params)
    except ValueError as exc:
        raise _CliError(str(exc))
    result = train(config, family, dataset.samples)

    (out / "weights").mkdir(parents=True, exist_ok=True)
    (out / "logs").mkdir(parents=True, exist_ok=True)
    est.save_weights(result.live, out / "weights" / "live.ucgmw")
    est.save_weights(result.ema, out / "weights" / "ema.ucgmw")
    log = result.log
    write_csv(out / "logs" / "loss.csv", ["step", "loss", "grad_norm"],
              zip(log.step, log.loss, log.grad_norm))
    write_csv(out / "logs" / "clip_rate.csv", ["step", "clip_rate"],
              zip(log.step, log.clip_rate))

    meta = {"out": str(out), "transport": transport,
            "dataset.kind": kind, "dataset.n": ds_n, "dataset.seed": ds_seed}
    for name, value in ds_params.items():
        meta[f"dataset.{name}"] = value
    for key, name in _TRAIN_TRAINER_KEYS.items():
        meta[key] = getattr(config, name)
    meta["estimator.hidden"] = ",".join(str(h) for h in config.hidden)
    meta["estimator.activation"] = config.activation
    write_meta(out, "train", seed, meta)

    tail = float(np.mean(log.loss[-100:]))
    print(f"trained {config.steps} steps on {kind}; "
          f"mean loss over last 100 steps {tail:.6g}; outputs in {out}")
    return 0


# ---------------------------------------------------------------- sample

def _resolve_rho(spec: str, weights_path: Path):
    """Map --rho {lambda|sde|<float>} onto (mode, value)."""
    if spec == "sde":
        return "sde", 0.0
    if spec == "lambda":
        for meta_path in (weights_path.parent / "run.meta",
                          weights_path.parent.parent / "run.meta"):
            if meta_path.is_file():
                try:
                    meta = parse_config_text(
                        meta_path.read_text(encoding="utf-8"),
                        source=str(meta_path))
                except ValueError as exc:
                    raise _CliError(str(exc))
                if "trainer.lam" in meta:
                    return "equal_lambda", float(meta["trainer.lam"])
        raise _CliError("--rho lambda needs a run.meta with trainer.lam "
                        "next to the weights; pass a numeric rho instead")
    try:
        value = float(spec)
    except ValueError:
        raise _CliError(f"--rho must be 'lambda', 'sde', or a float, "
                        f"got {spec!r}")
    return "constant", value


def _resolve_time_grid(spec: str, plan: int):
    if spec == "uniform":
        return None
    if spec.startswith("kuma:"):
        parts = spec[len("kuma:"):].split(",")
        if len(parts) != 3:
            raise _CliError("--schedule kuma needs three values: kuma:a,b,c")
        try:
            params = KumaParams(*(float(p) for p in parts))
            return build_schedule(plan, warp=lambda u: kumaraswamy(u, params))
        except ValueError as exc:
            raise _CliError(str(exc))
    raise _CliError(f"--schedule must be 'uniform' or 'kuma:a,b,c', "
                    f"got {spec!r}")


def cmd_sample(args) -> int:
    weights_path = Path(args.weights)
    if not weights_path.is_file():
        raise _CliError(f"weights file not found: {weights_path}")
    try:
        params = est.load_weights(weights_path)
    except (ValueError, OSError) as exc:
        raise _CliError(f"cannot load weights: {exc}")
    dim = params.weights[0].shape[0] - est.N_TIME_FEATURES
    if dim < 1:
        raise _CliError("weight file implies a non-positive data dimension")
    try:
        family = get_family(args.transport)
    except (KeyError, ValueError) as exc:
        raise _CliError(str(exc))
    if args.n_samples < 1 or args.steps < 1:
        raise _CliError("--n-samples and --steps must be positive")
    rho_mode, rho_value = _resolve_rho(args.rho, weights_path)
    plan = plan_steps(args.steps, args.order)
    grid = _resolve_time_grid(args.schedule, plan)
    seed = _resolve_seed(args.seed)
    try:
        config = SamplerConfig(steps=args.steps, nu=args.order,
                               kappa=args.kappa, rho_mode=rho_mode,
                               rho_value=rho_value, schedule=grid,
                               seed=_spawn_seed(seed, 1))
    except ValueError as exc:
        raise _CliError(str(exc))

    init = np.random.default_rng(
        np.random.SeedSequence((seed, 0))).standard_normal(
            (args.n_samples, dim))
    trace = sample(params, config, family, init)

    out = Path(args.out)
    write_csv(out, ["sample_index"] + [f"dim_{k}" for k in range(dim)],
              _point_rows(trace.final))
    if args.history_out:
        rows = ((i, j, *trace.history[i, j])
                for i in range(trace.history.shape[0])
                for j in range(args.n_samples))
        write_csv(args.history_out,
                  ["step", "sample_index"] + [f"dim_{k}" for k in range(dim)],
                  rows)
    write_meta(out.parent, "sample", seed, {
        "weights": str(weights_path), "transport": family.name,
        "steps": args.steps, "order": args.order, "kappa": args.kappa,
        "rho": args.rho, "schedule": args.schedule,
        "n_samples": args.n_samples, "out": str(out),
    })
    print(f"wrote {args.n_samples} samples to {out} "
          f"({trace.n_evals} network evaluations)")
    return 0


def _spawn_seed(seed: int, stream: int) -> int:
    return int(np.random.SeedSequence((seed, stream)).generate_state(1)[0])


# ---------------------------------------------------------------- oracle

def _parse_mixture(spec: str, standardized: bool) -> GaussianMixture:
    if not spec.startswith("bimodal:"):
        raise _CliError("--mixture takes the form bimodal:m,sigma")
    parts = spec[len("bimodal:"):].split(",")
    if len(parts) != 2:
        raise _CliError("--mixture takes the form bimodal:m,sigma")
    try:
        m, sigma = float(parts[0]), float(parts[1])
        return GaussianMixture.bimodal(m, sigma, standardized=standardized)
    except ValueError as exc:
        raise _CliError(str(exc))


def _parse_schedule(spec: str):
    if spec.startswith("ou:"):
        try:
            return ou_schedule(float(spec[len("ou:"):]))
        except ValueError as exc:
            raise _CliError(str(exc))
    if spec == "triangular":
        return triangular_schedule()
    if spec == "linear":
        return linear_schedule()
    raise _CliError(f"--schedule must be ou:<s>, triangular, or linear, "
                    f"got {spec!r}")


def cmd_oracle(args) -> int:
    mixture = _parse_mixture(args.mixture, args.standardized)
    schedule = _parse_schedule(args.schedule)
    if args.n < 1:
        raise _CliError("--n must be positive")

    levels = (np.arange(args.n) + 0.5) / args.n
    x1 = ndtri(levels)
    if args.mode == "quantile":
        x0 = quantile_transport(x1, mixture)
        header, rows = ["x1", "x0"], zip(x1, x0)
    elif args.mode == "integrate":
        def drift(x, t):
            return velocity_drift(x, t, mixture, schedule)
        x0 = rk4_integrate(drift, x1, 1.0, 0.0, args.integration_steps)
        header, rows = ["x1", "x0"], zip(x1, x0)
    else:  # drift surface on a (t, x) grid
        xs = np.linspace(-4.0, 4.0, args.n)
        out_rows = []
        for t in np.round(np.linspace(0.1, 0.9, 9), 10):
            d = velocity_drift(xs, float(t), mixture, schedule)
            out_rows.extend((float(t), x, dv) for x, dv in zip(xs, d))
        header, rows = ["t", "x", "drift"], out_rows

    if args.out:
        out = Path(args.out)
        write_csv(out, header, rows)
        write_meta(out.parent, "oracle", 0, {
            "mixture": args.mixture, "standardized": args.standardized,
            "schedule": args.schedule, "mode": args.mode, "n": args.n,
            "integration_steps": args.integration_steps, "out": str(out),
        })
        print(f"wrote oracle {args.mode} table to {out}")
    else:
        writer = csv.writer(sys.stdout, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])
    return 0


# ------------------------------------------------------------------ eval

def _reference_points(spec: str, n: int, seed: int) -> np.ndarray:
    path = Path(spec)
    if spec.endswith(".csv"):
        if not path.is_file():
            raise _CliError(f"reference CSV not found: {path}")
        return read_points_csv(path)
    kind, _, rest = spec.partition(":")
    params = {}
    if kind in ("two_moons", "s_curve_2d", "swiss_roll_2d"):
        if rest:
            params["noise"] = _spec_float(rest, "noise")
    elif kind == "bimodal":
        parts = rest.split(",") if rest else []
        if len(parts) == 2:
            params["m"] = _spec_float(parts[0], "m")
            params["sigma"] = _spec_float(parts[1], "sigma")
        elif rest:
            raise _CliError("bimodal reference takes bimodal:m,sigma")
    else:
        raise _CliError(f"unknown reference {spec!r}: pass a samples CSV or "
                        "a dataset spec like two_moons:0.05 or bimodal:2,0.3")
    try:
        return make_dataset(kind, n, seed=seed, **params).samples
    except ValueError as exc:
        raise _CliError(str(exc))


def _spec_float(text: str, name: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise _CliError(f"bad {name} value {text!r}")


def cmd_eval(args) -> int:
    generated = read_points_csv(args.generated)
    if generated.shape[0] == 0:
        raise _CliError(f"{args.generated}: no sample rows")
    seed = _resolve_seed(args.seed)
    reference = _reference_points(args.reference, args.n, seed)
    if generated.shape[1] != reference.shape[1]:
        raise _CliError(
            f"dimension mismatch: generated d={generated.shape[1]}, "
            f"reference d={reference.shape[1]}")
    if args.metric == "w1":
        if generated.shape[1] != 1:
            raise _CliError("w1 applies to 1D data; use energy for 2D")
        value = wasserstein1_1d(generated, reference, seed=seed)
    else:
        value = energy_distance(generated, reference, seed=seed)
    lines = [["metric", "value", "n_generated", "n_reference"],
             [args.metric, value, generated.shape[0], reference.shape[0]]]
    print(",".join(_cell(v) for v in lines[0]))
    print(",".join(_cell(v) for v in lines[1]))
    if args.out:
        out = Path(args.out)
        write_csv(out, lines[0], [lines[1]])
        write_meta(out.parent, "eval", seed, {
            "generated": str(args.generated), "reference": args.reference,
            "metric": args.metric, "n": args.n, "out": str(out),
        })
    return 0


# ---------------------------------------------------------- fit-schedule

def cmd_fit_schedule(args) -> int:
    kind, _, rest = args.target.partition(":")
    if kind != "shift" or not rest:
        raise _CliError("--target takes the form shift:<s>")
    s = _spec_float(rest, "shift")
    if s <= 0.0:
        raise _CliError("shift s must be positive")
    if args.grid < 8:
        raise _CliError("--grid must be at least 8")
    fit = fit_kuma_to_target(lambda u: timeshift(u, s), grid_points=args.grid)
    header = ["a", "b", "c", "fit_error", "identity_error"]
    row = [fit.params.a, fit.params.b, fit.params.c, fit.error,
           fit.identity_error]
    print(",".join(header))
    print(",".join(_cell(v) for v in row))
    if args.out:
        out = Path(args.out)
        write_csv(out, header, [row])
        write_meta(out.parent, "fit-schedule", 0, {
            "target": args.target, "grid": args.grid, "out": str(out),
        })
    return 0


# ------------------------------------------------------------------ plot

def cmd_plot(args) -> int:
    from .plotting import plot_samples, plot_trajectories
    out = Path(args.out)
    if args.mode == "scatter":
        points = read_points_csv(args.input)
        reference = read_points_csv(args.reference) if args.reference else None
        out.parent.mkdir(parents=True, exist_ok=True)
        try:
            plot_samples(points, out, title=args.title, reference=reference)
        except ValueError as exc:
            raise _CliError(str(exc))
    else:
        history = read_history_csv(args.input)
        out.parent.mkdir(parents=True, exist_ok=True)
        try:
            plot_trajectories(history, out, title=args.title)
        except ValueError as exc:
            raise _CliError(str(exc))
    write_meta(out.parent, "plot", 0, {
        "input": str(args.input), "mode": args.mode, "out": str(out),
    })
    print(f"wrote {out}")
    return 0


# ------------------------------------------------------------------ main

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ucgm",
        description="Unified continuous generative modeling toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate-transport",
                       help="check coefficient constraints for a family")
    p.add_argument("--transport", required=True,
                   help="one of: " + ", ".join(family_names()))
    p.add_argument("--grid", type=int, default=1024)
    p.add_argument("--out", default=None,
                   help="optional directory for report.txt + run.meta")
    p.set_defaults(func=cmd_validate_transport)

    p = sub.add_parser("train", help="train an estimator from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None,
                   help="output directory (overrides the config's `out`)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sample", help="draw samples from trained weights")
    p.add_argument("--weights", required=True)
    p.add_argument("--transport", required=True)
    p.add_argument("--steps", type=int, default=64,
                   help="evaluation budget N")
    p.add_argument("--order", type=int, choices=(1, 2), default=1)
    p.add_argument("--kappa", type=float, default=0.4)
    p.add_argument("--rho", default="0.0",
                   help="'lambda', 'sde', or a constant in [0,1]")
    p.add_argument("--schedule", default="uniform",
                   help="'uniform' or 'kuma:a,b,c'")
    p.add_argument("--n-samples", type=int, default=4096)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="samples CSV path")
    p.add_argument("--history-out", default=None,
                   help="optional per-step history CSV")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("oracle", help="closed-form endpoint/drift tables")
    p.add_argument("--mixture", required=True, help="bimodal:m,sigma")
    p.add_argument("--standardized", action="store_true",
                   help="rescale the mixture to unit variance")
    p.add_argument("--schedule", default="ou:1.0",
                   help="ou:<s>, triangular, or linear")
    p.add_argument("--mode", choices=("integrate", "quantile", "drift"),
                   required=True)
    p.add_argument("--n", type=int, default=10000)
    p.add_argument("--integration-steps", type=int, default=2000)
    p.add_argument("--out", default=None, help="CSV path (default stdout)")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("eval", help="distance between samples and reference")
    p.add_argument("--generated", required=True, help="samples CSV")
    p.add_argument("--reference", required=True,
                   help="dataset spec (e.g. bimodal:2,0.3) or a CSV path")
    p.add_argument("--metric", choices=("w1", "energy"), required=True)
    p.add_argument("--n", type=int, default=100000,
                   help="reference sample count for dataset specs")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="optional CSV output")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("fit-schedule",
                       help="fit the bounded warp to a shift target")
    p.add_argument("--target", required=True, help="shift:<s>")
    p.add_argument("--grid", type=int, default=512)
    p.add_argument("--out", default=None, help="optional CSV output")
    p.set_defaults(func=cmd_fit_schedule)

    p = sub.add_parser("plot", help="render samples or trajectories to SVG")
    p.add_argument("--input", required=True, help="samples or history CSV")
    p.add_argument("--mode", choices=("scatter", "trajectory"),
                   default="scatter")
    p.add_argument("--reference", default=None,
                   help="optional reference CSV (scatter mode)")
    p.add_argument("--title", default="")
    p.add_argument("--out", required=True, help="SVG path")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        code = exc.code if isinstance(exc.code, int) else 1
        return 0 if code == 0 else 1
    try:
        return args.func(args)
    except _CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001  (runtime failures -> exit 2)
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
