"""Command-line harness: simulation studies, estimation, likelihood profiles,
and bridge diagnostics, all seeded explicitly and emitting CSV reports with
figures rendered alongside.

Subcommands: simulate, estimate, benchmark, profile, diagnose.  Options can
come from a flat key=value config file (``--config``); flags win over the
file, unset options fall back to documented defaults.  Every output CSV
starts with '#'-prefixed metadata echoing the effective configuration, and
every subcommand writes byte-identical output for a fixed (config, seed),
whatever the thread count.
"""

import argparse
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from . import rng as _rng
from .bridge import BridgeConfig
from .diagnostics import (
    check_expectation_bound,
    drift_envelope,
    envelope_bound,
    rn_histogram,
    rn_samples,
    standard_functionals,
)
from .estimator import eml_estimate, regression_estimate
from .likelihood import ou_exact_loglik, ou_ml_fit, profile_likelihood
from .models import (
    DomainExitError,
    ObservationSeries,
    ait_sahalia_volatility,
    cir_volatility,
    euler_simulate,
    lamperti_transform,
    ou_exact_sample,
    ou_model,
    quadratic_model,
)

MODEL_NAMES = ("ou", "quadratic", "cir", "ait-sahalia")

DEFAULT_PARAMS = {
    "ou": {"a0": 10.0, "a1": 2.5},
    "quadratic": {"a0": 1.0, "a1": -1.0, "a2": -0.5},
    "cir": {"kappa": 2.0, "gamma": 1.0, "sigma": 0.5},
    "ait-sahalia": {"a0": 0.1, "a1": -1.0, "a2": -10.0, "sigma1": 0.001, "sigma2": 3.0},
}

# two weeks and one month, in years
_DIAG_DELTAS = (14.0 / 365.0, 1.0 / 12.0)


def derive_seed(seed: int, *key: int) -> int:
    """64-bit child seed, a pure function of (seed, key)."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


# ---------------------------------------------------------------------------
# option plumbing


def _parse_params(text: str) -> dict:
    out = {}
    if not text:
        return out
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        if "=" not in item:
            raise argparse.ArgumentTypeError(f"parameter {item!r} is not key=value")
        key, val = item.split("=", 1)
        out[key.strip()] = float(val)
    return out


def _parse_int_list(text: str) -> tuple:
    return tuple(int(v) for v in str(text).split(",") if v != "")


def _parse_float_list(text: str) -> tuple:
    return tuple(float(v) for v in str(text).split(",") if v != "")


def _parse_grid(text: str) -> tuple:
    """lo:hi:n inclusive grid."""
    parts = str(text).split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"grid {text!r} is not lo:hi:n")
    lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    if n < 1 or hi < lo:
        raise argparse.ArgumentTypeError(f"bad grid spec {text!r}")
    return tuple(np.linspace(lo, hi, n).tolist())


def _parse_bool(text) -> bool:
    if isinstance(text, bool):
        return text
    return str(text).strip().lower() in ("1", "true", "yes", "on")


# (coercer, default) per option, per subcommand; config-file keys use the same names
_COMMON_SCHEMA = {
    "seed": (int, None),
    "threads": (int, 1),
    "out_dir": (str, "."),
    "no_plots": (_parse_bool, False),
}

_SCHEMAS = {
    "simulate": {
        **_COMMON_SCHEMA,
        "model": (str, "ou"),
        "params": (_parse_params, {}),
        "K": (int, 500),
        "delta": (float, 1.0 / 12.0),
        "R": (int, 1),
        "substeps": (int, 100),
        "x0": (float, None),
    },
    "estimate": {
        **_COMMON_SCHEMA,
        "model": (str, "ou"),
        "params": (_parse_params, {}),
        "method": (str, "eml"),
        "M": (int, 31),
        "S": (int, 200),
        "clamp_eps": (float, None),
    },
    "benchmark": {
        **_COMMON_SCHEMA,
        "model": (str, "ou"),
        "params": (_parse_params, {}),
        "R": (int, 200),
        "K": (int, 500),
        "delta": (float, 1.0 / 12.0),
        "M": (int, 31),
        "S_list": (_parse_int_list, (200,)),
        "substeps": (int, 100),
        "x0": (float, None),
    },
    "profile": {
        **_COMMON_SCHEMA,
        "model": (str, "cir"),
        "params": (_parse_params, {}),
        "data": (str, None),
        "grid": (_parse_grid, None),
        "grid2": (_parse_grid, None),
        "M": (int, 10),
        "S": (int, 100),
        "sml_M": (int, 10),
        "sml_S": (int, 200),
    },
    "diagnose": {
        **_COMMON_SCHEMA,
        "model": (str, "ait-sahalia"),
        "params": (_parse_params, {}),
        "x": (float, 0.04),
        "ys": (_parse_float_list, (0.03, 0.04, 0.05)),
        "deltas": (_parse_float_list, _DIAG_DELTAS),
        "M": (int, 30),
        "S": (int, 20000),
        "suite_S": (int, 4000),
    },
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="emldiff", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"emldiff {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text, positional_files=False):
        p = sub.add_parser(name, help=help_text, argument_default=argparse.SUPPRESS)
        p.add_argument("--seed", type=int, help="master seed (required; no silent time seeding)")
        p.add_argument("--threads", type=int, help="worker threads (default 1; results identical)")
        p.add_argument("--out-dir", dest="out_dir", help="output directory (default .)")
        p.add_argument("--config", help="flat key=value config file; flags override")
        p.add_argument("--no-plots", dest="no_plots", action="store_true", help="skip PNG rendering")
        if positional_files:
            p.add_argument("files", nargs="+", help="input series CSV files")
        return p

    p = add("simulate", "write R synthetic series as CSV files")
    p.add_argument("--model", choices=MODEL_NAMES)
    p.add_argument("--params", type=_parse_params, help="model parameters, e.g. kappa=2,gamma=1,sigma=0.5")
    p.add_argument("--K", type=int, help="observed intervals per series")
    p.add_argument("--delta", type=float, help="observation spacing (years)")
    p.add_argument("--R", type=int, help="number of series")
    p.add_argument("--substeps", type=int, help="fine Euler substeps per observation gap")
    p.add_argument("--x0", type=float, help="starting level (default: model-specific)")

    p = add("estimate", "estimate drift coefficients for each input series", positional_files=True)
    p.add_argument("--model", choices=MODEL_NAMES)
    p.add_argument("--params", type=_parse_params)
    p.add_argument("--method", choices=("eml", "regression", "ou-ml"))
    p.add_argument("--M", type=int, help="bridge subintervals per gap")
    p.add_argument("--S", type=int, help="bridge paths per gap")
    p.add_argument("--clamp-eps", dest="clamp_eps", type=float, help="clamp states to domain+eps before basis eval")

    p = add("benchmark", "simulate R datasets and aggregate estimator bias/std")
    p.add_argument("--model", choices=("ou", "quadratic"))
    p.add_argument("--params", type=_parse_params, help="true drift coefficients a0=..,a1=..[,a2=..]")
    p.add_argument("--R", type=int)
    p.add_argument("--K", type=int)
    p.add_argument("--delta", type=float)
    p.add_argument("--M", type=int)
    p.add_argument("--S-list", dest="S_list", type=_parse_int_list, help="comma list of bridge path counts")
    p.add_argument("--substeps", type=int)
    p.add_argument("--x0", type=float)

    p = add("profile", "profile the likelihood over volatility parameters")
    p.add_argument("--model", choices=("cir", "ait-sahalia"))
    p.add_argument("--params", type=_parse_params)
    p.add_argument("--data", help="input series CSV (original scale)")
    p.add_argument("--grid", type=_parse_grid, help="lo:hi:n grid for sigma (cir) or sigma1")
    p.add_argument("--grid2", type=_parse_grid, help="lo:hi:n grid for sigma2 (2-D scan)")
    p.add_argument("--M", type=int, help="bridge subintervals for estimation")
    p.add_argument("--S", type=int, help="bridge paths for estimation")
    p.add_argument("--sml-M", dest="sml_M", type=int, help="subintervals for the density estimator")
    p.add_argument("--sml-S", dest="sml_S", type=int, help="paths for the density estimator")

    p = add("diagnose", "bridge-density histograms and approximation-bound report")
    p.add_argument("--model", choices=MODEL_NAMES)
    p.add_argument("--params", type=_parse_params)
    p.add_argument("--x", type=float, help="bridge start (original scale)")
    p.add_argument("--ys", type=_parse_float_list, help="comma list of bridge endpoints")
    p.add_argument("--deltas", type=_parse_float_list, help="comma list of horizons (years)")
    p.add_argument("--M", type=int)
    p.add_argument("--S", type=int)
    p.add_argument("--suite-S", dest="suite_S", type=int, help="paths per functional-suite case")

    return parser


def _load_config_file(path: str) -> dict:
    out = {}
    with open(path) as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}: malformed config line {line!r}")
            key, val = line.split("=", 1)
            out[key.strip().replace("-", "_")] = val.strip()
    return out


def resolve_config(ns: argparse.Namespace) -> dict:
    """Merge defaults, config file, and explicit flags (flags win)."""
    schema = _SCHEMAS[ns.command]
    cfg = {key: default for key, (_, default) in schema.items()}
    file_path = getattr(ns, "config", None)
    if file_path:
        raw = _load_config_file(file_path)
        for key, val in raw.items():
            if key not in schema:
                raise ValueError(f"unknown config key {key!r} for command {ns.command!r}")
            coerce, _ = schema[key]
            cfg[key] = coerce(val)
    for key, val in vars(ns).items():
        if key in ("command", "config", "files"):
            continue
        cfg[key] = val
    if "files" in vars(ns):
        cfg["files"] = list(ns.files)
    if cfg.get("seed") is None:
        raise SystemExit("error: --seed is required (seeding is always explicit)")
    cfg["command"] = ns.command
    return cfg


# ---------------------------------------------------------------------------
# shared output helpers


_EXECUTION_KEYS = ("files", "no_plots", "threads", "out_dir")


def _meta_lines(cfg: dict, extra: dict | None = None) -> list:
    """Config echo for CSV headers; execution details (threads, paths) are
    excluded so byte-identical reruns stay byte-identical."""
    meta = {"emldiff_version": __version__}
    for key in sorted(cfg):
        if key in _EXECUTION_KEYS:
            continue
        val = cfg[key]
        if isinstance(val, dict):
            val = ",".join(f"{k}={v!r}" for k, v in sorted(val.items()))
        elif isinstance(val, float):
            val = repr(val)
        elif isinstance(val, (tuple, list)):
            val = ",".join(repr(v) if isinstance(v, float) else str(v) for v in val)
        meta[key] = val
    if extra:
        meta.update(extra)
    return [f"# {k}={v}" for k, v in meta.items()]


def _write_csv(path, meta_lines: list, header: str, rows: list) -> None:
    tmp = str(path) + ".tmp"
    with open(tmp, "w") as fh:
        fh.write("\n".join(meta_lines + [header] + rows) + "\n")
    os.replace(tmp, path)


def _fmt(v) -> str:
    return repr(float(v))


def _default_x0(model_name: str, params: dict) -> float:
    if model_name == "ou":
        a0, a1 = params["a0"], params["a1"]
        return a0 / a1 if a1 != 0.0 else 0.0
    if model_name == "quadratic":
        a0, a1, a2 = params["a0"], params["a1"], params["a2"]
        disc = a1 * a1 - 4.0 * a0 * a2
        if a2 != 0.0 and disc >= 0.0:
            roots = [(-a1 + s * np.sqrt(disc)) / (2.0 * a2) for s in (1.0, -1.0)]
            stable = [r for r in roots if a1 + 2.0 * a2 * r < 0.0]
            if stable:
                return float(stable[0])
        return 0.0
    if model_name == "cir":
        return params["gamma"]
    return 0.04  # ait-sahalia: a typical variance level


def _simulation_spec(model_name: str, params: dict):
    """Returns (theta, unit_model, transform) for data generation; transform
    is None when the model is already unit volatility."""
    if model_name == "ou":
        return np.array([params["a0"], params["a1"]]), ou_model(), None
    if model_name == "quadratic":
        return np.array([params["a0"], params["a1"], params["a2"]]), quadratic_model(), None
    if model_name == "cir":
        from .models import cir_unit_params

        vm = cir_volatility(sigma=params["sigma"], kappa=params["kappa"], gamma_mean=params["gamma"])
        b0, b1 = cir_unit_params(params["kappa"], params["gamma"], params["sigma"])
        return np.array([b0, b1]), lamperti_transform(vm), "unit-euler"
    if model_name == "ait-sahalia":
        vm = ait_sahalia_volatility(params["sigma1"], params["sigma2"])
        return np.array([params["a0"], params["a1"], params["a2"]]), lamperti_transform(vm), "unit-euler"
    raise ValueError(f"unknown model {model_name!r}")


def _estimation_model(model_name: str, params: dict):
    """Returns (unit_model, transform) for estimation on unit scale."""
    if model_name == "ou":
        return ou_model(), None
    if model_name == "quadratic":
        return quadratic_model(), None
    if model_name == "cir":
        return (tf := lamperti_transform(cir_volatility(sigma=params["sigma"]))).model, tf
    if model_name == "ait-sahalia":
        tf = lamperti_transform(ait_sahalia_volatility(params["sigma1"], params["sigma2"]))
        return tf.model, tf
    raise ValueError(f"unknown model {model_name!r}")


_MAX_DATASET_ATTEMPTS = 50


def _simulate_one(model_name: str, params: dict, x0: float, delta: float, K: int,
                  substeps: int, seed: int, rep: int) -> ObservationSeries:
    """One synthetic dataset for replication `rep`.

    Linear models sample the exact transition law; everything else runs fine
    Euler on the unit-volatility scale (mapped back through the inverse
    volatility rescaling when the model has one).  Drifts with unstable roots
    (the quadratic family) explode with small positive probability; exploded
    datasets are discarded and redrawn from the next attempt-indexed
    substream, keeping the output a pure function of (seed, rep).
    """
    if model_name == "ou":
        return ou_exact_sample(params["a0"], params["a1"], x0, delta, K,
                               _rng.substream(seed, _rng.DATA, rep, 0))
    theta, spec, mode = _simulation_spec(model_name, params)
    last_exc = None
    for attempt in range(_MAX_DATASET_ATTEMPTS):
        rng = _rng.substream(seed, _rng.DATA, rep, attempt)
        try:
            if mode is None:
                return euler_simulate(spec, theta, x0, delta, K, substeps, rng)
            tf = spec
            y0 = float(tf.forward(x0))
            yser = euler_simulate(tf.model, theta, y0, delta, K, substeps, rng)
            return ObservationSeries(x=np.asarray(tf.inverse(yser.x), dtype=float), delta_obs=delta)
        except DomainExitError as exc:
            last_exc = exc
    raise RuntimeError(
        f"dataset generation failed {_MAX_DATASET_ATTEMPTS} times for model "
        f"{model_name!r} (rep={rep}): {last_exc}"
    )


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate(cfg: dict) -> int:
    model_name = cfg["model"]
    params = {**DEFAULT_PARAMS[model_name], **cfg["params"]}
    x0 = cfg["x0"] if cfg["x0"] is not None else _default_x0(model_name, params)
    out_dir = Path(cfg["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    R, K = cfg["R"], cfg["K"]

    def one(rep: int):
        series = _simulate_one(model_name, params, x0, cfg["delta"], K, cfg["substeps"], cfg["seed"], rep)
        path = out_dir / f"series_{rep:04d}.csv"
        meta = dict(line[2:].split("=", 1) for line in _meta_lines(cfg, {"rep": rep, "x0": _fmt(x0)}))
        tmp = str(path) + ".tmp"
        series.to_csv(tmp, metadata=meta)
        os.replace(tmp, path)
        return series

    with ThreadPoolExecutor(max_workers=cfg["threads"]) as pool:
        series_list = list(pool.map(one, range(R)))
    if not cfg["no_plots"]:
        from . import plots

        shown = series_list[: min(R, 5)]
        plots.plot_series(shown, [f"series {i}" for i in range(len(shown))], out_dir / "series.png",
                          f"{model_name}: {len(shown)} of {R} simulated series")
    print(f"simulate: wrote {R} series to {out_dir}")
    return 0


def _estimate_file(path: str, cfg: dict, model, transform, out_dir: Path):
    series = ObservationSeries.from_csv(path)
    if transform is not None:
        y = np.asarray(transform.forward(series.x), dtype=float)
        if not np.all(np.isfinite(y)) or not np.all(model.in_domain(y)):
            raise ValueError(f"{path}: transformed observations leave the model domain")
        series = ObservationSeries(x=y, delta_obs=series.delta_obs, t0=series.t0)
    method = cfg["method"]
    stem = Path(path).stem
    out_path = out_dir / f"{stem}_estimate_{method}.csv"
    meta = _meta_lines(cfg, {"input": Path(path).name})
    if method == "eml":
        bc = BridgeConfig(M=cfg["M"], S=cfg["S"], seed=derive_seed(cfg["seed"], _rng.CLI, 0), clamp_eps=cfg["clamp_eps"])
        res = eml_estimate(series, model, bc)
        rows = [f"theta_{i},{_fmt(v)}" for i, v in enumerate(res.theta_star)]
        rows.append(f"condition_estimate,{_fmt(res.condition_estimate)}")
        _write_csv(out_path, meta, "quantity,value", rows)
        return out_path, res.theta_star
    if method == "regression":
        theta = regression_estimate(series, model)
        rows = [f"theta_{i},{_fmt(v)}" for i, v in enumerate(theta)]
        _write_csv(out_path, meta, "quantity,value", rows)
        return out_path, theta
    if method == "ou-ml":
        if model.label != "ou":
            raise ValueError("method ou-ml requires --model ou")
        a0, a1 = ou_ml_fit(series)
        rows = [f"theta_0,{_fmt(a0)}", f"theta_1,{_fmt(a1)}"]
        rows.append(f"loglik,{_fmt(ou_exact_loglik(series, a0, a1))}")
        _write_csv(out_path, meta, "quantity,value", rows)
        return out_path, np.array([a0, a1])
    raise ValueError(f"unknown method {method!r}")


def cmd_estimate(cfg: dict) -> int:
    model_name = cfg["model"]
    params = {**DEFAULT_PARAMS[model_name], **cfg["params"]}
    model, transform = _estimation_model(model_name, params)
    out_dir = Path(cfg["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    failures = []

    def one(path: str):
        try:
            out_path, theta = _estimate_file(path, cfg, model, transform, out_dir)
            return path, out_path, theta, None
        except Exception as exc:  # isolate per-file failures; run continues
            return path, None, None, exc

    with ThreadPoolExecutor(max_workers=cfg["threads"]) as pool:
        results = list(pool.map(one, cfg["files"]))
    for path, out_path, theta, exc in results:
        if exc is not None:
            failures.append(path)
            print(f"estimate: FAILED {path}: {exc}", file=sys.stderr)
        else:
            print(f"estimate: {path} -> {out_path} theta*={np.round(theta, 6).tolist()}")
    if failures:
        print(f"estimate: {len(failures)}/{len(results)} file(s) failed", file=sys.stderr)
        return 1
    return 0


def cmd_benchmark(cfg: dict) -> int:
    model_name = cfg["model"]
    params = {**DEFAULT_PARAMS[model_name], **cfg["params"]}
    model = ou_model() if model_name == "ou" else quadratic_model()
    theta_true = np.array([params[f"a{i}"] for i in range(model.n_coef)])
    x0 = cfg["x0"] if cfg["x0"] is not None else _default_x0(model_name, params)
    out_dir = Path(cfg["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    R, K = cfg["R"], cfg["K"]
    t_start = time.perf_counter()

    def one(rep: int):
        series = _simulate_one(model_name, params, x0, cfg["delta"], K, cfg["substeps"], cfg["seed"], rep)
        est = {}
        for S in cfg["S_list"]:
            bc = BridgeConfig(M=cfg["M"], S=S, seed=derive_seed(cfg["seed"], _rng.CLI, rep))
            est[("eml", S)] = eml_estimate(series, model, bc).theta_star
        est[("regression", "")] = regression_estimate(series, model)
        if model_name == "ou":
            est[("ou-ml", "")] = np.array(ou_ml_fit(series))
        return est

    with ThreadPoolExecutor(max_workers=cfg["threads"]) as pool:
        per_rep = list(pool.map(one, range(R)))

    rows, plot_rows = [], []
    for key in per_rep[0]:
        estimator, S = key
        thetas = np.stack([r[key] for r in per_rep])
        bias = thetas - theta_true
        for i in range(model.n_coef):
            bias_mean = float(np.mean(bias[:, i]))
            std = float(np.std(thetas[:, i], ddof=1))
            rows.append(f"{estimator},{S},a{i},{_fmt(theta_true[i])},{_fmt(bias_mean)},{_fmt(std)}")
            plot_rows.append({"estimator": estimator, "S": S, "param": f"a{i}", "bias_mean": bias_mean, "std_dev": std})
    wall = time.perf_counter() - t_start
    out_path = out_dir / f"benchmark_{model_name}.csv"
    _write_csv(out_path, _meta_lines(cfg, {"x0": _fmt(x0)}),
               "estimator,S,param,theta_true,bias_mean,std_dev", rows)
    if not cfg["no_plots"]:
        from . import plots

        plots.plot_benchmark(plot_rows, out_dir / f"benchmark_{model_name}.png",
                             f"{model_name}: bias over {R} replications (K={K})")
    print(f"benchmark: wrote {out_path} ({wall:.1f}s, R={R})")
    return 0


def cmd_profile(cfg: dict) -> int:
    model_name = cfg["model"]
    if cfg["data"] is None:
        raise SystemExit("error: profile requires --data FILE")
    params = {**DEFAULT_PARAMS[model_name], **cfg["params"]}
    series = ObservationSeries.from_csv(cfg["data"])
    if model_name == "cir":
        family = cir_volatility(sigma=params["sigma"])
        grid1 = cfg["grid"] if cfg["grid"] is not None else _parse_grid("0.1:1.2:12")
        vt_grid = [(g,) for g in grid1]
    else:
        family = ait_sahalia_volatility(params["sigma1"], params["sigma2"])
        grid1 = cfg["grid"] if cfg["grid"] is not None else _parse_grid("0.0005:0.002:4")
        grid2 = cfg["grid2"] if cfg["grid2"] is not None else _parse_grid("1.0:5.0:5")
        vt_grid = [(g1, g2) for g2 in grid2 for g1 in grid1]
    out_dir = Path(cfg["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    bc = BridgeConfig(M=cfg["M"], S=cfg["S"], seed=derive_seed(cfg["seed"], _rng.CLI, 1))
    sc = BridgeConfig(M=cfg["sml_M"], S=cfg["sml_S"], seed=derive_seed(cfg["seed"], _rng.CLI, 2))
    t_start = time.perf_counter()
    prof = profile_likelihood(series, family, vt_grid, bc, sc)
    wall = time.perf_counter() - t_start
    out_path = out_dir / "profile.csv"
    tmp = str(out_path) + ".tmp"
    prof.to_csv(tmp, metadata={"data": Path(cfg["data"]).name,
                               "command": "profile", "emldiff_version": __version__})
    os.replace(tmp, out_path)
    if not cfg["no_plots"]:
        from . import plots

        plots.plot_profile(prof, out_dir / "profile.png", f"{model_name}: likelihood profile")
    n_invalid = int(np.sum(~prof.valid))
    best = tuple(round(float(v), 10) for v in prof.grid[prof.argmax])
    print(f"profile: wrote {out_path} ({wall:.1f}s); argmax at {best}, {n_invalid} invalid point(s)")
    return 0


def _suite_cases():
    """The fixed 3-model case list for the bound report."""
    tf = lamperti_transform(ait_sahalia_volatility(0.001, 3.0))
    return (
        ("ou", ou_model(), (10.0, 2.5), 4.0, 4.0),
        ("quadratic", quadratic_model(), (1.0, -1.0, -0.5), 1.0, 1.2),
        ("ait-sahalia-unit", tf.model, (0.1, -1.0, -10.0), float(tf.forward(0.04)), float(tf.forward(0.05))),
    )


def cmd_diagnose(cfg: dict) -> int:
    model_name = cfg["model"]
    params = {**DEFAULT_PARAMS[model_name], **cfg["params"]}
    out_dir = Path(cfg["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    if model_name in ("cir", "ait-sahalia"):
        model, tf = _estimation_model(model_name, params)
        to_unit = lambda v: float(tf.forward(v))
        if model_name == "cir":
            from .models import cir_unit_params

            theta = np.array(cir_unit_params(params["kappa"], params["gamma"], params["sigma"]))
        else:
            theta = np.array([params["a0"], params["a1"], params["a2"]])
    else:
        model, _ = _estimation_model(model_name, params)
        theta = np.array([params[f"a{i}"] for i in range(model.n_coef)])
        to_unit = float

    # density histograms per (horizon, endpoint)
    hist_entries = []
    summary = {}
    failures = 0
    for di, dlt in enumerate(cfg["deltas"]):
        for yi, y in enumerate(cfg["ys"]):
            try:
                sample = rn_samples(model, theta, to_unit(cfg["x"]), to_unit(y), dlt,
                                    M=cfg["M"], S=cfg["S"],
                                    rng=_rng.substream(cfg["seed"], _rng.RN, di, yi))
            except (ValueError, FloatingPointError) as exc:
                failures += 1
                print(f"diagnose: FAILED histogram delta={dlt:g} y={y:g}: {exc}", file=sys.stderr)
                continue
            edges, counts = rn_histogram(sample)
            rows = [f"{float(edges[i])!r},{float(edges[i + 1])!r},{int(counts[i])}" for i in range(len(counts))]
            path = out_dir / f"rn_hist_delta{di}_y{yi}.csv"
            _write_csv(path, _meta_lines(cfg, {"delta_years": _fmt(dlt), "y": _fmt(y)}),
                       "bin_left,bin_right,count", rows)
            hist_entries.append((dlt, y, sample))
            key = f"delta{di}_y{yi}"
            summary[f"{key}_mean_normalized"] = _fmt(np.mean(sample.normalized))
            summary[f"{key}_std_normalized"] = _fmt(np.std(sample.normalized, ddof=1))
            summary[f"{key}_mass_within_0.5_1.5"] = _fmt(np.mean((sample.normalized > 0.5) & (sample.normalized < 1.5)))

    # bound report over the fixed functional suite
    rows = []
    all_hold = True
    for case_label, case_model, case_theta, cx, cy in _suite_cases():
        for fi, functional in enumerate(standard_functionals()):
            rep = check_expectation_bound(case_model, case_theta, cx, cy, 1.0 / 12.0, functional,
                                          M=cfg["M"], S=cfg["suite_S"],
                                          seed=derive_seed(cfg["seed"], _rng.RN, 99, fi))
            all_hold &= rep.holds
            rows.append(f"{case_label}:{rep.functional},{_fmt(rep.lhs)},{_fmt(rep.lhs_se)},"
                        f"{_fmt(rep.rhs)},{'holds' if rep.holds else 'VIOLATED'}")
    _write_csv(out_dir / "bound_report.csv", _meta_lines(cfg),
               "functional_id,lhs,lhs_se,rhs,verdict", rows)
    summary["bound_suite_all_hold"] = str(all_hold).lower()

    # closed-form envelope bound on a declared interval around the bridge
    span = sorted([to_unit(cfg["x"])] + [to_unit(v) for v in cfg["ys"]])
    pad = 4.0 * np.sqrt(max(cfg["deltas"]))
    env = drift_envelope(model, theta, (span[0] - pad, span[-1] + pad))
    summary["envelope_sup"] = _fmt(env.sup_val)
    summary["envelope_inf"] = _fmt(env.inf_val)
    summary["envelope_may_be_unbounded"] = str(env.may_be_unbounded).lower()
    summary["envelope_bound_gnorm1"] = _fmt(envelope_bound(env, max(cfg["deltas"]), 1.0))

    with open(out_dir / "diagnose_summary.txt", "w") as fh:
        for key in summary:
            fh.write(f"{key}={summary[key]}\n")
    if not cfg["no_plots"] and hist_entries:
        from . import plots

        plots.plot_rn_histograms(hist_entries, out_dir / "rn_histograms.png",
                                 f"{model_name}: bridge density concentration")
    print(f"diagnose: wrote {len(hist_entries)} histogram file(s), bound report "
          f"({'all hold' if all_hold else 'VIOLATIONS'}) to {out_dir}")
    return 0 if (all_hold and failures == 0) else 1


_DISPATCH = {
    "simulate": cmd_simulate,
    "estimate": cmd_estimate,
    "benchmark": cmd_benchmark,
    "profile": cmd_profile,
    "diagnose": cmd_diagnose,
}


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    cfg = resolve_config(ns)
    return _DISPATCH[cfg["command"]](cfg)


if __name__ == "__main__":
    sys.exit(main())
