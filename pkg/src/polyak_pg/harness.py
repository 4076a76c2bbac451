"""Experiment orchestration: config files, seeded runs, metrics CSVs, comparison.

Config files are INI style (``configparser``).  Every key may be overridden
with ``section.key=value`` strings, which is how CLI flags are applied.

    [experiment]
    env = cartpole              ; cartpole | acrobot | twostep
    method = twin_polyak        ; twin_polyak | adam | sgd
    train_seeds = 0, 1, 2
    eval_seeds = 1000, 1001, 1002
    eval_every = 1
    moving_average_window = 10
    out = runs/cartpole
    policy = mlp                ; mlp | tree (tree only on twostep)
    hidden_dim = 128

    [env]                       ; forwarded to the environment constructor
    max_horizon = 200
    leaf_rewards = 0.1, 0.2, 0.3, 1.0

    [polyak]                    ; PolyakConfig fields
    [baseline]                  ; BaselineConfig fields except optimizer
    [finite_sum]                ; see FiniteSumConfig
"""
from __future__ import annotations

import configparser
import csv
import dataclasses
import math
import os
import re
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .baselines import BaselineConfig, train_policy_gradient
from .envs import ENVIRONMENTS, make_env, make_linearly_separable, write_dataset_csv
from .exceptions import ConfigError, InputError
from .finite_sum import FiniteSumProblem, OptMethod, run_baseline, write_loss_series_csv
from .policies import Architecture, save_checkpoint, unflatten
from .twin import PolyakConfig, default_architecture, twin_best_policy, twin_train

METHODS = ("twin_polyak", "adam", "sgd")

METRICS_COLUMNS = ("method", "seed", "iter", "eval_return", "gamma", "capped", "l_hat_1",
                   "l_hat_2", "gap", "grad_sq_norm", "numerator", "denom", "updated_model",
                   "status", "wall_time")


# --- config -------------------------------------------------------------------

def _parse_list(text: str, cast=float) -> tuple:
    items = [t.strip() for t in text.replace(";", ",").split(",") if t.strip()]
    try:
        return tuple(cast(t) for t in items)
    except ValueError as exc:
        raise ConfigError(f"cannot parse list {text!r}: {exc}") from None


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _coerce_fields(cls, section: dict, skip=()) -> dict:
    """Convert raw strings to the annotated field types of a config dataclass."""
    known = {f.name: f for f in dataclasses.fields(cls)}
    out = {}
    for key, raw in section.items():
        if key in skip:
            continue
        if key not in known:
            raise ConfigError(f"unknown key {key!r} for {cls.__name__}")
        ann = str(known[key].type)
        if ann.split(" ")[0] not in ("int", "float", "bool", "str"):
            raise ConfigError(f"{key!r} cannot be set from a config value")
        try:
            if raw.strip().lower() in ("none", "") and "None" in ann:
                out[key] = None
            elif ann.startswith("bool"):
                out[key] = _parse_bool(raw)
            elif ann.startswith("int"):
                out[key] = int(raw)
            elif ann.startswith("float"):
                out[key] = float(raw)
            else:
                out[key] = raw.strip()
        except ValueError:
            raise ConfigError(f"bad value for {key}: {raw!r}") from None
    return out


@dataclass(frozen=True)
class FiniteSumConfig:
    n: int = 1000
    d: int = 20
    margin: float = 0.1
    data_seed: int = 0
    model: str = "linear"
    hidden_dim: int = 16
    iters: int = 20000
    record_every: int = 10
    methods: str = "twin, sgd(lr=1), sgd(lr=0.1), sgd(lr=0.01), sgd(lr=0.001), sps(c=1)"

    def method_list(self) -> list[OptMethod]:
        return [parse_opt_method(m) for m in re.findall(r"\w+(?:\([^)]*\))?", self.methods)]


def parse_opt_method(text: str) -> OptMethod:
    """``twin``, ``sgd(lr=0.1)``, ``sps(c=1)``, ``sps_max(c=1, gamma_b=2)``."""
    m = re.fullmatch(r"\s*(\w+)\s*(?:\((.*)\))?\s*", text)
    if not m:
        raise ConfigError(f"cannot parse method {text!r}")
    kwargs = {}
    for part in filter(None, (p.strip() for p in (m.group(2) or "").split(","))):
        key, _, val = part.partition("=")
        if key.strip() not in ("lr", "c", "gamma_b"):
            raise ConfigError(f"unknown method argument {key!r}")
        try:
            kwargs[key.strip()] = float(val)
        except ValueError:
            raise ConfigError(f"bad method argument {part!r}") from None
    return OptMethod(m.group(1), **kwargs)


@dataclass(frozen=True)
class ExperimentConfig:
    env: str = "cartpole"
    method: str = "twin_polyak"
    train_seeds: tuple = (0, 1, 2)
    eval_seeds: tuple = (1000, 1001, 1002)
    eval_every: int = 1
    moving_average_window: int = 10
    out: str = "runs"
    policy: str = "mlp"
    hidden_dim: int = 128
    env_kwargs: dict = field(default_factory=dict)
    polyak: PolyakConfig = field(default_factory=PolyakConfig)
    baseline: BaselineConfig = field(default_factory=BaselineConfig)
    finite_sum: FiniteSumConfig = field(default_factory=FiniteSumConfig)

    def __post_init__(self):
        object.__setattr__(self, "env", str(self.env).lower())
        if self.env not in ENVIRONMENTS:
            raise ConfigError(f"unknown environment {self.env!r}")
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; choose from {METHODS}")
        if not self.train_seeds or not self.eval_seeds:
            raise ConfigError("need at least one training and one evaluation seed")
        clash = set(self.train_seeds) & set(self.eval_seeds)
        if clash:
            raise ConfigError(f"evaluation seeds overlap training seeds: {sorted(clash)}")
        if self.eval_every < 1 or self.moving_average_window < 1:
            raise ConfigError("eval_every and moving_average_window must be >= 1")
        if self.policy not in ("mlp", "tree"):
            raise ConfigError("policy must be mlp or tree")
        if self.policy == "tree" and self.env != "twostep":
            raise ConfigError("the tree policy only fits the two-step environment")

    @property
    def method_label(self) -> str:
        if self.method == "twin_polyak":
            p = self.polyak
            return f"twin_polyak(c={p.c:g},gamma_b={p.gamma_b:g},alpha={p.alpha:g})"
        b = self.baseline
        return f"{self.method}(lr={b.lr:g},alpha={b.alpha:g})"

    def make_env(self):
        return make_env(self.env, **self.env_kwargs)

    def architecture(self, env) -> Architecture:
        return default_architecture(env, self.policy, self.hidden_dim)


def _env_kwargs(section: dict) -> dict:
    out = {}
    for key, raw in section.items():
        if key == "leaf_rewards":
            out[key] = _parse_list(raw)
        elif key == "max_horizon":
            try:
                out[key] = int(raw)
            except ValueError:
                raise ConfigError(f"bad max_horizon {raw!r}") from None
        else:
            raise ConfigError(f"unknown env key {key!r}")
    return out


def load_config(path=None, overrides=None) -> ExperimentConfig:
    """Read an INI file (optional) and apply ``section.key=value`` overrides."""
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            parser.read(path, encoding="utf-8")
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from None
    for item in overrides or ():
        key, sep, val = item.partition("=")
        sec, dot, name = key.strip().partition(".")
        if not sep or not dot:
            raise ConfigError(f"override must look like section.key=value, got {item!r}")
        if not parser.has_section(sec):
            parser.add_section(sec)
        parser.set(sec, name.strip(), val.strip())
    known = {"experiment", "env", "polyak", "baseline", "finite_sum"}
    extra = set(parser.sections()) - known
    if extra:
        raise ConfigError(f"unknown config sections: {sorted(extra)}")
    sec = {s: dict(parser.items(s)) if parser.has_section(s) else {} for s in known}

    exp = dict(sec["experiment"])
    kwargs = {}
    for key in ("train_seeds", "eval_seeds"):
        if key in exp:
            kwargs[key] = _parse_list(exp.pop(key), int)
    kwargs.update(_coerce_fields(ExperimentConfig, exp))
    try:
        base = _coerce_fields(BaselineConfig, sec["baseline"], skip=("optimizer",))
        method = kwargs.get("method", "twin_polyak")
        if method in ("adam", "sgd"):
            base["optimizer"] = method
        return ExperimentConfig(
            env_kwargs=_env_kwargs(sec["env"]),
            polyak=PolyakConfig(**_coerce_fields(PolyakConfig, sec["polyak"])),
            baseline=BaselineConfig(**base),
            finite_sum=FiniteSumConfig(**_coerce_fields(FiniteSumConfig, sec["finite_sum"])),
            **kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def with_paper_scale(config: ExperimentConfig) -> ExperimentConfig:
    """500 trajectories per model per update instead of the desk-scale 50."""
    return dataclasses.replace(config, polyak=dataclasses.replace(config.polyak, m=500),
                               baseline=dataclasses.replace(config.baseline, m=500))


# --- running ----------------------------------------------------------------

def _safe_name(label: str) -> str:
    return re.sub(r"[^\w.=,-]+", "_", label).strip("_")


def run_paths(config: ExperimentConfig, seed: int) -> tuple[Path, Path]:
    d = Path(config.out) / _safe_name(config.method_label)
    return d / f"seed_{seed}.csv", d / f"seed_{seed}.policy"


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def write_metrics_csv(rows, path) -> None:
    """Write rows to ``path`` via a temporary file so partial runs never look complete."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with tmp.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(METRICS_COLUMNS)
        for row in rows:
            w.writerow([_fmt(row.get(c, math.nan)) for c in METRICS_COLUMNS])
    os.replace(tmp, path)


def read_metrics_csv(path) -> list[dict]:
    rows = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != METRICS_COLUMNS:
            raise InputError(f"{path} does not have the metrics header")
        for raw in reader:
            row = dict(raw)
            for key in ("seed", "iter", "updated_model", "capped"):
                row[key] = int(row[key])
            for key in ("eval_return", "gamma", "l_hat_1", "l_hat_2", "gap", "grad_sq_norm",
                        "numerator", "denom", "wall_time"):
                row[key] = float(row[key])
            rows.append(row)
    return rows


def train_one_seed(config: ExperimentConfig, seed: int):
    """Train one seed; returns (metrics rows, final policy)."""
    env = config.make_env()
    arch = config.architecture(env)
    label = config.method_label
    start = time.perf_counter()
    rows = []
    if config.method == "twin_polyak":
        cfg = dataclasses.replace(config.polyak, eval_every=config.eval_every)

        def on_iter(_state, met):
            rows.append({"method": label, "seed": seed, "iter": met.iter,
                         "eval_return": met.eval_return, "gamma": met.gamma,
                         "capped": met.capped, "l_hat_1": met.l_hat_1, "l_hat_2": met.l_hat_2,
                         "gap": met.gap, "grad_sq_norm": met.grad_sq_norm, "numerator": met.gap,
                         "denom": cfg.c * met.grad_sq_norm, "updated_model": met.updated_model,
                         "status": met.status, "wall_time": time.perf_counter() - start})

        state, _ = twin_train(env, cfg, seed, arch, list(config.eval_seeds), callback=on_iter)
        policy = unflatten(twin_best_policy(state, env, list(config.eval_seeds)), arch)
    else:
        cfg = dataclasses.replace(config.baseline, optimizer=config.method,
                                  eval_every=config.eval_every)

        def on_iter(_policy, met):
            rows.append({"method": label, "seed": seed, "iter": met.iter,
                         "eval_return": met.eval_return, "gamma": met.lr, "capped": False,
                         "l_hat_1": met.l_hat, "l_hat_2": math.nan, "gap": math.nan,
                         "grad_sq_norm": met.grad_sq_norm, "numerator": math.nan,
                         "denom": math.nan, "updated_model": 1, "status": "updated",
                         "wall_time": time.perf_counter() - start})

        policy, _ = train_policy_gradient(env, cfg, seed, arch, list(config.eval_seeds),
                                          callback=on_iter)
    return rows, policy


def run_experiment(config: ExperimentConfig, seeds=None, resume: bool = True) -> list[Path]:
    """Train every seed and write one metrics CSV plus one checkpoint per seed.

    Seeds whose metrics file already exists are skipped when ``resume`` is set.
    """
    paths = []
    for seed in (config.train_seeds if seeds is None else seeds):
        if seed in config.eval_seeds:
            raise ConfigError(f"training seed {seed} is also an evaluation seed")
        metrics_path, ckpt_path = run_paths(config, seed)
        if not (resume and metrics_path.is_file() and ckpt_path.is_file()):
            rows, policy = train_one_seed(config, seed)
            metrics_path.parent.mkdir(parents=True, exist_ok=True)
            save_checkpoint(policy, ckpt_path)
            write_metrics_csv(rows, metrics_path)
        paths.append(metrics_path)
    return paths


def run_finite_sum(config: ExperimentConfig, seeds=None) -> list[Path]:
    """Finite-sum lab: writes the dataset CSV and one loss-series CSV per seed."""
    fs = config.finite_sum
    ds = make_linearly_separable(fs.n, fs.d, fs.margin, seed=fs.data_seed)
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    write_dataset_csv(ds, out / "dataset.csv")
    problem = FiniteSumProblem.from_dataset(ds, fs.model, fs.hidden_dim)
    methods = fs.method_list()
    if not methods:
        raise ConfigError("finite_sum.methods is empty")
    paths = []
    for seed in (config.train_seeds if seeds is None else seeds):
        series = [run_baseline(problem, m, fs.iters, seed, fs.record_every) for m in methods]
        path = out / f"loss_series_seed_{seed}.csv"
        write_loss_series_csv(series, path)
        paths.append(path)
    return paths


# --- reporting -----------------------------------------------------------------

def moving_average(series, window: int) -> np.ndarray:
    """Trailing mean over the last ``min(window, t + 1)`` points."""
    if window < 1:
        raise InputError("window must be >= 1")
    x = np.asarray(series, dtype=float)
    if x.size == 0:
        return x
    csum = np.concatenate([[0.0], np.cumsum(x)])
    idx = np.arange(1, x.size + 1)
    lo = np.maximum(idx - window, 0)
    return (csum[idx] - csum[lo]) / (idx - lo)


def resample_prior(iters, values, grid) -> np.ndarray:
    """Value at the nearest recorded iteration at or before each grid point."""
    iters = np.asarray(iters)
    pos = np.searchsorted(iters, grid, side="right") - 1
    out = np.full(len(grid), np.nan)
    ok = pos >= 0
    out[ok] = np.asarray(values, dtype=float)[pos[ok]]
    return out


PANELS = {"eval_curves": "eval_return", "step_sizes": "gamma", "value_gap": "gap"}


def compare_report(paths, out_dir, window: int = 10) -> list[dict]:
    """Aggregate metrics files per method across seeds.

    Writes ``eval_curves.csv``, ``step_sizes.csv`` and ``value_gap.csv`` (columns
    method, iter, mean, min, max, moving_average, seeds) plus ``summary.csv``,
    and returns the summary rows.
    """
    paths = list(paths)
    if not paths:
        raise InputError("compare needs at least one metrics file")
    by_method: dict[str, dict[int, list[dict]]] = {}
    for p in paths:
        for row in read_metrics_csv(p):
            by_method.setdefault(row["method"], {}).setdefault(row["seed"], []).append(row)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    panels = {name: [] for name in PANELS}
    summary = []
    for method, seeds in sorted(by_method.items()):
        stats = {}
        for name, col in PANELS.items():
            per_seed = []
            for rows in seeds.values():
                rows = sorted((r for r in rows if not math.isnan(r[col])), key=lambda r: r["iter"])
                per_seed.append(([r["iter"] for r in rows], [r[col] for r in rows]))
            grid = np.array(sorted({k for its, _ in per_seed for k in its}), dtype=int)
            if grid.size == 0:
                continue
            mat = np.vstack([resample_prior(its, vals, grid) for its, vals in per_seed])
            with warnings.catch_warnings():
                # all-NaN columns (no seed recorded yet) are expected
                warnings.simplefilter("ignore", RuntimeWarning)
                mean, lo, hi = np.nanmean(mat, 0), np.nanmin(mat, 0), np.nanmax(mat, 0)
            ma = moving_average(mean, window)
            count = np.sum(~np.isnan(mat), axis=0)
            for k, a, b, c, d, n in zip(grid, mean, lo, hi, ma, count):
                panels[name].append({"method": method, "iter": int(k), "mean": a, "min": b,
                                     "max": c, "moving_average": d, "seeds": int(n)})
            stats[name] = (grid, mean)
        row = {"method": method, "seeds": len(seeds)}
        if "eval_curves" in stats:
            _, mean = stats["eval_curves"]
            row["final_eval_mean"] = float(mean[-1])
            row["best_eval_mean"] = float(np.nanmax(mean))
        if "step_sizes" in stats:
            gam = stats["step_sizes"][1]
            row["median_gamma_last20"] = float(np.nanmedian(gam[-20:]))
        summary.append(row)
    for name, rows in panels.items():
        with (out_dir / f"{name}.csv").open("w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=("method", "iter", "mean", "min", "max",
                                               "moving_average", "seeds"))
            w.writeheader()
            for r in rows:
                w.writerow({k: _fmt(v) for k, v in r.items()})
    cols = ("method", "seeds", "final_eval_mean", "best_eval_mean", "median_gamma_last20")
    with (out_dir / "summary.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=cols)
        w.writeheader()
        for r in summary:
            w.writerow({k: _fmt(r.get(k, math.nan)) for k in cols})
    return summary
