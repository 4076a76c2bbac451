"""Twin-model Polyak steps for finite-sum minimization, with SGD/SPS baselines.

The problems are binary logistic regression on linearly separable data, either
with a linear model or a one-hidden-layer tanh network.  Per-example losses are
nonnegative and their infimum is 0, which is what SPS uses as ``f_i*``.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .envs.datasets import LinearSeparableDataset
from .exceptions import ConfigError, DegenerateGradientError, InputError
from .optim import DESCEND, sgd_step, sps_max

log = logging.getLogger(__name__)

MODEL_KINDS = ("linear", "mlp")


@dataclass(frozen=True)
class FiniteSumProblem:
    features: np.ndarray
    signs: np.ndarray  # labels mapped to -1 / +1
    model_kind: str = "linear"
    hidden_dim: int = 16

    def __post_init__(self):
        X = np.asarray(self.features, dtype=float)
        s = np.asarray(self.signs, dtype=float)
        if X.ndim != 2 or s.shape != (X.shape[0],) or X.shape[0] == 0:
            raise InputError("features must be (n, d) with one label per row")
        if not np.all(np.abs(s) == 1.0):
            raise InputError("signs must be -1 or +1")
        if self.model_kind not in MODEL_KINDS:
            raise ConfigError(f"model_kind must be one of {MODEL_KINDS}")
        if self.hidden_dim < 1:
            raise ConfigError("hidden_dim must be positive")
        X.setflags(write=False)
        s.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "signs", s)

    @classmethod
    def from_dataset(cls, ds: LinearSeparableDataset, model_kind="linear", hidden_dim=16):
        return cls(ds.features, 2.0 * np.asarray(ds.labels, float) - 1.0, model_kind, hidden_dim)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @property
    def n_params(self) -> int:
        if self.model_kind == "linear":
            return self.dim
        h = self.hidden_dim
        return self.dim * h + h + h + 1

    def _split(self, x):
        d, h = self.dim, self.hidden_dim
        W1 = x[:d * h].reshape(d, h)
        b1 = x[d * h:d * h + h]
        w2 = x[d * h + h:d * h + 2 * h]
        return W1, b1, w2, x[-1]

    def scores(self, x, X=None) -> np.ndarray:
        """Model outputs on the stored features, or on ``X`` if given."""
        X = self.features if X is None else np.asarray(X, dtype=float)
        if self.model_kind == "linear":
            return X @ x
        W1, b1, w2, b2 = self._split(x)
        return np.tanh(X @ W1 + b1) @ w2 + b2

    def initial_point(self, seed=None, std: float = 0.1) -> np.ndarray:
        """Zero for the linear model, small Gaussian weights for the network."""
        if self.model_kind == "linear":
            return np.zeros(self.n_params)
        rng = np.random.default_rng(seed)
        W1, b1, w2, _ = self._split(np.zeros(self.n_params))
        x = np.zeros(self.n_params)
        x[:W1.size] = rng.normal(0.0, std, W1.size)
        x[W1.size + b1.size:W1.size + b1.size + w2.size] = rng.normal(0.0, std, w2.size)
        return x


def _check_x(problem: FiniteSumProblem, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (problem.n_params,):
        raise InputError(f"expected {problem.n_params} parameters, got shape {x.shape}")
    return x


def per_example_losses(problem: FiniteSumProblem, x) -> np.ndarray:
    x = _check_x(problem, x)
    return np.logaddexp(0.0, -problem.signs * problem.scores(x))


def full_objective(problem: FiniteSumProblem, x) -> float:
    return float(np.mean(per_example_losses(problem, x)))


def loss_and_grad(problem: FiniteSumProblem, x, i: int) -> tuple[float, np.ndarray]:
    """Logistic loss of example ``i`` and its gradient in ``x``."""
    x = _check_x(problem, x)
    if isinstance(i, (bool, np.bool_)) or not isinstance(i, (int, np.integer)):
        raise InputError("example index must be an integer")
    if not 0 <= i < problem.n:
        raise InputError(f"example index {i} outside [0, {problem.n})")
    a, s = problem.features[i], problem.signs[i]
    if problem.model_kind == "linear":
        z = s * (a @ x)
        dz = a * s
    else:
        W1, b1, w2, b2 = problem._split(x)
        hid = np.tanh(a @ W1 + b1)
        z = s * (hid @ w2 + b2)
        dpre = (1.0 - hid * hid) * w2
        dz = s * np.concatenate([np.outer(a, dpre).ravel(), dpre, hid, [1.0]])
    loss = float(np.logaddexp(0.0, -z))
    # d/dz log(1 + e^-z) = -sigmoid(-z), written to stay finite for large |z|
    dl = -math.exp(-np.logaddexp(0.0, z))
    return loss, dl * dz


# --- twin-model iteration ---------------------------------------------------

@dataclass
class TwinOptState:
    x1: np.ndarray
    x2: np.ndarray
    iter: int = 0
    last_gamma: float = math.nan

    def __post_init__(self):
        self.x1 = np.asarray(self.x1, dtype=float)
        self.x2 = np.asarray(self.x2, dtype=float)
        if self.x1.shape != self.x2.shape or self.x1.ndim != 1:
            raise InputError("twin parameter vectors must be 1-D with identical shapes")


@dataclass(frozen=True)
class TwinOptStep:
    gamma: float
    updated_model: int  # 0 when nothing moved
    status: str         # updated / tie / degenerate
    gap: float


def twin_opt_init(problem: FiniteSumProblem, seed=None, init_epsilon: float = 1e-3) -> TwinOptState:
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    init_ss, pert_ss = ss.spawn(2)
    x1 = problem.initial_point(np.random.default_rng(init_ss))
    x2 = x1 + np.random.default_rng(pert_ss).normal(0.0, init_epsilon, x1.size)
    return TwinOptState(x1, x2)


def twin_sps_iteration(state: TwinOptState, problem: FiniteSumProblem, rng,
                       c: float | None = None, gamma_b: float | None = None
                       ) -> tuple[TwinOptState, TwinOptStep]:
    """One twin step: the higher-loss model moves toward the other's sampled loss.

    With ``c`` and ``gamma_b`` unset the step is the plain Polyak ratio; setting
    both gives the capped ``min(gap / (c ||g||^2), gamma_b)`` variant.
    """
    if (c is None) != (gamma_b is None):
        raise ConfigError("set both c and gamma_b, or neither")
    i, j = (int(k) for k in rng.integers(problem.n, size=2))
    f1, g1 = loss_and_grad(problem, state.x1, i)
    f2, g2 = loss_and_grad(problem, state.x2, j)
    k = state.iter + 1
    if f1 == f2:
        return TwinOptState(state.x1, state.x2, k, state.last_gamma), TwinOptStep(0.0, 0, "tie", 0.0)
    if f1 < f2:
        which, high, low, g, x = 2, f2, f1, g2, state.x2
    else:
        which, high, low, g, x = 1, f1, f2, g1, state.x1
    sq = float(g @ g)
    gap = high - low
    try:
        if c is None:
            if sq == 0:
                raise DegenerateGradientError("zero gradient")
            gamma = gap / sq
        else:
            gamma = sps_max(high, low, sq, c, gamma_b).gamma
    except DegenerateGradientError:
        log.info("twin step skipped at iteration %d: zero gradient with gap %.3g", k, gap)
        return (TwinOptState(state.x1, state.x2, k, state.last_gamma),
                TwinOptStep(0.0, 0, "degenerate", gap))
    moved = sgd_step(x, g, gamma, DESCEND)
    x1, x2 = (moved, state.x2) if which == 1 else (state.x1, moved)
    return TwinOptState(x1, x2, k, gamma), TwinOptStep(gamma, which, "updated", gap)


# --- runners ------------------------------------------------------------------

@dataclass(frozen=True)
class OptMethod:
    """``sgd`` (lr), ``sps`` (c), ``sps_max`` (c, gamma_b) or ``twin`` (optional c, gamma_b)."""
    kind: str
    lr: float | None = None
    c: float | None = None
    gamma_b: float | None = None

    def __post_init__(self):
        need = {"sgd": ("lr",), "sps": ("c",), "sps_max": ("c", "gamma_b"), "twin": ()}
        if self.kind not in need:
            raise ConfigError(f"unknown method {self.kind!r}")
        for name in need[self.kind]:
            val = getattr(self, name)
            if val is None:
                raise ConfigError(f"method {self.kind} needs {name}")
        if self.lr is not None and not self.lr >= 0:
            raise ConfigError("lr must be non-negative")
        for name in ("c", "gamma_b"):
            val = getattr(self, name)
            if val is not None and not val > 0:
                raise ConfigError(f"{name} must be positive")

    @property
    def label(self) -> str:
        if self.kind == "sgd":
            return f"sgd(lr={self.lr:g})"
        if self.kind == "sps":
            return f"sps(c={self.c:g})"
        if self.kind == "sps_max" or self.c is not None:
            return f"{self.kind}(c={self.c:g},gamma_b={self.gamma_b:g})"
        return "twin"


@dataclass
class LossSeries:
    method: str
    iters: list = field(default_factory=list)
    f_full: list = field(default_factory=list)
    gamma: list = field(default_factory=list)
    params: np.ndarray | None = None  # final iterate (the better twin for twin runs)

    def append(self, k, f, g):
        self.iters.append(int(k))
        self.f_full.append(float(f))
        self.gamma.append(float(g))

    def first_below(self, threshold: float) -> int | None:
        """Earliest recorded iteration with ``f_full < threshold``."""
        for k, f in zip(self.iters, self.f_full):
            if f < threshold:
                return k
        return None

    def rows(self):
        return [{"iter": k, "f_full": f, "gamma": g, "method": self.method}
                for k, f, g in zip(self.iters, self.f_full, self.gamma)]


LOSS_SERIES_COLUMNS = ("iter", "f_full", "gamma", "method")


def write_loss_series_csv(series_list, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=LOSS_SERIES_COLUMNS)
        w.writeheader()
        for series in series_list:
            for row in series.rows():
                w.writerow({**row, "f_full": repr(row["f_full"]), "gamma": repr(row["gamma"])})


def read_loss_series_csv(path) -> list[LossSeries]:
    out: dict[str, LossSeries] = {}
    with Path(path).open(newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            s = out.setdefault(row["method"], LossSeries(row["method"]))
            s.append(int(row["iter"]), float(row["f_full"]), float(row["gamma"]))
    return list(out.values())


def _check_run_args(iters, record_every):
    if iters < 0 or record_every < 1:
        raise ConfigError("need iters >= 0 and record_every >= 1")


def run_baseline(problem: FiniteSumProblem, method: OptMethod, iters: int, seed=None,
                 record_every: int = 10) -> LossSeries:
    """Single-sample SGD / SPS / SPS_max with ``f_i* = 0``; records ``f`` every few steps."""
    if method.kind == "twin":
        return run_twin(problem, iters, seed, method.c, method.gamma_b, record_every)
    _check_run_args(iters, record_every)
    init_ss, loop_ss = np.random.SeedSequence(seed).spawn(2)
    x = problem.initial_point(np.random.default_rng(init_ss))
    rng = np.random.default_rng(loop_ss)
    series = LossSeries(method.label)
    series.append(0, full_objective(problem, x), math.nan)
    gamma = math.nan
    for k in range(1, iters + 1):
        f, g = loss_and_grad(problem, x, int(rng.integers(problem.n)))
        if method.kind == "sgd":
            gamma = method.lr
        else:
            cap = math.inf if method.kind == "sps" else method.gamma_b
            try:
                gamma = sps_max(f, 0.0, float(g @ g), method.c, cap).gamma
            except DegenerateGradientError:
                log.warning("%s step skipped at iteration %d: zero gradient", method.label, k)
                gamma = 0.0
        x = sgd_step(x, g, gamma, DESCEND)
        if k % record_every == 0:
            series.append(k, full_objective(problem, x), gamma)
    series.params = x
    return series


def run_twin(problem: FiniteSumProblem, iters: int, seed=None, c: float | None = None,
             gamma_b: float | None = None, record_every: int = 10,
             init_epsilon: float = 1e-3) -> LossSeries:
    """Twin-model SPS; the recorded objective is the better of the two models."""
    _check_run_args(iters, record_every)
    init_ss, loop_ss = np.random.SeedSequence(seed).spawn(2)
    state = twin_opt_init(problem, init_ss, init_epsilon)
    rng = np.random.default_rng(loop_ss)
    label = OptMethod("twin", c=c, gamma_b=gamma_b).label
    series = LossSeries(label)

    def best(s):
        return min(full_objective(problem, s.x1), full_objective(problem, s.x2))

    series.append(0, best(state), math.nan)
    for k in range(1, iters + 1):
        state, step = twin_sps_iteration(state, problem, rng, c, gamma_b)
        if k % record_every == 0:
            series.append(k, best(state), step.gamma)
    f1, f2 = full_objective(problem, state.x1), full_objective(problem, state.x2)
    series.params = state.x2 if f2 < f1 else state.x1
    return series
