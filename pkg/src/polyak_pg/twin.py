"""Double policy gradient with the stochastic Polyak step size.

Two close copies of the same policy are evaluated on independent trajectory
sets each iteration. The copy with the lower objective estimate is moved by
gradient ascent, using the other copy's estimate in place of the unknown
optimal value; the better copy is frozen. Equal estimates skip the update.
"""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .exceptions import ConfigError
from .gradients import (enumerated_gradient, enumerated_objective, exact_gradient_twostep,
                        exact_value_twostep, objective_gradient)
from .optim import rl_sps_max
from .policies import Architecture, TreePolicy, make_policy, perturb_init, unflatten
from .rollout import estimate_objective, evaluate_greedy, sample_trajectories

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PolyakConfig:
    c: float = 5.0
    gamma_b: float = 1.0
    alpha: float = 0.01
    m: int = 50
    H: int | None = None          # None -> environment default horizon
    gamma: float = 0.99
    init_epsilon: float = 1e-3
    stop_tol: float = 1e-4
    stop_patience: int = 10
    max_iters: int = 300
    entropy_score: bool = False
    eval_every: int = 1

    def __post_init__(self):
        if not self.c > 0:
            raise ConfigError("c must be positive")
        if not self.gamma_b > 0:
            raise ConfigError("gamma_b must be positive")
        if not self.alpha >= 0:
            raise ConfigError("alpha must be non-negative")
        if self.m < 1:
            raise ConfigError("m must be >= 1")
        if self.H is not None and self.H < 1:
            raise ConfigError("H must be >= 1")
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigError("discount gamma must lie in [0, 1]")
        if not self.init_epsilon >= 0:
            raise ConfigError("init_epsilon must be non-negative")
        if not self.stop_tol >= 0 or self.stop_patience < 1:
            raise ConfigError("need stop_tol >= 0 and stop_patience >= 1")
        if self.max_iters < 0 or self.eval_every < 1:
            raise ConfigError("need max_iters >= 0 and eval_every >= 1")

    def horizon(self, env) -> int:
        return env.max_horizon if self.H is None else self.H


@dataclass(frozen=True)
class TwinState:
    theta1: np.ndarray
    theta2: np.ndarray
    architecture: Architecture
    iter: int = 0
    last_gamma: float = math.nan
    consecutive_small: int = 0

    @property
    def policy1(self):
        return unflatten(self.theta1, self.architecture)

    @property
    def policy2(self):
        return unflatten(self.theta2, self.architecture)


@dataclass
class IterationMetrics:
    iter: int
    l_hat_1: float
    l_hat_2: float
    gap: float            # L_high - L_low, the V* - V series
    gamma: float
    capped: bool
    grad_sq_norm: float
    updated_model: int    # 0 = none, 1 or 2
    status: str           # "updated" | "tie" | "degenerate"
    eval_return: float = math.nan
    extra: dict = field(default_factory=dict)

    @property
    def productive(self) -> bool:
        return self.status == "updated"

    def as_row(self) -> dict:
        row = asdict(self)
        row.pop("extra")
        row.update(self.extra)
        return row


def twin_init(architecture: Architecture, seed=None, init_epsilon: float = 1e-3,
              init_std: float = 0.1) -> TwinState:
    """Fresh ``theta1`` and a nearby ``theta2 = theta1 + N(0, eps^2)`` noise."""
    arch = Architecture(*architecture)
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    init_seed, noise_seed = ss.spawn(2)
    first = make_policy(arch.kind, arch.input_dim, arch.num_actions, arch.hidden_dim,
                        init_std, np.random.default_rng(init_seed))
    second = perturb_init(first, init_epsilon, np.random.default_rng(noise_seed))
    return TwinState(first.params, second.params, arch)


def default_architecture(env, kind: str = "mlp", hidden_dim: int = 128) -> Architecture:
    if kind == "tree":
        return TreePolicy.architecture
    return Architecture("mlp", env.obs_dim, hidden_dim, env.num_actions)


def _exact_objective(env, policy, config):
    if isinstance(policy, TreePolicy):
        return (exact_value_twostep(env, policy, config.gamma, config.alpha),
                lambda: exact_gradient_twostep(env, policy, config.gamma, config.alpha))
    return (enumerated_objective(env, policy, config.gamma, config.alpha),
            lambda: enumerated_gradient(env, policy, config.gamma, config.alpha, True))


def twin_rl_iteration(state: TwinState, env, config: PolyakConfig, rng: np.random.Generator,
                      exact: bool = False) -> tuple[TwinState, IterationMetrics]:
    """One iteration of the twin update; ``exact`` swaps in enumeration (tree only)."""
    policies = (state.policy1, state.policy2)
    extra = {}
    if exact:
        (l1, grad1), (l2, grad2) = (_exact_objective(env, p, config) for p in policies)
        grad_fns = (grad1, grad2)
    else:
        H = config.horizon(env)
        seed = int(rng.integers(2**63))
        batches = [sample_trajectories(env, p, config.m, H, seed, stream=k)
                   for k, p in enumerate(policies)]
        ests = [estimate_objective(b, p, config.gamma, config.alpha)
                for b, p in zip(batches, policies)]
        l1, l2 = ests[0].l_hat, ests[1].l_hat
        extra = {"v_hat_1": ests[0].v_hat, "v_hat_2": ests[1].v_hat}

        def grad_fn(k):
            return lambda: objective_gradient(batches[k], policies[k], config.gamma,
                                              config.alpha, config.entropy_score).grad
        grad_fns = (grad_fn(0), grad_fn(1))

    return twin_update(state, l1, l2, grad_fns, config, extra)


def twin_update(state: TwinState, l1: float, l2: float, grad_fns, config: PolyakConfig,
                extra: dict | None = None) -> tuple[TwinState, IterationMetrics]:
    """Apply the twin rule given both objective estimates.

    ``grad_fns`` holds one zero-argument callable per model; only the one for
    the lower-valued model is called.
    """
    extra = {} if extra is None else extra
    nxt_iter = state.iter + 1
    if l1 == l2:
        metrics = IterationMetrics(nxt_iter, l1, l2, 0.0, 0.0, False, math.nan, 0, "tie",
                                   extra=extra)
        return TwinState(state.theta1, state.theta2, state.architecture, nxt_iter, 0.0,
                         state.consecutive_small), metrics

    low = 0 if l1 < l2 else 1
    v_high, v_low = max(l1, l2), min(l1, l2)
    grad = np.asarray(grad_fns[low](), dtype=float)
    sq_norm = float(grad @ grad)
    if sq_norm == 0.0:
        logger.warning("iteration %d: zero gradient with value gap %.3g, update skipped",
                       nxt_iter, v_high - v_low)
        metrics = IterationMetrics(nxt_iter, l1, l2, v_high - v_low, 0.0, False, 0.0, 0,
                                   "degenerate", extra=extra)
        return TwinState(state.theta1, state.theta2, state.architecture, nxt_iter, 0.0,
                         state.consecutive_small), metrics

    rec = rl_sps_max(v_high, v_low, sq_norm, config.c, config.gamma_b)
    thetas = [state.theta1, state.theta2]
    thetas[low] = thetas[low] + rec.gamma * grad
    thetas[low].setflags(write=False)
    small = state.consecutive_small + 1 if rec.gamma < config.stop_tol else 0
    metrics = IterationMetrics(nxt_iter, l1, l2, v_high - v_low, rec.gamma, rec.capped,
                               sq_norm, low + 1, "updated", extra=extra)
    return TwinState(thetas[0], thetas[1], state.architecture, nxt_iter, rec.gamma,
                     small), metrics


def twin_train(env, config: PolyakConfig, seed: int = 0, architecture: Architecture | None = None,
               eval_seeds=None, exact: bool = False,
               callback: Callable[[TwinState, IterationMetrics], None] | None = None,
               ) -> tuple[TwinState, list[IterationMetrics]]:
    """Iterate until ``gamma < stop_tol`` for ``stop_patience`` productive
    iterations in a row, or ``max_iters`` iterations.

    With ``eval_seeds`` the better greedy return of the two models is stored in
    ``eval_return`` every ``eval_every`` iterations.
    """
    arch = architecture or default_architecture(env)
    init_ss, loop_ss = np.random.SeedSequence(seed).spawn(2)
    state = twin_init(arch, init_ss, config.init_epsilon)
    rng = np.random.default_rng(loop_ss)
    history: list[IterationMetrics] = []
    for _ in range(config.max_iters):
        state, met = twin_rl_iteration(state, env, config, rng, exact=exact)
        if eval_seeds is not None and met.iter % config.eval_every == 0:
            met.eval_return = max(evaluate_greedy(env, state.policy1, eval_seeds),
                                  evaluate_greedy(env, state.policy2, eval_seeds))
        history.append(met)
        logger.debug("iter %d status=%s gamma=%.3g gap=%.3g eval=%s", met.iter, met.status,
                     met.gamma, met.gap, met.eval_return)
        if callback is not None:
            callback(state, met)
        if state.consecutive_small >= config.stop_patience:
            break
    return state, history


def twin_best_policy(state: TwinState, env, eval_seeds) -> np.ndarray:
    """Parameters of the model with the higher greedy return (ties -> theta1)."""
    r1 = evaluate_greedy(env, state.policy1, eval_seeds)
    r2 = evaluate_greedy(env, state.policy2, eval_seeds)
    return state.theta2 if r2 > r1 else state.theta1
