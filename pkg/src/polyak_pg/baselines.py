"""Fixed-step policy gradient baselines (Adam and plain SGD ascent)."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .exceptions import ConfigError
from .gradients import objective_gradient
from .optim import ASCEND, AdamState, adam_step, sgd_step
from .policies import Architecture, make_policy, unflatten
from .rollout import estimate_objective, evaluate_greedy, sample_trajectories


@dataclass(frozen=True)
class BaselineConfig:
    optimizer: str = "adam"   # "adam" or "sgd"
    lr: float = 1e-2
    alpha: float = 0.0
    m: int = 50
    H: int | None = None
    gamma: float = 0.99
    max_iters: int = 300
    entropy_score: bool = False
    eval_every: int = 1

    def __post_init__(self):
        if self.optimizer not in ("adam", "sgd"):
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")
        if not self.lr >= 0:
            raise ConfigError("lr must be non-negative")
        if not self.alpha >= 0 or self.m < 1 or self.max_iters < 0 or self.eval_every < 1:
            raise ConfigError("need alpha >= 0, m >= 1, max_iters >= 0, eval_every >= 1")
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigError("discount gamma must lie in [0, 1]")


@dataclass
class BaselineMetrics:
    iter: int
    l_hat: float
    v_hat: float
    grad_sq_norm: float
    lr: float
    eval_return: float = math.nan


def train_policy_gradient(env, config: BaselineConfig, seed: int = 0,
                          architecture: Architecture | None = None, eval_seeds=None,
                          callback: Callable | None = None):
    """Ascend the objective with a fixed learning rate; returns (policy, history)."""
    arch = architecture or Architecture("mlp", env.obs_dim, 128, env.num_actions)
    init_ss, loop_ss = np.random.SeedSequence(seed).spawn(2)
    policy = make_policy(arch.kind, arch.input_dim, arch.num_actions, arch.hidden_dim,
                         seed=np.random.default_rng(init_ss))
    rng = np.random.default_rng(loop_ss)
    adam = AdamState.zeros(policy.n_params)
    H = env.max_horizon if config.H is None else config.H
    history = []
    for k in range(1, config.max_iters + 1):
        batch = sample_trajectories(env, policy, config.m, H, int(rng.integers(2**63)))
        est = estimate_objective(batch, policy, config.gamma, config.alpha)
        g = objective_gradient(batch, policy, config.gamma, config.alpha, config.entropy_score)
        if config.optimizer == "adam":
            adam, theta = adam_step(adam, policy.params, g.grad, config.lr, ASCEND)
        else:
            theta = sgd_step(policy.params, g.grad, config.lr, ASCEND)
        policy = unflatten(theta, arch)
        met = BaselineMetrics(k, est.l_hat, est.v_hat, g.sq_norm, config.lr)
        if eval_seeds is not None and k % config.eval_every == 0:
            met.eval_return = evaluate_greedy(env, policy, eval_seeds)
        history.append(met)
        if callback is not None:
            callback(policy, met)
    return policy, history
