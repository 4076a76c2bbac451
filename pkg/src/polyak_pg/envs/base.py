"""Episodic environment interface.

Environments are stateless simulators: the caller owns the state vector and
passes it to :meth:`Env.step`. All dynamics are deterministic; randomness only
enters through :meth:`Env.initial_state`. Batched variants operate on
``(n, state_dim)`` arrays and are what the rollout code uses.
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

from ..exceptions import InputError, UsageError


class EnvSpec(NamedTuple):
    name: str
    obs_dim: int
    num_actions: int
    max_horizon: int


class StepResult(NamedTuple):
    next_state: np.ndarray
    next_obs: np.ndarray
    reward: float
    done: bool


class Env:
    spec: EnvSpec
    state_dim: int

    @property
    def name(self) -> str:
        return self.spec.name

    @property
    def obs_dim(self) -> int:
        return self.spec.obs_dim

    @property
    def num_actions(self) -> int:
        return self.spec.num_actions

    @property
    def max_horizon(self) -> int:
        return self.spec.max_horizon

    def initial_state(self, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def reset(self, seed=None) -> np.ndarray:
        """Sample an initial state; deterministic given ``seed``."""
        return self.initial_state(np.random.default_rng(seed))

    def observe(self, state: np.ndarray) -> np.ndarray:
        """Map a state (or batch of states) to the policy observation."""
        return np.asarray(state, dtype=float)

    def is_terminal(self, state: np.ndarray) -> np.ndarray | bool:
        raise NotImplementedError

    def step_batch(self, states: np.ndarray, actions: np.ndarray):
        """Advance every row; returns ``(next_states, rewards, dones)``."""
        raise NotImplementedError

    def step(self, state, action: int) -> StepResult:
        state = np.asarray(state, dtype=float)
        if state.shape != (self.state_dim,):
            raise InputError(f"{self.name}: state must have shape ({self.state_dim},)")
        if not 0 <= int(action) < self.num_actions:
            raise InputError(f"{self.name}: invalid action {action!r}")
        if bool(self.is_terminal(state)):
            raise UsageError(f"{self.name}: cannot step a terminal state")
        nxt, rew, done = self.step_batch(state[None, :], np.array([int(action)]))
        return StepResult(nxt[0], self.observe(nxt[0]), float(rew[0]), bool(done[0]))

    def __repr__(self) -> str:
        return f"{type(self).__name__}(max_horizon={self.max_horizon})"
