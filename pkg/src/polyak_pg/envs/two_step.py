"""Two-step deterministic binary tree with four distinctly rewarded leaves.

Node numbering (state is the 1-vector ``[node]``)::

            0
          /   \\
         1     2
        / \\   / \\
       3   4 5   6       leaves LL, LR, RL, RR

Action 0 goes left, action 1 goes right. Reward is 0 on the first transition
and the leaf reward on the second, so a leaf reward is discounted once.
Observations one-hot encode the internal node; leaves observe as zeros.
"""
from __future__ import annotations

import numpy as np

from ..exceptions import InputError, UsageError
from ..rollout import Trajectory, check_compatible, discounted_return
from .base import Env, EnvSpec
from .constants import TWOSTEP_DEFAULT_LEAF_REWARDS

LEAF_NAMES = ("LL", "LR", "RL", "RR")


class TwoStepSpec:
    """Validated leaf rewards in LL, LR, RL, RR order."""

    def __init__(self, leaf_rewards=TWOSTEP_DEFAULT_LEAF_REWARDS):
        r = tuple(float(v) for v in leaf_rewards)
        if len(r) != 4:
            raise InputError("two-step tree needs exactly 4 leaf rewards")
        if len(set(r)) != 4:
            raise InputError("leaf rewards must be distinct")
        if not all(np.isfinite(r)):
            raise InputError("leaf rewards must be finite")
        self.leaf_rewards = r

    @property
    def optimal_leaf(self) -> int:
        return int(np.argmax(self.leaf_rewards))

    def __repr__(self) -> str:
        return f"TwoStepSpec(leaf_rewards={self.leaf_rewards})"


class TwoStep(Env):
    state_dim = 1

    def __init__(self, leaf_rewards=TWOSTEP_DEFAULT_LEAF_REWARDS, max_horizon: int = 2):
        self.tree = TwoStepSpec(leaf_rewards)
        self.spec = EnvSpec("twostep", 3, 2, int(max_horizon))
        self._leaf_rewards = np.array(self.tree.leaf_rewards)

    @property
    def leaf_rewards(self) -> tuple:
        return self.tree.leaf_rewards

    def initial_state(self, rng):
        return np.zeros(1)

    def observe(self, state):
        node = np.asarray(state, dtype=float)[..., 0].astype(int)
        return (node[..., None] == np.arange(3)).astype(float)

    def is_terminal(self, state):
        out = np.asarray(state, dtype=float)[..., 0] >= 3
        return bool(out) if out.ndim == 0 else out

    def step_batch(self, states, actions):
        node = np.asarray(states, dtype=float)[:, 0].astype(int)
        actions = np.asarray(actions, dtype=int)
        nxt = 2 * node + 1 + actions
        done = nxt >= 3
        reward = np.where(done, self._leaf_rewards[np.clip(nxt - 3, 0, 3)], 0.0)
        return nxt[:, None].astype(float), reward, done

    def __repr__(self) -> str:
        return f"TwoStep(leaf_rewards={self.leaf_rewards})"


def enumerate_trajectories(env, policy, gamma: float = 0.99):
    """All four root-to-leaf paths as ``(trajectory, probability, return)``.

    Paths come in LL, LR, RL, RR order; probabilities are products of the
    policy's action probabilities along the path.
    """
    if not isinstance(env, TwoStep):
        raise UsageError("trajectory enumeration is only defined for the two-step tree")
    if env.max_horizon < 2:
        raise UsageError("enumeration needs a horizon of at least 2")
    check_compatible(env, policy)
    out = []
    for first in (0, 1):
        for second in (0, 1):
            state = env.reset()
            obs, acts, rews, prob = [], [], [], 1.0
            for a in (first, second):
                o = env.observe(state)
                prob *= float(policy.probs(o)[a])
                res = env.step(state, a)
                obs.append(o)
                acts.append(a)
                rews.append(res.reward)
                state = res.next_state
            traj = Trajectory(np.array(obs), np.array(acts), np.array(rews), False)
            out.append((traj, prob, discounted_return(traj, gamma)))
    return out
