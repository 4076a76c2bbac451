"""Trajectory sampling, discounted returns and objective estimates.

Every trajectory draws from its own random stream derived from
``(seed, stream, index)``, so trajectory ``i`` is the same no matter how many
others are sampled alongside it. Rollouts of a batch advance in lock step
through the vectorised environment and policy.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .exceptions import InputError
from .policies import SoftmaxPolicy, entropy, softmax


@dataclass(frozen=True)
class Trajectory:
    obs: np.ndarray       # (T, obs_dim), observation before each action
    actions: np.ndarray   # (T,)
    rewards: np.ndarray   # (T,)
    truncated: bool = False

    def __len__(self) -> int:
        return len(self.actions)

    @property
    def steps(self):
        return list(zip(self.obs, self.actions.tolist(), self.rewards.tolist()))


class TrajectoryBatch(NamedTuple):
    """Zero-padded stack of ``m`` trajectories of horizon at most ``H``."""

    obs: np.ndarray       # (m, H, obs_dim)
    actions: np.ndarray   # (m, H) int
    rewards: np.ndarray   # (m, H), zero past the end
    mask: np.ndarray      # (m, H) bool, True on real steps
    truncated: np.ndarray  # (m,) bool

    @property
    def num_trajectories(self) -> int:
        return self.mask.shape[0]

    @property
    def lengths(self) -> np.ndarray:
        return self.mask.sum(axis=1)

    def trajectories(self) -> list[Trajectory]:
        out = []
        for i, T in enumerate(self.lengths):
            out.append(Trajectory(self.obs[i, :T].copy(), self.actions[i, :T].copy(),
                                  self.rewards[i, :T].copy(), bool(self.truncated[i])))
        return out


def as_batch(trajs) -> TrajectoryBatch:
    if isinstance(trajs, TrajectoryBatch):
        return trajs
    if isinstance(trajs, Trajectory):
        trajs = [trajs]
    trajs = list(trajs)
    if not trajs:
        raise InputError("need at least one trajectory")
    m = len(trajs)
    H = max(max(len(t) for t in trajs), 1)
    d = trajs[0].obs.shape[1]
    obs = np.zeros((m, H, d))
    actions = np.zeros((m, H), dtype=int)
    rewards = np.zeros((m, H))
    mask = np.zeros((m, H), dtype=bool)
    for i, t in enumerate(trajs):
        T = len(t)
        obs[i, :T] = t.obs
        actions[i, :T] = t.actions
        rewards[i, :T] = t.rewards
        mask[i, :T] = True
    return TrajectoryBatch(obs, actions, rewards, mask,
                           np.array([t.truncated for t in trajs], dtype=bool))


def trajectory_rngs(seed: int, m: int, stream: int = 0) -> list[np.random.Generator]:
    """Independent generators for trajectories ``0..m-1`` of one stream."""
    return [np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream, i)))
            for i in range(m)]


def check_compatible(env, policy: SoftmaxPolicy) -> None:
    """Raise InputError unless the policy's input and action sizes fit ``env``."""
    if policy.input_dim != env.obs_dim or policy.num_actions != env.num_actions:
        raise InputError(f"policy ({policy.input_dim} inputs, {policy.num_actions} actions) "
                         f"does not fit {env.name} ({env.obs_dim} observations, "
                         f"{env.num_actions} actions)")


def sample_batch(env, policy: SoftmaxPolicy, H: int,
                 rngs: Sequence[np.random.Generator]) -> TrajectoryBatch:
    """Roll out one trajectory per generator, each for at most ``H`` steps."""
    if H < 1:
        raise InputError("horizon H must be >= 1")
    check_compatible(env, policy)
    m = len(rngs)
    states = np.stack([env.initial_state(r) for r in rngs])
    uniforms = np.stack([r.random(H) for r in rngs])
    obs = np.zeros((m, H, env.obs_dim))
    actions = np.zeros((m, H), dtype=int)
    rewards = np.zeros((m, H))
    mask = np.zeros((m, H), dtype=bool)
    alive = np.ones(m, dtype=bool)
    for t in range(H):
        idx = np.flatnonzero(alive)
        if idx.size == 0:
            break
        o = env.observe(states[idx])
        cdf = np.cumsum(policy.probs(o), axis=1)[:, :-1]
        a = (cdf <= uniforms[idx, t][:, None]).sum(axis=1)
        nxt, r, done = env.step_batch(states[idx], a)
        obs[idx, t] = o
        actions[idx, t] = a
        rewards[idx, t] = r
        mask[idx, t] = True
        states[idx] = nxt
        alive[idx[done]] = False
    return TrajectoryBatch(obs, actions, rewards, mask, alive.copy())


def sample_trajectories(env, policy: SoftmaxPolicy, m: int, H: int, seed: int,
                        stream: int = 0) -> TrajectoryBatch:
    return sample_batch(env, policy, H, trajectory_rngs(seed, m, stream))


def sample_trajectory(env, policy: SoftmaxPolicy, H: int,
                      rng: np.random.Generator) -> Trajectory:
    return sample_batch(env, policy, H, [rng]).trajectories()[0]


def discount_weights(gamma: float, H: int) -> np.ndarray:
    return float(gamma) ** np.arange(H, dtype=float)


def discounted_return(traj: Trajectory, gamma: float) -> float:
    if not 0.0 <= gamma <= 1.0:
        raise InputError("gamma must lie in [0, 1]")
    r = np.asarray(traj.rewards, dtype=float)
    return float(discount_weights(gamma, len(r)) @ r)


class ObjectiveEstimate(NamedTuple):
    v_hat: float
    entropy_hat: float
    alpha: float
    l_hat: float
    num_trajectories: int


def _trajectory_weights(m: int, weights) -> np.ndarray:
    if weights is None:
        return np.full(m, 1.0 / m)
    w = np.asarray(weights, dtype=float)
    if w.shape != (m,):
        raise InputError("need one weight per trajectory")
    return w


def state_entropies(batch: TrajectoryBatch, policy: SoftmaxPolicy) -> np.ndarray:
    """Policy entropy at every visited state, zero on padding; ``(m, H)``."""
    ent = np.zeros(batch.mask.shape)
    ent[batch.mask] = entropy(softmax(policy.logits(batch.obs[batch.mask])))
    return ent


def estimate_objective(trajs, policy: SoftmaxPolicy, gamma: float, alpha: float,
                       weights=None) -> ObjectiveEstimate:
    """Mean discounted return plus ``alpha`` times the discounted entropy.

    The entropy part averages ``sum_t gamma^t H(pi(.|s_t))`` over trajectories.
    With ``weights`` (e.g. exact trajectory probabilities) a weighted sum
    replaces the plain mean.
    """
    batch = as_batch(trajs)
    m, H = batch.mask.shape
    w = _trajectory_weights(m, weights)
    disc = discount_weights(gamma, H)
    v_hat = float(w @ (batch.rewards @ disc))
    if alpha == 0:
        ent_hat = 0.0
    else:
        ent_hat = float(w @ (state_entropies(batch, policy) @ disc))
    return ObjectiveEstimate(v_hat, ent_hat, float(alpha), v_hat + alpha * ent_hat, m)


def greedy_returns(env, policy: SoftmaxPolicy, eval_seeds, H: int | None = None) -> np.ndarray:
    """Undiscounted return of the argmax policy from each seeded start state."""
    seeds = list(eval_seeds)
    if not seeds:
        raise InputError("need at least one evaluation seed")
    H = env.max_horizon if H is None else H
    states = np.stack([env.reset(s) for s in seeds])
    totals = np.zeros(len(seeds))
    alive = np.ones(len(seeds), dtype=bool)
    for _ in range(H):
        idx = np.flatnonzero(alive)
        if idx.size == 0:
            break
        a = np.argmax(policy.logits(env.observe(states[idx])), axis=1)
        nxt, r, done = env.step_batch(states[idx], a)
        totals[idx] += r
        states[idx] = nxt
        alive[idx[done]] = False
    return totals


def evaluate_greedy(env, policy: SoftmaxPolicy, eval_seeds, H: int | None = None) -> float:
    return float(np.mean(greedy_returns(env, policy, eval_seeds, H)))


# --- debugging dump ----------------------------------------------------------

def write_trajectory_dump(trajs, path) -> None:
    """One line per step: tab-separated observation components, action, reward.

    Trajectories are separated by a blank line. The truncation flag is not kept.
    """
    lines = []
    for k, traj in enumerate(as_batch(trajs).trajectories()):
        if k:
            lines.append("")
        for o, a, r in traj.steps:
            lines.append("\t".join([repr(float(v)) for v in o] + [str(a), repr(float(r))]))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_trajectory_dump(path) -> list[Trajectory]:
    with open(path, encoding="utf-8") as fh:
        blocks = fh.read().strip("\n").split("\n\n")
    out = []
    for block in blocks:
        if not block.strip():
            continue
        rows = [line.split("\t") for line in block.splitlines()]
        try:
            obs = np.array([[float(v) for v in row[:-2]] for row in rows])
            actions = np.array([int(row[-2]) for row in rows])
            rewards = np.array([float(row[-1]) for row in rows])
        except (ValueError, IndexError) as exc:
            raise InputError(f"{path}: malformed trajectory dump") from exc
        out.append(Trajectory(obs, actions, rewards))
    return out
