"""Policy-gradient estimators and exact two-step-tree oracles.

All sampled estimators share one pass: per visited state they build the
gradient with respect to the logits, then backpropagate the whole batch once.
For the score term that logit gradient is ``(onehot(a_t) - pi(.|s_t))`` scaled
by the discounted reward-to-go ``sum_{t >= t'} gamma^t r_t``, which regroups
the GPOMDP double sum without changing it.
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .envs.two_step import TwoStep, enumerate_trajectories
from .exceptions import InputError, UsageError
from .optim import rl_sps_max
from .policies import SoftmaxPolicy, TreePolicy, log_softmax, softmax
from .rollout import (_trajectory_weights, as_batch, discount_weights,
                      estimate_objective)


class GradientEstimate(NamedTuple):
    grad: np.ndarray
    sq_norm: float
    num_trajectories: int


def _estimate(grad: np.ndarray, m: int) -> GradientEstimate:
    return GradientEstimate(grad, float(grad @ grad), m)


def _reverse_cumsum(a: np.ndarray) -> np.ndarray:
    return np.flip(np.cumsum(np.flip(a, axis=1), axis=1), axis=1)


def _logit_terms(batch, policy):
    z = policy.logits(batch.obs[batch.mask])
    p = softmax(z)
    onehot = np.zeros_like(p)
    onehot[np.arange(len(p)), batch.actions[batch.mask]] = 1.0
    return z, p, onehot


def gpomdp(trajs, policy: SoftmaxPolicy, gamma: float, weights=None) -> GradientEstimate:
    """GPOMDP estimate of the gradient of the discounted value.

    ``(1/m) sum_i sum_t (sum_{t' <= t} grad log pi(a_t'|s_t')) gamma^t r_t``.
    ``weights`` replaces the uniform ``1/m`` (used for exact enumeration).
    """
    batch = as_batch(trajs)
    m, H = batch.mask.shape
    w = _trajectory_weights(m, weights)
    to_go = _reverse_cumsum(batch.rewards * discount_weights(gamma, H)) * w[:, None]
    _, p, onehot = _logit_terms(batch, policy)
    dlogits = to_go[batch.mask][:, None] * (onehot - p)
    return _estimate(policy.backward(batch.obs[batch.mask], dlogits), m)


def objective_gradient(trajs, policy: SoftmaxPolicy, gamma: float, alpha: float,
                       entropy_score: bool = False, weights=None) -> GradientEstimate:
    """Gradient estimate of ``V + alpha * discounted entropy``.

    The default treats the visited states as fixed and differentiates the
    entropy at each one (``gamma^t``-weighted). ``entropy_score=True`` also adds
    the score-function term for how earlier actions change which states are
    visited; with it the estimator is unbiased for the full objective.
    """
    if alpha == 0:
        return gpomdp(trajs, policy, gamma, weights)
    batch = as_batch(trajs)
    m, H = batch.mask.shape
    w = _trajectory_weights(m, weights)
    disc = discount_weights(gamma, H)
    z, p, onehot = _logit_terms(batch, policy)
    logp = log_softmax(z)
    ent = -(p * logp).sum(axis=1)

    to_go = _reverse_cumsum(batch.rewards * disc)
    if entropy_score:
        ent_grid = np.zeros((m, H))
        ent_grid[batch.mask] = ent
        # entropy at s_t depends on actions strictly before t
        ent_to_go = _reverse_cumsum(ent_grid * disc)
        to_go[:, :-1] += alpha * ent_to_go[:, 1:]
    to_go *= w[:, None]
    step_w = (disc[None, :] * w[:, None])[batch.mask]

    dlogits = (to_go[batch.mask][:, None] * (onehot - p)
               + (alpha * step_w)[:, None] * (-p * (logp + ent[:, None])))
    return _estimate(policy.backward(batch.obs[batch.mask], dlogits), m)


# --- exact oracles on the two-step tree ------------------------------------

def _sigmoid(u: float) -> float:
    return 0.5 * (1.0 + np.tanh(0.5 * u))


def _binary_entropy(p: float) -> float:
    return float(-sum(q * np.log(q) for q in (p, 1.0 - p) if q > 0.0))


def _require_tree(env, policy):
    if not isinstance(env, TwoStep):
        raise UsageError("exact two-step oracles need the two-step tree environment")
    if env.max_horizon < 2:
        raise UsageError("exact two-step oracles need a horizon of at least 2")
    if not isinstance(policy, TreePolicy):
        raise InputError("closed-form two-step oracles take a TreePolicy")


def exact_value_twostep(env, tree_policy: TreePolicy, gamma: float, alpha: float = 0.0) -> float:
    """``V(rho) + alpha * sum_t gamma^t E[H(pi(.|s_t))]`` in closed form."""
    _require_tree(env, tree_policy)
    x, y, z = tree_policy.params
    a, b, c = _sigmoid(x), _sigmoid(y), _sigmoid(z)
    r_ll, r_lr, r_rl, r_rr = env.leaf_rewards
    left = b * r_ll + (1 - b) * r_lr
    right = c * r_rl + (1 - c) * r_rr
    value = gamma * (a * left + (1 - a) * right)
    ent = _binary_entropy(a) + gamma * (a * _binary_entropy(b) + (1 - a) * _binary_entropy(c))
    return float(value + alpha * ent)


def exact_gradient_twostep(env, tree_policy: TreePolicy, gamma: float,
                           alpha: float = 0.0) -> np.ndarray:
    """Closed-form gradient of :func:`exact_value_twostep` w.r.t. ``(x, y, z)``."""
    _require_tree(env, tree_policy)
    x, y, z = tree_policy.params
    a, b, c = _sigmoid(x), _sigmoid(y), _sigmoid(z)
    da, db, dc = a * (1 - a), b * (1 - b), c * (1 - c)
    r_ll, r_lr, r_rl, r_rr = env.leaf_rewards
    left = b * r_ll + (1 - b) * r_lr
    right = c * r_rl + (1 - c) * r_rr
    g_value = gamma * np.array([
        da * (left - right),
        a * db * (r_ll - r_lr),
        (1 - a) * dc * (r_rl - r_rr),
    ])
    # d/du of the binary entropy of sigmoid(u) is -u * sigmoid'(u)
    hb, hc = _binary_entropy(b), _binary_entropy(c)
    g_ent = np.array([
        -x * da + gamma * da * (hb - hc),
        gamma * a * (-y * db),
        gamma * (1 - a) * (-z * dc),
    ])
    return g_value + alpha * g_ent


def enumerated_objective(env, policy: SoftmaxPolicy, gamma: float, alpha: float = 0.0) -> float:
    """Exact objective for any policy on the tree, by weighting all 4 paths."""
    paths = enumerate_trajectories(env, policy, gamma)
    trajs = [t for t, _, _ in paths]
    probs = np.array([p for _, p, _ in paths])
    return estimate_objective(trajs, policy, gamma, alpha, weights=probs).l_hat


def enumerated_gradient(env, policy: SoftmaxPolicy, gamma: float, alpha: float = 0.0,
                        entropy_score: bool = True) -> np.ndarray:
    """Probability-weighted sampled-estimator gradient over all 4 paths."""
    paths = enumerate_trajectories(env, policy, gamma)
    trajs = [t for t, _, _ in paths]
    probs = np.array([p for _, p, _ in paths])
    return objective_gradient(trajs, policy, gamma, alpha, entropy_score, weights=probs).grad


# --- explosion probe ---------------------------------------------------------

class ProbeResult(NamedTuple):
    ratios: np.ndarray       # (V* - V_hat) / ||grad V_hat||^2 per update
    value_sq_norms: np.ndarray
    params: np.ndarray       # (iters + 1, n_params)


def explosion_probe(env, policy: SoftmaxPolicy, trajectory, gamma: float, alpha: float,
                    v_star: float, iters: int, c: float = 1.0, gamma_b: float = 1.0,
                    entropy_score: bool = False) -> ProbeResult:
    """Repeatedly ascend on one fixed trajectory and track the Polyak ratio.

    Each update ascends the objective gradient with a capped Polyak step
    ``min((V* - L_hat) / (c ||grad L_hat||^2), gamma_b)``. The tracked ratio uses
    the value part only, ``(V* - V_hat) / ||grad V_hat||^2``, which is the
    quantity that blows up when the sampled path becomes near-deterministic.
    """
    batch = as_batch([trajectory])
    ratios, norms, history = [], [], [policy.params.copy()]
    for _ in range(iters):
        v_part = gpomdp(batch, policy, gamma)
        v_hat = estimate_objective(batch, policy, gamma, 0.0).v_hat
        ratios.append((v_star - v_hat) / v_part.sq_norm if v_part.sq_norm > 0 else np.inf)
        norms.append(v_part.sq_norm)
        est = estimate_objective(batch, policy, gamma, alpha)
        g = objective_gradient(batch, policy, gamma, alpha, entropy_score)
        if g.sq_norm == 0.0 or est.l_hat >= v_star:
            step = 0.0
        else:
            step = rl_sps_max(v_star, est.l_hat, g.sq_norm, c, gamma_b).gamma
        policy = policy.with_params(policy.params + step * g.grad)
        history.append(policy.params.copy())
    return ProbeResult(np.array(ratios), np.array(norms), np.array(history))
