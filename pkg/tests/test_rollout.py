import math

import numpy as np
import pytest

from polyak_pg.envs import CartPole, TwoStep, enumerate_trajectories
from polyak_pg.exceptions import InputError
from polyak_pg.policies import MlpPolicy, TreePolicy
from polyak_pg.rollout import (Trajectory, as_batch, discounted_return, estimate_objective,
                               evaluate_greedy, greedy_returns, read_trajectory_dump,
                               sample_trajectories, sample_trajectory, write_trajectory_dump)


def _traj(rewards, obs_dim=3):
    T = len(rewards)
    return Trajectory(np.zeros((T, obs_dim)), np.zeros(T, dtype=int), np.array(rewards, float))


def test_discounted_return():
    assert discounted_return(_traj([1, 1, 1]), 0.9) == pytest.approx(2.71, abs=1e-15)
    assert discounted_return(_traj([3.0, 5.0, 7.0]), 0.0) == 3.0
    with pytest.raises(InputError):
        discounted_return(_traj([1.0]), 1.5)


def test_undiscounted_cartpole_return_is_length():
    traj = sample_trajectory(CartPole(), MlpPolicy(4, 2, 8), 200, np.random.default_rng(0))
    assert discounted_return(traj, 1.0) == len(traj)


def test_saturated_tree_policy_takes_left_left(two_step):
    traj = sample_trajectory(two_step, TreePolicy(20.0, 20.0, 0.0), 2, np.random.default_rng(0))
    assert traj.actions.tolist() == [0, 0]
    assert traj.rewards.tolist() == [0.0, 0.1]


def test_horizon_truncates():
    batch = sample_trajectories(CartPole(), MlpPolicy(4, 2, 8), 30, 7, seed=0)
    assert batch.lengths.max() <= 7
    long_ones = batch.lengths == 7
    assert np.array_equal(batch.truncated, long_ones)
    with pytest.raises(InputError):
        sample_trajectories(CartPole(), MlpPolicy(4, 2, 8), 1, 0, seed=0)


def test_per_trajectory_streams_do_not_depend_on_batch_size():
    pol = MlpPolicy.initialize(4, 2, 8, seed=0)
    small = sample_trajectories(CartPole(), pol, 5, 50, seed=9)
    large = sample_trajectories(CartPole(), pol, 12, 50, seed=9)
    for a, b in zip(small.trajectories(), large.trajectories()[:5]):
        np.testing.assert_array_equal(a.actions, b.actions)
        np.testing.assert_array_equal(a.obs, b.obs)


def test_batch_round_trip():
    batch = sample_trajectories(CartPole(), MlpPolicy(4, 2, 8), 6, 40, seed=2)
    again = as_batch(batch.trajectories())
    width = again.mask.shape[1]
    for field in ("actions", "rewards", "mask"):
        np.testing.assert_array_equal(getattr(again, field), getattr(batch, field)[:, :width])
    np.testing.assert_array_equal(again.truncated, batch.truncated)


def test_estimate_objective_basic_contracts(two_step):
    traj = sample_trajectory(two_step, TreePolicy(1.0, -1.0, 0.5), 2, np.random.default_rng(4))
    est = estimate_objective([traj], TreePolicy(1.0, -1.0, 0.5), 0.9, 0.0)
    assert est.l_hat == est.v_hat == discounted_return(traj, 0.9)
    assert est.num_trajectories == 1
    est = estimate_objective([traj], TreePolicy(1.0, -1.0, 0.5), 0.9, 0.3)
    assert est.l_hat == est.v_hat + 0.3 * est.entropy_hat
    with pytest.raises(InputError):
        estimate_objective([], TreePolicy(), 0.9, 0.0)


def test_uniform_tree_enumeration(two_step):
    gamma = 0.9
    paths = enumerate_trajectories(two_step, TreePolicy(), gamma)
    est = estimate_objective([t for t, _, _ in paths], TreePolicy(), gamma, 0.5,
                             weights=[p for _, p, _ in paths])
    assert est.v_hat == pytest.approx(gamma * np.mean(two_step.leaf_rewards), abs=1e-15)
    assert est.entropy_hat == pytest.approx(math.log(2) * (1 + gamma), abs=1e-15)


def _analytic_objective(env, pol, gamma, alpha):
    # independent hand expansion of sum_tau P(tau) [R(tau) + alpha sum_t gamma^t H_t]
    sig = lambda u: 1 / (1 + math.exp(-u))
    h = lambda p: -p * math.log(p) - (1 - p) * math.log(1 - p)
    a, b, c = (sig(u) for u in pol.params)
    r = env.leaf_rewards
    total = 0.0
    for pa, pb, leaf, hb in ((a, b, 0, h(b)), (a, 1 - b, 1, h(b)),
                             (1 - a, c, 2, h(c)), (1 - a, 1 - c, 3, h(c))):
        total += pa * pb * (gamma * r[leaf] + alpha * (h(a) + gamma * hb))
    return total


@pytest.mark.parametrize("seed", range(10))
def test_weighted_enumeration_equals_analytic_objective(two_step, seed):
    rng = np.random.default_rng(seed)
    pol = TreePolicy(*rng.normal(0, 2, 3))
    gamma, alpha = 0.95, 0.2
    paths = enumerate_trajectories(two_step, pol, gamma)
    est = estimate_objective([t for t, _, _ in paths], pol, gamma, alpha,
                             weights=[p for _, p, _ in paths])
    assert abs(est.l_hat - _analytic_objective(two_step, pol, gamma, alpha)) < 1e-10


def test_v_hat_is_unbiased(two_step):
    pol = TreePolicy(0.3, -0.8, 1.1)
    gamma = 0.99
    paths = enumerate_trajectories(two_step, pol, gamma)
    exact = sum(p * ret for _, p, ret in paths)
    means = np.array([estimate_objective(sample_trajectories(two_step, pol, 50, 2, seed=s),
                                         pol, gamma, 0.0).v_hat for s in range(200)])
    assert abs(means.mean() - exact) < 3 * means.std(ddof=1) / math.sqrt(len(means))


def test_entropy_hat_bounds():
    gamma, H = 0.9, 30
    batch = sample_trajectories(CartPole(), MlpPolicy(4, 2, 8), 20, H, seed=1)
    est = estimate_objective(batch, MlpPolicy(4, 2, 8), gamma, 1.0)
    assert 0 <= est.entropy_hat <= math.log(2) * (1 - gamma**H) / (1 - gamma) + 1e-12


def test_greedy_evaluation_on_tree(two_step):
    assert evaluate_greedy(two_step, TreePolicy(-20.0, 0.0, -20.0), [0, 1, 2]) == 1.0
    assert evaluate_greedy(two_step, TreePolicy(20.0, 20.0, 0.0), [0]) == 0.1
    # tie at every node -> lowest action index (left)
    assert evaluate_greedy(two_step, TreePolicy(), [0]) == 0.1


def _always_left_length(state, horizon=200):
    x, x_dot, th, th_dot = state
    for t in range(1, horizon + 1):
        cos, sin = math.cos(th), math.sin(th)
        temp = (-10.0 + 0.05 * th_dot**2 * sin) / 1.1
        th_acc = (9.8 * sin - cos * temp) / (0.5 * (4 / 3 - 0.1 * cos**2 / 1.1))
        x_acc = temp - 0.05 * th_acc * cos / 1.1
        x, x_dot = x + 0.02 * x_dot, x_dot + 0.02 * x_acc
        th, th_dot = th + 0.02 * th_dot, th_dot + 0.02 * th_acc
        if abs(x) > 2.4 or abs(th) > 12 * 2 * math.pi / 360:
            return t
    return horizon


def test_greedy_zero_policy_cartpole_is_deterministic():
    env, seeds = CartPole(), [100, 101, 102]
    returns = greedy_returns(env, MlpPolicy(4, 2, 8), seeds)
    expected = [_always_left_length(env.reset(s)) for s in seeds]
    np.testing.assert_array_equal(returns, expected)
    assert evaluate_greedy(env, MlpPolicy(4, 2, 8), seeds) == np.mean(expected)
    pol = MlpPolicy.initialize(4, 2, 16, seed=3)
    assert evaluate_greedy(env, pol, seeds) == evaluate_greedy(env, pol, seeds)


def test_trajectory_dump_round_trip(tmp_path):
    pol = MlpPolicy.initialize(4, 2, 8, seed=0)
    batch = sample_trajectories(CartPole(), pol, 3, 15, seed=4)
    path = tmp_path / "trajs.tsv"
    write_trajectory_dump(batch, path)
    first = path.read_text().splitlines()[0].split("\t")
    assert len(first) == 4 + 2
    back = read_trajectory_dump(path)
    assert len(back) == 3
    for a, b in zip(batch.trajectories(), back):
        np.testing.assert_array_equal(a.obs, b.obs)
        np.testing.assert_array_equal(a.actions, b.actions)
        np.testing.assert_array_equal(a.rewards, b.rewards)
