"""Policy gradient with the stochastic Polyak step size."""
from .baselines import BaselineConfig, train_policy_gradient
from .envs import Acrobot, CartPole, TwoStep, enumerate_trajectories, make_env
from .estimators import PolicyGradient, PolyakLogisticRegression, TwinPolyakPolicyGradient
from .exceptions import (ConfigError, ContractViolation, DegenerateGradientError, InputError,
                         NumericError, UsageError)
from .finite_sum import FiniteSumProblem, OptMethod, loss_and_grad, run_baseline, run_twin
from .gradients import exact_gradient_twostep, gpomdp, objective_gradient
from .optim import AdamState, adam_step, polyak_step, rl_sps_max, sgd_step, sps_max
from .policies import MlpPolicy, TreePolicy, load_checkpoint, save_checkpoint
from .rollout import estimate_objective, evaluate_greedy, sample_trajectories
from .twin import PolyakConfig, twin_init, twin_rl_iteration, twin_train

__all__ = [
    "Acrobot", "AdamState", "BaselineConfig", "CartPole", "ConfigError", "ContractViolation",
    "DegenerateGradientError", "FiniteSumProblem", "InputError", "MlpPolicy", "NumericError",
    "OptMethod", "PolicyGradient", "PolyakConfig", "PolyakLogisticRegression", "TreePolicy",
    "TwinPolyakPolicyGradient", "TwoStep", "UsageError", "adam_step", "enumerate_trajectories",
    "estimate_objective", "evaluate_greedy", "exact_gradient_twostep", "gpomdp",
    "load_checkpoint", "loss_and_grad", "make_env", "objective_gradient", "polyak_step",
    "rl_sps_max", "run_baseline", "run_twin", "sample_trajectories", "save_checkpoint",
    "sgd_step", "sps_max", "train_policy_gradient", "twin_init", "twin_rl_iteration",
    "twin_train",
]
