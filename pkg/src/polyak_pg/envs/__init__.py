from ..exceptions import ConfigError
from .base import Env, EnvSpec, StepResult
from .classic import Acrobot, CartPole
from .datasets import (LinearSeparableDataset, make_linearly_separable, read_dataset_csv,
                       write_dataset_csv)
from .two_step import LEAF_NAMES, TwoStep, TwoStepSpec, enumerate_trajectories

ENVIRONMENTS = {"cartpole": CartPole, "acrobot": Acrobot, "twostep": TwoStep}


def make_env(name: str, **kwargs) -> Env:
    """Build an environment by name (``cartpole``, ``acrobot``, ``twostep``)."""
    try:
        cls = ENVIRONMENTS[name.lower()]
    except KeyError:
        raise ConfigError(f"unknown environment {name!r}; "
                          f"choose from {sorted(ENVIRONMENTS)}") from None
    return cls(**kwargs)


__all__ = [
    "Acrobot", "CartPole", "ENVIRONMENTS", "Env", "EnvSpec", "LEAF_NAMES",
    "LinearSeparableDataset", "StepResult", "enumerate_trajectories", "TwoStep", "TwoStepSpec", "make_env",
    "make_linearly_separable", "read_dataset_csv", "write_dataset_csv",
]
