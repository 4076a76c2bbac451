"""Parameter update rules: SGD, Adam and Polyak-type step sizes.

Direction is explicit everywhere: RL ascends on the objective, the finite-sum
problems descend on the loss.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .exceptions import ContractViolation, DegenerateGradientError, InputError, NumericError

ASCEND = "ascend"
DESCEND = "descend"


def _sign(direction: str) -> float:
    if direction == ASCEND:
        return 1.0
    if direction == DESCEND:
        return -1.0
    raise InputError(f"direction must be 'ascend' or 'descend', got {direction!r}")


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise NumericError("non-finite value passed to an update rule")


def sgd_step(theta, grad, lr: float, direction: str = DESCEND) -> np.ndarray:
    if not lr >= 0:
        raise InputError("learning rate must be non-negative")
    theta = np.asarray(theta, dtype=float)
    grad = np.asarray(grad, dtype=float)
    _check_finite(theta, grad)
    return theta + _sign(direction) * lr * grad


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros(cls, n: int, **kwargs) -> "AdamState":
        return cls(np.zeros(n), np.zeros(n), **kwargs)


def adam_step(state: AdamState, theta, grad, lr: float,
              direction: str = DESCEND) -> tuple[AdamState, np.ndarray]:
    """Bias-corrected Adam; returns a new state and the updated parameters."""
    if not lr >= 0:
        raise InputError("learning rate must be non-negative")
    theta = np.asarray(theta, dtype=float)
    grad = np.asarray(grad, dtype=float)
    _check_finite(theta, grad)
    b1, b2 = state.beta1, state.beta2
    t = state.t + 1
    m = b1 * state.m + (1.0 - b1) * grad
    v = b2 * state.v + (1.0 - b2) * grad * grad
    m_hat = m / (1.0 - b1**t)
    v_hat = v / (1.0 - b2**t)
    theta = theta + _sign(direction) * (lr * m_hat / (np.sqrt(v_hat) + state.eps))
    return AdamState(m, v, t, b1, b2, state.eps), theta


class StepSizeRecord(NamedTuple):
    gamma: float
    capped: bool
    numerator: float
    denom: float  # c * ||grad||^2


def polyak_step(f_val: float, f_star: float, sq_norm: float) -> float:
    """Classic Polyak step ``(f - f*) / ||grad||^2``."""
    if sq_norm == 0:
        raise DegenerateGradientError("zero gradient norm in Polyak step")
    if sq_norm < 0:
        raise InputError("squared norm must be non-negative")
    if f_val < f_star:
        raise ContractViolation(f"f_val={f_val} below f_star={f_star}")
    return (f_val - f_star) / sq_norm


def sps_max(f_val: float, f_star: float, sq_norm: float, c: float,
            gamma_b: float) -> StepSizeRecord:
    """``min((f - f*) / (c ||grad||^2), gamma_b)``."""
    if not c > 0 or not gamma_b > 0:
        raise InputError("c and gamma_b must be positive")
    if sq_norm == 0:
        raise DegenerateGradientError("zero gradient norm in SPS_max")
    if sq_norm < 0:
        raise InputError("squared norm must be non-negative")
    if f_val < f_star:
        raise ContractViolation(f"f_val={f_val} below f_star={f_star}")
    numerator = f_val - f_star
    denom = c * sq_norm
    ratio = numerator / denom
    capped = ratio > gamma_b
    return StepSizeRecord(float(gamma_b if capped else ratio), bool(capped),
                          float(numerator), float(denom))


def rl_sps_max(v_high: float, v_low: float, sq_norm: float, c: float,
               gamma_b: float) -> StepSizeRecord:
    """Capped Polyak step for ascent, with ``v_high`` standing in for V*."""
    if v_high < v_low:
        raise ContractViolation(f"v_high={v_high} below v_low={v_low}")
    return sps_max(v_high, v_low, sq_norm, c, gamma_b)
