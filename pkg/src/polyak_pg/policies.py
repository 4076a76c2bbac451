"""Softmax policies with analytic score and entropy gradients.

Two architectures share one interface:

* :class:`MlpPolicy` -- one tanh hidden layer followed by a linear softmax head.
* :class:`TreePolicy` -- the three-parameter policy of the two-step tree
  environment. Its observation is a one-hot code of the internal node
  (root, left child, right child) and ``P(left) = sigmoid(param[node])``.

Parameters are stored as a single flat, read-only float64 vector. Policies are
immutable; :meth:`SoftmaxPolicy.with_params` builds an updated copy.

Flat layout of an MLP (row-major blocks, in this order)::

    W1  (input_dim, hidden_dim)
    b1  (hidden_dim,)
    W2  (hidden_dim, num_actions)
    b2  (num_actions,)
"""
from __future__ import annotations

from pathlib import Path
from typing import NamedTuple

import numpy as np

from .exceptions import InputError

_CHECKPOINT_MAGIC = "# polyak_pg policy checkpoint v1"


class Architecture(NamedTuple):
    kind: str  # "mlp" or "tree"
    input_dim: int
    hidden_dim: int
    num_actions: int

    @property
    def n_params(self) -> int:
        if self.kind == "tree":
            return 3
        return ((self.input_dim + 1) * self.hidden_dim
                + (self.hidden_dim + 1) * self.num_actions)


TREE_ARCHITECTURE = Architecture("tree", 3, 0, 2)


class ActionDistribution(NamedTuple):
    probs: np.ndarray
    logits: np.ndarray

    def entropy(self) -> float:
        return entropy(self)


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def entropy(dist) -> float | np.ndarray:
    """Shannon entropy in nats; ``0 log 0`` is taken as 0.

    Accepts an :class:`ActionDistribution` or a probability array (last axis is
    the action axis).
    """
    p = np.asarray(dist.probs if isinstance(dist, ActionDistribution) else dist,
                   dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0.0, -p * np.log(p), 0.0)
    h = terms.sum(axis=-1)
    return float(h) if np.ndim(h) == 0 else h


def _as_param_vector(values, n: int) -> np.ndarray:
    theta = np.array(values, dtype=float).ravel()
    if theta.size != n:
        raise InputError(f"expected {n} parameters, got {theta.size}")
    if not np.all(np.isfinite(theta)):
        raise InputError("parameter vector contains NaN or Inf")
    theta.setflags(write=False)
    return theta


class SoftmaxPolicy:
    """Shared machinery; subclasses provide ``_logits`` and ``_backward``."""

    architecture: Architecture
    params: np.ndarray

    @property
    def input_dim(self) -> int:
        return self.architecture.input_dim

    @property
    def num_actions(self) -> int:
        return self.architecture.num_actions

    @property
    def n_params(self) -> int:
        return self.architecture.n_params

    def with_params(self, theta) -> "SoftmaxPolicy":
        return unflatten(theta, self.architecture)

    def _check_obs(self, obs) -> np.ndarray:
        obs = np.asarray(obs, dtype=float)
        if obs.ndim not in (1, 2) or obs.shape[-1] != self.input_dim:
            raise InputError(
                f"observation of shape {obs.shape} does not match input_dim={self.input_dim}")
        return obs

    def logits(self, obs) -> np.ndarray:
        """Logits for one observation ``(d,)`` or a batch ``(n, d)``."""
        obs = self._check_obs(obs)
        if obs.ndim == 1:
            return self._logits(obs[None, :])[0]
        return self._logits(obs)

    def probs(self, obs) -> np.ndarray:
        return softmax(self.logits(obs))

    def forward(self, obs) -> ActionDistribution:
        z = self.logits(obs)
        return ActionDistribution(softmax(z), z)

    def backward(self, obs, dlogits) -> np.ndarray:
        """Vector-Jacobian product: ``sum_n J_n^T dlogits[n]`` over a batch."""
        obs = np.atleast_2d(self._check_obs(obs))
        dlogits = np.atleast_2d(np.asarray(dlogits, dtype=float))
        return self._backward(obs, dlogits)

    def greedy_action(self, obs) -> np.ndarray | int:
        # argmax returns the first maximum -> ties go to the lowest index
        a = np.argmax(self.logits(obs), axis=-1)
        return int(a) if np.ndim(a) == 0 else a

    def __eq__(self, other) -> bool:
        return (type(self) is type(other)
                and self.architecture == other.architecture
                and np.array_equal(self.params, other.params))

    def __hash__(self) -> int:
        return hash((self.architecture, self.params.tobytes()))


class MlpPolicy(SoftmaxPolicy):
    """Single-hidden-layer tanh network with a softmax head."""

    def __init__(self, input_dim: int, num_actions: int, hidden_dim: int = 128,
                 params=None):
        if input_dim < 1 or hidden_dim < 1 or num_actions < 2:
            raise InputError("need input_dim >= 1, hidden_dim >= 1, num_actions >= 2")
        self.architecture = Architecture("mlp", int(input_dim), int(hidden_dim),
                                         int(num_actions))
        n = self.architecture.n_params
        self.params = _as_param_vector(np.zeros(n) if params is None else params, n)
        d, h, a = input_dim, hidden_dim, num_actions
        i = 0
        self._W1 = self.params[i:i + d * h].reshape(d, h); i += d * h
        self._b1 = self.params[i:i + h]; i += h
        self._W2 = self.params[i:i + h * a].reshape(h, a); i += h * a
        self._b2 = self.params[i:i + a]

    @classmethod
    def initialize(cls, input_dim: int, num_actions: int, hidden_dim: int = 128,
                   std: float = 0.1, seed=None) -> "MlpPolicy":
        """Gaussian weights with standard deviation ``std``, zero biases."""
        rng = np.random.default_rng(seed)
        d, h, a = input_dim, hidden_dim, num_actions
        theta = np.concatenate([
            rng.normal(0.0, std, d * h), np.zeros(h),
            rng.normal(0.0, std, h * a), np.zeros(a),
        ])
        return cls(input_dim, num_actions, hidden_dim, theta)

    def _logits(self, obs: np.ndarray) -> np.ndarray:
        hidden = np.tanh(obs @ self._W1 + self._b1)
        return hidden @ self._W2 + self._b2

    def _backward(self, obs: np.ndarray, dlogits: np.ndarray) -> np.ndarray:
        hidden = np.tanh(obs @ self._W1 + self._b1)
        g_W2 = hidden.T @ dlogits
        g_b2 = dlogits.sum(axis=0)
        dpre = (dlogits @ self._W2.T) * (1.0 - hidden * hidden)
        g_W1 = obs.T @ dpre
        g_b1 = dpre.sum(axis=0)
        return np.concatenate([g_W1.ravel(), g_b1, g_W2.ravel(), g_b2])

    def __repr__(self) -> str:
        d, h, a = self.input_dim, self.architecture.hidden_dim, self.num_actions
        return f"MlpPolicy(input_dim={d}, hidden_dim={h}, num_actions={a})"


class TreePolicy(SoftmaxPolicy):
    """``(x, y, z)`` sigmoid policy; logits at node k are ``(params[k], 0)``."""

    architecture = TREE_ARCHITECTURE

    def __init__(self, x: float = 0.0, y: float = 0.0, z: float = 0.0):
        self.params = _as_param_vector([x, y, z], 3)

    @property
    def x(self) -> float:
        return float(self.params[0])

    @property
    def y(self) -> float:
        return float(self.params[1])

    @property
    def z(self) -> float:
        return float(self.params[2])

    def _logits(self, obs: np.ndarray) -> np.ndarray:
        out = np.zeros((obs.shape[0], 2))
        out[:, 0] = obs @ self.params
        return out

    def _backward(self, obs: np.ndarray, dlogits: np.ndarray) -> np.ndarray:
        return obs.T @ dlogits[:, 0]

    def __repr__(self) -> str:
        return f"TreePolicy(x={self.x!r}, y={self.y!r}, z={self.z!r})"


def forward(policy: SoftmaxPolicy, obs) -> ActionDistribution:
    return policy.forward(obs)


def log_prob_gradient(policy: SoftmaxPolicy, obs, action: int) -> np.ndarray:
    """Gradient of ``log pi(action | obs)`` w.r.t. the flat parameters."""
    if not 0 <= int(action) < policy.num_actions or int(action) != action:
        raise InputError(f"action {action!r} outside [0, {policy.num_actions})")
    p = policy.probs(obs)
    dlogits = -p
    dlogits[int(action)] += 1.0
    return policy.backward(obs, dlogits)


def entropy_gradient(policy: SoftmaxPolicy, obs) -> np.ndarray:
    """Gradient of the action entropy at a fixed observation."""
    z = policy.logits(obs)
    p = softmax(z)
    logp = log_softmax(z)
    h = -(p * logp).sum()
    return policy.backward(obs, -p * (logp + h))


def flatten(policy: SoftmaxPolicy) -> np.ndarray:
    return policy.params.copy()


def unflatten(theta, architecture: Architecture) -> SoftmaxPolicy:
    architecture = Architecture(*architecture)
    if architecture.kind == "tree":
        return TreePolicy(*_as_param_vector(theta, 3))
    if architecture.kind == "mlp":
        return MlpPolicy(architecture.input_dim, architecture.num_actions,
                         architecture.hidden_dim, theta)
    raise InputError(f"unknown policy kind {architecture.kind!r}")


def perturb_init(policy: SoftmaxPolicy, epsilon: float, seed=None) -> SoftmaxPolicy:
    """Copy of ``policy`` with i.i.d. N(0, epsilon^2) noise on every parameter."""
    if epsilon < 0:
        raise InputError("epsilon must be non-negative")
    if epsilon == 0:
        return policy.with_params(policy.params)
    rng = np.random.default_rng(seed)
    return policy.with_params(policy.params + rng.normal(0.0, epsilon, policy.n_params))


def make_policy(kind: str, input_dim: int, num_actions: int, hidden_dim: int = 128,
                std: float = 0.1, seed=None) -> SoftmaxPolicy:
    if kind == "tree":
        if (input_dim, num_actions) != (3, 2):
            raise InputError("tree policy only fits the two-step environment")
        return TreePolicy()
    if kind == "mlp":
        return MlpPolicy.initialize(input_dim, num_actions, hidden_dim, std, seed)
    raise InputError(f"unknown policy kind {kind!r}")


def save_checkpoint(policy: SoftmaxPolicy, path) -> None:
    """Write ``policy`` as text.

    Layout: magic line, then ``kind``, ``input_dim``, ``hidden_dim``,
    ``num_actions``, ``n_params`` as ``key=value`` lines, then one parameter
    per line in flat order (``repr`` floats, exact round trip).
    """
    arch = policy.architecture
    lines = [_CHECKPOINT_MAGIC, f"kind={arch.kind}", f"input_dim={arch.input_dim}",
             f"hidden_dim={arch.hidden_dim}", f"num_actions={arch.num_actions}",
             f"n_params={arch.n_params}"]
    lines.extend(repr(float(v)) for v in policy.params)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_checkpoint(path) -> SoftmaxPolicy:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != _CHECKPOINT_MAGIC:
        raise InputError(f"{path}: not a policy checkpoint")
    header = dict(line.split("=", 1) for line in lines[1:6])
    try:
        arch = Architecture(header["kind"], int(header["input_dim"]),
                            int(header["hidden_dim"]), int(header["num_actions"]))
        n = int(header["n_params"])
    except (KeyError, ValueError) as exc:
        raise InputError(f"{path}: malformed header") from exc
    values = [float(v) for v in lines[6:] if v.strip()]
    if len(values) != n or n != arch.n_params:
        raise InputError(f"{path}: expected {arch.n_params} values, found {len(values)}")
    return unflatten(values, arch)
