"""CartPole and Acrobot with the reference classic-control dynamics."""
from __future__ import annotations

import numpy as np

from . import constants as K
from .base import Env, EnvSpec


class CartPole(Env):
    """Cart-pole balancing; state ``(x, x_dot, theta, theta_dot)``.

    Action 0 pushes left, 1 pushes right. Reward is 1 for every step taken,
    including the one that ends the episode.
    """

    state_dim = 4

    def __init__(self, max_horizon: int = K.CARTPOLE_DEFAULT_HORIZON):
        self.spec = EnvSpec("cartpole", 4, 2, int(max_horizon))

    def initial_state(self, rng):
        return rng.uniform(K.CARTPOLE_INIT_LOW, K.CARTPOLE_INIT_HIGH, size=4)

    def is_terminal(self, state):
        state = np.asarray(state, dtype=float)
        x, theta = state[..., 0], state[..., 2]
        out = (np.abs(x) > K.CARTPOLE_X_LIMIT) | (np.abs(theta) > K.CARTPOLE_THETA_LIMIT)
        return bool(out) if out.ndim == 0 else out

    def step_batch(self, states, actions):
        x, x_dot, theta, theta_dot = np.asarray(states, dtype=float).T
        force = np.where(np.asarray(actions) == 1, K.CARTPOLE_FORCE_MAG, -K.CARTPOLE_FORCE_MAG)
        cos, sin = np.cos(theta), np.sin(theta)
        temp = (force + K.CARTPOLE_POLEMASS_LENGTH * theta_dot**2 * sin) / K.CARTPOLE_TOTAL_MASS
        theta_acc = (K.CARTPOLE_GRAVITY * sin - cos * temp) / (
            K.CARTPOLE_HALF_LENGTH
            * (4.0 / 3.0 - K.CARTPOLE_MASS_POLE * cos**2 / K.CARTPOLE_TOTAL_MASS))
        x_acc = temp - K.CARTPOLE_POLEMASS_LENGTH * theta_acc * cos / K.CARTPOLE_TOTAL_MASS
        # explicit Euler, positions first with the old velocities
        nxt = np.stack([
            x + K.CARTPOLE_TAU * x_dot,
            x_dot + K.CARTPOLE_TAU * x_acc,
            theta + K.CARTPOLE_TAU * theta_dot,
            theta_dot + K.CARTPOLE_TAU * theta_acc,
        ], axis=1)
        return nxt, np.ones(len(nxt)), self.is_terminal(nxt)


def _wrap(angle):
    return (angle + np.pi) % (2 * np.pi) - np.pi


class Acrobot(Env):
    """Two-link underactuated swing-up; state ``(th1, th2, dth1, dth2)``.

    Actions map to torques (-1, 0, +1) on the second joint. Reward is -1 per
    step until the tip rises one link length above the pivot, then 0.
    Observations are ``(cos th1, sin th1, cos th2, sin th2, dth1, dth2)``.
    """

    state_dim = 4

    def __init__(self, max_horizon: int = K.ACROBOT_DEFAULT_HORIZON):
        self.spec = EnvSpec("acrobot", 6, 3, int(max_horizon))

    def initial_state(self, rng):
        return rng.uniform(K.ACROBOT_INIT_LOW, K.ACROBOT_INIT_HIGH, size=4)

    def observe(self, state):
        s = np.asarray(state, dtype=float)
        return np.stack([np.cos(s[..., 0]), np.sin(s[..., 0]), np.cos(s[..., 1]),
                         np.sin(s[..., 1]), s[..., 2], s[..., 3]], axis=-1)

    def is_terminal(self, state):
        s = np.asarray(state, dtype=float)
        out = -np.cos(s[..., 0]) - np.cos(s[..., 1] + s[..., 0]) > 1.0
        return bool(out) if out.ndim == 0 else out

    @staticmethod
    def _derivs(s, torque):
        m1, m2 = K.ACROBOT_LINK_MASS_1, K.ACROBOT_LINK_MASS_2
        l1 = K.ACROBOT_LINK_LENGTH_1
        lc1, lc2 = K.ACROBOT_LINK_COM_POS_1, K.ACROBOT_LINK_COM_POS_2
        I1 = I2 = K.ACROBOT_LINK_MOI
        g = K.ACROBOT_GRAVITY
        th1, th2, dth1, dth2 = s.T
        d1 = m1 * lc1**2 + m2 * (l1**2 + lc2**2 + 2 * l1 * lc2 * np.cos(th2)) + I1 + I2
        d2 = m2 * (lc2**2 + l1 * lc2 * np.cos(th2)) + I2
        phi2 = m2 * lc2 * g * np.cos(th1 + th2 - np.pi / 2.0)
        phi1 = (-m2 * l1 * lc2 * dth2**2 * np.sin(th2)
                - 2 * m2 * l1 * lc2 * dth2 * dth1 * np.sin(th2)
                + (m1 * lc1 + m2 * l1) * g * np.cos(th1 - np.pi / 2.0) + phi2)
        ddth2 = (torque + d2 / d1 * phi1 - m2 * l1 * lc2 * dth1**2 * np.sin(th2) - phi2) / (
            m2 * lc2**2 + I2 - d2**2 / d1)
        ddth1 = -(d2 * ddth2 + phi1) / d1
        return np.stack([dth1, dth2, ddth1, ddth2], axis=1)

    @classmethod
    def integrate(cls, states, torque, dt=K.ACROBOT_DT):
        """One classical RK4 step without wrapping or velocity clipping."""
        s = np.asarray(states, dtype=float)
        k1 = cls._derivs(s, torque)
        k2 = cls._derivs(s + dt / 2.0 * k1, torque)
        k3 = cls._derivs(s + dt / 2.0 * k2, torque)
        k4 = cls._derivs(s + dt * k3, torque)
        return s + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)

    @staticmethod
    def energy(states) -> np.ndarray:
        """Total mechanical energy (kinetic + gravitational potential)."""
        m1, m2 = K.ACROBOT_LINK_MASS_1, K.ACROBOT_LINK_MASS_2
        l1 = K.ACROBOT_LINK_LENGTH_1
        lc1, lc2 = K.ACROBOT_LINK_COM_POS_1, K.ACROBOT_LINK_COM_POS_2
        I1 = I2 = K.ACROBOT_LINK_MOI
        g = K.ACROBOT_GRAVITY
        th1, th2, dth1, dth2 = np.atleast_2d(np.asarray(states, dtype=float)).T
        d1 = m1 * lc1**2 + m2 * (l1**2 + lc2**2 + 2 * l1 * lc2 * np.cos(th2)) + I1 + I2
        d2 = m2 * (lc2**2 + l1 * lc2 * np.cos(th2)) + I2
        d3 = m2 * lc2**2 + I2
        kinetic = 0.5 * (d1 * dth1**2 + 2 * d2 * dth1 * dth2 + d3 * dth2**2)
        potential = -g * (m1 * lc1 * np.cos(th1)
                          + m2 * (l1 * np.cos(th1) + lc2 * np.cos(th1 + th2)))
        return kinetic + potential

    def step_batch(self, states, actions):
        torque = np.asarray(K.ACROBOT_TORQUES)[np.asarray(actions, dtype=int)]
        ns = self.integrate(states, torque)
        ns[:, 0] = _wrap(ns[:, 0])
        ns[:, 1] = _wrap(ns[:, 1])
        ns[:, 2] = np.clip(ns[:, 2], -K.ACROBOT_MAX_VEL_1, K.ACROBOT_MAX_VEL_1)
        ns[:, 3] = np.clip(ns[:, 3], -K.ACROBOT_MAX_VEL_2, K.ACROBOT_MAX_VEL_2)
        done = self.is_terminal(ns)
        return ns, np.where(done, 0.0, -1.0), done
