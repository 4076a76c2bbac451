"""Physical constants of the classic-control tasks.

Values follow the reference CartPole-v1 / Acrobot-v1 implementations in
OpenAI Gym. They are external reference values, not tuned.
"""
import math

# CartPole
CARTPOLE_GRAVITY = 9.8
CARTPOLE_MASS_CART = 1.0
CARTPOLE_MASS_POLE = 0.1
CARTPOLE_TOTAL_MASS = CARTPOLE_MASS_CART + CARTPOLE_MASS_POLE
CARTPOLE_HALF_LENGTH = 0.5
CARTPOLE_POLEMASS_LENGTH = CARTPOLE_MASS_POLE * CARTPOLE_HALF_LENGTH
CARTPOLE_FORCE_MAG = 10.0
CARTPOLE_TAU = 0.02
CARTPOLE_THETA_LIMIT = 12 * 2 * math.pi / 360
CARTPOLE_X_LIMIT = 2.4
CARTPOLE_INIT_LOW, CARTPOLE_INIT_HIGH = -0.05, 0.05
CARTPOLE_DEFAULT_HORIZON = 200

# Acrobot ("book" dynamics, RK4 over one dt)
ACROBOT_DT = 0.2
ACROBOT_LINK_LENGTH_1 = 1.0
ACROBOT_LINK_MASS_1 = 1.0
ACROBOT_LINK_MASS_2 = 1.0
ACROBOT_LINK_COM_POS_1 = 0.5
ACROBOT_LINK_COM_POS_2 = 0.5
ACROBOT_LINK_MOI = 1.0
ACROBOT_GRAVITY = 9.8
ACROBOT_MAX_VEL_1 = 4 * math.pi
ACROBOT_MAX_VEL_2 = 9 * math.pi
ACROBOT_TORQUES = (-1.0, 0.0, 1.0)
ACROBOT_INIT_LOW, ACROBOT_INIT_HIGH = -0.1, 0.1
ACROBOT_DEFAULT_HORIZON = 500

# Two-step tree
TWOSTEP_DEFAULT_LEAF_REWARDS = (0.1, 0.2, 0.3, 1.0)
