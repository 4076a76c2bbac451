"""scikit-learn style wrappers around the functional API.

``PolyakLogisticRegression`` is a regular classifier (fit on X, y).  The two
policy-gradient estimators are fit on an environment instead of a dataset and
``predict`` maps observations to greedy actions.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .baselines import BaselineConfig, train_policy_gradient
from .envs import make_env
from .exceptions import InputError
from .finite_sum import FiniteSumProblem, OptMethod, run_baseline
from .twin import PolyakConfig, default_architecture, twin_best_policy, twin_train


class PolyakLogisticRegression(ClassifierMixin, BaseEstimator):
    """Binary logistic regression trained with single-sample Polyak-type steps.

    ``method`` is ``"twin"`` (no step-size hyper-parameters), ``"sps"``,
    ``"sps_max"`` or ``"sgd"``.  Set ``hidden_layer_size`` for a one-hidden-layer
    tanh network instead of a linear model.
    """

    def __init__(self, method="twin", lr=0.1, c=1.0, gamma_b=1.0, hidden_layer_size=None,
                 fit_intercept=False, max_iter=20000, record_every=10, random_state=None):
        self.method = method
        self.lr = lr
        self.c = c
        self.gamma_b = gamma_b
        self.hidden_layer_size = hidden_layer_size
        self.fit_intercept = fit_intercept
        self.max_iter = max_iter
        self.record_every = record_every
        self.random_state = random_state

    def _augment(self, X):
        if self.fit_intercept:
            return np.hstack([X, np.ones((X.shape[0], 1))])
        return X

    def _opt_method(self) -> OptMethod:
        if self.method == "sgd":
            return OptMethod("sgd", lr=self.lr)
        if self.method == "sps":
            return OptMethod("sps", c=self.c)
        if self.method == "sps_max":
            return OptMethod("sps_max", c=self.c, gamma_b=self.gamma_b)
        return OptMethod(self.method)

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        self.classes_, codes = np.unique(y, return_inverse=True)
        if len(self.classes_) != 2:
            raise InputError(f"need exactly two classes, got {len(self.classes_)}")
        kind = "linear" if self.hidden_layer_size is None else "mlp"
        self.problem_ = FiniteSumProblem(self._augment(X), 2.0 * codes - 1.0, kind,
                                         self.hidden_layer_size or 16)
        series = run_baseline(self.problem_, self._opt_method(), self.max_iter,
                              self.random_state, self.record_every)
        self.params_ = series.params
        self.loss_curve_ = list(series.f_full)
        self.n_iter_ = self.max_iter
        self.n_features_in_ = X.shape[1]
        if kind == "linear":
            self.coef_ = self.params_[:X.shape[1]].copy()
            self.intercept_ = float(self.params_[-1]) if self.fit_intercept else 0.0
        return self

    def decision_function(self, X):
        check_is_fitted(self, "params_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise InputError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return self.problem_.scores(self.params_, self._augment(X))

    def predict_proba(self, X):
        z = self.decision_function(X)
        p1 = 0.5 * (1.0 + np.tanh(0.5 * z))
        return np.column_stack([1.0 - p1, p1])

    def predict(self, X):
        scores = self.decision_function(X)
        return self.classes_[(scores > 0).astype(int)]


class _PolicyEstimator(BaseEstimator):
    def _env(self, env):
        return make_env(env) if isinstance(env, str) else env

    def predict(self, obs):
        """Greedy action for each observation row."""
        check_is_fitted(self, "policy_")
        obs = check_array(np.atleast_2d(obs))
        return self.policy_.greedy_action(obs)

    def predict_proba(self, obs):
        check_is_fitted(self, "policy_")
        return self.policy_.probs(check_array(np.atleast_2d(obs)))


class TwinPolyakPolicyGradient(_PolicyEstimator):
    """Twin-model policy gradient with the capped stochastic Polyak step."""

    def __init__(self, c=5.0, gamma_b=1.0, alpha=0.01, m=50, horizon=None, gamma=0.99,
                 hidden_dim=128, init_epsilon=1e-3, stop_tol=1e-4, stop_patience=10,
                 max_iter=300, entropy_score=False, eval_seeds=(1000, 1001, 1002),
                 random_state=0):
        self.c = c
        self.gamma_b = gamma_b
        self.alpha = alpha
        self.m = m
        self.horizon = horizon
        self.gamma = gamma
        self.hidden_dim = hidden_dim
        self.init_epsilon = init_epsilon
        self.stop_tol = stop_tol
        self.stop_patience = stop_patience
        self.max_iter = max_iter
        self.entropy_score = entropy_score
        self.eval_seeds = eval_seeds
        self.random_state = random_state

    def fit(self, env, y=None):
        env = self._env(env)
        cfg = PolyakConfig(c=self.c, gamma_b=self.gamma_b, alpha=self.alpha, m=self.m,
                           H=self.horizon, gamma=self.gamma, init_epsilon=self.init_epsilon,
                           stop_tol=self.stop_tol, stop_patience=self.stop_patience,
                           max_iters=self.max_iter, entropy_score=self.entropy_score)
        arch = default_architecture(env, "mlp", self.hidden_dim)
        seeds = list(self.eval_seeds) if self.eval_seeds is not None else None
        self.state_, self.history_ = twin_train(env, cfg, self.random_state or 0, arch, seeds)
        theta = (twin_best_policy(self.state_, env, seeds) if seeds else self.state_.theta1)
        self.policy_ = self.state_.policy1.with_params(theta)
        self.n_iter_ = len(self.history_)
        return self


class PolicyGradient(_PolicyEstimator):
    """Fixed learning-rate policy gradient with Adam or plain SGD ascent."""

    def __init__(self, optimizer="adam", lr=1e-2, alpha=0.0, m=50, horizon=None, gamma=0.99,
                 hidden_dim=128, max_iter=300, entropy_score=False, eval_seeds=None,
                 random_state=0):
        self.optimizer = optimizer
        self.lr = lr
        self.alpha = alpha
        self.m = m
        self.horizon = horizon
        self.gamma = gamma
        self.hidden_dim = hidden_dim
        self.max_iter = max_iter
        self.entropy_score = entropy_score
        self.eval_seeds = eval_seeds
        self.random_state = random_state

    def fit(self, env, y=None):
        env = self._env(env)
        cfg = BaselineConfig(self.optimizer, self.lr, self.alpha, self.m, self.horizon,
                             self.gamma, self.max_iter, self.entropy_score)
        arch = default_architecture(env, "mlp", self.hidden_dim)
        seeds = list(self.eval_seeds) if self.eval_seeds is not None else None
        self.policy_, self.history_ = train_policy_gradient(env, cfg, self.random_state or 0,
                                                            arch, seeds)
        self.n_iter_ = len(self.history_)
        return self
