"""scikit-learn style plug-in CATE estimators over the model zoo.

Estimators follow the fit/predict/get_params convention so they compose with
the wider ecosystem (cloning, grid search over init params). `fit` takes
(X, t, y); `predict` returns the plug-in effect mu1_hat - mu0_hat.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError
from sklearn.utils.validation import check_array, check_consistent_length, column_or_1d

from . import zoo
from .autograd import SeededRng
from .data import ObservationalData
from .training import TrainConfig, train


def check_X_t_y(X, t, y):
    """Validate and coerce estimator inputs: finite 2-D X, binary t, real y."""
    X = check_array(X, dtype=np.float64, ensure_all_finite=True)
    t = column_or_1d(t).astype(np.float64)
    y = column_or_1d(y).astype(np.float64)
    check_consistent_length(X, t, y)
    if not np.isin(t, (0.0, 1.0)).all():
        raise ValueError("t must be binary (0/1)")
    if not np.isfinite(y).all():
        raise ValueError("y contains non-finite values")
    return X, t, y


class CateEstimator(BaseEstimator):
    """Neural plug-in treatment effect estimator.

    Parameters mirror TrainConfig plus the architecture spec. `family`
    selects the network wiring; `adversarial=True` adds the gradient
    reversal layer in front of the treatment classifier ("+" variants).
    """

    def __init__(self, family="tarnet", adversarial=False, batch_size=100,
                 lr=1e-4, l2_lambda1=1e-4, ortho_lambda2=0.01, max_epochs=1000,
                 patience=50, val_fraction=0.30, alpha=None, lambda0=1.0,
                 gamma=1, mmd_weight=1.0, tr_weight=1.0, tr_epsilon_init=0.0,
                 rep_layers=None, head_layers=None, random_state=0):
        self.family = family
        self.adversarial = adversarial
        self.batch_size = batch_size
        self.lr = lr
        self.l2_lambda1 = l2_lambda1
        self.ortho_lambda2 = ortho_lambda2
        self.max_epochs = max_epochs
        self.patience = patience
        self.val_fraction = val_fraction
        self.alpha = alpha
        self.lambda0 = lambda0
        self.gamma = gamma
        self.mmd_weight = mmd_weight
        self.tr_weight = tr_weight
        self.tr_epsilon_init = tr_epsilon_init
        self.rep_layers = rep_layers
        self.head_layers = head_layers
        self.random_state = random_state

    def _spec(self):
        return zoo.EstimatorSpec(
            family=self.family, adversarial=self.adversarial,
            rep_layers=self.rep_layers or {}, head_layers=self.head_layers or {},
            mmd_weight=self.mmd_weight, tr_weight=self.tr_weight,
            tr_epsilon_init=self.tr_epsilon_init)

    def _config(self):
        return TrainConfig(
            batch_size=self.batch_size, lr=self.lr, l2_lambda1=self.l2_lambda1,
            ortho_lambda2=self.ortho_lambda2, max_epochs=self.max_epochs,
            patience=self.patience, val_fraction=self.val_fraction,
            alpha=self.alpha, lambda0=self.lambda0, gamma=self.gamma,
            seed=self.random_state)

    def fit(self, X, t, y, X_val=None, t_val=None, y_val=None):
        """Train on (X, t, y); validation data is split off internally unless
        passed explicitly."""
        X, t, y = check_X_t_y(X, t, y)
        config = self._config()
        if X_val is not None:
            X_val, t_val, y_val = check_X_t_y(X_val, t_val, y_val)
            train_data = ObservationalData(X, t, y)
            val_data = ObservationalData(X_val, t_val, y_val)
        else:
            n_val = int(np.floor(self.val_fraction * X.shape[0]))
            if n_val < 1 or n_val >= X.shape[0]:
                raise ValueError(
                    f"cannot carve a validation set of {n_val} rows out of {X.shape[0]}")
            perm = SeededRng(self.random_state).child(2).permutation(X.shape[0])
            val_data = ObservationalData(X[perm[:n_val]], t[perm[:n_val]], y[perm[:n_val]])
            train_data = ObservationalData(X[perm[n_val:]], t[perm[n_val:]], y[perm[n_val:]])

        rng = SeededRng(self.random_state).child(0)
        self.model_ = zoo.build_estimator(self._spec(), X.shape[1], rng)
        self.report_ = train(self.model_, train_data, val_data, config)
        self.n_features_in_ = X.shape[1]
        return self

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise NotFittedError("this CateEstimator is not fitted; call fit first")

    def predict(self, X):
        """Plug-in CATE estimate, mu1_hat - mu0_hat."""
        self._check_fitted()
        X = check_array(X, dtype=np.float64)
        bundle = zoo.predict(self.model_, X)
        return bundle.mu1_hat - bundle.mu0_hat

    predict_cate = predict

    def predict_outcomes(self, X):
        """(mu0_hat, mu1_hat) for both treatment arms."""
        self._check_fitted()
        X = check_array(X, dtype=np.float64)
        bundle = zoo.predict(self.model_, X)
        return bundle.mu0_hat, bundle.mu1_hat

    def predict_propensity(self, X):
        self._check_fitted()
        if not self.model_.spec.has_propensity_head:
            raise ValueError(f"{self.family} has no propensity head")
        X = check_array(X, dtype=np.float64)
        return zoo.predict(self.model_, X).pi_hat

    @property
    def diverged_(self):
        self._check_fitted()
        return self.report_.diverged


def estimator_from_name(name, **params):
    """Build a CateEstimator from its canonical benchmark name (e.g. 'snet+')."""
    family, adversarial = zoo.ESTIMATOR_NAMES.get(name, (None, None))
    if family is None:
        raise ValueError(f"unknown estimator {name!r}; expected one of {sorted(zoo.ESTIMATOR_NAMES)}")
    return CateEstimator(family=family, adversarial=adversarial, **params)
