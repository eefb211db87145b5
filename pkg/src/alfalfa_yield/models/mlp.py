"""Fully connected regression network trained with minibatch SGD or Adam.

ReLU hidden layers, identity output, loss = mean squared error / 2.
"""

from __future__ import annotations

import numpy as np

from ..errors import NonFiniteLossError
from .base import Regressor


def _forward(coefs, intercepts, X):
    acts = [X]
    h = X
    last = len(coefs) - 1
    for i, (W, b) in enumerate(zip(coefs, intercepts)):
        h = h @ W + b
        if i < last:
            h = np.maximum(h, 0.0)
        acts.append(h)
    return acts


def loss_and_grad(coefs, intercepts, X, y):
    """Return (loss, coef_grads, intercept_grads) for one batch."""
    acts = _forward(coefs, intercepts, X)
    n = X.shape[0]
    out = acts[-1][:, 0]
    diff = out - y
    loss = 0.5 * float(diff @ diff) / n
    delta = (diff / n)[:, None]
    gW = [None] * len(coefs)
    gb = [None] * len(coefs)
    for i in range(len(coefs) - 1, -1, -1):
        gW[i] = acts[i].T @ delta
        gb[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ coefs[i].T) * (acts[i] > 0)
    return loss, gW, gb


class MLPRegressor(Regressor):
    """Multilayer perceptron regressor.

    ``learning_rate`` schedules apply to ``solver="sgd"`` (momentum 0.9):
    "constant", "invscaling" (init / sqrt(epoch)) and "adaptive" (divide by
    5 whenever the epoch loss fails to improve by ``tol`` for two epochs in
    a row; training stops once the rate drops below 1e-6).  Adam uses
    the constant initial rate.  Outside the adaptive schedule training
    stops after ``n_iter_no_change`` epochs without a ``tol`` improvement,
    or at ``max_epochs``.
    """

    family = "nn"

    def __init__(self, hidden_layer_sizes=(10,), solver="adam", learning_rate="constant",
                 learning_rate_init=0.001, random_state=0, max_epochs=500, batch_size=200,
                 momentum=0.9, beta_1=0.9, beta_2=0.999, epsilon=1e-8, tol=1e-4, n_iter_no_change=10):
        self.hidden_layer_sizes = hidden_layer_sizes
        self.solver = solver
        self.learning_rate = learning_rate
        self.learning_rate_init = learning_rate_init
        self.random_state = random_state
        self.max_epochs = max_epochs
        self.batch_size = batch_size
        self.momentum = momentum
        self.beta_1 = beta_1
        self.beta_2 = beta_2
        self.epsilon = epsilon
        self.tol = tol
        self.n_iter_no_change = n_iter_no_change

    @property
    def _layers(self):
        h = self.hidden_layer_sizes
        return (h,) if isinstance(h, int) else tuple(h)

    def initialize(self, n_features, rng):
        """Glorot-uniform weights and biases, bound sqrt(6 / (fan_in + fan_out))."""
        sizes = (n_features,) + self._layers + (1,)
        self.coefs_, self.intercepts_ = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            self.coefs_.append(rng.uniform(-bound, bound, (fan_in, fan_out)))
            self.intercepts_.append(rng.uniform(-bound, bound, fan_out))
        self.n_features_in_ = n_features

    def fit(self, X, y):
        # divergence surfaces as NonFiniteLossError, not as overflow warnings
        with np.errstate(over="ignore", invalid="ignore"):
            return self._fit(X, y)

    def _fit(self, X, y):
        if self.solver not in ("sgd", "adam"):
            raise ValueError(f"unknown solver {self.solver!r}")
        if self.learning_rate not in ("constant", "invscaling", "adaptive"):
            raise ValueError(f"unknown learning_rate {self.learning_rate!r}")
        X, y = self._validate_training(X, y)
        n = X.shape[0]
        rng = np.random.default_rng(self.random_state)
        self.initialize(X.shape[1], rng)
        params = self.coefs_ + self.intercepts_
        batch = min(self.batch_size, n)
        lr = self.learning_rate_init
        vel = [np.zeros_like(p) for p in params]
        m1 = [np.zeros_like(p) for p in params]
        m2 = [np.zeros_like(p) for p in params]
        step = 0
        best = np.inf
        no_improve = 0
        self.loss_curve_ = []
        schedule = self.learning_rate if self.solver == "sgd" else "constant"
        for epoch in range(1, self.max_epochs + 1):
            if schedule == "invscaling":
                lr = self.learning_rate_init / np.sqrt(epoch)
            perm = rng.permutation(n)
            total = 0.0
            for lo in range(0, n, batch):
                idx = perm[lo:lo + batch]
                loss, gW, gb = loss_and_grad(self.coefs_, self.intercepts_, X[idx], y[idx])
                if not np.isfinite(loss):
                    raise NonFiniteLossError(f"loss became {loss} in epoch {epoch}")
                total += loss * len(idx)
                grads = gW + gb
                step += 1
                if self.solver == "sgd":
                    for p, v, g in zip(params, vel, grads):
                        v *= self.momentum
                        v -= lr * g
                        p += v
                else:
                    lr_t = lr * np.sqrt(1 - self.beta_2 ** step) / (1 - self.beta_1 ** step)
                    for p, a, b, g in zip(params, m1, m2, grads):
                        a *= self.beta_1
                        a += (1 - self.beta_1) * g
                        b *= self.beta_2
                        b += (1 - self.beta_2) * g * g
                        p -= lr_t * a / (np.sqrt(b) + self.epsilon)
            epoch_loss = total / n
            if not np.isfinite(epoch_loss):
                raise NonFiniteLossError(f"loss became {epoch_loss} in epoch {epoch}")
            self.loss_curve_.append(epoch_loss)
            if epoch_loss > best - self.tol:
                no_improve += 1
            else:
                no_improve = 0
            best = min(best, epoch_loss)
            if schedule == "adaptive":
                if no_improve >= 2:
                    lr /= 5.0
                    no_improve = 0
                    if lr < 1e-6:
                        break
            elif no_improve >= self.n_iter_no_change:
                break
        self.n_epochs_ = len(self.loss_curve_)
        return self

    def _predict(self, X):
        return _forward(self.coefs_, self.intercepts_, X)[-1][:, 0]

    def _get_state(self):
        return {
            "n_features_in": self.n_features_in_,
            "coefs": [c.tolist() for c in self.coefs_],
            "intercepts": [b.tolist() for b in self.intercepts_],
        }

    def _set_state(self, state):
        self.n_features_in_ = state["n_features_in"]
        self.coefs_ = [np.asarray(c, dtype=float) for c in state["coefs"]]
        self.intercepts_ = [np.asarray(b, dtype=float) for b in state["intercepts"]]
