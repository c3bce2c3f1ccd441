"""Bilinear regression oracle with epsilon-greedy exploration over a barycentric spanner."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from ..core import CB, BasePolicy, Context
from ..exceptions import ConfigurationError, TrainingError
from .reduction import ActionEmbeddingReducer
from .spanner import compute_spanner


def bilinear_predict(W, phi_a, phi_x, clamp=True):
    """``<phi_a, W phi_x>``, optionally clamped to [0, 1].

    Broadcasts: ``phi_a`` may be ``(n_actions, d_a)`` and ``phi_x`` ``(n, d_x)``,
    giving an ``(n, n_actions)`` matrix.
    """
    phi_a = np.asarray(phi_a, dtype=float)
    phi_x = np.asarray(phi_x, dtype=float)
    W = np.asarray(W, dtype=float)
    if phi_a.shape[-1] != W.shape[0] or phi_x.shape[-1] != W.shape[1]:
        raise ConfigurationError(f"W is {W.shape} but features are {phi_a.shape[-1]} and {phi_x.shape[-1]}")
    if phi_a.ndim == phi_x.ndim == 1:
        out = float(phi_a @ W @ phi_x)
    else:
        out = np.atleast_2d(phi_x) @ W.T @ np.atleast_2d(phi_a).T
    return np.clip(out, 0.0, 1.0) if clamp else out


def squared_loss_grad(W, phi_a, phi_x, loss):
    """Gradient in W of 0.5 * (<phi_a, W phi_x> - loss)^2."""
    residual = phi_a @ W @ phi_x - loss
    return residual * np.outer(phi_a, phi_x)


class SpannerGreedy(BaseEstimator, BasePolicy):
    """Contextual bandit learner: bilinear loss model, greedy with spanner exploration.

    With probability ``epsilon`` the action is drawn uniformly from a
    C-approximate barycentric spanner of the action embeddings; otherwise
    the action with the lowest predicted (clamped) loss is played, ties to
    the lowest id. The loss model ``f(x, a) = <phi(a), W phi(x)>`` is fit by
    plain SGD on ``0.5 * (f - loss)^2``, one example at a time.

    Parameters
    ----------
    epsilon : float
        Exploration probability.
    C : float
        Spanner approximation factor.
    learning_rate : float
        SGD step size.
    fit_intercept : bool
        Append a constant 1 to both context and action features.
    n_components : int or None
        If set, action embeddings are first reduced to this many dimensions
        with ``ActionEmbeddingReducer``.
    clamp : bool
        Clamp predictions to [0, 1] when selecting actions.
    """

    group = CB

    def __init__(self, epsilon=0.05, C=2.0, learning_rate=0.05, fit_intercept=True,
                 n_components=None, clamp=True):
        self.epsilon = epsilon
        self.C = C
        self.learning_rate = learning_rate
        self.fit_intercept = fit_intercept
        self.n_components = n_components
        self.clamp = clamp

    def _features(self, Z):
        if self.fit_intercept:
            return np.hstack([Z, np.ones((Z.shape[0], 1))])
        return Z

    def fit(self, action_embeddings, context_dim):
        """Prepare action features, the exploration spanner and a zero model."""
        if not 0.0 <= self.epsilon <= 1.0:
            raise ConfigurationError(f"epsilon must lie in [0, 1], got {self.epsilon}")
        if self.learning_rate <= 0:
            raise ConfigurationError("learning_rate must be positive")
        A = check_array(action_embeddings, dtype=float)
        if self.n_components is not None and self.n_components < A.shape[1]:
            self.reducer_ = ActionEmbeddingReducer(self.n_components).fit(A)
            A = self.reducer_.transform(A)
        self.spanner_ = compute_spanner(A, self.C)
        self.action_features_ = self._features(A)
        self.context_dim = int(context_dim)
        self.n_actions = A.shape[0]
        self.W_ = np.zeros((self.action_features_.shape[1], self.context_dim + int(self.fit_intercept)))
        self.n_updates_ = 0
        return self

    def _context_features(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.context_dim:
            raise ConfigurationError(f"contexts have dimension {X.shape[1]}, model expects {self.context_dim}")
        return self._features(X)

    def predict_loss(self, X, clamp=None):
        """Predicted loss of every action, shape ``(n_contexts, n_actions)``."""
        check_is_fitted(self, "W_")
        Fx = self._context_features(X)
        clamp = self.clamp if clamp is None else clamp
        return bilinear_predict(self.W_, self.action_features_, Fx, clamp)

    def predict(self, X):
        """Greedy (exploit-only) action ids for a batch of contexts."""
        # argmin takes the first minimum, i.e. the lowest id on ties
        return np.argmin(self.predict_loss(X), axis=1)

    def select(self, X, rng):
        """Actions with spanner exploration for a batch of contexts."""
        greedy = self.predict(X)
        out = greedy.copy()
        span = np.asarray(self.spanner_.indices)
        for j in range(len(out)):
            if rng.random() < self.epsilon:
                out[j] = span[rng.integers(len(span))]
        return out

    def act(self, context: Context, rng):
        return int(self.select(context.embedding[None, :], rng)[0])

    def partial_fit(self, X, actions, losses):
        """One SGD pass over ``(context, action, loss)`` triples, in order."""
        check_is_fitted(self, "W_")
        if len(actions) == 0:
            return self
        Fx = self._context_features(X)
        losses = np.asarray(losses, dtype=float)
        if np.any((losses < 0) | (losses > 1)):
            raise ConfigurationError("losses must lie in [0, 1]")
        W = self.W_
        for fx, a, loss in zip(Fx, actions, losses):
            fa = self.action_features_[a]
            with np.errstate(invalid="ignore", over="ignore"):
                grad = squared_loss_grad(W, fa, fx, loss)
            if not np.all(np.isfinite(grad)):
                raise TrainingError(f"non-finite gradient at update {self.n_updates_}")
            W -= self.learning_rate * grad
            self.n_updates_ += 1
        return self

    def update(self, contexts, actions, losses):
        X = np.array([c.embedding for c in contexts]) if len(contexts) else np.zeros((0, self.context_dim))
        return self.partial_fit(X, actions, losses)
