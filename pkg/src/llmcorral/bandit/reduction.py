from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_random_state

from ..exceptions import ConfigurationError, ConvergenceError


def top_right_singular_vectors(E, k, tol=1e-12, max_iter=20000, random_state=None):
    """Top-``k`` right singular vectors of ``E`` by orthogonal (subspace) iteration.

    Iterates ``Q <- qr(E^T E Q)`` and finishes with a Rayleigh-Ritz step so
    the columns come out ordered by singular value. Returns ``(V, s)`` with
    ``V`` of shape ``(d, k)``.
    """
    E = np.asarray(E, dtype=float)
    d = E.shape[1]
    G = E.T @ E
    scale = np.linalg.norm(G, 2) if G.size else 0.0
    if scale == 0.0:
        return np.eye(d)[:, :k], np.zeros(k)
    rng = check_random_state(random_state)
    Q, _ = np.linalg.qr(rng.standard_normal((d, k)))
    if k == d:
        # the whole space is invariant; only the Ritz rotation is needed
        max_iter = 1
    for _ in range(max_iter):
        Z = G @ Q
        H = Q.T @ Z
        if np.linalg.norm(Z - Q @ H) <= tol * scale:
            break
        Q, _ = np.linalg.qr(Z)
    else:
        raise ConvergenceError(f"orthogonal iteration did not converge in {max_iter} iterations")
    evals, W = np.linalg.eigh(Q.T @ G @ Q)
    order = np.argsort(evals)[::-1]
    V = Q @ W[:, order]
    # deterministic sign: largest-magnitude entry of each column positive
    signs = np.sign(V[np.abs(V).argmax(axis=0), np.arange(k)])
    signs[signs == 0] = 1
    return V * signs, np.sqrt(np.clip(evals[order], 0, None))


class ActionEmbeddingReducer(TransformerMixin, BaseEstimator):
    """Project action embeddings onto their top right singular directions.

    Parameters
    ----------
    n_components : int
        Target dimension (50 for the text-action setups).
    tol : float
        Relative residual tolerance of the invariant-subspace test.
    max_iter : int
        Iteration cap; exceeding it raises ``ConvergenceError``.
    """

    def __init__(self, n_components=50, tol=1e-12, max_iter=20000, random_state=0):
        self.n_components = n_components
        self.tol = tol
        self.max_iter = max_iter
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_array(X, dtype=float)
        n, d = X.shape
        if not 1 <= self.n_components <= min(n, d):
            raise ConfigurationError(f"n_components={self.n_components} must lie in [1, min{X.shape}]")
        self.components_, self.singular_values_ = top_right_singular_vectors(
            X, self.n_components, self.tol, self.max_iter, self.random_state
        )
        self.n_features_in_ = d
        return self

    def transform(self, X):
        check_is_fitted(self, "components_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ConfigurationError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return X @ self.components_

    def inverse_transform(self, Z):
        check_is_fitted(self, "components_")
        return np.asarray(Z, dtype=float) @ self.components_.T
