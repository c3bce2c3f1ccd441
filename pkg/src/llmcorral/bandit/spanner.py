"""C-approximate barycentric spanners via determinant swaps."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..exceptions import ConfigurationError


@dataclass(frozen=True)
class SpannerSet:
    indices: tuple
    C: float

    def __len__(self):
        return len(self.indices)


def _row_space_coordinates(E, tol=None):
    # express every row in an orthonormal basis of the row space so a
    # rank-deficient action set becomes full rank in R^r
    _, s, vt = np.linalg.svd(E, full_matrices=False)
    if tol is None:
        tol = s.max() * max(E.shape) * np.finfo(float).eps if s.size else 0.0
    r = int((s > tol).sum())
    if r == 0:
        raise ConfigurationError("all action embeddings are zero; no spanner exists")
    return E @ vt[:r].T


def spanner_coefficients(E, indices):
    """Coefficients expressing every row of ``E`` in the spanner basis.

    Returns an ``(n_actions, r)`` matrix.
    """
    E = np.asarray(E, dtype=float)
    Z = _row_space_coordinates(E)
    X = Z[list(indices)].T
    return np.linalg.solve(X, Z.T).T


def compute_spanner(E, C=2.0) -> SpannerSet:
    """Select ``rank(E)`` rows of ``E`` forming a C-approximate barycentric spanner.

    Starting from the identity, each basis slot is filled with the action
    that maximizes |det|; then any action that would multiply |det| by more
    than ``C`` in some slot is swapped in until none does. The ratio
    det(X with column i replaced by a) / det(X) equals the i-th coordinate
    of ``a`` in basis X, so every step is one linear solve.
    """
    if C < 1:
        raise ConfigurationError(f"C must be >= 1, got {C}")
    E = np.asarray(E, dtype=float)
    if E.ndim != 2 or E.shape[0] == 0:
        raise ConfigurationError("action embeddings must be a non-empty 2-d array")
    Z = _row_space_coordinates(E)
    n, r = Z.shape

    X = np.eye(r)
    chosen = [-1] * r
    for i in range(r):
        coef = np.linalg.solve(X, Z.T)  # (r, n)
        a = int(np.argmax(np.abs(coef[i])))
        X[:, i] = Z[a]
        chosen[i] = a

    # each swap multiplies |det| by more than C >= 1 over a finite set, so
    # this terminates; the cap is a guard against round-off cycling
    for _ in range(100 * n * r + 100):
        coef = np.abs(np.linalg.solve(X, Z.T))
        i, a = np.unravel_index(int(np.argmax(coef)), coef.shape)
        if coef[i, a] <= C * (1 + 1e-12):
            break
        X[:, i] = Z[a]
        chosen[i] = int(a)
    else:
        raise ConfigurationError("spanner swap loop did not terminate")
    return SpannerSet(tuple(sorted(chosen)), float(C))
