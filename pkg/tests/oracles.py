"""Reference computations that share no code with the package under test."""

import itertools
import math

import numpy as np


def two_policy_lambda(p, eta, lbar):
    """Closed-form normalizer for two policies.

    With u_i = 1/p_i + eta*lbar_i and mu = eta*lambda, the condition
    1/(u0 - mu) + 1/(u1 - mu) = 1 is the quadratic
    mu^2 - (u0 + u1 - 2) mu + (u0 u1 - u0 - u1) = 0; the admissible root
    keeps both denominators positive, i.e. the smaller one.
    """
    u0 = 1.0 / p[0] + eta * lbar[0]
    u1 = 1.0 / p[1] + eta * lbar[1]
    b = u0 + u1 - 2.0
    c = u0 * u1 - u0 - u1
    mu = (b - math.sqrt(b * b - 4.0 * c)) / 2.0
    lam = mu / eta
    new = np.array([1.0 / (u0 - mu), 1.0 / (u1 - mu)])
    return lam, new


def bisect_lambda(inv_p, eta, lbar, iters=400):
    """Plain bisection on the normalizer, bracketed below the first pole."""
    inv_p, lbar = np.asarray(inv_p, float), np.asarray(lbar, float)

    def g(lam):
        d = inv_p + eta * (lbar - lam)
        if np.any(d <= 0):
            return math.inf
        return float(np.sum(1.0 / d)) - 1.0

    lo, hi = float(lbar.min()), float(lbar.max())
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if g(mid) > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def normalizer_residual(inv_p, eta, lbar, lam):
    d = np.asarray(inv_p, float) + eta * (np.asarray(lbar, float) - lam)
    return abs(math.fsum(1.0 / d) - 1.0)


def coefficients(E, indices):
    """Coefficients expressing every row of E in the rows E[indices] (least squares, exact when spanned)."""
    B = E[list(indices)]
    sol, *_ = np.linalg.lstsq(B.T, E.T, rcond=None)
    return sol.T


def best_pair_by_determinant(E):
    """Exhaustive maximal |det| subset of size 2."""
    best, arg = -1.0, None
    for i, j in itertools.combinations(range(len(E)), 2):
        d = abs(np.linalg.det(E[[i, j]]))
        if d > best:
            best, arg = d, (i, j)
    return arg, best


def rank_k_approx(E, k):
    U, s, Vt = np.linalg.svd(E, full_matrices=False)
    return (U[:, :k] * s[:k]) @ Vt[:k]


def central_difference(f, W, h=1e-6):
    G = np.zeros_like(W)
    for idx in np.ndindex(W.shape):
        Wp, Wm = W.copy(), W.copy()
        Wp[idx] += h
        Wm[idx] -= h
        G[idx] = (f(Wp) - f(Wm)) / (2 * h)
    return G


def mc_bound(p, n, k=3.0):
    """k standard errors of a Bernoulli(p) frequency over n draws."""
    return k * math.sqrt(p * (1 - p) / n)
