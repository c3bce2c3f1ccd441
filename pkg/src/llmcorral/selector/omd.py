"""Log-barrier online mirror descent over base policies (the CORRAL update)."""

from __future__ import annotations

import math

import numpy as np

from ..core import SamplingDistribution
from ..exceptions import ConfigurationError, SolverError

RESIDUAL_TOL = 1e-10
MAX_ITER = 640
# importance weights above this are clipped before solving
WEIGHT_CAP = 1e12
_EPS = np.finfo(float).eps


def _normalizer(inv_p, eta, lbar):
    inv_p = [float(v) for v in inv_p]
    lbar = [float(v) for v in lbar]
    terms = list(zip(inv_p, lbar))

    def f(lam):
        s = []
        for ip, lb in terms:
            den = ip + eta * (lb - lam)
            if den <= 0.0:
                return math.inf
            s.append(1.0 / den)
        return math.fsum(s) - 1.0

    return f


def lambda_residual(inv_p, eta, lbar, lam) -> float:
    """|sum_i 1 / (1/p_i + eta (lbar_i - lam)) - 1|."""
    return abs(_normalizer(inv_p, eta, lbar)(lam))


def _brent(f, a, b, fa, fb, ftol, maxiter):
    # Brent-Dekker: keeps a sign-change bracket [xcur, xblk], tries inverse
    # quadratic or secant steps and falls back to bisection. fb may be +inf
    # (the upper end sits on a pole); interpolation is skipped then.
    xpre, xcur = a, b
    fpre, fcur = fa, fb
    xblk = fblk = spre = scur = 0.0
    for _ in range(maxiter):
        if fpre != 0 and fcur != 0 and (fpre < 0) != (fcur < 0):
            xblk, fblk = xpre, fpre
            spre = scur = xcur - xpre
        if abs(fblk) < abs(fcur):
            xpre, xcur, xblk = xcur, xblk, xcur
            fpre, fcur, fblk = fcur, fblk, fcur
        if abs(fcur) <= ftol:
            return xcur, fcur
        delta = 2.0 * _EPS * max(abs(xcur), 1e-300)
        sbis = (xblk - xcur) / 2.0
        if abs(sbis) < delta:
            return xcur, fcur
        finite = math.isfinite(fpre) and math.isfinite(fblk)
        if finite and abs(spre) > delta and abs(fcur) < abs(fpre):
            if xpre == xblk:
                stry = -fcur * (xcur - xpre) / (fcur - fpre)
            else:
                dpre = (fpre - fcur) / (xpre - xcur)
                dblk = (fblk - fcur) / (xblk - xcur)
                stry = -fcur * (fblk * dblk - fpre * dpre) / (dblk * dpre * (fblk - fpre))
            if 2.0 * abs(stry) < min(abs(spre), 3.0 * abs(sbis) - delta):
                spre, scur = scur, stry
            else:
                spre = scur = sbis
        else:
            spre = scur = sbis
        xpre, fpre = xcur, fcur
        if abs(scur) > delta:
            xcur += scur
        else:
            xcur += delta if sbis > 0 else -delta
        fcur = f(xcur)
    return xcur, fcur


def solve_lambda(inv_p, eta, lbar, tol=RESIDUAL_TOL, maxiter=MAX_ITER) -> float:
    """Find the normalizing constant of the log-barrier step.

    Returns ``lam`` in ``[min(lbar), max(lbar)]`` with
    ``sum_i 1 / (inv_p[i] + eta * (lbar[i] - lam)) == 1`` up to ``tol``.
    The sum is increasing in ``lam``, non-positive at ``min(lbar)`` and
    non-negative (possibly through a pole) at ``max(lbar)``.
    """
    inv_p = np.asarray(inv_p, dtype=float)
    lbar = np.asarray(lbar, dtype=float)
    if eta <= 0:
        raise ConfigurationError(f"eta must be positive, got {eta}")
    if inv_p.shape != lbar.shape or inv_p.ndim != 1:
        raise ConfigurationError("inv_p and lbar must be 1-d vectors of equal length")
    lo, hi = float(lbar.min()), float(lbar.max())
    f = _normalizer(inv_p, eta, lbar)
    f_lo = f(lo)
    if abs(f_lo) <= tol or lo == hi:
        if abs(f_lo) > tol:
            raise SolverError(f"degenerate bracket [{lo}, {hi}] with residual {f_lo:.3e}")
        return lo
    # the first denominator to hit zero bounds the feasible interval
    pole = float(np.min(inv_p / eta + lbar))
    hi = min(hi, pole)
    f_hi = f(hi)
    if abs(f_hi) <= tol:
        return hi
    if not (f_lo < 0 < f_hi):
        raise SolverError(f"root not bracketed: f({lo})={f_lo:.3e}, f({hi})={f_hi:.3e}")
    lam, res = _brent(f, lo, hi, f_lo, f_hi, tol * 1e-2, maxiter)
    if not abs(res) <= tol:
        raise SolverError(f"lambda residual {res:.3e} above {tol:.1e} after {maxiter} iterations")
    return lam


def importance_weighted_loss(n, index, loss, prob):
    """Unbiased loss estimate: ``loss / prob`` at ``index``, zero elsewhere."""
    if prob <= 0:
        raise ConfigurationError(f"sampled probability of policy {index} must be positive, got {prob}")
    lbar = np.zeros(n)
    lbar[index] = min(loss / prob, WEIGHT_CAP)
    return lbar


def corral_update(probs, index, loss, eta=0.05, sampled_prob=None):
    """One log-barrier OMD step on the unsmoothed distribution ``probs``.

    ``sampled_prob`` is the probability with which ``index`` was actually
    drawn (after smoothing and budget gating); it defaults to
    ``probs[index]``. Returns ``(new_probs, lam)``.
    """
    p = np.asarray(probs, dtype=float)
    if not 0.0 <= loss <= 1.0:
        raise ConfigurationError(f"loss must lie in [0, 1], got {loss}")
    if p[index] <= 0:
        raise ConfigurationError(f"policy {index} has zero probability and cannot have been sampled")
    q = p[index] if sampled_prob is None else sampled_prob
    if loss == 0.0:
        return p.copy(), 0.0
    lbar = importance_weighted_loss(len(p), index, loss, q)
    inv_p = 1.0 / p
    lam = solve_lambda(inv_p, eta, lbar)
    new = 1.0 / (inv_p + eta * (lbar - lam))
    return new / new.sum(), lam


class CorralStrategy:
    """Learning-based sampling strategy: p_1 uniform, then OMD steps."""

    learns = True

    def __init__(self, eta=0.05):
        if eta <= 0:
            raise ConfigurationError(f"eta must be positive, got {eta}")
        self.eta = eta
        self.probs = None
        self.groups = None
        self.last_lambda = None

    def reset(self, groups):
        self.groups = tuple(groups)
        self.probs = np.full(len(groups), 1.0 / len(groups))
        return self

    def distribution(self, t=None) -> SamplingDistribution:
        return SamplingDistribution(self.probs, self.groups)

    def update(self, index, loss, sampled_prob=None):
        self.probs, self.last_lambda = corral_update(self.probs, index, loss, self.eta, sampled_prob)
        return self
