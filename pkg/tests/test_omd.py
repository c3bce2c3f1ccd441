import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from llmcorral.core import CB, LLM
from llmcorral.exceptions import ConfigurationError
from llmcorral.selector import (
    CorralStrategy,
    corral_update,
    importance_weighted_loss,
    lambda_residual,
    solve_lambda,
)
from oracles import bisect_lambda, normalizer_residual, two_policy_lambda


def test_two_policy_equal_start():
    p, lam = corral_update([0.5, 0.5], 0, 1.0, eta=0.05)
    ref_lam, ref_p = two_policy_lambda([0.5, 0.5], 0.05, [2.0, 0.0])
    assert lam == pytest.approx(0.97500, abs=1e-4)
    assert lam == pytest.approx(ref_lam, abs=1e-10)
    np.testing.assert_allclose(p, [0.48751, 0.51249], atol=1e-4)
    np.testing.assert_allclose(p, ref_p, atol=1e-12)


def test_two_policy_skewed_start():
    # second policy sampled with probability 0.1
    p, lam = corral_update([0.9, 0.1], 1, 1.0, eta=0.05)
    ref_lam, ref_p = two_policy_lambda([0.9, 0.1], 0.05, [0.0, 10.0])
    assert lam == pytest.approx(0.11561, abs=1e-4)
    assert lam == pytest.approx(ref_lam, abs=1e-10)
    np.testing.assert_allclose(p, [0.90471, 0.09529], atol=1e-4)
    np.testing.assert_allclose(p, ref_p, atol=1e-12)


def test_zero_loss_is_identity():
    p0 = np.array([0.2, 0.3, 0.5])
    p, lam = corral_update(p0, 2, 0.0)
    assert lam == 0.0
    assert np.array_equal(p, p0)


def test_solve_lambda_degenerate():
    assert solve_lambda(np.array([2.0, 2.0]), 0.05, np.zeros(2)) == 0.0


def test_solve_lambda_quadratic_case():
    lam = solve_lambda(np.array([2.0, 2.0]), 0.05, np.array([2.0, 0.0]))
    assert lam == pytest.approx(0.975, abs=1e-4)


def test_solve_lambda_three_policies_residual():
    inv_p, lbar = np.full(3, 3.0), np.array([3.0, 0.0, 0.0])
    lam = solve_lambda(inv_p, 0.05, lbar)
    assert normalizer_residual(inv_p, 0.05, lbar, lam) <= 1e-10
    assert lam == pytest.approx(bisect_lambda(inv_p, 0.05, lbar), abs=1e-9)
    assert lambda_residual(inv_p, 0.05, lbar, lam) <= 1e-10


def test_matches_scipy_brentq():
    rng = np.random.default_rng(3)
    for _ in range(50):
        m = rng.integers(2, 9)
        p = rng.dirichlet(np.ones(m))
        i = rng.integers(m)
        lbar = importance_weighted_loss(m, i, rng.random(), p[i])
        inv_p = 1 / p
        eta = rng.uniform(0.01, 1.0)
        pole = np.min(inv_p / eta + lbar)
        hi = min(lbar.max(), pole - 1e-12)
        g = lambda lam: np.sum(1 / (inv_p + eta * (lbar - lam))) - 1
        if g(lbar.min()) >= 0:
            continue
        ref = brentq(g, lbar.min(), hi, xtol=1e-15)
        assert solve_lambda(inv_p, eta, lbar) == pytest.approx(ref, abs=1e-8)


def fuzzed_instance():
    return st.integers(2, 8).flatmap(
        lambda m: st.tuples(
            st.lists(st.floats(1e-3, 1.0), min_size=m, max_size=m),
            st.integers(0, m - 1),
            st.floats(1e-3, 2.0),
            st.floats(0.0, 1.0),
        )
    )


@settings(max_examples=300, deadline=None)
@given(fuzzed_instance())
def test_update_invariants(inst):
    w, i, eta, loss = inst
    p = np.array(w) / np.sum(w)
    new, lam = corral_update(p, i, loss, eta)
    assert np.all(new > 0)
    assert abs(new.sum() - 1) <= 1e-9
    lbar = importance_weighted_loss(len(p), i, loss, p[i])
    assert lbar.min() - 1e-12 <= lam <= lbar.max() + 1e-12
    if loss > 0:
        assert normalizer_residual(1 / p, eta, lbar, lam) <= 1e-10
        # the policy that incurred loss loses mass, the others gain
        assert new[i] <= p[i] + 1e-12


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(1e-3, 1.0), min_size=2, max_size=8), st.data())
def test_zero_loss_identity_property(w, data):
    p = np.array(w) / np.sum(w)
    i = data.draw(st.integers(0, len(p) - 1))
    new, lam = corral_update(p, i, 0.0, data.draw(st.floats(1e-3, 2.0)))
    np.testing.assert_allclose(new, p, atol=1e-12, rtol=0)


def test_sampled_probability_sets_the_weight():
    # smoothed law drew policy 0 with probability 0.2 although p_0 = 0.05
    p = np.array([0.05, 0.95])
    new, lam = corral_update(p, 0, 1.0, 0.05, sampled_prob=0.2)
    lbar = np.array([5.0, 0.0])
    assert normalizer_residual(1 / p, 0.05, lbar, lam) <= 1e-10


def test_tiny_probability_is_capped():
    p = np.array([1e-15, 1 - 1e-15])
    new, lam = corral_update(p, 0, 1.0)
    assert np.all(np.isfinite(new)) and np.all(new > 0)


def test_bad_inputs():
    with pytest.raises(ConfigurationError):
        corral_update([0.0, 1.0], 0, 1.0)
    with pytest.raises(ConfigurationError):
        corral_update([0.5, 0.5], 0, 1.5)
    with pytest.raises(ConfigurationError):
        CorralStrategy(eta=0)


def test_strategy_concentrates_on_the_better_policy():
    # recurrence run directly: policy 0 always loses, policy 1 never does
    s = CorralStrategy(0.05).reset([LLM, CB])
    rng = np.random.default_rng(0)
    for _ in range(10_000):
        p = s.distribution().probs
        i = int(rng.choice(2, p=p))
        s.update(i, 1.0 if i == 0 else 0.0)
    assert s.distribution().probs[1] > 0.9
