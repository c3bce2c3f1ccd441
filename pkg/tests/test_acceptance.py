"""Acceptance suite: one test per numbered criterion.

Each test records a PASS/FAIL line that is printed at the end of the
pytest run (see ``conftest.py``). Criteria 5, 6, 7 and 11 share one set of
reference runs: five seeds of the combined algorithm and of each baseline.
"""

import math
import time

import numpy as np
import pytest

from llmcorral.bandit import SpannerGreedy, compute_spanner, squared_loss_grad
from llmcorral.harness import run_experiment
from llmcorral.selector import (
    BudgetState,
    ScheduleParams,
    budget_gate,
    corral_update,
    expected_llm_calls,
    importance_weighted_loss,
    schedule_prob,
)
from conftest import reference_config
from oracles import central_difference, normalizer_residual, two_policy_lambda


def seed_mean(runs, attr="avg_reward"):
    return float(np.mean([getattr(r.metrics, attr)[-1] for r in runs]))


def fuzz_distribution(rng, m):
    p = rng.dirichlet(np.full(m, rng.uniform(0.3, 3.0)))
    p = np.maximum(p, 1e-6)
    return p / p.sum()


def test_criterion_01_corral_correctness(acceptance):
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    worst_res = worst_sum = 0.0
    positive = True
    for _ in range(1000):
        m = int(rng.integers(2, 9))
        p = fuzz_distribution(rng, m)
        i, eta, loss = int(rng.integers(m)), float(rng.uniform(0.01, 1.0)), float(rng.uniform(0.0, 1.0))
        new, lam = corral_update(p, i, loss, eta)
        lbar = np.zeros(m)
        lbar[i] = loss / p[i]
        worst_res = max(worst_res, normalizer_residual(1 / p, eta, lbar, lam))
        worst_sum = max(worst_sum, abs(new.sum() - 1.0))
        positive &= bool(np.all(new > 0))
    elapsed = time.perf_counter() - t0

    quad = []
    for p0, i, target_lam, target_p in [([0.5, 0.5], 0, 0.97500, [0.48751, 0.51249]),
                                        ([0.9, 0.1], 1, 0.11561, [0.90471, 0.09529])]:
        new, lam = corral_update(p0, i, 1.0, 0.05)
        lbar = [0.0, 0.0]
        lbar[i] = 1.0 / p0[i]
        ref_lam, ref_p = two_policy_lambda(p0, 0.05, lbar)
        quad.append(abs(lam - target_lam) <= 1e-4 and np.allclose(new, target_p, atol=1e-4)
                    and abs(lam - ref_lam) <= 1e-4 and np.allclose(new, ref_p, atol=1e-4))

    ok = worst_res <= 1e-10 and worst_sum <= 1e-9 and positive and all(quad) and elapsed < 5
    acceptance(1, ok, f"max residual {worst_res:.1e}, max |sum-1| {worst_sum:.1e}, "
                      f"quadratic cases {sum(quad)}/2, {elapsed:.2f}s")
    assert worst_res <= 1e-10 and worst_sum <= 1e-9 and positive
    assert all(quad)
    assert elapsed < 5


def test_criterion_02_zero_loss_identity(acceptance):
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(1000):
        m = int(rng.integers(2, 9))
        p = fuzz_distribution(rng, m)
        new, _ = corral_update(p, int(rng.integers(m)), 0.0, float(rng.uniform(0.01, 1.0)))
        worst = max(worst, float(np.abs(new - p).max()))
    acceptance(2, worst <= 1e-12, f"max deviation {worst:.1e} over 1000 cases")
    assert worst <= 1e-12


def test_criterion_03_unbiasedness(acceptance):
    rng = np.random.default_rng(3)
    n = 100_000
    worst_z = 0.0
    for _ in range(20):
        m = int(rng.integers(2, 9))
        p = fuzz_distribution(rng, m)
        p = np.maximum(p, 0.01)
        p /= p.sum()
        losses = rng.random(m)
        # row j is the estimate produced when policy j is the one sampled
        table = np.array([importance_weighted_loss(m, j, losses[j], p[j]) for j in range(m)])
        draws = table[rng.choice(m, size=n, p=p)]
        mean, se = draws.mean(axis=0), draws.std(axis=0, ddof=1) / math.sqrt(n)
        z = np.abs(mean - losses) / np.maximum(se, 1e-15)
        worst_z = max(worst_z, float(z.max()))
    acceptance(3, worst_z <= 3, f"largest deviation {worst_z:.2f} standard errors (20 distributions, 1e5 draws)")
    assert worst_z <= 3


def test_criterion_04_schedules_and_budget(acceptance):
    exact = [
        schedule_prob(ScheduleParams("poly", 10, 1, 0, 0.8), 100) == 0.1,
        schedule_prob(ScheduleParams("poly", 1, 1, 0, 0.8), 1) == 0.8,
        schedule_prob(ScheduleParams("exp", 1, 0.01, 0, 0.8), 1000) == math.exp(-10),
        expected_llm_calls(ScheduleParams.constant(0.5), 100) == 50,
        expected_llm_calls(ScheduleParams("poly", 1, 1, 0, 1), 3) == math.fsum([1, 1 / 2, 1 / 3]),
        expected_llm_calls(ScheduleParams("exp", 1, 0.1, 0, 1), 2) == math.fsum([math.exp(-0.1), math.exp(-0.2)]),
        budget_gate(0.5, BudgetState(100, 50, "scale")) == 0.25,
        budget_gate(0.5, BudgetState(100, 100, "scale")) == 0.0,
        budget_gate(0.5, BudgetState(100, 99, "early-stop")) == 0.5,
        budget_gate(0.5, BudgetState(100, 100, "early-stop")) == 0.0,
    ]
    base = reference_config()
    env = {**base.environment.model_dump(), "horizon": 100_000, "n_records": 100_000}
    calls = {}
    for mode in ("scale", "early-stop"):
        cfg = base.replace(environment=env, budget={"limit": 1000, "mode": mode}, track_counterfactual=False)
        m = run_experiment(cfg, 0).metrics
        calls[mode] = int(m.llm_calls_cum[-1])
        assert len(m) == 100_000
    ok = all(exact) and all(c <= 1000 for c in calls.values())
    acceptance(4, ok, f"closed forms {sum(exact)}/{len(exact)}, calls under B=1000: {calls}")
    assert all(exact)
    assert all(c <= 1000 for c in calls.values())


def test_criterion_05_best_of_both_worlds(reference_runs, acceptance):
    combined = seed_mean(reference_runs["combined"])
    cb, llm = seed_mean(reference_runs["cb"]), seed_mean(reference_runs["llm"])
    frac = float(np.mean([r.summary["llm_call_fraction"] for r in reference_runs["combined"]]))
    p_cb = float(np.mean([r.metrics.p_cb[-1] for r in reference_runs["combined"]]))
    secs = reference_runs["_seconds"]["combined"]
    ok = combined >= max(cb, llm) + 0.02 and frac < 0.25 and p_cb > 0.9 and secs < 300
    acceptance(5, ok, f"combined {combined:.4f} vs CB {cb:.4f} / LLM {llm:.4f}, call fraction {frac:.4f}, "
                      f"final p_cb {p_cb:.4f}, {secs:.0f}s for 5 seeds")
    assert combined >= max(cb, llm) + 0.02
    assert frac < 0.25
    assert p_cb > 0.9
    assert secs < 300


def test_criterion_06_crossover(reference_runs, acceptance):
    cb = np.mean([r.metrics.avg_reward for r in reference_runs["cb"]], axis=0)
    llm = np.mean([r.metrics.avg_reward for r in reference_runs["llm"]], axis=0)
    w = len(cb) // 10
    early = float((llm[:w] - cb[:w]).min())
    late = float((cb[-w:] - llm[-w:]).min())
    ok = early > 0.01 and late > 0.01
    acceptance(6, ok, f"min LLM-CB margin over first 10% {early:.4f}, min CB-LLM margin over last 10% {late:.4f}")
    assert early > 0.01
    assert late > 0.01


def test_criterion_07_counterfactual_ordering(reference_runs, acceptance):
    cf = seed_mean(reference_runs["combined"], "cf_cb")
    shadow = seed_mean(reference_runs["combined"], "cf_shadow")
    cb = seed_mean(reference_runs["cb"])
    ok = cf > cb > shadow
    acceptance(7, ok, f"counterfactual CB {cf:.4f} > stand-alone CB {cb:.4f} > shadow {shadow:.4f}")
    assert cf > cb
    assert shadow < cb


def test_criterion_08_spanner_property(acceptance):
    rng = np.random.default_rng(8)
    worst = 0.0
    for k in range(200):
        n, d = int(rng.integers(1, 65)), int(rng.integers(1, 9))
        C = float(rng.choice([1.0, 1.5, 2.0, 3.0]))
        if k % 4 == 0 and d > 1:
            r = int(rng.integers(1, d))
            E = rng.standard_normal((n, r)) @ rng.standard_normal((r, d))
        else:
            E = rng.standard_normal((n, d))
        B = E[list(compute_spanner(E, C).indices)]
        # coefficients of every action in the spanner basis: (B B^T) c = B e
        coef = np.linalg.solve(B @ B.T, B @ E.T).T
        assert np.allclose(coef @ B, E, atol=1e-8)
        worst = max(worst, float((np.abs(coef) / C).max()))
    ok = worst <= 1 + 1e-9
    acceptance(8, ok, f"largest |coefficient| / C = {worst:.6f} over 200 instances")
    assert ok


def test_criterion_09_gradient_check(acceptance):
    rng = np.random.default_rng(9)
    worst = 0.0
    for _ in range(100):
        n_act, d_a, d_x = int(rng.integers(2, 12)), int(rng.integers(1, 8)), int(rng.integers(1, 8))
        pol = SpannerGreedy(learning_rate=0.05).fit(rng.standard_normal((n_act, d_a)), d_x)
        pol.W_ = rng.standard_normal(pol.W_.shape) * 0.3
        x, a, loss = rng.standard_normal(d_x), int(rng.integers(n_act)), float(rng.random())
        fa, fx = pol.action_features_[a], np.append(x, 1.0)
        fd = central_difference(lambda V: 0.5 * (fa @ V @ fx - loss) ** 2, pol.W_)
        W0 = pol.W_.copy()
        pol.partial_fit(x[None, :], [a], [loss])
        step_grad = (W0 - pol.W_) / pol.learning_rate
        scale = max(np.linalg.norm(fd), 1e-8)
        worst = max(worst, np.linalg.norm(step_grad - fd) / scale,
                    np.linalg.norm(squared_loss_grad(W0, fa, fx, loss) - fd) / scale)
    acceptance(9, worst <= 1e-5, f"max relative error {worst:.1e} over 100 instances")
    assert worst <= 1e-5


def test_criterion_10_reductions(reference_runs, acceptance):
    base = reference_config()
    trace = lambda res: [(r.action_id, r.loss) for r in res.records]
    matches = []
    for p, alone in [(0.0, "cb"), (1.0, "llm")]:
        forced = base.replace(strategy={"kind": "poly", "C": 1.0, "alpha": 1.0, "p_min": p, "p_max": p},
                              smoothing={"kind": "none"}, budget={"limit": None})
        for ref in reference_runs[alone][:2]:
            matches.append(trace(run_experiment(forced, ref.seed)) == trace(ref))
    ok = all(matches)
    acceptance(10, ok, f"forced runs identical to stand-alone runs: {sum(matches)}/{len(matches)} (seeds 0, 1)")
    assert ok


def test_criterion_11_smoothing_ablation(reference_runs, acceptance):
    clip = seed_mean(reference_runs["combined"])
    none = seed_mean(reference_runs["no-smoothing"])
    ok = none <= clip - 0.02
    acceptance(11, ok, f"no smoothing {none:.4f} vs clip(0.2) {clip:.4f}, gap {clip - none:.4f}")
    assert ok
