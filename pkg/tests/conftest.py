import time

import pytest

from llmcorral.harness import ExperimentConfig, run_experiment

ACCEPTANCE = {}

REFERENCE = {
    "schema": "v1",
    "name": "reference",
    "environment": {"source": "synthetic-bilinear", "horizon": 20000, "batch_size": 32,
                    "d_x": 16, "d_a": 16, "n_actions": 50, "hidden_seed": 123},
    "policies": [
        {"kind": "cb", "name": "cb"},
        {"kind": "llm", "name": "llm", "backend": {"type": "synthetic", "accuracy": 0.35, "seed": 7,
                                                   "distractor_skew": 1.5}},
    ],
    "strategy": {"kind": "corral", "eta": 0.05},
    "smoothing": {"kind": "clip", "p_min": 0.2},
    "seeds": [0, 1, 2, 3, 4],
}


def reference_config():
    return ExperimentConfig.from_dict(REFERENCE)


def reference_variants():
    base = reference_config()
    return {
        "combined": base,
        "cb": base.with_policies(["cb"]),
        "llm": base.with_policies(["llm"]),
        "no-smoothing": base.replace(smoothing={"kind": "none"}),
    }


@pytest.fixture(scope="session")
def reference_runs():
    """Every variant of the reference setup over its five seeds, with wall-clock times."""
    out, times = {}, {}
    for name, cfg in reference_variants().items():
        t0 = time.perf_counter()
        out[name] = [run_experiment(cfg, s) for s in cfg.seeds]
        times[name] = time.perf_counter() - t0
    out["_seconds"] = times
    return out


@pytest.fixture
def acceptance():
    def record(number, passed, detail):
        ACCEPTANCE[number] = (bool(passed), detail)

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:>2}: {'PASS' if passed else 'FAIL'}  {detail}")
