"""Shared fixtures and the acceptance-criteria summary hook.

The two optimized designs are expensive (5000 Adam steps each) and shared
across benchmark and acceptance tests, so they are session-scoped.  Each
test_criterion_* test records a one-line result; the terminal summary
prints one PASS/FAIL line per criterion after the run.
"""

import re

import pytest

from curveforge import barq, gatemap, optimize

CRITERION_LABELS = {
    1: "exact gate fixing",
    2: "closure and endpoint envelope",
    3: "frame-propagator equivalence",
    4: "dephasing robustness order",
    5: "drive robustness after optimization",
    6: "filtering-index analytics",
    7: "hadamard/x comparison",
    8: "noise generator fidelity",
    9: "gradient correctness",
    10: "property suites",
}

_DETAILS = {}


def record_criterion(number, detail):
    _DETAILS[number] = detail


@pytest.fixture(scope="session")
def design_x():
    """X gate, nu=0.25, seed 3, 5000 Adam steps."""
    config = barq.BarqConfig(target=gatemap.GateTarget.from_name("x"),
                             n_free=10, nu=0.25, seed=3)
    params = barq.init_parameters(config)
    trace = optimize.run_adam(config, params, steps=5000)
    assert not trace.aborted
    return config, trace


@pytest.fixture(scope="session")
def design_h():
    """Hadamard, nu=0.5, seed 3, 5000 Adam steps."""
    config = barq.BarqConfig(target=gatemap.GateTarget.from_name("hadamard"),
                             n_free=10, nu=0.5, seed=3)
    params = barq.init_parameters(config)
    trace = optimize.run_adam(config, params, steps=5000)
    assert not trace.aborted
    return config, trace


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    outcomes = {}
    for status in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(status, []):
            match = re.search(r"test_criterion_(\d+)",
                              getattr(rep, "nodeid", ""))
            if match:
                num = int(match.group(1))
                # a test that both errored and failed stays failed
                if outcomes.get(num) != "failed":
                    outcomes[num] = status
    if not outcomes:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for num in sorted(outcomes):
        verdict = "PASS" if outcomes[num] == "passed" else "FAIL"
        label = CRITERION_LABELS.get(num, "")
        line = f"criterion {num:2d} ({label}): {verdict}"
        detail = _DETAILS.get(num)
        if detail:
            line += f"  [{detail}]"
        terminalreporter.write_line(line)
