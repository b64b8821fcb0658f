import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def scenario_runs():
    """Bundled scenarios run once per session, keyed by name."""
    from airhighway.sim import BUNDLED, build_context, load_scenario, run_scenario

    out = {}
    for name in BUNDLED:
        cfg = load_scenario(name)
        out[name] = run_scenario(cfg, build_context(cfg))
    return out


ACCEPTANCE = []


@pytest.fixture
def report(capsys):
    """Record one PASS/FAIL line for an acceptance criterion and print it immediately."""
    def _report(n, ok, detail):
        line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE.append(line)
        with capsys.disabled():
            print(f"\n{line}")
        return ok
    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
