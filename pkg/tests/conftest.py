import sys

import pytest

from dhpass.harness.deployment import DeploymentConfig, run_deployment
from dhpass.harness.experiments import DEFAULT_PASSWORD, onboard, vaccinated

PW = DEFAULT_PASSWORD


@pytest.fixture
def dep(tmp_path):
    d = run_deployment(DeploymentConfig(n=3, seed=11, state_dir=tmp_path / "state"))
    yield d
    d.close()


@pytest.fixture
def alice(dep):
    return onboard(dep, "alice", PW)


__all__ = ["PW", "onboard", "vaccinated"]



def pytest_terminal_summary(terminalreporter):
    """One line per acceptance criterion, after the normal report."""
    mod = sys.modules.get("test_acceptance")
    if mod is None:
        return
    terminalreporter.section("acceptance criteria")
    for k in range(1, 13):
        ok, detail = mod.RESULTS.get(k, (False, "not run or crashed before recording a verdict"))
        terminalreporter.write_line(f"AC{k:02d} {'PASS' if ok else 'FAIL'}: {detail}")
