import numpy as np
import pytest

from lgds_bandit.env import LgdsParams


def scalar_params(gamma=0.9, q=1.0, sigma2=1.0, actions=((1.0,), (-1.0,)), sigma0=None):
    sigma0 = q / (1 - gamma**2) if sigma0 is None else sigma0
    return LgdsParams(gamma=[[gamma]], q=[[q]], sigma2=sigma2, actions=actions, sigma0=[[sigma0]])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    """One line per acceptance criterion, in criterion order."""
    lines = []
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            name = getattr(rep, "nodeid", "").split("::")[-1]
            if not name.startswith("test_criterion_") or rep.when not in ("call", "setup"):
                continue
            if rep.when == "setup" and rep.passed:
                continue
            num = int(name.split("_")[2])
            detail = dict(rep.user_properties).get("detail", "")
            lines.append((num, f"criterion {num}: {'PASS' if rep.passed else 'FAIL'}  {detail}"))
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for _, text in sorted(lines):
            terminalreporter.write_line(text)
