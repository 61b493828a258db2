import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from aoi_lab.channel import ChannelModel  # noqa: E402
from aoi_lab.model import Scenario  # noqa: E402


@pytest.fixture(scope="session")
def ref_channel():
    """K=8 bits, N=10 mW, eps=0.01 over durations 24..138."""
    return ChannelModel.normal_approx(8, 10.0, 0.01, 24, 138)


@pytest.fixture(scope="session")
def ref_scenario(ref_channel):
    return Scenario(0.1, 0.01, ref_channel, "NP")


def scenario(lam=0.1, eps=0.01, model="NP", channel=None):
    ch = channel or ChannelModel.normal_approx(8, 10.0, 0.01, 24, 138)
    return Scenario(lam, eps, ch, model)


ACCEPTANCE_LINES = []


def report(n, ok, detail):
    """Record one acceptance line; printed in the terminal summary."""
    ACCEPTANCE_LINES.append((n, f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
