import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from employchain.contracts import JobOffer, open_chain  # noqa: E402
from employchain.hashing import Address  # noqa: E402

GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture
def chain():
    """Ledger with one employer (1000 tokens) and two registered workers."""
    return open_chain([("emp", 1000), ("w1", 0), ("w2", 0), ("rogue", 500)],
                      employers=["emp"], workers=["w1", "w2"])


@pytest.fixture
def addr():
    return Address.from_seed


@pytest.fixture
def offer(addr):
    return JobOffer(addr("emp"), positions=1, workdays=2, hours_per_day=8, time_wage=10)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(RESULTS):
        terminalreporter.write_line(RESULTS[key][1])
