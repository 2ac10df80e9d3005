import numpy as np
import pytest

from netdiff.network import Network, NetworkPair, quantize_round
from netdiff.symbolic import InputRegion

_RESULTS = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_RESULTS] = []


@pytest.fixture
def criterion(request):
    """Record one acceptance line: ``criterion(number, passed, detail)``."""
    results = request.config.stash[_RESULTS]

    def record(number, passed, detail=""):
        results.append((number, passed, detail))
        print(f"criterion {number}: {'PASS' if passed else 'FAIL'} {detail}")

    return record


def pytest_terminal_summary(terminalreporter, config):
    results = config.stash.get(_RESULTS, [])
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in sorted(results, key=lambda r: r[0]):
        status = {True: "PASS", False: "FAIL", None: "SKIP"}[passed]
        terminalreporter.write_line(f"criterion {number}: {status}  {detail}")


@pytest.fixture
def small_pair():
    """Two-layer pair whose exact delta range is easy to reason about."""
    w1 = np.array([[1.9, 1.1], [-2.1, 1.0]])
    w2 = np.array([[2.1, -0.9], [-1.0, 1.1]])
    w3 = np.array([[1.0], [-1.0]])
    f = Network((w1, w2, w3), (np.zeros(2), np.zeros(2), np.zeros(1)))
    return NetworkPair(f, quantize_round(f, 0))


@pytest.fixture
def small_region():
    return InputRegion([4.0, 1.0], [6.0, 5.0])
