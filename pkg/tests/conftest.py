import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from netrel.network import network_from_dict  # noqa: E402

WHEATSTONE_EDGES = [(0, 1), (0, 2), (1, 2), (1, 3), (2, 3)]


def net_dict(edges, n=None, s=0, t=None, bridges=None):
    n = n if n is not None else 1 + max(max(e) for e in edges)
    t = n - 1 if t is None else t
    links = [{"id": i, "endpoints": list(e), "bridge_ids": list(bridges[i]) if bridges else []}
             for i, e in enumerate(edges)]
    return {"nodes": list(range(n)), "links": links, "source": s, "terminal": t}


def make_net(edges, n=None, s=0, t=None, bridges=None):
    return network_from_dict(net_dict(edges, n, s, t, bridges))


@pytest.fixture
def wheatstone():
    return make_net(WHEATSTONE_EDGES)


@pytest.fixture
def chain():
    return make_net([(0, 1), (1, 2)])


@pytest.fixture(scope="session")
def scenario():
    from netrel.datasets import default_scenario
    return default_scenario()


# -- acceptance report ------------------------------------------------------------

ACCEPTANCE_LINES: dict[int, str] = {}


def record_criterion(number: int, name: str, passed: bool, detail: str) -> bool:
    """Store one pass/fail line for the terminal summary and echo it."""
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {number:2d} {name}: {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[number])
