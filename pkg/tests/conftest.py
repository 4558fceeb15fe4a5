import pytest

from enwsn.fixtures import tunnel_topology, tunnel_traces
from enwsn.power import Network, sweep

_CRITERIA = []


@pytest.fixture
def criterion():
    """Record one ``criterion N PASS|FAIL|SKIP: detail`` line for the terminal summary."""

    def record(number, passed, detail):
        status = "SKIP" if passed is None else ("PASS" if passed else "FAIL")
        line = f"criterion {number:>2} {status}: {detail}"
        _CRITERIA.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_CRITERIA, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def tunnel_network():
    topo = tunnel_topology()
    return Network(topo, tunnel_traces(topology=topo))


@pytest.fixture(scope="session")
def tunnel_table(tunnel_network):
    return sweep(tunnel_network)
