import pytest

from gvop import AggregateIngress, RoutingModel, SubstrateNetwork, VNetRequest


def agg(j, terms, ingress=1, benefit=2, slots=(0,), routing=RoutingModel.TREE, packet_rate=0.0):
    return VNetRequest(j, frozenset(terms), AggregateIngress(ingress), routing, benefit,
                       frozenset(slots), packet_rate)


@pytest.fixture
def single_edge():
    return SubstrateNetwork.build(["u", "v"], [("u", "v", 1)])


@pytest.fixture
def path4():
    return SubstrateNetwork.build(["a", "b", "c", "d"],
                                  [("a", "b", 4), ("b", "c", 4), ("c", "d", 4)])


@pytest.fixture
def triangle():
    return SubstrateNetwork.build(["a", "b", "c"], [("a", "b", 4), ("a", "c", 4), ("b", "c", 4)])


# -- acceptance verdict lines -------------------------------------------------------------

VERDICTS = pytest.StashKey[list]()


@pytest.fixture
def verdict(request):
    """``verdict(name, failures)`` records one PASS/FAIL line and fails the test on FAIL."""
    lines = request.config.stash.setdefault(VERDICTS, [])

    def record(name, failures, detail=""):
        if failures:
            line = f"FAIL {name}: {failures[0]} ({len(failures)} violations)"
        else:
            line = f"PASS {name}" + (f" [{detail}]" if detail else "")
        lines.append(line)
        print(line)
        assert not failures, line

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(VERDICTS, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
