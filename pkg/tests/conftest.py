import pytest

from skillminer import Trace, parse_process_tree, tree_to_petri

WORKED_TREE_TEXT = "AND(SEQ('A','B'),SEQ('C','D','E','F'))"


@pytest.fixture(scope="session")
def worked_tree():
    """The interleaved two-branch model from the worked example."""
    return parse_process_tree(WORKED_TREE_TEXT)


@pytest.fixture(scope="session")
def worked_net(worked_tree):
    return tree_to_petri(worked_tree)


@pytest.fixture(scope="session")
def scrambled_trace():
    """The planner output that only gets the pairwise relations right."""
    return Trace(["E", "F", "A", "B", "C", "D"])


@pytest.fixture(scope="session")
def perfect_trace():
    return Trace(["A", "C", "B", "D", "E", "F"])
