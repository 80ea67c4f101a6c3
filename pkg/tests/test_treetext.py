import pytest
from hypothesis import given, strategies as st

from skillminer import (
    leaf,
    loop,
    par,
    parse_process_tree,
    seq,
    serialize_process_tree,
    tau,
    xor,
)
from skillminer.treetext import TreeParseError

WORKED = "AND(SEQ('A','B'),SEQ('C','D','E','F'))"


def test_parse_worked_example():
    tree = parse_process_tree(WORKED)
    assert tree == par(seq("A", "B"), seq("C", "D", "E", "F"))


def test_parse_single_leaf():
    assert parse_process_tree("'A'") == leaf("A")


def test_arity_error_carries_offset():
    with pytest.raises(TreeParseError) as exc:
        parse_process_tree("SEQ('A')")
    assert exc.value.offset == 0


def test_serialize_leaf():
    assert serialize_process_tree(leaf("A")) == "'A'"


def test_serialize_seq():
    assert serialize_process_tree(seq("A", "B")) == "SEQ('A','B')"


def test_serialize_worked_example():
    tree = par(seq("A", "B"), seq("C", "D", "E", "F"))
    assert serialize_process_tree(tree) == WORKED


def test_parse_accepts_whitespace():
    assert parse_process_tree(" SEQ( 'A' , 'B' ) ") == seq("A", "B")


def test_unterminated_name():
    with pytest.raises(TreeParseError):
        parse_process_tree("'A")


def test_trailing_garbage():
    with pytest.raises(TreeParseError) as exc:
        parse_process_tree("'A' extra")
    assert exc.value.offset == 4


def test_unknown_operator_offset():
    with pytest.raises(TreeParseError) as exc:
        parse_process_tree("SEQ('A',FOO('B','C'))")
    assert exc.value.offset == 8


def test_names_with_spaces_and_escapes():
    tree = seq("Image Editing", "it's done")
    assert parse_process_tree(serialize_process_tree(tree)) == tree


names = st.text(
    alphabet=st.characters(whitelist_categories=("Lu", "Ll", "Nd"), whitelist_characters=" _'\\"),
    min_size=1,
    max_size=8,
).filter(lambda s: s == s.strip() and s.strip() != "")


def trees(max_depth: int = 4):
    base = st.one_of(names.map(leaf), st.just(tau()))

    def extend(children):
        return st.one_of(
            st.lists(children, min_size=2, max_size=3).map(lambda cs: seq(*cs)),
            st.lists(children, min_size=2, max_size=3).map(lambda cs: xor(*cs)),
            st.lists(children, min_size=2, max_size=3).map(lambda cs: par(*cs)),
            st.tuples(children, children).map(lambda pair: loop(*pair)),
        )

    return st.recursive(base, extend, max_leaves=2 ** max_depth)


@given(trees())
def test_roundtrip_identity(tree):
    assert parse_process_tree(serialize_process_tree(tree)) == tree
