import pytest

from skillminer import (
    Action,
    EventLog,
    Marking,
    PetriNet,
    Skill,
    SkillLibrary,
    EmbeddingVector,
    Trace,
    Transition,
    leaf,
    loop,
    par,
    seq,
    tau,
    validate_net,
    tree_to_petri,
    xor,
)
from skillminer.model import InvalidTreeError


class TestAction:
    def test_rejects_empty_name(self):
        with pytest.raises(ValueError):
            Action("")

    def test_rejects_untrimmed_name(self):
        with pytest.raises(ValueError):
            Action(" Image Editing ")

    def test_case_sensitive(self):
        assert Action("load") != Action("Load")


class TestTrace:
    def test_accepts_strings(self):
        t = Trace(["A", "B"], id="case1")
        assert t.labels() == ("A", "B")
        assert len(t) == 2

    def test_empty_trace_is_explicit(self):
        assert len(Trace([])) == 0


class TestTreeArity:
    def test_seq_needs_two_children(self):
        with pytest.raises(InvalidTreeError):
            from skillminer.model import Operator, ProcessTree

            ProcessTree(Operator.SEQ, children=(leaf("A"),))

    def test_loop_needs_exactly_two(self):
        with pytest.raises(InvalidTreeError):
            from skillminer.model import Operator, ProcessTree

            ProcessTree(Operator.LOOP, children=(leaf("A"),))

    def test_alphabet(self):
        tree = par(seq("A", "B"), xor("C", tau()))
        assert tree.alphabet() == {"A", "B", "C"}


class TestMarking:
    def test_drops_zero_counts(self):
        m = Marking({"p": 0, "q": 2})
        assert "p" not in m
        assert m["q"] == 2
        assert m.total() == 2

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            Marking({"p": -1})

    def test_add_remove_roundtrip(self):
        m = Marking({"p": 1})
        assert m.add(["q"]).remove(["q"]) == m

    def test_remove_from_empty_place_fails(self):
        with pytest.raises(ValueError):
            Marking({}).remove(["p"])

    def test_hashable_and_order_independent(self):
        assert hash(Marking({"a": 1, "b": 2})) == hash(Marking({"b": 2, "a": 1}))

    def test_covers(self):
        assert Marking({"a": 2, "b": 1}).covers(Marking({"a": 1}))
        assert not Marking({"a": 1}).covers(Marking({"a": 2}))


def single_transition_net() -> PetriNet:
    return PetriNet(
        places=["p0", "p1"],
        transitions=[Transition("t_a", Action("A"))],
        arcs=[("p0", "t_a"), ("t_a", "p1")],
        initial_marking={"p0": 1},
        final_marking={"p1": 1},
    )


class TestValidateNet:
    def test_single_transition_net_is_valid(self):
        assert validate_net(single_transition_net()).ok

    def test_dangling_arc_reported(self):
        net = PetriNet(
            places=["p0", "p1"],
            transitions=[Transition("t_a", Action("A"))],
            arcs=[("p0", "t_a"), ("t_a", "p1"), ("ghost", "t_a")],
            initial_marking={"p0": 1},
            final_marking={"p1": 1},
        )
        report = validate_net(net)
        assert not report.ok
        assert len(report.violations) == 1
        assert "dangling" in report.violations[0]

    def test_worked_example_net_is_valid(self, worked_net):
        assert validate_net(worked_net).ok

    def test_two_sources_reported(self):
        net = PetriNet(
            places=["p0", "p1", "p2"],
            transitions=[Transition("t_a", Action("A"))],
            arcs=[("p0", "t_a"), ("t_a", "p2")],
            initial_marking={"p0": 1},
            final_marking={"p2": 1},
        )
        report = validate_net(net)
        assert any("source" in v or "path" in v for v in report.violations)

    def test_wrong_initial_marking_reported(self):
        net = PetriNet(
            places=["p0", "p1"],
            transitions=[Transition("t_a", Action("A"))],
            arcs=[("p0", "t_a"), ("t_a", "p1")],
            initial_marking={"p1": 1},
            final_marking={"p1": 1},
        )
        assert not validate_net(net).ok


class TestSkillLibrary:
    def make_skill(self, skill_id, embedding=None):
        tree = leaf("A")
        return Skill(skill_id, tree, tree_to_petri(tree), embedding=embedding)

    def test_duplicate_ids_rejected(self):
        lib = SkillLibrary([self.make_skill("s1")])
        with pytest.raises(ValueError):
            lib.add(self.make_skill("s1"))

    def test_iteration_sorted_regardless_of_insertion(self):
        lib1 = SkillLibrary([self.make_skill("b"), self.make_skill("a")])
        lib2 = SkillLibrary([self.make_skill("a"), self.make_skill("b")])
        assert [s.skill_id for s in lib1] == [s.skill_id for s in lib2] == ["a", "b"]

    def test_embedding_dimension_enforced(self):
        lib = SkillLibrary([self.make_skill("a", EmbeddingVector([1.0, 0.0], "stub"))])
        with pytest.raises(ValueError):
            lib.add(self.make_skill("b", EmbeddingVector([1.0], "stub")))

    def test_every_skill_net_validates(self):
        from skillminer.synthetic import make_synthetic_library

        for skill in make_synthetic_library(8, seed=5):
            assert validate_net(skill.net).ok


class TestEventLog:
    def test_variants(self):
        log = EventLog(
            "p", ["q"], [Trace(["A", "B"]), Trace(["A", "B"]), Trace(["B", "A"])]
        )
        assert log.variants == {("A", "B"), ("B", "A")}
