import random

import pytest

from skillminer import (
    EventLog,
    Trace,
    build_dfg,
    discover,
    discover_skill,
    leaf,
    loop,
    net_language,
    par,
    seq,
    tau,
    token_replay,
    tree_language,
    tree_to_petri,
    validate_net,
    xor,
)
from skillminer.conformance import alignment_fitness
from skillminer.synthetic import log_from_tree, random_tree


def log_of(*words, process_id="p"):
    return EventLog(
        process_id, [f"query for {process_id}"], [Trace(w, id=f"c{i}") for i, w in enumerate(words)]
    )


class TestBuildDfg:
    def test_single_trace(self):
        dfg = build_dfg(log_of(("A", "B")))
        assert dfg.nodes == {"A", "B"}
        assert dfg.edges == {("A", "B"): 1}
        assert dfg.start_activities == {"A": 1}
        assert dfg.end_activities == {"B": 1}

    def test_two_directions(self):
        dfg = build_dfg(log_of(("A", "B"), ("B", "A")))
        assert dfg.edges == {("A", "B"): 1, ("B", "A"): 1}

    def test_counts_match_hand_count_on_four_variants(self):
        # Hand count for {<A,B,C>, <A,C,B>, <A,B,C>, <A,B>}:
        # A->B x3, A->C x1, B->C x2, C->B x1; starts A x4; ends C x2, B x2.
        dfg = build_dfg(log_of(("A", "B", "C"), ("A", "C", "B"), ("A", "B", "C"), ("A", "B")))
        assert dfg.edges == {("A", "B"): 3, ("A", "C"): 1, ("B", "C"): 2, ("C", "B"): 1}
        assert dfg.start_activities == {"A": 4}
        assert dfg.end_activities == {"C": 2, "B": 2}

    def test_empty_log_rejected(self):
        with pytest.raises(ValueError):
            build_dfg(log_of())

    def test_frequency_threshold_drops_rare_edges(self):
        dfg = build_dfg(log_of(("A", "B"), ("A", "B"), ("B", "A")), freq_threshold=1)
        assert dfg.edges == {("A", "B"): 2}


class TestDiscoverBaseAndCuts:
    def test_repeated_sequence(self):
        assert discover(log_of(("A", "B", "C"), ("A", "B", "C"))) == seq("A", "B", "C")

    def test_parallel_pair(self):
        tree = discover(log_of(("A", "B"), ("B", "A")))
        assert tree == par("A", "B")
        assert net_language(tree_to_petri(tree)) == {("A", "B"), ("B", "A")}

    def test_choice_pair(self):
        tree = discover(log_of(("A",), ("B",)))
        assert tree == xor("A", "B")
        assert net_language(tree_to_petri(tree)) == {("A",), ("B",)}

    def test_single_activity(self):
        assert discover(log_of(("A",), ("A",))) == leaf("A")

    def test_repeating_single_activity(self):
        assert discover(log_of(("A",), ("A", "A", "A"))) == loop(leaf("A"), tau())

    def test_empty_trace_adds_tau_choice(self):
        tree = discover(log_of((), ("A",)))
        assert tree == xor(tau(), leaf("A"))

    def test_simple_loop(self):
        tree = discover(log_of(("A",), ("A", "B", "A"), ("A", "B", "A", "B", "A")))
        assert tree == loop(leaf("A"), leaf("B"))

    def test_nested_structure(self):
        words = [
            ("A", "B", "C", "D"),
            ("A", "C", "B", "D"),
            ("A", "B", "C", "D"),
        ]
        tree = discover(log_of(*words))
        assert tree == seq(leaf("A"), par("B", "C"), leaf("D"))

    def test_empty_log_rejected(self):
        with pytest.raises(ValueError):
            discover(log_of())


class TestDiscoverProperties:
    def test_deterministic_for_same_log(self):
        words = [("A", "B"), ("B", "A"), ("A", "B", "A")]
        assert discover(log_of(*words)) == discover(log_of(*words))

    def test_flower_fallback_never_fails_and_fits(self):
        # Adversarial mixes that admit no clean cut.
        rng = random.Random(3)
        alphabet = ["A", "B", "C"]
        words = [
            tuple(rng.choice(alphabet) for _ in range(rng.randint(1, 5))) for _ in range(12)
        ]
        tree = discover(log_of(*words))
        net = tree_to_petri(tree)
        for word in words:
            assert token_replay(Trace(word), net).fitness == 1.0

    def test_training_traces_replay_perfectly(self):
        rng = random.Random(11)
        for _ in range(20):
            tree = random_tree(rng, max_depth=3, max_leaves=6)
            log = log_from_tree(tree, "p", rng)
            discovered = discover(log)
            net = tree_to_petri(discovered)
            for trace in log.traces:
                assert token_replay(trace, net).fitness == 1.0

    def test_rediscovery_alignment_fitness_one(self):
        # Smaller cousin of the acceptance criterion, for quick feedback.
        rng = random.Random(23)
        for _ in range(15):
            tree = random_tree(rng, max_depth=3, max_leaves=6)
            log = log_from_tree(tree, "p", rng, n_traces=20)
            net = tree_to_petri(discover(log))
            for trace in log.traces:
                assert alignment_fitness(trace, net) == pytest.approx(1.0)


class TestDiscoverSkill:
    def test_skill_carries_texts_and_provenance(self):
        log = log_of(("A", "B"), ("A", "B"), ("B", "A"))
        skill = discover_skill(log)
        assert skill.skill_id == "p"
        assert skill.query_texts == ("query for p",)
        assert skill.provenance.num_cases == 3
        assert skill.provenance.num_variants == 2
        assert validate_net(skill.net).ok

    def test_single_trace_gives_leaf(self):
        skill = discover_skill(log_of(("A",)))
        assert skill.tree == leaf("A")

    def test_four_trace_fixture_replays_at_one(self):
        log = log_of(("A", "B", "C"), ("A", "C", "B"), ("A", "B", "C"), ("A", "C", "B"))
        skill = discover_skill(log)
        for trace in log.traces:
            assert token_replay(trace, skill.net).fitness == 1.0

    def test_worked_example_variants_contained(self, worked_tree):
        rng = random.Random(4)
        log = log_from_tree(worked_tree, "w", rng, n_traces=5)
        skill = discover_skill(log)
        discovered_language = tree_language(skill.tree)
        for trace in log.traces:
            assert trace.labels() in discovered_language
