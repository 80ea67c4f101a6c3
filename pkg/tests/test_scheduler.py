import random

import pytest

from skillminer import leaf, loop, par, seq, tau, tree_to_petri, xor
from skillminer.scheduler import (
    critical_path_length,
    sequential_length,
    simulate_parallel_execution,
    speedup,
)
from skillminer.synthetic import random_tree


class TestCriticalPath:
    def test_worked_example(self, worked_tree):
        assert critical_path_length(worked_tree) == 4

    def test_pure_sequence(self):
        assert critical_path_length(seq("A", "B", "C")) == 3

    def test_single_leaf(self):
        assert critical_path_length(leaf("A")) == 1

    def test_xor_takes_longest_branch(self):
        assert critical_path_length(xor(leaf("A"), seq("B", "C"))) == 2

    def test_loop_body_counted_once(self):
        assert critical_path_length(loop(seq("A", "B"), leaf("R"))) == 2

    def test_tau_is_free(self):
        assert critical_path_length(xor(tau(), leaf("A"))) == 1


class TestSpeedup:
    def test_worked_example_is_exactly_1_5(self, worked_tree):
        assert speedup(worked_tree) == pytest.approx(1.5)
        assert sequential_length(worked_tree) == 6

    def test_pure_sequence_has_no_speedup(self):
        assert speedup(seq("A", "B", "C")) == 1.0

    def test_tau_only_model_rejected(self):
        with pytest.raises(ValueError):
            speedup(xor(tau(), tau()))

    def test_speedup_at_least_one(self):
        rng = random.Random(8)
        for _ in range(30):
            tree = random_tree(rng)
            assert speedup(tree) >= 1.0

    def test_speedup_one_iff_no_parallel_branch(self):
        rng = random.Random(9)
        from skillminer.model import Operator

        def has_real_and(tree):
            if tree.op is Operator.AND:
                busy = [c for c in tree.children if sequential_length(c) > 0]
                if len(busy) >= 2:
                    return True
            return any(has_real_and(c) for c in tree.children)

        for _ in range(40):
            tree = random_tree(rng)
            if speedup(tree) == 1.0:
                assert not has_real_and(tree)
            else:
                assert has_real_and(tree)


class TestSimulation:
    def test_worked_example_schedule(self, worked_net):
        schedule = simulate_parallel_execution(worked_net)
        assert schedule.makespan == 4
        assert schedule.actions_at_tick(1) == {"A", "C"}
        assert schedule.actions_at_tick(2) == {"B", "D"}

    def test_sequence_never_shares_ticks(self):
        schedule = simulate_parallel_execution(tree_to_petri(seq("A", "B")))
        assert schedule.makespan == 2
        starts = [s.start for s in schedule.steps]
        assert len(set(starts)) == len(starts)

    def test_xor_schedules_one_branch(self):
        schedule = simulate_parallel_execution(tree_to_petri(xor("A", "B")))
        assert schedule.makespan == 1
        assert len(schedule.steps) == 1

    def test_makespan_equals_critical_path(self):
        rng = random.Random(10)
        for _ in range(25):
            tree = random_tree(rng, max_depth=3, max_leaves=6)
            schedule = simulate_parallel_execution(tree_to_petri(tree))
            assert schedule.makespan == critical_path_length(tree)

    def test_schedule_respects_net_precedence(self):
        rng = random.Random(12)
        for _ in range(15):
            tree = random_tree(rng, max_depth=3, max_leaves=6)
            net = tree_to_petri(tree)
            schedule = simulate_parallel_execution(net)
            end_of = {s.tid: s.end for s in schedule.steps}
            producers = {}
            for step in schedule.steps:
                for place in net.postset[step.tid]:
                    producers.setdefault(place, []).append(step)
            for step in schedule.steps:
                for place in net.preset[step.tid]:
                    for producer in producers.get(place, []):
                        if producer.tid != step.tid:
                            assert step.start >= producer.end

    def test_action_duration_scales(self, worked_net):
        schedule = simulate_parallel_execution(worked_net, action_duration=3)
        assert schedule.makespan == 12

    def test_json_shape(self, worked_net):
        payload = simulate_parallel_execution(worked_net).to_json()
        assert payload["makespan"] == 4
        assert {"action", "start", "end"} == set(payload["steps"][0])
