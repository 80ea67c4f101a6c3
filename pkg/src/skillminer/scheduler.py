"""Parallel-execution analysis of process models.

Critical-path and worst-case sequential lengths count one action as one time
unit. Choice (XOR) contributes its longest branch to both measures and LOOP
bodies count once, so the speedup is a worst-case estimate under equal
action durations.
"""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass

from .model import Marking, Operator, PetriNet, ProcessTree


class SimulationError(RuntimeError):
    """The tick simulation could not complete a run within its loop bound."""


def critical_path_length(tree: ProcessTree) -> int:
    """Longest mandatory action chain: the parallel-makespan lower bound."""
    if tree.op is Operator.LEAF:
        return 1
    if tree.op is Operator.TAU:
        return 0
    if tree.op is Operator.SEQ:
        return sum(critical_path_length(c) for c in tree.children)
    if tree.op is Operator.LOOP:
        return critical_path_length(tree.children[0])
    # AND and XOR both take their longest branch (worst case for XOR).
    return max(critical_path_length(c) for c in tree.children)


def sequential_length(tree: ProcessTree) -> int:
    """Worst-case visible-action count when everything runs sequentially."""
    if tree.op is Operator.LEAF:
        return 1
    if tree.op is Operator.TAU:
        return 0
    if tree.op is Operator.XOR:
        return max(sequential_length(c) for c in tree.children)
    if tree.op is Operator.LOOP:
        return sequential_length(tree.children[0])
    return sum(sequential_length(c) for c in tree.children)


def speedup(tree: ProcessTree) -> float:
    """Sequential length over critical-path length (>= 1)."""
    critical = critical_path_length(tree)
    if critical == 0:
        raise ValueError("speedup undefined for a model without mandatory actions")
    return sequential_length(tree) / critical


@dataclass(frozen=True, slots=True)
class ScheduledStep:
    action: str
    start: int
    end: int
    tid: str = ""


@dataclass(frozen=True)
class Schedule:
    steps: tuple[ScheduledStep, ...]
    makespan: int

    def to_json(self) -> dict:
        return {
            "makespan": self.makespan,
            "steps": [
                {"action": s.action, "start": s.start, "end": s.end} for s in self.steps
            ],
        }

    def actions_at_tick(self, tick: int) -> set[str]:
        """Actions running during 1-based tick ``tick``."""
        return {s.action for s in self.steps if s.start < tick <= s.end}


def simulate_parallel_execution(
    net: PetriNet,
    action_duration: int = 1,
    *,
    loop_iterations: int = 1,
    state_bound: int = 10**5,
) -> Schedule:
    """Greedy earliest-start schedule of a workflow net under maximal parallelism.

    Each tick fires a maximal set of jointly enabled visible transitions;
    silent transitions fire instantly. Conflicting choices (XOR branches,
    loop exits) resolve to the worst-case (longest) completed run, matching
    the critical-path length for choice-free nets and the longest branch
    otherwise. Each transition fires at most ``loop_iterations`` times, which
    caps loop unrolling. Deterministic: ties prefer the lexicographically
    smallest schedule.
    """
    silent = frozenset(t.tid for t in net.transitions if t.is_silent)
    label_of = {t.tid: (t.label.name if t.label else "") for t in net.transitions}
    goal = net.final_marking
    tids = sorted(net.transition_by_id)
    explored = 0

    def enabled(marking: Marking, fired: Mapping[str, int]) -> list[str]:
        return [
            tid
            for tid in tids
            if fired.get(tid, 0) < loop_iterations
            and all(marking[p] >= 1 for p in net.preset[tid])
        ]

    def feasible_sets(candidates: list[str], marking: Marking) -> list[tuple[str, ...]]:
        """Maximal subsets fireable simultaneously given token demands."""
        results: list[tuple[str, ...]] = []

        def fits(demand: dict[str, int], tid: str) -> dict[str, int] | None:
            new_demand = dict(demand)
            for p in net.preset[tid]:
                new_demand[p] = new_demand.get(p, 0) + 1
                if new_demand[p] > marking[p]:
                    return None
            return new_demand

        def extend(chosen: list[str], start: int, demand: dict[str, int]) -> None:
            extended = False
            for i in range(start, len(candidates)):
                new_demand = fits(demand, candidates[i])
                if new_demand is not None:
                    extended = True
                    extend(chosen + [candidates[i]], i + 1, new_demand)
            if extended or not chosen:
                return
            # Suffix exhausted; the set is maximal only if no skipped
            # candidate still fits alongside it.
            if any(
                tid not in chosen and fits(demand, tid) is not None for tid in candidates
            ):
                return
            candidate = tuple(chosen)
            if candidate not in results:
                results.append(candidate)

        extend([], 0, {})
        return results

    memo: dict[tuple[Marking, frozenset], tuple[int, tuple] | None] = {}

    def solve(marking: Marking, fired: frozenset) -> tuple[int, tuple] | None:
        """Best (duration, relative steps) completing the run, or None if stuck."""
        nonlocal explored
        key = (marking, fired)
        if key in memo:
            return memo[key]
        explored += 1
        if explored > state_bound:
            raise SimulationError(f"simulation exceeded {state_bound} states")
        memo[key] = None  # cycle guard; revisits during expansion count as dead
        if marking == goal:
            memo[key] = (0, ())
            return memo[key]
        fired_map = dict(fired)
        candidates = enabled(marking, fired_map)
        best: tuple[int, tuple] | None = None

        def consider(result: tuple[int, tuple] | None) -> None:
            nonlocal best
            if result is None:
                return
            if (
                best is None
                or result[0] > best[0]
                or (result[0] == best[0] and result[1] < best[1])
            ):
                best = result

        for tid in candidates:
            if tid not in silent:
                continue
            nxt = marking.remove(net.preset[tid]).add(net.postset[tid])
            nxt_fired = frozenset((fired_map | {tid: fired_map.get(tid, 0) + 1}).items())
            consider(solve(nxt, nxt_fired))

        visible = [tid for tid in candidates if tid not in silent]
        for batch in feasible_sets(visible, marking):
            nxt = marking
            nxt_fired_map = dict(fired_map)
            for tid in batch:
                nxt = nxt.remove(net.preset[tid])
                nxt_fired_map[tid] = nxt_fired_map.get(tid, 0) + 1
            for tid in batch:
                nxt = nxt.add(net.postset[tid])
            sub = solve(nxt, frozenset(nxt_fired_map.items()))
            if sub is None:
                continue
            steps = tuple(sorted((label_of[tid], 0, tid) for tid in batch)) + tuple(
                (action, offset + 1, tid) for action, offset, tid in sub[1]
            )
            consider((sub[0] + 1, steps))

        memo[key] = best
        return best

    result = solve(net.initial_marking, frozenset())
    if result is None:
        raise SimulationError(
            "no completed run within the loop bound; is the net a sound workflow net?"
        )
    duration, rel_steps = result
    steps = tuple(
        ScheduledStep(
            action=action,
            start=offset * action_duration,
            end=(offset + 1) * action_duration,
            tid=tid,
        )
        for action, offset, tid in sorted(rel_steps, key=lambda s: (s[1], s[0]))
    )
    return Schedule(steps=steps, makespan=duration * action_duration)
