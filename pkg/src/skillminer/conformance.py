"""Conformance checking: token-based replay fitness and A*-based alignment fitness.

Silent transitions are free everywhere: they carry no replay token penalty
and no alignment cost. Unit costs otherwise (one per log-only move, one per
visible model-only move).
"""

from __future__ import annotations

import heapq
from collections import deque
from collections.abc import Mapping
from dataclasses import dataclass

from .model import (
    Action,
    Alignment,
    Marking,
    Move,
    MoveType,
    PetriNet,
    Skill,
    Trace,
    Transition,
)
from .petri import (
    DEFAULT_STATE_BOUND,
    FinalMarkingUnreachable,
    StateSpaceBoundExceeded,
    shortest_model_path_cost,
)

SILENT_SEARCH_BOUND = 10**5


# ---------------------------------------------------------------------------
# Token replay
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class ReplayResult:
    """Token counts from replaying one trace: produced, consumed, missing, remaining."""

    produced: int
    consumed: int
    missing: int
    remaining: int

    def __post_init__(self) -> None:
        if min(self.produced, self.consumed, self.missing, self.remaining) < 0:
            raise ValueError("token counts must be non-negative")
        if self.missing > self.consumed or self.remaining > self.produced:
            raise ValueError("missing <= consumed and remaining <= produced must hold")

    @property
    def fitness(self) -> float:
        miss_term = 1.0 - (self.missing / self.consumed) if self.consumed else 1.0
        rem_term = 1.0 - (self.remaining / self.produced) if self.produced else 1.0
        return 0.5 * miss_term + 0.5 * rem_term


def _silent_sequence_to(
    net: PetriNet,
    marking: Marking,
    accepting,
    bound: int = SILENT_SEARCH_BOUND,
) -> list[str] | None:
    """Shortest silent-only firing sequence to a marking satisfying ``accepting``.

    BFS expanding silent transitions in sorted id order, so the result is the
    lexicographically smallest among the shortest. Returns None if no silent
    sequence reaches an accepting marking (the empty sequence counts when the
    current marking already qualifies).
    """
    silents = net.silent_transition_ids()
    if accepting(marking):
        return []
    if not silents:
        return None
    seen = {marking}
    queue: deque[tuple[Marking, list[str]]] = deque([(marking, [])])
    while queue:
        current, path = queue.popleft()
        for tid in silents:
            if all(current[p] >= 1 for p in net.preset[tid]):
                nxt = current.remove(net.preset[tid]).add(net.postset[tid])
                if nxt in seen:
                    continue
                seen.add(nxt)
                if len(seen) > bound:
                    raise StateSpaceBoundExceeded(
                        f"silent-transition search exceeded {bound} markings"
                    )
                nxt_path = path + [tid]
                if accepting(nxt):
                    return nxt_path
                queue.append((nxt, nxt_path))
    return None


def token_replay(trace: Trace, net: PetriNet) -> ReplayResult:
    """Replay a trace, forcing progress and counting the token debt.

    The environment produces the initial marking (counted as produced) and
    consumes the final marking at the end (counted as consumed). Before each
    event, a disabled transition is helped by the shortest silent firing
    sequence when one exists; any still-missing input tokens are created and
    counted as missing. Events whose action labels no transition count one
    missing consumption and one remaining production. Replay always completes.
    """
    produced = net.initial_marking.total()
    consumed = 0
    missing = 0
    extra_remaining = 0
    marking = net.initial_marking

    def apply_silents(path: list[str]) -> None:
        nonlocal marking, produced, consumed
        for tid in path:
            consumed += len(net.preset[tid])
            produced += len(net.postset[tid])
            marking = marking.remove(net.preset[tid]).add(net.postset[tid])

    for action in trace:
        candidates = net.transitions_by_label.get(action.name, ())
        if not candidates:
            # Unmatchable event: fake one consumption and one production.
            consumed += 1
            missing += 1
            produced += 1
            extra_remaining += 1
            continue

        best: tuple[tuple[int, int, int, str], str, list[str] | None] | None = None
        for tid in candidates:
            lacking = [p for p in net.preset[tid] if marking[p] < 1]
            if not lacking:
                key = (0, 0, 0, tid)
                entry = (key, tid, None)
            else:
                path = _silent_sequence_to(
                    net, marking, lambda m, t=tid: all(m[p] >= 1 for p in net.preset[t])
                )
                if path is not None:
                    entry = ((1, len(path), 0, tid), tid, path)
                else:
                    entry = ((2, 0, len(lacking), tid), tid, None)
            if best is None or entry[0] < best[0]:
                best = entry
        assert best is not None
        _, tid, path = best
        if path:
            apply_silents(path)
        lacking = [p for p in net.preset[tid] if marking[p] < 1]
        if lacking:
            missing += len(lacking)
            marking = marking.add(lacking)
        consumed += len(net.preset[tid])
        produced += len(net.postset[tid])
        marking = marking.remove(net.preset[tid]).add(net.postset[tid])

    final = net.final_marking
    path = _silent_sequence_to(net, marking, lambda m: m.covers(final))
    if path:
        apply_silents(path)
    for place, need in final.items():
        have = min(marking[place], need)
        consumed += need
        missing += need - have
        marking = marking.remove([place] * have)

    remaining = marking.total() + extra_remaining
    return ReplayResult(produced=produced, consumed=consumed, missing=missing, remaining=remaining)


def replay_fitness(trace: Trace, net: PetriNet) -> float:
    return token_replay(trace, net).fitness


# ---------------------------------------------------------------------------
# Synchronous product
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SyncProduct:
    """Product of a trace (as a sequence net) and a model net.

    Each product transition is a move: SYNC (cost 0), LOG-only (cost 1),
    MODEL-only visible (cost 1), or MODEL-only silent (cost 0).
    """

    net: PetriNet
    moves: Mapping[str, Move]
    costs: Mapping[str, int]
    trace_length: int

    def move_counts(self) -> Mapping[MoveType, int]:
        counts: dict[MoveType, int] = {t: 0 for t in MoveType}
        for move in self.moves.values():
            counts[move.type] += 1
        return counts


def synchronous_product(trace: Trace, net: PetriNet) -> SyncProduct:
    """Build the synchronous product net used by alignment search."""
    if len(trace) >= 1000:
        raise ValueError("traces beyond 999 events are not supported")

    taken = set(net.places) | set(net.transition_by_id)

    def fresh(candidate: str) -> str:
        while candidate in taken:
            candidate += "_"
        taken.add(candidate)
        return candidate

    trace_places = [fresh(f"@q{i:03d}") for i in range(len(trace) + 1)]
    places = list(net.places) + trace_places
    transitions: list[Transition] = []
    arcs: set[tuple[str, str]] = set(net.arcs)
    moves: dict[str, Move] = {}
    costs: dict[str, int] = {}

    # Model-only moves keep the original structure.
    for t in net.transitions:
        tid = fresh(f"@mdl|{t.tid}")
        transitions.append(Transition(tid, t.label))
        for p in net.preset[t.tid]:
            arcs.add((p, tid))
        for p in net.postset[t.tid]:
            arcs.add((tid, p))
        if t.is_silent:
            moves[tid] = Move(MoveType.MODEL_SILENT)
            costs[tid] = 0
        else:
            moves[tid] = Move(MoveType.MODEL, t.label)
            costs[tid] = 1

    for i, action in enumerate(trace):
        log_tid = fresh(f"@log{i:03d}")
        transitions.append(Transition(log_tid, action))
        arcs.add((trace_places[i], log_tid))
        arcs.add((log_tid, trace_places[i + 1]))
        moves[log_tid] = Move(MoveType.LOG, action)
        costs[log_tid] = 1

        for model_tid in net.transitions_by_label.get(action.name, ()):
            sync_tid = fresh(f"@syn{i:03d}|{model_tid}")
            transitions.append(Transition(sync_tid, action))
            arcs.add((trace_places[i], sync_tid))
            arcs.add((sync_tid, trace_places[i + 1]))
            for p in net.preset[model_tid]:
                arcs.add((p, sync_tid))
            for p in net.postset[model_tid]:
                arcs.add((sync_tid, p))
            moves[sync_tid] = Move(MoveType.SYNC, action)
            costs[sync_tid] = 0

    initial = dict(net.initial_marking)
    initial[trace_places[0]] = initial.get(trace_places[0], 0) + 1
    final = dict(net.final_marking)
    final[trace_places[-1]] = final.get(trace_places[-1], 0) + 1

    product_net = PetriNet(
        places=places,
        transitions=transitions,
        arcs=arcs,
        initial_marking=initial,
        final_marking=final,
    )
    return SyncProduct(net=product_net, moves=moves, costs=costs, trace_length=len(trace))


# ---------------------------------------------------------------------------
# Optimal alignment (A*)
# ---------------------------------------------------------------------------


_MOVE_ORDER = {MoveType.SYNC: 0, MoveType.MODEL_SILENT: 1, MoveType.MODEL: 2, MoveType.LOG: 3}


def _move_key(move: Move) -> tuple[int, str]:
    return (_MOVE_ORDER[move.type], move.action.name if move.action else "")


def optimal_alignment(
    trace: Trace,
    net: PetriNet,
    *,
    heuristic: str = "none",
    state_bound: int = DEFAULT_STATE_BOUND,
) -> Alignment:
    """Minimum-cost alignment of a trace onto a model via A* on the product net.

    ``heuristic="none"`` (default) is plain uniform-cost search;
    ``heuristic="unmatched"`` adds the admissible count of remaining trace
    events whose action labels no model transition. Cost optimality is
    guaranteed either way; among equal-cost alignments the search
    deterministically prefers more synchronous moves, then the smaller move
    sequence under the move ordering.
    """
    if heuristic not in ("none", "unmatched"):
        raise ValueError(f"unknown heuristic {heuristic!r}")
    product = synchronous_product(trace, net)
    pnet = product.net
    goal = pnet.final_marking

    labels = set(net.transitions_by_label)
    unmatched_suffix = [0] * (len(trace) + 1)
    for i in range(len(trace) - 1, -1, -1):
        unmatched_suffix[i] = unmatched_suffix[i + 1] + (
            0 if trace.actions[i].name in labels else 1
        )

    def h(pos: int) -> int:
        return unmatched_suffix[pos] if heuristic == "unmatched" else 0

    # Heap entries: (f, -sync_count, move_keys, counter, cost, pos, marking, moves)
    start = pnet.initial_marking
    counter = 0
    heap: list[tuple] = [(h(0), 0, (), 0, 0, 0, start, ())]
    best_cost: dict[Marking, int] = {start: 0}
    explored = 0

    while heap:
        _, neg_sync, move_keys, _, cost, pos, marking, moves = heapq.heappop(heap)
        if cost > best_cost.get(marking, cost):
            continue
        if marking == goal:
            denominator = len(trace) + shortest_model_path_cost(net, state_bound=state_bound)
            if denominator > 0:
                fitness = max(0.0, 1.0 - cost / denominator)
            else:
                fitness = 1.0
            return Alignment(moves=moves, cost=cost, fitness=fitness)
        explored += 1
        if explored > state_bound:
            raise StateSpaceBoundExceeded(
                f"alignment search exceeded {state_bound} expansions"
            )
        for tid in sorted(pnet.transition_by_id):
            preset = pnet.preset[tid]
            if not all(marking[p] >= 1 for p in preset):
                continue
            nxt = marking.remove(preset).add(pnet.postset[tid])
            move = product.moves[tid]
            nxt_cost = cost + product.costs[tid]
            prev = best_cost.get(nxt)
            if prev is not None and nxt_cost >= prev:
                continue
            best_cost[nxt] = nxt_cost
            nxt_pos = pos + (1 if move.type in (MoveType.SYNC, MoveType.LOG) else 0)
            counter += 1
            heapq.heappush(
                heap,
                (
                    nxt_cost + h(nxt_pos),
                    neg_sync - (1 if move.type is MoveType.SYNC else 0),
                    move_keys + (_move_key(move),),
                    counter,
                    nxt_cost,
                    nxt_pos,
                    nxt,
                    moves + (move,),
                ),
            )
    raise FinalMarkingUnreachable(
        "no alignment found: the model's final marking is unreachable"
    )


def alignment_fitness(trace: Trace, skill: Skill | PetriNet, **kwargs) -> float:
    """Alignment fitness of a trace against a skill's net (or a bare net)."""
    net = skill.net if isinstance(skill, Skill) else skill
    return optimal_alignment(trace, net, **kwargs).fitness
