"""Executable Petri-net semantics, tree/DAG translation, and model path search."""

from __future__ import annotations

import heapq
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass

from .model import (
    Action,
    Marking,
    Operator,
    PetriNet,
    ProcessTree,
    Trace,
    Transition,
)

DEFAULT_STATE_BOUND = 10**6


class StateSpaceBoundExceeded(RuntimeError):
    """A marking-space search touched more states than its configured bound."""


class FinalMarkingUnreachable(ValueError):
    """The net's final marking cannot be reached from the given marking."""


class CycleError(ValueError):
    """A DAG input contains a cycle; ``edges`` lists the offending edges."""

    def __init__(self, edges: Sequence[tuple[str, str]]) -> None:
        super().__init__(f"cycle detected through edges: {list(edges)}")
        self.edges = tuple(edges)


# ---------------------------------------------------------------------------
# DAG reference models
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DagModel:
    """Reference model as a DAG of actions (TaskBench-style tool graph)."""

    nodes: tuple[tuple[str, Action], ...]
    edges: frozenset[tuple[str, str]]

    def __init__(
        self,
        nodes: Iterable[tuple[str, Action | str]],
        edges: Iterable[tuple[str, str]] = (),
    ) -> None:
        normalized = tuple(
            (nid, action if isinstance(action, Action) else Action(action))
            for nid, action in nodes
        )
        ids = [nid for nid, _ in normalized]
        if len(set(ids)) != len(ids):
            dupes = sorted({n for n in ids if ids.count(n) > 1})
            raise ValueError(f"duplicate DAG node ids: {dupes}")
        edge_set = frozenset(edges)
        known = set(ids)
        for src, dst in sorted(edge_set):
            if src not in known or dst not in known:
                raise ValueError(f"edge references unknown node: ({src!r} -> {dst!r})")
        object.__setattr__(self, "nodes", normalized)
        object.__setattr__(self, "edges", edge_set)
        cycle = _find_cycle(known, edge_set)
        if cycle:
            raise CycleError(cycle)

    @property
    def node_ids(self) -> tuple[str, ...]:
        return tuple(nid for nid, _ in self.nodes)

    def action_of(self, node_id: str) -> Action:
        for nid, action in self.nodes:
            if nid == node_id:
                return action
        raise KeyError(node_id)

    def topological_orders(self) -> list[tuple[str, ...]]:
        """All topological orders; exponential, intended for small DAGs."""
        preds: dict[str, set[str]] = {nid: set() for nid in self.node_ids}
        for src, dst in self.edges:
            preds[dst].add(src)
        out: list[tuple[str, ...]] = []

        def extend(prefix: list[str], done: set[str]) -> None:
            if len(prefix) == len(self.nodes):
                out.append(tuple(prefix))
                return
            for nid in self.node_ids:
                if nid not in done and preds[nid] <= done:
                    prefix.append(nid)
                    done.add(nid)
                    extend(prefix, done)
                    done.remove(nid)
                    prefix.pop()

        extend([], set())
        return out

    def transitive_reduction(self) -> DagModel:
        """Drop edges implied by longer paths."""
        reach = _reachability(set(self.node_ids), self.edges)
        kept = set()
        for src, dst in self.edges:
            indirect = any(
                (src, mid) in self.edges and dst in reach[mid]
                for mid in self.node_ids
                if mid not in (src, dst)
            )
            if not indirect:
                kept.add((src, dst))
        return DagModel(self.nodes, kept)


def _find_cycle(nodes: set[str], edges: frozenset[tuple[str, str]]) -> list[tuple[str, str]]:
    adjacency: dict[str, list[str]] = {n: [] for n in nodes}
    for src, dst in sorted(edges):
        adjacency[src].append(dst)
    WHITE, GREY, BLACK = 0, 1, 2
    color = {n: WHITE for n in nodes}
    stack_edges: list[tuple[str, str]] = []

    def visit(node: str) -> list[tuple[str, str]] | None:
        color[node] = GREY
        for nxt in adjacency[node]:
            if color[nxt] == GREY:
                cycle = [(node, nxt)]
                for edge in reversed(stack_edges):
                    cycle.insert(0, edge)
                    if edge[0] == nxt:
                        break
                return cycle
            if color[nxt] == WHITE:
                stack_edges.append((node, nxt))
                found = visit(nxt)
                stack_edges.pop()
                if found:
                    return found
        color[node] = BLACK
        return None

    for start in sorted(nodes):
        if color[start] == WHITE:
            found = visit(start)
            if found:
                return found
    return []


def _reachability(nodes: set[str], edges: Iterable[tuple[str, str]]) -> dict[str, set[str]]:
    adjacency: dict[str, set[str]] = {n: set() for n in nodes}
    for src, dst in edges:
        adjacency[src].add(dst)
    reach: dict[str, set[str]] = {}
    for node in nodes:
        seen: set[str] = set()
        stack = list(adjacency[node])
        while stack:
            cur = stack.pop()
            if cur not in seen:
                seen.add(cur)
                stack.extend(adjacency[cur])
        reach[node] = seen
    return reach


# ---------------------------------------------------------------------------
# Firing semantics
# ---------------------------------------------------------------------------


def enabled_transitions(net: PetriNet, marking: Marking) -> set[str]:
    """Transition ids enabled at ``marking`` (every input place holds a token)."""
    for place in marking:
        if place not in net.places:
            raise ValueError(f"marking references unknown place {place!r}")
    return {
        tid
        for tid, inputs in net.preset.items()
        if all(marking[p] >= 1 for p in inputs)
    }


def is_enabled(net: PetriNet, marking: Marking, tid: str) -> bool:
    return all(marking[p] >= 1 for p in net.preset[tid])


def fire(net: PetriNet, marking: Marking, tid: str) -> Marking:
    """Fire ``tid``: consume one token per input place, produce one per output."""
    if tid not in net.transition_by_id:
        raise ValueError(f"unknown transition {tid!r}")
    if not is_enabled(net, marking, tid):
        raise ValueError(f"transition {tid!r} is not enabled at {marking!r}")
    return marking.remove(net.preset[tid]).add(net.postset[tid])


# ---------------------------------------------------------------------------
# Tree -> Petri net
# ---------------------------------------------------------------------------


class _NetBuilder:
    def __init__(self) -> None:
        self.places: list[str] = []
        self.transitions: list[Transition] = []
        self.arcs: set[tuple[str, str]] = set()

    def place(self) -> str:
        pid = f"p{len(self.places):03d}"
        self.places.append(pid)
        return pid

    def transition(self, label: Action | None, inputs: Iterable[str], outputs: Iterable[str]) -> str:
        tid = f"t{len(self.transitions):03d}"
        self.transitions.append(Transition(tid, label))
        for p in inputs:
            self.arcs.add((p, tid))
        for p in outputs:
            self.arcs.add((tid, p))
        return tid


def tree_to_petri(tree: ProcessTree) -> PetriNet:
    """Standard recursive translation; the net's visible language equals the tree's.

    LEAF and TAU become single transitions, SEQ chains children through shared
    places, XOR shares entry/exit places, AND uses silent split/join
    transitions, and LOOP wires a redo path backwards between silent
    enter/exit transitions.
    """
    builder = _NetBuilder()
    source = builder.place()
    sink = builder.place()

    def build(node: ProcessTree, entry: str, exit_: str) -> None:
        if node.op is Operator.LEAF:
            builder.transition(node.label, [entry], [exit_])
        elif node.op is Operator.TAU:
            builder.transition(None, [entry], [exit_])
        elif node.op is Operator.SEQ:
            cursor = entry
            for child in node.children[:-1]:
                nxt = builder.place()
                build(child, cursor, nxt)
                cursor = nxt
            build(node.children[-1], cursor, exit_)
        elif node.op is Operator.XOR:
            for child in node.children:
                build(child, entry, exit_)
        elif node.op is Operator.AND:
            entries = [builder.place() for _ in node.children]
            exits = [builder.place() for _ in node.children]
            builder.transition(None, [entry], entries)
            for child, b_in, b_out in zip(node.children, entries, exits):
                build(child, b_in, b_out)
            builder.transition(None, exits, [exit_])
        elif node.op is Operator.LOOP:
            body, redo = node.children
            body_in = builder.place()
            body_out = builder.place()
            builder.transition(None, [entry], [body_in])
            build(body, body_in, body_out)
            builder.transition(None, [body_out], [exit_])
            build(redo, body_out, body_in)
        else:  # pragma: no cover - exhaustive over Operator
            raise AssertionError(node.op)

    build(tree, source, sink)
    return PetriNet(
        places=builder.places,
        transitions=builder.transitions,
        arcs=builder.arcs,
        initial_marking={source: 1},
        final_marking={sink: 1},
    )


# ---------------------------------------------------------------------------
# DAG -> Petri net
# ---------------------------------------------------------------------------


def dag_to_petri(dag: DagModel, *, transitive_reduce: bool = False) -> PetriNet:
    """Translate a DAG reference model: one transition per node, one place per edge.

    The resulting net's visible language is exactly the set of topological
    orders of the DAG. ``transitive_reduce`` drops redundant edges first.
    """
    if not dag.nodes:
        raise ValueError("cannot translate an empty DAG")
    if transitive_reduce:
        dag = dag.transitive_reduction()

    used = set(dag.node_ids)

    def fresh_place(candidate: str, into: list[str]) -> str:
        while candidate in used:
            candidate += "_"
        used.add(candidate)
        into.append(candidate)
        return candidate

    places: list[str] = []
    source = fresh_place("source", places)
    sink = fresh_place("sink", places)
    transitions = [Transition(nid, action) for nid, action in dag.nodes]
    arcs: set[tuple[str, str]] = set()

    for src, dst in sorted(dag.edges):
        pid = fresh_place(f"p_{src}__{dst}", places)
        arcs.add((src, pid))
        arcs.add((pid, dst))

    has_pred = {dst for _, dst in dag.edges}
    has_succ = {src for src, _ in dag.edges}
    roots = [nid for nid in dag.node_ids if nid not in has_pred]
    sinks = [nid for nid in dag.node_ids if nid not in has_succ]

    def fresh_tid(candidate: str) -> str:
        while candidate in used:
            candidate += "_"
        used.add(candidate)
        return candidate

    if len(roots) == 1:
        arcs.add((source, roots[0]))
    else:
        t_start = fresh_tid("t_start")
        transitions.append(Transition(t_start, None))
        arcs.add((source, t_start))
        for nid in roots:
            pid = fresh_place(f"p_start__{nid}", places)
            arcs.add((t_start, pid))
            arcs.add((pid, nid))

    if len(sinks) == 1:
        arcs.add((sinks[0], sink))
    else:
        t_end = fresh_tid("t_end")
        transitions.append(Transition(t_end, None))
        arcs.add((t_end, sink))
        for nid in sinks:
            pid = fresh_place(f"p_end__{nid}", places)
            arcs.add((nid, pid))
            arcs.add((pid, t_end))

    return PetriNet(
        places=places,
        transitions=transitions,
        arcs=arcs,
        initial_marking={source: 1},
        final_marking={sink: 1},
    )


# ---------------------------------------------------------------------------
# Model path search and language enumeration
# ---------------------------------------------------------------------------


def shortest_model_path_cost(
    net: PetriNet,
    *,
    state_bound: int = DEFAULT_STATE_BOUND,
) -> int:
    """Minimum number of visible firings on any initial-to-final firing sequence.

    Silent firings are free. Uniform-cost search over markings; raises
    :class:`FinalMarkingUnreachable` if no firing sequence reaches the final
    marking and :class:`StateSpaceBoundExceeded` past ``state_bound`` states.
    """
    start = net.initial_marking
    goal = net.final_marking
    silent = {t.tid for t in net.transitions if t.is_silent}
    frontier: list[tuple[int, int, Marking]] = [(0, 0, start)]
    best: dict[Marking, int] = {start: 0}
    counter = 0
    while frontier:
        cost, _, marking = heapq.heappop(frontier)
        if cost > best.get(marking, cost):
            continue
        if marking == goal:
            return cost
        for tid in sorted(enabled_transitions(net, marking)):
            nxt = fire(net, marking, tid)
            nxt_cost = cost + (0 if tid in silent else 1)
            if nxt_cost < best.get(nxt, nxt_cost + 1):
                best[nxt] = nxt_cost
                counter += 1
                if len(best) > state_bound:
                    raise StateSpaceBoundExceeded(
                        f"model path search exceeded {state_bound} markings"
                    )
                heapq.heappush(frontier, (nxt_cost, counter, nxt))
    raise FinalMarkingUnreachable(
        f"final marking {goal!r} unreachable from {start!r}"
    )


def net_language(
    net: PetriNet,
    *,
    max_len: int | None = None,
    state_bound: int = DEFAULT_STATE_BOUND,
) -> set[tuple[str, ...]]:
    """Visible-label sequences of complete (initial-to-final) firing sequences.

    ``max_len`` caps sequence length; it defaults to the number of visible
    transitions, which is exact for loop-free nets. Exploration is bounded by
    ``state_bound`` distinct (marking, prefix) states.
    """
    if max_len is None:
        max_len = sum(1 for t in net.transitions if not t.is_silent)
    label_of = {t.tid: (t.label.name if t.label else None) for t in net.transitions}
    goal = net.final_marking
    out: set[tuple[str, ...]] = set()
    seen: set[tuple[Marking, tuple[str, ...]]] = set()
    stack: list[tuple[Marking, tuple[str, ...]]] = [(net.initial_marking, ())]
    while stack:
        marking, prefix = stack.pop()
        if (marking, prefix) in seen:
            continue
        seen.add((marking, prefix))
        if len(seen) > state_bound:
            raise StateSpaceBoundExceeded(
                f"language enumeration exceeded {state_bound} states"
            )
        if marking == goal:
            out.add(prefix)
        for tid in sorted(enabled_transitions(net, marking)):
            label = label_of[tid]
            if label is None:
                stack.append((fire(net, marking, tid), prefix))
            elif len(prefix) < max_len:
                stack.append((fire(net, marking, tid), prefix + (label,)))
    return out


def tree_language(tree: ProcessTree, *, max_loop: int = 1) -> set[tuple[str, ...]]:
    """Enumerate the tree's action-sequence language.

    LOOP redo parts are unrolled at most ``max_loop`` times, so the result is
    finite (and exact for loop-free trees).
    """
    if tree.op is Operator.LEAF:
        assert tree.label is not None
        return {(tree.label.name,)}
    if tree.op is Operator.TAU:
        return {()}
    child_langs = [tree_language(c, max_loop=max_loop) for c in tree.children]
    if tree.op is Operator.SEQ:
        acc: set[tuple[str, ...]] = {()}
        for lang in child_langs:
            acc = {a + b for a in acc for b in lang}
        return acc
    if tree.op is Operator.XOR:
        return set().union(*child_langs)
    if tree.op is Operator.AND:
        acc = {()}
        for lang in child_langs:
            acc = {m for a in acc for b in lang for m in interleavings(a, b)}
        return acc
    body, redo = child_langs
    out: set[tuple[str, ...]] = set(body)
    current = set(body)
    for _ in range(max_loop):
        current = {b + r + b2 for b in current for r in redo for b2 in body}
        out |= current
    return out


def interleavings(a: tuple[str, ...], b: tuple[str, ...]) -> set[tuple[str, ...]]:
    """All order-preserving merges of two sequences."""
    if not a:
        return {b}
    if not b:
        return {a}
    return {(a[0],) + rest for rest in interleavings(a[1:], b)} | {
        (b[0],) + rest for rest in interleavings(a, b[1:])
    }


def canonical_playout(tree: ProcessTree) -> Trace:
    """One deterministic member of the tree's language (first branch, loop once)."""

    def walk(node: ProcessTree) -> list[str]:
        if node.op is Operator.LEAF:
            assert node.label is not None
            return [node.label.name]
        if node.op is Operator.TAU:
            return []
        if node.op is Operator.XOR:
            return walk(node.children[0])
        if node.op is Operator.LOOP:
            return walk(node.children[0])
        out: list[str] = []
        for child in node.children:
            out.extend(walk(child))
        return out

    return Trace(walk(tree))
