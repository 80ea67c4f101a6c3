"""Process discovery: a noise-free Inductive Miner over directly-follows graphs.

The recursion tries base cases first, then cut detection in the order
XOR, SEQ, AND, LOOP, and finally falls through to a flower model that
accepts any sequence over the observed alphabet. With the default
``freq_threshold`` of 0 every input trace replays perfectly on the
discovered model.
"""

from __future__ import annotations

from collections import Counter
from collections.abc import Mapping, Sequence
from dataclasses import dataclass

from .model import (
    Action,
    EventLog,
    ProcessTree,
    Provenance,
    Skill,
    leaf,
    loop,
    par,
    seq,
    tau,
    xor,
)
from .petri import tree_to_petri

Word = tuple[str, ...]


@dataclass(frozen=True)
class DirectlyFollowsGraph:
    """Immediate-succession relation of a log, with start/end activity counts."""

    nodes: frozenset[str]
    edges: Mapping[Word, int]  # (a, b) -> count; keys are 2-tuples
    start_activities: Mapping[str, int]
    end_activities: Mapping[str, int]

    def has_edge(self, a: str, b: str) -> bool:
        return (a, b) in self.edges


def build_dfg(log: EventLog | Sequence[Word], *, freq_threshold: int = 0) -> DirectlyFollowsGraph:
    """Count immediate-succession pairs plus start and end activities.

    Edges with count <= ``freq_threshold`` are dropped (default keeps all).
    Raises ``ValueError`` when the log holds no non-empty trace.
    """
    words = _as_words(log)
    words = [w for w in words if w]
    if not words:
        raise ValueError("cannot build a DFG from a log without non-empty traces")
    nodes: set[str] = set()
    edges: Counter[Word] = Counter()
    starts: Counter[str] = Counter()
    ends: Counter[str] = Counter()
    for word in words:
        nodes.update(word)
        starts[word[0]] += 1
        ends[word[-1]] += 1
        for a, b in zip(word, word[1:]):
            edges[(a, b)] += 1
    if freq_threshold > 0:
        edges = Counter({e: c for e, c in edges.items() if c > freq_threshold})
    return DirectlyFollowsGraph(
        nodes=frozenset(nodes),
        edges=dict(edges),
        start_activities=dict(starts),
        end_activities=dict(ends),
    )


def discover(log: EventLog | Sequence[Word], *, freq_threshold: int = 0) -> ProcessTree:
    """Infer a process tree whose language includes every trace of the log.

    Deterministic: the same log (same trace order) yields the identical tree.
    A positive ``freq_threshold`` filters rare DFG edges before cut detection
    and forfeits the perfect-replay guarantee.
    """
    words = _as_words(log)
    if not words:
        raise ValueError("cannot discover a model from an empty log")
    return _discover(list(words), freq_threshold)


def discover_skill(log: EventLog, *, freq_threshold: int = 0) -> Skill:
    """Run discovery and package the result with its net, texts, and provenance."""
    tree = discover(log, freq_threshold=freq_threshold)
    return Skill(
        skill_id=log.process_id,
        tree=tree,
        net=tree_to_petri(tree),
        query_texts=log.query_texts,
        provenance=Provenance(num_cases=len(log.traces), num_variants=len(log.variants)),
    )


def flower_model(alphabet: Sequence[str]) -> ProcessTree:
    """LOOP over an XOR of all activities: accepts any sequence over the alphabet."""
    names = sorted(set(alphabet))
    if not names:
        return tau()
    redo = leaf(names[0]) if len(names) == 1 else xor(*[leaf(a) for a in names])
    return loop(tau(), redo)


# ---------------------------------------------------------------------------
# Recursion
# ---------------------------------------------------------------------------


def _as_words(log: EventLog | Sequence[Word]) -> list[Word]:
    if isinstance(log, EventLog):
        return [t.labels() for t in log.traces]
    return [tuple(w) for w in log]


def _discover(words: list[Word], threshold: int) -> ProcessTree:
    if all(not w for w in words):
        return tau()
    if any(not w for w in words):
        return xor(tau(), _discover([w for w in words if w], threshold))

    alphabet = sorted({a for w in words for a in w})
    if len(alphabet) == 1:
        activity = alphabet[0]
        if all(len(w) == 1 for w in words):
            return leaf(activity)
        return loop(leaf(activity), tau())

    dfg = build_dfg(words, freq_threshold=threshold)

    cut = _xor_cut(dfg)
    if cut:
        sublogs = _split_xor(words, cut)
        return xor(*[_discover(sub, threshold) for sub in sublogs])

    cut = _seq_cut(dfg)
    if cut:
        sublogs = _split_seq(words, cut)
        return seq(*[_discover(sub, threshold) for sub in sublogs])

    cut = _and_cut(dfg)
    if cut:
        sublogs = _split_projection(words, cut)
        return par(*[_discover(sub, threshold) for sub in sublogs])

    loop_cut = _loop_cut(dfg)
    if loop_cut:
        body_group, redo_groups = loop_cut
        body_words, redo_logs = _split_loop(words, body_group, redo_groups)
        body_tree = _discover(body_words, threshold)
        redo_trees = [_discover(sub, threshold) for sub in redo_logs]
        redo_tree = redo_trees[0] if len(redo_trees) == 1 else xor(*redo_trees)
        return loop(body_tree, redo_tree)

    return flower_model(alphabet)


def _sorted_groups(groups: list[set[str]]) -> list[set[str]]:
    """Deterministic group order: by smallest contained action name."""
    return sorted(groups, key=lambda g: min(g))


class _UnionFind:
    def __init__(self, items: Sequence[str]) -> None:
        self.parent = {x: x for x in items}

    def find(self, x: str) -> str:
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a: str, b: str) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)

    def groups(self) -> list[set[str]]:
        by_root: dict[str, set[str]] = {}
        for x in self.parent:
            by_root.setdefault(self.find(x), set()).add(x)
        return _sorted_groups(list(by_root.values()))


def _xor_cut(dfg: DirectlyFollowsGraph) -> list[set[str]] | None:
    """Connected components of the DFG viewed as an undirected graph."""
    uf = _UnionFind(sorted(dfg.nodes))
    for a, b in dfg.edges:
        uf.union(a, b)
    groups = uf.groups()
    return groups if len(groups) >= 2 else None


def _activity_reachability(dfg: DirectlyFollowsGraph) -> dict[str, set[str]]:
    adjacency: dict[str, set[str]] = {n: set() for n in dfg.nodes}
    for a, b in dfg.edges:
        adjacency[a].add(b)
    reach: dict[str, set[str]] = {}
    for node in dfg.nodes:
        seen: set[str] = set()
        stack = list(adjacency[node])
        while stack:
            cur = stack.pop()
            if cur not in seen:
                seen.add(cur)
                stack.extend(adjacency[cur])
        reach[node] = seen
    return reach


def _seq_cut(dfg: DirectlyFollowsGraph) -> list[set[str]] | None:
    """Maximal ordered partition where earlier groups strictly precede later ones.

    Activities on a cycle merge (same SCC); mutually unreachable activities
    merge (they belong to one choice/parallel block inside a step).
    """
    reach = _activity_reachability(dfg)
    uf = _UnionFind(sorted(dfg.nodes))
    for a in dfg.nodes:
        for b in dfg.nodes:
            if a < b:
                a_to_b = b in reach[a]
                b_to_a = a in reach[b]
                if a_to_b == b_to_a:  # cycle, or mutually unreachable
                    uf.union(a, b)
    groups = uf.groups()
    if len(groups) < 2:
        return None

    def strictly_before(g1: set[str], g2: set[str]) -> bool:
        return all(b in reach[a] and a not in reach[b] for a in g1 for b in g2)

    precedes = [
        sum(1 for other in groups if other is not g and strictly_before(g, other))
        for g in groups
    ]
    ordered = [g for _, g in sorted(zip(precedes, groups), key=lambda p: -p[0])]
    for i in range(len(ordered) - 1):
        if not strictly_before(ordered[i], ordered[i + 1]):
            return None
    return ordered


def _and_cut(dfg: DirectlyFollowsGraph) -> list[set[str]] | None:
    """Partition where every cross-group activity pair has edges both ways.

    Components of the complement relation must each contain a start and an
    end activity; offenders merge into the first group that has both.
    """
    uf = _UnionFind(sorted(dfg.nodes))
    for a in dfg.nodes:
        for b in dfg.nodes:
            if a < b and not (dfg.has_edge(a, b) and dfg.has_edge(b, a)):
                uf.union(a, b)
    groups = uf.groups()
    if len(groups) < 2:
        return None

    starts = set(dfg.start_activities)
    ends = set(dfg.end_activities)
    valid = [g for g in groups if g & starts and g & ends]
    invalid = [g for g in groups if not (g & starts and g & ends)]
    if not valid or (len(valid) < 2 and invalid):
        return None
    for g in invalid:
        valid[0] |= g
    groups = _sorted_groups(valid)
    return groups if len(groups) >= 2 else None


def _loop_cut(dfg: DirectlyFollowsGraph) -> tuple[set[str], list[set[str]]] | None:
    """Body group holding all start/end activities, plus redo groups.

    A redo group may only be entered from end activities and left into start
    activities, and must connect to all of them (noise-free conditions).
    """
    starts = set(dfg.start_activities)
    ends = set(dfg.end_activities)
    body = set(starts | ends)
    rest = sorted(dfg.nodes - body)
    if not rest:
        return None

    uf = _UnionFind(rest)
    for a, b in dfg.edges:
        if a in uf.parent and b in uf.parent:
            uf.union(a, b)
    candidates = uf.groups()

    redo_groups: list[set[str]] = []
    for group in candidates:
        ok = True
        entries: set[str] = set()  # group activities entered from the body
        exits: set[str] = set()  # group activities leaving into the body
        for a, b in dfg.edges:
            if a in body and b in group:
                entries.add(b)
                if a not in ends:
                    ok = False
            elif a in group and b in body:
                exits.add(a)
                if b not in starts:
                    ok = False
        # Completeness: redo connects from every end and back to every start.
        if ok:
            for b in entries:
                if any((e, b) not in dfg.edges for e in ends):
                    ok = False
                    break
        if ok:
            for a in exits:
                if any((a, s) not in dfg.edges for s in starts):
                    ok = False
                    break
        if ok and entries and exits:
            redo_groups.append(group)
        else:
            body |= group

    if not redo_groups:
        return None
    return body, _sorted_groups(redo_groups)


# ---------------------------------------------------------------------------
# Log splitting
# ---------------------------------------------------------------------------


def _split_xor(words: list[Word], groups: list[set[str]]) -> list[list[Word]]:
    sublogs: list[list[Word]] = [[] for _ in groups]
    for word in words:
        overlaps = [sum(1 for a in word if a in g) for g in groups]
        target = max(range(len(groups)), key=lambda i: overlaps[i])
        sublogs[target].append(tuple(a for a in word if a in groups[target]))
    return sublogs


def _split_seq(words: list[Word], groups: list[set[str]]) -> list[list[Word]]:
    sublogs: list[list[Word]] = [[] for _ in groups]
    for word in words:
        for i, group in enumerate(groups):
            sublogs[i].append(tuple(a for a in word if a in group))
    return sublogs


def _split_projection(words: list[Word], groups: list[set[str]]) -> list[list[Word]]:
    return _split_seq(words, groups)


def _split_loop(
    words: list[Word], body: set[str], redo_groups: list[set[str]]
) -> tuple[list[Word], list[list[Word]]]:
    body_words: list[Word] = []
    redo_logs: list[list[Word]] = [[] for _ in redo_groups]

    def group_index(activity: str) -> int:
        # -1 = body, otherwise index into redo_groups
        for i, g in enumerate(redo_groups):
            if activity in g:
                return i
        return -1

    for word in words:
        runs: list[tuple[int, list[str]]] = []
        for activity in word:
            gi = group_index(activity)
            if runs and runs[-1][0] == gi:
                runs[-1][1].append(activity)
            else:
                runs.append((gi, [activity]))
        # Loop semantics require body-redo alternation starting and ending
        # with a body segment; pad defensively if the log violates that.
        if not runs or runs[0][0] != -1:
            runs.insert(0, (-1, []))
        if runs[-1][0] != -1:
            runs.append((-1, []))
        previous = None
        for gi, segment in runs:
            if previous is not None and previous != -1 and gi != -1:
                body_words.append(())
            if gi == -1:
                body_words.append(tuple(segment))
            else:
                redo_logs[gi].append(tuple(segment))
            previous = gi
    return body_words, redo_logs
