"""Core domain types: traces, event logs, process trees, Petri nets, skills, alignments.

All types are immutable values after construction and safe to share between
concurrent tasks.
"""

from __future__ import annotations

from collections.abc import Iterable, Iterator, Mapping, Sequence
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property


class InvalidTreeError(ValueError):
    """Raised when a process tree violates an operator arity invariant."""


# ---------------------------------------------------------------------------
# Actions, traces, logs
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class Action:
    """A single plan step (tool invocation). Names are case-sensitive and trimmed."""

    name: str

    def __post_init__(self) -> None:
        if not isinstance(self.name, str) or not self.name:
            raise ValueError("action name must be a non-empty string")
        if self.name != self.name.strip():
            raise ValueError(f"action name must be trimmed: {self.name!r}")

    def __str__(self) -> str:
        return self.name


def _as_actions(actions: Iterable[Action | str]) -> tuple[Action, ...]:
    return tuple(a if isinstance(a, Action) else Action(a) for a in actions)


@dataclass(frozen=True, slots=True)
class Trace:
    """One ordered action sequence (a case / plan). May be empty only on purpose."""

    actions: tuple[Action, ...]
    id: str = ""

    def __init__(self, actions: Iterable[Action | str] = (), id: str = "") -> None:
        object.__setattr__(self, "actions", _as_actions(actions))
        object.__setattr__(self, "id", id)

    def labels(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.actions)

    def __len__(self) -> int:
        return len(self.actions)

    def __iter__(self) -> Iterator[Action]:
        return iter(self.actions)


@dataclass(frozen=True, slots=True)
class EventLog:
    """All traces observed for one problem, plus the query texts that produced them."""

    process_id: str
    query_texts: tuple[str, ...] = ()
    traces: tuple[Trace, ...] = ()

    def __init__(
        self,
        process_id: str,
        query_texts: Iterable[str] = (),
        traces: Iterable[Trace] = (),
    ) -> None:
        object.__setattr__(self, "process_id", process_id)
        object.__setattr__(self, "query_texts", tuple(query_texts))
        object.__setattr__(self, "traces", tuple(traces))

    @property
    def variants(self) -> set[tuple[str, ...]]:
        return {t.labels() for t in self.traces}


# ---------------------------------------------------------------------------
# Process trees
# ---------------------------------------------------------------------------


class Operator(Enum):
    LEAF = "leaf"
    TAU = "tau"
    SEQ = "seq"
    XOR = "xor"
    AND = "and"
    LOOP = "loop"


@dataclass(frozen=True, slots=True)
class ProcessTree:
    """Recursive control-flow model: SEQ / XOR / AND / LOOP over action leaves.

    SEQ, XOR and AND require at least two children; LOOP has exactly a body
    and a redo child. Construct via the module-level factories (:func:`leaf`,
    :func:`seq`, ...) rather than directly.
    """

    op: Operator
    label: Action | None = None
    children: tuple[ProcessTree, ...] = ()

    def __post_init__(self) -> None:
        op, label, children = self.op, self.label, self.children
        if op is Operator.LEAF:
            if label is None or children:
                raise InvalidTreeError("LEAF needs a label and no children")
        elif op is Operator.TAU:
            if label is not None or children:
                raise InvalidTreeError("TAU takes no label and no children")
        elif op is Operator.LOOP:
            if label is not None or len(children) != 2:
                raise InvalidTreeError(
                    f"LOOP takes exactly 2 children (body, redo), got {len(children)}"
                )
        else:
            if label is not None or len(children) < 2:
                raise InvalidTreeError(
                    f"{op.name} requires at least 2 children, got {len(children)}"
                )

    def alphabet(self) -> set[str]:
        """All action names occurring at the leaves."""
        if self.op is Operator.LEAF:
            assert self.label is not None
            return {self.label.name}
        out: set[str] = set()
        for child in self.children:
            out |= child.alphabet()
        return out

    def __str__(self) -> str:
        from .treetext import serialize_process_tree

        return serialize_process_tree(self)


def leaf(action: Action | str) -> ProcessTree:
    return ProcessTree(Operator.LEAF, label=action if isinstance(action, Action) else Action(action))


def tau() -> ProcessTree:
    return ProcessTree(Operator.TAU)


def _subtree(t: ProcessTree | Action | str) -> ProcessTree:
    return t if isinstance(t, ProcessTree) else leaf(t)


def seq(*children: ProcessTree | Action | str) -> ProcessTree:
    return ProcessTree(Operator.SEQ, children=tuple(_subtree(c) for c in children))


def xor(*children: ProcessTree | Action | str) -> ProcessTree:
    return ProcessTree(Operator.XOR, children=tuple(_subtree(c) for c in children))


def par(*children: ProcessTree | Action | str) -> ProcessTree:
    """AND (interleaved parallel) node."""
    return ProcessTree(Operator.AND, children=tuple(_subtree(c) for c in children))


def loop(body: ProcessTree | Action | str, redo: ProcessTree | Action | str) -> ProcessTree:
    return ProcessTree(Operator.LOOP, children=(_subtree(body), _subtree(redo)))


# ---------------------------------------------------------------------------
# Petri nets
# ---------------------------------------------------------------------------


class Marking(Mapping[str, int]):
    """Immutable multiset of places -> token counts. Zero counts are dropped."""

    __slots__ = ("_counts", "_hash")

    def __init__(self, counts: Mapping[str, int] | Iterable[tuple[str, int]] = ()) -> None:
        items = counts.items() if isinstance(counts, Mapping) else counts
        store: dict[str, int] = {}
        for place, count in items:
            if count < 0:
                raise ValueError(f"negative token count for place {place!r}")
            if count > 0:
                store[place] = store.get(place, 0) + count
        object.__setattr__(self, "_counts", store)
        object.__setattr__(self, "_hash", hash(frozenset(store.items())))

    def __setattr__(self, name: str, value: object) -> None:
        raise AttributeError("Marking is immutable")

    def __getitem__(self, place: str) -> int:
        return self._counts.get(place, 0)

    def __iter__(self) -> Iterator[str]:
        return iter(sorted(self._counts))

    def __len__(self) -> int:
        return len(self._counts)

    def __contains__(self, place: object) -> bool:
        return place in self._counts

    def __hash__(self) -> int:
        return self._hash

    def __eq__(self, other: object) -> bool:
        if isinstance(other, Marking):
            return self._counts == other._counts
        if isinstance(other, Mapping):
            return self._counts == {p: c for p, c in other.items() if c}
        return NotImplemented

    def __repr__(self) -> str:
        inner = ", ".join(f"{p}:{c}" for p, c in sorted(self._counts.items()))
        return f"Marking({{{inner}}})"

    def total(self) -> int:
        return sum(self._counts.values())

    def covers(self, other: Marking) -> bool:
        return all(self[p] >= c for p, c in other.items())

    def add(self, places: Iterable[str]) -> Marking:
        counts = dict(self._counts)
        for p in places:
            counts[p] = counts.get(p, 0) + 1
        return Marking(counts)

    def remove(self, places: Iterable[str]) -> Marking:
        counts = dict(self._counts)
        for p in places:
            have = counts.get(p, 0)
            if have <= 0:
                raise ValueError(f"cannot remove token from empty place {p!r}")
            counts[p] = have - 1
        return Marking(counts)


@dataclass(frozen=True, slots=True)
class Transition:
    """Petri-net transition; ``label is None`` marks a silent (tau) transition."""

    tid: str
    label: Action | None = None

    @property
    def is_silent(self) -> bool:
        return self.label is None


@dataclass(frozen=True)
class PetriNet:
    """Workflow net: places, transitions, arcs, plus initial/final markings."""

    places: frozenset[str]
    transitions: tuple[Transition, ...]
    arcs: frozenset[tuple[str, str]]
    initial_marking: Marking
    final_marking: Marking

    def __init__(
        self,
        places: Iterable[str],
        transitions: Iterable[Transition],
        arcs: Iterable[tuple[str, str]],
        initial_marking: Marking | Mapping[str, int],
        final_marking: Marking | Mapping[str, int],
    ) -> None:
        object.__setattr__(self, "places", frozenset(places))
        object.__setattr__(self, "transitions", tuple(transitions))
        object.__setattr__(self, "arcs", frozenset(arcs))
        object.__setattr__(
            self, "initial_marking",
            initial_marking if isinstance(initial_marking, Marking) else Marking(initial_marking),
        )
        object.__setattr__(
            self, "final_marking",
            final_marking if isinstance(final_marking, Marking) else Marking(final_marking),
        )

    def __hash__(self) -> int:
        return hash((self.places, self.transitions, self.arcs,
                     self.initial_marking, self.final_marking))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PetriNet):
            return NotImplemented
        return (
            self.places == other.places
            and self.transitions == other.transitions
            and self.arcs == other.arcs
            and self.initial_marking == other.initial_marking
            and self.final_marking == other.final_marking
        )

    @cached_property
    def transition_ids(self) -> frozenset[str]:
        return frozenset(t.tid for t in self.transitions)

    @cached_property
    def transition_by_id(self) -> Mapping[str, Transition]:
        index = {}
        for t in self.transitions:
            if t.tid in index:
                raise ValueError(f"duplicate transition id {t.tid!r}")
            index[t.tid] = t
        return index

    @cached_property
    def preset(self) -> Mapping[str, tuple[str, ...]]:
        """Input places per transition id, sorted."""
        pre: dict[str, list[str]] = {t.tid: [] for t in self.transitions}
        for src, dst in self.arcs:
            if dst in pre and src in self.places:
                pre[dst].append(src)
        return {tid: tuple(sorted(ps)) for tid, ps in pre.items()}

    @cached_property
    def postset(self) -> Mapping[str, tuple[str, ...]]:
        """Output places per transition id, sorted."""
        post: dict[str, list[str]] = {t.tid: [] for t in self.transitions}
        for src, dst in self.arcs:
            if src in post and dst in self.places:
                post[src].append(dst)
        return {tid: tuple(sorted(ps)) for tid, ps in post.items()}

    @cached_property
    def transitions_by_label(self) -> Mapping[str, tuple[str, ...]]:
        """Visible label -> sorted transition ids carrying it."""
        index: dict[str, list[str]] = {}
        for t in self.transitions:
            if t.label is not None:
                index.setdefault(t.label.name, []).append(t.tid)
        return {name: tuple(sorted(tids)) for name, tids in index.items()}

    def silent_transition_ids(self) -> tuple[str, ...]:
        return tuple(sorted(t.tid for t in self.transitions if t.is_silent))


@dataclass(frozen=True, slots=True)
class ValidationReport:
    """Outcome of :func:`validate_net`; empty ``violations`` means a valid workflow net."""

    violations: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_net(net: PetriNet) -> ValidationReport:
    """Check the workflow-net invariants, reporting every violation found.

    A valid net has arcs between existing nodes only, exactly one source and
    one sink place, every node on a path from source to sink, and markings
    that put one token on the source (initial) and one on the sink (final).
    """
    problems: list[str] = []
    tids = set()
    for t in net.transitions:
        if t.tid in tids:
            problems.append(f"duplicate transition id {t.tid!r}")
        tids.add(t.tid)
    overlap = net.places & tids
    if overlap:
        problems.append(f"ids used as both place and transition: {sorted(overlap)}")

    nodes = net.places | tids
    for src, dst in sorted(net.arcs):
        if src not in nodes or dst not in nodes:
            problems.append(f"dangling arc ({src!r} -> {dst!r})")
        elif (src in net.places) == (dst in net.places):
            problems.append(f"arc must connect a place and a transition: ({src!r} -> {dst!r})")

    for place in net.initial_marking:
        if place not in net.places:
            problems.append(f"initial marking references unknown place {place!r}")
    for place in net.final_marking:
        if place not in net.places:
            problems.append(f"final marking references unknown place {place!r}")

    if problems:
        # Structural errors make the path analysis below unreliable; stop here.
        return ValidationReport(tuple(problems))

    incoming: dict[str, set[str]] = {n: set() for n in nodes}
    outgoing: dict[str, set[str]] = {n: set() for n in nodes}
    for src, dst in net.arcs:
        outgoing[src].add(dst)
        incoming[dst].add(src)

    sources = sorted(p for p in net.places if not incoming[p])
    sinks = sorted(p for p in net.places if not outgoing[p])
    if len(sources) != 1:
        problems.append(f"expected exactly one source place, found {sources}")
    if len(sinks) != 1:
        problems.append(f"expected exactly one sink place, found {sinks}")

    if len(sources) == 1 and len(sinks) == 1:
        source, sink = sources[0], sinks[0]

        def reachable(start: str, edges: Mapping[str, set[str]]) -> set[str]:
            seen = {start}
            stack = [start]
            while stack:
                for nxt in edges[stack.pop()]:
                    if nxt not in seen:
                        seen.add(nxt)
                        stack.append(nxt)
            return seen

        from_source = reachable(source, outgoing)
        to_sink = reachable(sink, incoming)
        stranded = sorted(nodes - (from_source & to_sink))
        if stranded:
            problems.append(f"nodes not on a source-to-sink path: {stranded}")

        if dict(net.initial_marking) != {source: 1}:
            problems.append(
                f"initial marking must be one token on source {source!r}, got {dict(net.initial_marking)}"
            )
        if dict(net.final_marking) != {sink: 1}:
            problems.append(
                f"final marking must be one token on sink {sink!r}, got {dict(net.final_marking)}"
            )

    return ValidationReport(tuple(problems))


# ---------------------------------------------------------------------------
# Embeddings, skills, libraries
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class EmbeddingVector:
    """Fixed-length real vector plus the tag of the model that produced it."""

    values: tuple[float, ...]
    model_tag: str

    def __init__(self, values: Iterable[float], model_tag: str) -> None:
        object.__setattr__(self, "values", tuple(float(v) for v in values))
        object.__setattr__(self, "model_tag", model_tag)

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True, slots=True)
class Provenance:
    """Statistics of the source log a skill was discovered from."""

    num_cases: int
    num_variants: int


@dataclass(frozen=True, slots=True)
class Skill:
    """A discovered process model stored with its query texts for retrieval."""

    skill_id: str
    tree: ProcessTree
    net: PetriNet
    query_texts: tuple[str, ...] = ()
    embedding: EmbeddingVector | None = None
    provenance: Provenance = Provenance(0, 0)

    def __init__(
        self,
        skill_id: str,
        tree: ProcessTree,
        net: PetriNet,
        query_texts: Iterable[str] = (),
        embedding: EmbeddingVector | None = None,
        provenance: Provenance = Provenance(0, 0),
    ) -> None:
        object.__setattr__(self, "skill_id", skill_id)
        object.__setattr__(self, "tree", tree)
        object.__setattr__(self, "net", net)
        object.__setattr__(self, "query_texts", tuple(query_texts))
        object.__setattr__(self, "embedding", embedding)
        object.__setattr__(self, "provenance", provenance)

    def canonical_text(self) -> str:
        """The text representing this skill for embedding (first query text)."""
        return self.query_texts[0] if self.query_texts else self.skill_id


class SkillLibrary:
    """Skill collection with deterministic (skill_id-sorted) iteration order.

    Embedding dimensions must agree across all embedded skills in a library.
    """

    def __init__(self, skills: Iterable[Skill] = ()) -> None:
        self._skills: dict[str, Skill] = {}
        for skill in skills:
            self.add(skill)

    def add(self, skill: Skill, *, replace: bool = False) -> None:
        if not replace and skill.skill_id in self._skills:
            raise ValueError(f"duplicate skill id {skill.skill_id!r}")
        if skill.embedding is not None:
            dim = self.embedding_dimension()
            if dim is not None and len(skill.embedding) != dim:
                raise ValueError(
                    f"embedding dimension {len(skill.embedding)} for {skill.skill_id!r}"
                    f" differs from library dimension {dim}"
                )
        self._skills[skill.skill_id] = skill

    def get(self, skill_id: str) -> Skill:
        try:
            return self._skills[skill_id]
        except KeyError:
            raise KeyError(f"unknown skill id {skill_id!r}") from None

    def __contains__(self, skill_id: str) -> bool:
        return skill_id in self._skills

    def __len__(self) -> int:
        return len(self._skills)

    def __iter__(self) -> Iterator[Skill]:
        for skill_id in sorted(self._skills):
            yield self._skills[skill_id]

    def skill_ids(self) -> list[str]:
        return sorted(self._skills)

    def embedding_dimension(self) -> int | None:
        for skill in self._skills.values():
            if skill.embedding is not None:
                return len(skill.embedding)
        return None


# ---------------------------------------------------------------------------
# Alignments
# ---------------------------------------------------------------------------


class MoveType(Enum):
    SYNC = "SYNC"
    LOG = "LOG"
    MODEL = "MODEL"
    MODEL_SILENT = "MODEL_SILENT"


@dataclass(frozen=True, slots=True)
class Move:
    type: MoveType
    action: Action | None = None

    def __post_init__(self) -> None:
        if self.type is MoveType.MODEL_SILENT:
            if self.action is not None:
                raise ValueError("silent model moves carry no action")
        elif self.action is None:
            raise ValueError(f"{self.type.value} move requires an action")


@dataclass(frozen=True, slots=True)
class Alignment:
    """Minimum-cost interleaving of trace and model moves, with its fitness."""

    moves: tuple[Move, ...]
    cost: int
    fitness: float

    def __init__(self, moves: Iterable[Move], cost: int, fitness: float) -> None:
        object.__setattr__(self, "moves", tuple(moves))
        object.__setattr__(self, "cost", cost)
        object.__setattr__(self, "fitness", fitness)
        if cost < 0:
            raise ValueError("alignment cost must be non-negative")
        if not 0.0 <= fitness <= 1.0 + 1e-12:
            raise ValueError(f"fitness out of range: {fitness}")

    def trace_projection(self) -> tuple[str, ...]:
        """Actions of SYNC and LOG moves, in order; reproduces the aligned trace."""
        return tuple(
            m.action.name for m in self.moves
            if m.type in (MoveType.SYNC, MoveType.LOG) and m.action is not None
        )

    def model_projection(self) -> tuple[str, ...]:
        """Visible actions of SYNC and MODEL moves, in order (a model run)."""
        return tuple(
            m.action.name for m in self.moves
            if m.type in (MoveType.SYNC, MoveType.MODEL) and m.action is not None
        )
