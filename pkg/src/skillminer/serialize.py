"""Canonical JSON forms for logs, trees, nets, skills, DAGs, and alignments.

All formats are UTF-8 JSON. Process trees travel as their text grammar
embedded in JSON strings.
"""

from __future__ import annotations

from collections.abc import Mapping

from .model import (
    Alignment,
    EmbeddingVector,
    EventLog,
    Move,
    MoveType,
    PetriNet,
    Provenance,
    Skill,
    Trace,
    Transition,
)
from .petri import DagModel
from .treetext import parse_process_tree, serialize_process_tree


class FormatError(ValueError):
    """A JSON document does not match the expected schema."""


def _require(data: Mapping, key: str, context: str):
    if not isinstance(data, Mapping) or key not in data:
        raise FormatError(f"{context}: missing field {key!r}")
    return data[key]


# ---------------------------------------------------------------------------
# Event logs
# ---------------------------------------------------------------------------


def event_log_to_json(log: EventLog) -> dict:
    return {
        "process_id": log.process_id,
        "query_texts": list(log.query_texts),
        "traces": [{"id": t.id, "actions": list(t.labels())} for t in log.traces],
    }


def event_log_from_json(data: Mapping) -> EventLog:
    process_id = _require(data, "process_id", "event log")
    traces_raw = _require(data, "traces", f"event log {process_id!r}")
    if not isinstance(traces_raw, list):
        raise FormatError(f"event log {process_id!r}: 'traces' must be a list")
    traces = []
    for i, raw in enumerate(traces_raw):
        actions = _require(raw, "actions", f"event log {process_id!r}, trace #{i}")
        if not isinstance(actions, list) or not all(isinstance(a, str) for a in actions):
            raise FormatError(
                f"event log {process_id!r}, trace #{i}: 'actions' must be a list of strings"
            )
        traces.append(Trace(actions, id=str(raw.get("id", f"{process_id}_case_{i}"))))
    query_texts = data.get("query_texts", [])
    if not isinstance(query_texts, list) or not all(isinstance(q, str) for q in query_texts):
        raise FormatError(f"event log {process_id!r}: 'query_texts' must be a list of strings")
    return EventLog(process_id=str(process_id), query_texts=query_texts, traces=traces)


# ---------------------------------------------------------------------------
# Petri nets
# ---------------------------------------------------------------------------


def petri_net_to_json(net: PetriNet) -> dict:
    return {
        "places": sorted(net.places),
        "transitions": [
            {"id": t.tid, "label": t.label.name if t.label else None}
            for t in net.transitions
        ],
        "arcs": [{"from": src, "to": dst} for src, dst in sorted(net.arcs)],
        "initial_marking": {p: c for p, c in net.initial_marking.items()},
        "final_marking": {p: c for p, c in net.final_marking.items()},
    }


def petri_net_from_json(data: Mapping) -> PetriNet:
    places = _require(data, "places", "petri net")
    transitions_raw = _require(data, "transitions", "petri net")
    arcs_raw = _require(data, "arcs", "petri net")
    transitions = []
    for raw in transitions_raw:
        tid = _require(raw, "id", "petri net transition")
        label = raw.get("label")
        transitions.append(Transition(str(tid), None if label is None else _action(label)))
    arcs = [(str(_require(a, "from", "arc")), str(_require(a, "to", "arc"))) for a in arcs_raw]
    return PetriNet(
        places=[str(p) for p in places],
        transitions=transitions,
        arcs=arcs,
        initial_marking=dict(_require(data, "initial_marking", "petri net")),
        final_marking=dict(_require(data, "final_marking", "petri net")),
    )


def _action(name: str):
    from .model import Action

    return Action(name)


# ---------------------------------------------------------------------------
# Skills
# ---------------------------------------------------------------------------


def skill_to_json(skill: Skill) -> dict:
    return {
        "skill_id": skill.skill_id,
        "tree": serialize_process_tree(skill.tree),
        "net": petri_net_to_json(skill.net),
        "query_texts": list(skill.query_texts),
        "embedding": (
            {"values": list(skill.embedding.values), "model_tag": skill.embedding.model_tag}
            if skill.embedding is not None
            else None
        ),
        "provenance": {
            "num_cases": skill.provenance.num_cases,
            "num_variants": skill.provenance.num_variants,
        },
    }


def skill_from_json(data: Mapping) -> Skill:
    skill_id = str(_require(data, "skill_id", "skill"))
    tree = parse_process_tree(_require(data, "tree", f"skill {skill_id!r}"))
    net = petri_net_from_json(_require(data, "net", f"skill {skill_id!r}"))
    embedding_raw = data.get("embedding")
    embedding = None
    if embedding_raw is not None:
        embedding = EmbeddingVector(
            _require(embedding_raw, "values", f"skill {skill_id!r} embedding"),
            str(embedding_raw.get("model_tag", "unknown")),
        )
    prov_raw = data.get("provenance", {})
    provenance = Provenance(
        num_cases=int(prov_raw.get("num_cases", 0)),
        num_variants=int(prov_raw.get("num_variants", 0)),
    )
    query_texts = data.get("query_texts", [])
    return Skill(
        skill_id=skill_id,
        tree=tree,
        net=net,
        query_texts=[str(q) for q in query_texts],
        embedding=embedding,
        provenance=provenance,
    )


# ---------------------------------------------------------------------------
# DAG reference models
# ---------------------------------------------------------------------------


def dag_to_json(dag: DagModel) -> dict:
    return {
        "nodes": [{"id": nid, "action": action.name} for nid, action in dag.nodes],
        "edges": [{"from": src, "to": dst} for src, dst in sorted(dag.edges)],
    }


def dag_from_json(data: Mapping) -> DagModel:
    nodes_raw = _require(data, "nodes", "dag")
    nodes = []
    for raw in nodes_raw:
        if isinstance(raw, str):
            nodes.append((raw, raw))  # shorthand: node id doubles as action name
        else:
            nid = str(_require(raw, "id", "dag node"))
            nodes.append((nid, str(raw.get("action", nid))))
    edges_raw = data.get("edges", [])
    edges = [
        (str(_require(e, "from", "dag edge")), str(_require(e, "to", "dag edge")))
        for e in edges_raw
    ]
    return DagModel(nodes, edges)


# ---------------------------------------------------------------------------
# Alignments
# ---------------------------------------------------------------------------


def alignment_to_json(alignment: Alignment) -> dict:
    return {
        "moves": [
            {"type": m.type.value, "action": m.action.name if m.action else None}
            for m in alignment.moves
        ],
        "cost": alignment.cost,
        "fitness": alignment.fitness,
    }


def alignment_from_json(data: Mapping) -> Alignment:
    moves = []
    for raw in _require(data, "moves", "alignment"):
        move_type = MoveType(_require(raw, "type", "alignment move"))
        action = raw.get("action")
        moves.append(Move(move_type, None if action is None else _action(action)))
    return Alignment(
        moves=moves,
        cost=int(_require(data, "cost", "alignment")),
        fitness=float(_require(data, "fitness", "alignment")),
    )
