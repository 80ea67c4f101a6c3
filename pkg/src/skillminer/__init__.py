"""Skill learning and retrieval for LLM planners via process mining."""

__version__ = "0.1.0"

from .model import (
    Action,
    Alignment,
    EmbeddingVector,
    EventLog,
    Marking,
    Move,
    MoveType,
    Operator,
    PetriNet,
    ProcessTree,
    Provenance,
    Skill,
    SkillLibrary,
    Trace,
    Transition,
    ValidationReport,
    leaf,
    loop,
    par,
    seq,
    tau,
    validate_net,
    xor,
)
from .treetext import TreeParseError, parse_process_tree, serialize_process_tree
from .petri import (
    DagModel,
    canonical_playout,
    dag_to_petri,
    enabled_transitions,
    fire,
    net_language,
    shortest_model_path_cost,
    tree_language,
    tree_to_petri,
)
from .discovery import DirectlyFollowsGraph, build_dfg, discover, discover_skill
from .conformance import (
    ReplayResult,
    SyncProduct,
    alignment_fitness,
    optimal_alignment,
    replay_fitness,
    synchronous_product,
    token_replay,
)

__all__ = [
    "Action",
    "Alignment",
    "DagModel",
    "DirectlyFollowsGraph",
    "EmbeddingVector",
    "EventLog",
    "Marking",
    "Move",
    "MoveType",
    "Operator",
    "PetriNet",
    "ProcessTree",
    "Provenance",
    "ReplayResult",
    "Skill",
    "SkillLibrary",
    "SyncProduct",
    "Trace",
    "Transition",
    "TreeParseError",
    "ValidationReport",
    "alignment_fitness",
    "build_dfg",
    "canonical_playout",
    "dag_to_petri",
    "discover",
    "discover_skill",
    "enabled_transitions",
    "fire",
    "leaf",
    "loop",
    "net_language",
    "optimal_alignment",
    "par",
    "parse_process_tree",
    "replay_fitness",
    "seq",
    "serialize_process_tree",
    "shortest_model_path_cost",
    "synchronous_product",
    "tau",
    "token_replay",
    "tree_language",
    "tree_to_petri",
    "validate_net",
    "xor",
]
