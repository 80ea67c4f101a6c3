"""Seeded generators for synthetic skills, libraries, and traces.

Used by the test suite and the demo scripts; everything here is a pure
function of its seed.
"""

from __future__ import annotations

import random
from collections.abc import Sequence

from .model import (
    EventLog,
    ProcessTree,
    Skill,
    SkillLibrary,
    Trace,
    leaf,
    par,
    seq,
    xor,
)
from .discovery import discover_skill
from .petri import tree_language


def random_tree(
    rng: random.Random,
    *,
    max_depth: int = 3,
    max_leaves: int = 8,
    operators: Sequence[str] = ("SEQ", "XOR", "AND"),
) -> ProcessTree:
    """Random operator tree over single-letter alphabet, distinct leaf labels."""
    labels = [chr(ord("a") + i) for i in range(max_leaves)]
    rng.shuffle(labels)
    pool = list(labels)

    def grow(depth: int, budget: int) -> tuple[ProcessTree, int]:
        if depth >= max_depth or budget <= 1 or rng.random() < 0.3:
            return leaf(pool.pop()), budget - 1
        op = rng.choice(list(operators))
        width = rng.randint(2, min(3, budget))
        children = []
        for _ in range(width):
            child, budget = grow(depth + 1, budget)
            children.append(child)
            if budget <= 0:
                break
        if len(children) < 2:
            return children[0], budget
        factory = {"SEQ": seq, "XOR": xor, "AND": par}[op]
        return factory(*children), budget

    tree, _ = grow(0, rng.randint(2, max_leaves))
    if tree.op.name == "LEAF" and len(pool) > 0 and rng.random() < 0.5:
        tree = seq(tree, leaf(pool.pop()))
    return tree


def sample_traces(tree: ProcessTree, rng: random.Random, n: int) -> list[Trace]:
    """Sample ``n`` traces from the tree's language (with replacement)."""
    language = sorted(tree_language(tree))
    if not language:
        raise ValueError("tree has an empty language")
    return [Trace(rng.choice(language), id=f"case_{i}") for i in range(n)]


def log_from_tree(
    tree: ProcessTree,
    process_id: str,
    rng: random.Random,
    *,
    n_traces: int | None = None,
    query_texts: Sequence[str] = (),
) -> EventLog:
    """Event log sampled from a tree's language.

    With the default ``n_traces=None`` the log contains every language
    variant once (padded to at least 5 cases), which gives discovery complete
    interleaving evidence.
    """
    language = sorted(tree_language(tree))
    if n_traces is None:
        n_traces = max(5, len(language))
    words = list(language[: max(0, n_traces)])
    while len(words) < n_traces:
        words.append(rng.choice(language))
    traces = [Trace(w, id=f"{process_id}_case_{i}") for i, w in enumerate(words[:n_traces])]
    texts = list(query_texts) or [f"run process {process_id}"]
    return EventLog(process_id=process_id, query_texts=texts, traces=traces)


_VERBS = ["prepare", "compile", "render", "archive", "review", "publish", "encode", "filter"]
_NOUNS = ["report", "album", "dataset", "invoice", "storyboard", "ledger", "survey", "bundle"]


def _skill_tree(index: int, rng: random.Random) -> ProcessTree:
    """Structured tree over a per-skill disjoint alphabet."""
    prefix = f"s{index:02d}"
    steps = [f"{prefix}_{name}" for name in ("fetch", "clean", "merge", "check", "ship")]
    shape = index % 4
    if shape == 0:
        return seq(*steps[:4])
    if shape == 1:
        return seq(steps[0], par(seq(steps[1], steps[2]), steps[3]), steps[4])
    if shape == 2:
        return seq(steps[0], xor(steps[1], steps[2]), steps[3])
    return par(seq(steps[0], steps[1]), seq(steps[2], steps[3], steps[4]))


def make_synthetic_library(
    n_skills: int = 20,
    seed: int = 7,
    *,
    n_paraphrases: int = 2,
) -> SkillLibrary:
    """Library of structurally distinct skills with disjoint alphabets.

    Each skill is discovered from a log sampled from a known ground-truth
    tree, so training traces replay perfectly. Query texts are distinct
    per skill.
    """
    rng = random.Random(seed)
    library = SkillLibrary()
    for i in range(n_skills):
        tree = _skill_tree(i, rng)
        verb = _VERBS[i % len(_VERBS)]
        noun = _NOUNS[(i // len(_VERBS)) % len(_NOUNS)]
        base = f"{verb} the {noun} for client {i:02d}"
        texts = [base] + [f"please {verb} that {noun} (case {i:02d}, variant {j})"
                          for j in range(n_paraphrases)]
        log = log_from_tree(tree, f"proc_{i:02d}", rng, query_texts=texts)
        library.add(discover_skill(log))
    return library


def make_collision_library(n_pairs: int = 10, seed: int = 11) -> SkillLibrary:
    """Pairs of skills whose query texts are word-permutations of each other.

    A bag-of-words embedder cannot tell the two apart (identical vectors), but
    their process structures stay distinct, so conformance checking can.
    """
    rng = random.Random(seed)
    library = SkillLibrary()
    for i in range(n_pairs):
        words = [f"task{i:02d}", "assemble", "the", "briefing", "pack", "quickly"]
        text_a = " ".join(words)
        text_b = " ".join(reversed(words))
        for suffix, text, shape in (("a", text_a, 0), ("b", text_b, 3)):
            prefix = f"c{i:02d}{suffix}"
            steps = [f"{prefix}_{s}" for s in ("fetch", "clean", "merge", "check", "ship")]
            tree = (
                seq(*steps[:4])
                if shape == 0
                else par(seq(steps[0], steps[1]), seq(steps[2], steps[3], steps[4]))
            )
            log = log_from_tree(tree, f"pair_{i:02d}{suffix}", rng,
                                query_texts=[text, f"{text} again"])
            library.add(discover_skill(log))
    return library
