"""Skill retrieval: embedding similarity, conformance-only, and two-stage hybrid.

Scores are comparable only within one ranked list. All three methods are
deterministic: ties break lexicographically by skill id, and library
insertion order never matters.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .conformance import alignment_fitness, optimal_alignment
from .model import Alignment, EmbeddingVector, Skill, SkillLibrary, Trace


class RetrievalMethod(Enum):
    EMBED = "EMBED"
    CONFORM = "CONFORM"
    HYBRID = "HYBRID"


@dataclass(frozen=True, slots=True)
class RankedEntry:
    skill_id: str
    score: float
    rank: int


@dataclass(frozen=True)
class RankedSkillList:
    """Skills ordered by non-increasing score with 1-based consecutive ranks."""

    entries: tuple[RankedEntry, ...]
    method: RetrievalMethod
    diagnostics: dict[str, Alignment] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for i, entry in enumerate(self.entries):
            if entry.rank != i + 1:
                raise ValueError("ranks must be consecutive from 1")
            if i and self.entries[i - 1].score < entry.score:
                raise ValueError("scores must be non-increasing")

    def top(self) -> RankedEntry | None:
        return self.entries[0] if self.entries else None

    def rank_of(self, skill_id: str) -> int | None:
        for entry in self.entries:
            if entry.skill_id == skill_id:
                return entry.rank
        return None

    def score_of(self, skill_id: str) -> float | None:
        for entry in self.entries:
            if entry.skill_id == skill_id:
                return entry.score
        return None


def _ranked(
    scored: Sequence[tuple[str, float]],
    k: int,
    method: RetrievalMethod,
    diagnostics: dict[str, Alignment] | None = None,
) -> RankedSkillList:
    ordered = sorted(scored, key=lambda pair: (-pair[1], pair[0]))[:k]
    entries = tuple(
        RankedEntry(skill_id=sid, score=score, rank=i + 1)
        for i, (sid, score) in enumerate(ordered)
    )
    kept = {e.skill_id for e in entries}
    diag = {sid: a for sid, a in (diagnostics or {}).items() if sid in kept}
    return RankedSkillList(entries=entries, method=method, diagnostics=diag)


def cosine_similarity(a: EmbeddingVector, b: EmbeddingVector) -> float:
    """Plain cosine; raises on dimension mismatch or a zero vector."""
    if len(a) != len(b):
        raise ValueError(f"embedding dimensions differ: {len(a)} vs {len(b)}")
    va = np.asarray(a.values, dtype=float)
    vb = np.asarray(b.values, dtype=float)
    norm = float(np.linalg.norm(va) * np.linalg.norm(vb))
    if norm == 0.0:
        raise ValueError("cosine similarity undefined for zero vectors")
    return float(np.dot(va, vb) / norm)


def retrieve_by_embedding(
    query_vec: EmbeddingVector, library: SkillLibrary, k: int
) -> RankedSkillList:
    """Top-k skills by cosine similarity between query and skill embeddings."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if len(library) == 0:
        raise ValueError("cannot retrieve from an empty library")
    scored = []
    for skill in library:
        if skill.embedding is None:
            raise ValueError(f"skill {skill.skill_id!r} has no embedding")
        if skill.embedding.model_tag != query_vec.model_tag:
            raise ValueError(
                f"skill {skill.skill_id!r} embedded with {skill.embedding.model_tag!r},"
                f" query with {query_vec.model_tag!r}"
            )
        scored.append((skill.skill_id, cosine_similarity(query_vec, skill.embedding)))
    return _ranked(scored, k, RetrievalMethod.EMBED)


def retrieve_by_conformance(
    thought: Trace, library: SkillLibrary, k: int
) -> RankedSkillList:
    """Top-k skills by alignment fitness of the thought against each stored net.

    A skill whose alignment fails scores 0 instead of aborting the query; the
    per-skill alignments ride along as diagnostics for interpretability.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if len(thought) == 0:
        raise ValueError("conformance retrieval needs a non-empty thought")
    if len(library) == 0:
        raise ValueError("cannot retrieve from an empty library")
    scored = []
    diagnostics: dict[str, Alignment] = {}
    for skill in library:
        try:
            alignment = optimal_alignment(thought, skill.net)
        except Exception:
            scored.append((skill.skill_id, 0.0))
            continue
        diagnostics[skill.skill_id] = alignment
        scored.append((skill.skill_id, alignment.fitness))
    return _ranked(scored, k, RetrievalMethod.CONFORM, diagnostics)


def retrieve_hybrid(
    query_vec: EmbeddingVector,
    thought: Trace,
    library: SkillLibrary,
    k_first: int = 3,
    k_final: int = 1,
) -> RankedSkillList:
    """Two-stage retrieval: embedding shortlist of ``k_first``, conformance rerank.

    Ties after reranking break on the stage-1 embedding score, then on skill
    id. ``k_first`` defaults to 3, the usual shortlist size.
    """
    if k_final < 1 or k_first < k_final:
        raise ValueError("k_first >= k_final >= 1 required")
    shortlist = retrieve_by_embedding(query_vec, library, k_first)
    embed_score = {e.skill_id: e.score for e in shortlist.entries}
    scored: list[tuple[str, float, float]] = []
    diagnostics: dict[str, Alignment] = {}
    for entry in shortlist.entries:
        skill = library.get(entry.skill_id)
        try:
            alignment = optimal_alignment(thought, skill.net)
        except Exception:
            scored.append((entry.skill_id, 0.0, embed_score[entry.skill_id]))
            continue
        diagnostics[entry.skill_id] = alignment
        scored.append((entry.skill_id, alignment.fitness, embed_score[entry.skill_id]))
    ordered = sorted(scored, key=lambda row: (-row[1], -row[2], row[0]))[:k_final]
    entries = tuple(
        RankedEntry(skill_id=sid, score=fit, rank=i + 1)
        for i, (sid, fit, _) in enumerate(ordered)
    )
    kept = {e.skill_id for e in entries}
    return RankedSkillList(
        entries=entries,
        method=RetrievalMethod.HYBRID,
        diagnostics={sid: a for sid, a in diagnostics.items() if sid in kept},
    )


def rerank_shortlist(
    embed_ranking: RankedSkillList,
    conform_scores: dict[str, float],
    k_first: int,
    k_final: int,
) -> RankedSkillList:
    """Recombine stored stage results into a hybrid ranking (no re-alignment).

    Used by the evaluation harness to sweep ``k_first`` without recomputing
    alignments; skills missing a conformance score count as 0.
    """
    if k_final < 1 or k_first < k_final:
        raise ValueError("k_first >= k_final >= 1 required")
    shortlist = embed_ranking.entries[:k_first]
    rows = [
        (e.skill_id, conform_scores.get(e.skill_id, 0.0), e.score) for e in shortlist
    ]
    ordered = sorted(rows, key=lambda row: (-row[1], -row[2], row[0]))[:k_final]
    entries = tuple(
        RankedEntry(skill_id=sid, score=fit, rank=i + 1)
        for i, (sid, fit, _) in enumerate(ordered)
    )
    return RankedSkillList(entries=entries, method=RetrievalMethod.HYBRID)


def embed_library(
    library: SkillLibrary,
    embedder,
    *,
    strategy: str = "first",
) -> SkillLibrary:
    """Return a library copy whose skills carry embeddings of their query texts.

    ``strategy="first"`` embeds each skill's canonical (first) query text;
    ``strategy="mean"`` averages the embeddings of all its texts.
    """
    from .gateway import embed  # local import; gateway depends on this module

    if strategy not in ("first", "mean"):
        raise ValueError(f"unknown embedding strategy {strategy!r}")
    out = SkillLibrary()
    for skill in library:
        if strategy == "first" or len(skill.query_texts) <= 1:
            vector = embed(skill.canonical_text(), embedder)
        else:
            vectors = [embed(text, embedder) for text in skill.query_texts]
            stacked = np.mean([v.values for v in vectors], axis=0)
            vector = EmbeddingVector(stacked.tolist(), vectors[0].model_tag)
        out.add(
            Skill(
                skill_id=skill.skill_id,
                tree=skill.tree,
                net=skill.net,
                query_texts=skill.query_texts,
                embedding=vector,
                provenance=skill.provenance,
            )
        )
    return out
