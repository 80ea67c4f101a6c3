"""Retrieval metrics, the closed-set retrieval experiment, and the
planner-accuracy sensitivity analysis.

The experiment computes, per query, a full embedding ranking and a full
conformance ranking once; every method's result (including the hybrid at any
shortlist size) is then pure post-processing, which is what makes the
sensitivity grid cheap to sweep.
"""

from __future__ import annotations

import dataclasses
import json
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

from .gateway import (
    HashingEmbeddingClient,
    StubChatClient,
    Thought,
    ThoughtSource,
    ToolCatalog,
    embed,
    generate_thought,
)
from .model import SkillLibrary, Trace
from .petri import canonical_playout
from .retrieval import (
    RankedSkillList,
    RetrievalMethod,
    rerank_shortlist,
    retrieve_by_conformance,
    retrieve_by_embedding,
)

METHODS = ("embed", "conform", "hybrid")


@dataclass(frozen=True)
class RetrievalTrial:
    """One query's outcome under one retrieval method."""

    true_skill_id: str
    ranked: RankedSkillList
    thought_fitness: float | None = None
    query_text: str = ""
    language: str | None = None

    def correct_top1(self) -> bool:
        top = self.ranked.top()
        return top is not None and top.skill_id == self.true_skill_id

    def reciprocal_rank(self) -> float:
        rank = self.ranked.rank_of(self.true_skill_id)
        return 1.0 / rank if rank else 0.0


def f1_score(trials: Sequence[RetrievalTrial]) -> float:
    """Micro-averaged F1 of single-label top-1 predictions (= top-1 accuracy)."""
    if not trials:
        raise ValueError("cannot score an empty trial list")
    return sum(t.correct_top1() for t in trials) / len(trials)


def macro_f1(trials: Sequence[RetrievalTrial]) -> float:
    """Per-class F1 averaged over all classes seen as gold or as a prediction."""
    if not trials:
        raise ValueError("cannot score an empty trial list")
    tp: dict[str, int] = {}
    gold: dict[str, int] = {}
    pred: dict[str, int] = {}
    for trial in trials:
        gold[trial.true_skill_id] = gold.get(trial.true_skill_id, 0) + 1
        top = trial.ranked.top()
        if top is not None:
            pred[top.skill_id] = pred.get(top.skill_id, 0) + 1
            if top.skill_id == trial.true_skill_id:
                tp[top.skill_id] = tp.get(top.skill_id, 0) + 1
    classes = sorted(set(gold) | set(pred))
    scores = []
    for cls in classes:
        hits = tp.get(cls, 0)
        precision = hits / pred[cls] if pred.get(cls) else 0.0
        recall = hits / gold[cls] if gold.get(cls) else 0.0
        scores.append(
            2 * precision * recall / (precision + recall) if precision + recall else 0.0
        )
    return sum(scores) / len(scores)


def mrr(trials: Sequence[RetrievalTrial]) -> float:
    """Mean reciprocal rank of the true skill; absent from the list counts 0."""
    if not trials:
        raise ValueError("cannot score an empty trial list")
    return sum(t.reciprocal_rank() for t in trials) / len(trials)


# ---------------------------------------------------------------------------
# Experiment
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuerySpec:
    """One evaluation query: its text, gold skill, and optional fixed thought."""

    text: str
    true_skill_id: str
    language: str | None = None
    thought: Trace | None = None

    @staticmethod
    def from_json(data: Mapping) -> "QuerySpec":
        thought = data.get("thought")
        return QuerySpec(
            text=str(data["text"]),
            true_skill_id=str(data["true_skill_id"]),
            language=data.get("language"),
            thought=Trace(thought) if thought is not None else None,
        )


@dataclass(frozen=True)
class QueryProbe:
    """Everything recorded for one query; all method rankings derive from this."""

    query: QuerySpec
    thought: Thought | None
    thought_fitness: float | None
    embed_ranking: RankedSkillList | None
    conform_ranking: RankedSkillList | None

    def conform_scores(self) -> dict[str, float]:
        if self.conform_ranking is None:
            return {}
        return {e.skill_id: e.score for e in self.conform_ranking.entries}

    def ranking_for(self, method: str, k_first: int) -> RankedSkillList | None:
        if method == "embed":
            return self.embed_ranking
        if method == "conform":
            return self.conform_ranking
        if method == "hybrid":
            if self.embed_ranking is None or self.conform_ranking is None:
                return None
            k = min(k_first, len(self.embed_ranking.entries))
            return rerank_shortlist(self.embed_ranking, self.conform_scores(), k, k)
        raise ValueError(f"unknown method {method!r}")


@dataclass(frozen=True)
class MethodScores:
    f1: float
    macro_f1: float
    mrr: float
    n_trials: int

    def to_json(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class ExperimentReport:
    methods: dict[str, MethodScores]
    k_first: int
    probes: list[QueryProbe]
    excluded: list[tuple[str, str]] = field(default_factory=list)  # (query text, reason)
    per_language: dict[str, dict[str, MethodScores]] = field(default_factory=dict)

    def to_json(self, *, include_trials: bool = False) -> dict:
        from .serialize import alignment_to_json

        payload: dict = {
            "k_first": self.k_first,
            "methods": {name: scores.to_json() for name, scores in self.methods.items()},
            "excluded": [{"query": q, "reason": r} for q, r in self.excluded],
            "per_language": {
                lang: {name: s.to_json() for name, s in by_method.items()}
                for lang, by_method in self.per_language.items()
            },
        }
        if include_trials:
            trials = []
            for probe in self.probes:
                row: dict = {
                    "query": probe.query.text,
                    "true_skill_id": probe.query.true_skill_id,
                    "language": probe.query.language,
                    "thought": list(probe.thought.trace.labels()) if probe.thought else None,
                    "thought_fitness": probe.thought_fitness,
                }
                for method in self.methods:
                    ranking = probe.ranking_for(method, self.k_first)
                    if ranking is None:
                        continue
                    row[method] = {
                        "top": ranking.entries[0].skill_id if ranking.entries else None,
                        "rank_of_true": ranking.rank_of(probe.query.true_skill_id),
                    }
                if probe.conform_ranking and probe.conform_ranking.diagnostics:
                    top3 = probe.conform_ranking.entries[:3]
                    row["alignments"] = {
                        e.skill_id: alignment_to_json(probe.conform_ranking.diagnostics[e.skill_id])
                        for e in top3
                        if e.skill_id in probe.conform_ranking.diagnostics
                    }
                trials.append(row)
            payload["trials"] = trials
        return payload

    def render_table(self) -> str:
        width = max((len(m) for m in self.methods), default=6) + 2
        lines = [f"{'method':<{width}} {'F1':>8} {'macro-F1':>10} {'MRR':>8} {'n':>6}"]
        for name, scores in self.methods.items():
            lines.append(
                f"{name:<{width}} {scores.f1:>8.4f} {scores.macro_f1:>10.4f}"
                f" {scores.mrr:>8.4f} {scores.n_trials:>6d}"
            )
        if self.excluded:
            lines.append(f"excluded queries: {len(self.excluded)}")
        return "\n".join(lines)


def trials_for(
    probes: Sequence[QueryProbe], method: str, k_first: int
) -> list[RetrievalTrial]:
    trials = []
    for probe in probes:
        ranking = probe.ranking_for(method, k_first)
        if ranking is None:
            continue
        trials.append(
            RetrievalTrial(
                true_skill_id=probe.query.true_skill_id,
                ranked=ranking,
                thought_fitness=probe.thought_fitness,
                query_text=probe.query.text,
                language=probe.query.language,
            )
        )
    return trials


def _method_scores(probes: Sequence[QueryProbe], method: str, k_first: int) -> MethodScores | None:
    trials = trials_for(probes, method, k_first)
    if not trials:
        return None
    return MethodScores(
        f1=f1_score(trials), macro_f1=macro_f1(trials), mrr=mrr(trials), n_trials=len(trials)
    )


def default_catalog(library: SkillLibrary) -> ToolCatalog:
    names = sorted({name for skill in library for name in skill.tree.alphabet()})
    return ToolCatalog([(name, "library tool") for name in names])


def library_plan_script(library: SkillLibrary):
    """Stub planner script: answers a known query text with its skill's playout."""
    by_text = {}
    for skill in library:
        playout = canonical_playout(skill.tree).labels()
        for text in skill.query_texts:
            by_text.setdefault(text, playout)

    def script(query: str):
        return by_text.get(query)

    return script


def run_retrieval_experiment(
    library: SkillLibrary,
    queries: Sequence[QuerySpec | tuple[str, str]],
    *,
    methods: Sequence[str] = METHODS,
    k_first: int = 3,
    embedder=None,
    planner=None,
    catalog: ToolCatalog | None = None,
) -> ExperimentReport:
    """Run every query through the requested retrieval methods and score them.

    ``embedder`` defaults to the hashing stub and ``planner`` to the
    library-guided stub chat client, so the whole experiment runs offline.
    Per-query failures are recorded and excluded rather than aborting the run.
    """
    for method in methods:
        if method not in METHODS:
            raise ValueError(f"unknown method {method!r}; expected subset of {METHODS}")
    specs = [q if isinstance(q, QuerySpec) else QuerySpec(q[0], q[1]) for q in queries]
    if not specs:
        raise ValueError("no queries supplied")
    for spec in specs:
        if spec.true_skill_id not in library:
            raise ValueError(f"query references unknown skill {spec.true_skill_id!r}")

    need_embed = any(m in ("embed", "hybrid") for m in methods)
    need_thought = any(m in ("conform", "hybrid") for m in methods)
    if embedder is None:
        embedder = HashingEmbeddingClient()
    if planner is None:
        planner = StubChatClient(plan_script=library_plan_script(library))
    if catalog is None:
        catalog = default_catalog(library)
    if need_embed and any(skill.embedding is None for skill in library):
        from .retrieval import embed_library

        library = embed_library(library, embedder)

    probes: list[QueryProbe] = []
    excluded: list[tuple[str, str]] = []
    full_k = len(library)
    for spec in specs:
        try:
            embed_ranking = None
            if need_embed:
                query_vec = embed(spec.text, embedder)
                embed_ranking = retrieve_by_embedding(query_vec, library, full_k)
            thought = None
            conform_ranking = None
            thought_fitness = None
            if need_thought:
                if spec.thought is not None:
                    thought = Thought(trace=spec.thought, source=ThoughtSource.STUB)
                else:
                    thought = generate_thought(spec.text, catalog, planner)
                conform_ranking = retrieve_by_conformance(thought.trace, library, full_k)
                thought_fitness = conform_ranking.score_of(spec.true_skill_id)
        except Exception as exc:
            excluded.append((spec.text, f"{type(exc).__name__}: {exc}"))
            continue
        probes.append(
            QueryProbe(
                query=spec,
                thought=thought,
                thought_fitness=thought_fitness,
                embed_ranking=embed_ranking,
                conform_ranking=conform_ranking,
            )
        )

    report = ExperimentReport(methods={}, k_first=k_first, probes=probes, excluded=excluded)
    for method in methods:
        scores = _method_scores(probes, method, k_first)
        if scores is not None:
            report.methods[method] = scores
    languages = sorted({p.query.language for p in probes if p.query.language})
    for language in languages:
        subset = [p for p in probes if p.query.language == language]
        by_method = {}
        for method in methods:
            scores = _method_scores(subset, method, k_first)
            if scores is not None:
                by_method[method] = scores
        report.per_language[language] = by_method
    return report


# ---------------------------------------------------------------------------
# Sensitivity analysis
# ---------------------------------------------------------------------------


@dataclass
class SensitivityGrid:
    """F1/MRR per planner-fitness threshold, with the hybrid swept over k_first."""

    thresholds: tuple[float, ...]
    k_first_values: tuple[int, ...]
    cells: dict[str, dict[float, dict]]  # metric -> threshold -> values
    bucket_sizes: dict[float, int]
    empty_thresholds: tuple[float, ...]

    def to_json(self) -> dict:
        return {
            "thresholds": list(self.thresholds),
            "k_first_values": list(self.k_first_values),
            "metrics": {
                metric: {str(t): values for t, values in by_threshold.items()}
                for metric, by_threshold in self.cells.items()
            },
            "bucket_sizes": {str(t): n for t, n in self.bucket_sizes.items()},
            "empty_thresholds": list(self.empty_thresholds),
        }

    def to_csv(self) -> str:
        lines = ["metric,threshold,method,k_first,value"]
        for metric, by_threshold in self.cells.items():
            for threshold, values in by_threshold.items():
                for method in ("embed", "conform"):
                    if values.get(method) is not None:
                        lines.append(f"{metric},{threshold},{method},,{values[method]}")
                for k, v in (values.get("hybrid") or {}).items():
                    lines.append(f"{metric},{threshold},hybrid,{k},{v}")
        return "\n".join(lines)


def sensitivity_analysis(
    probes: Sequence[QueryProbe],
    thresholds: Sequence[float],
    k_first_values: Sequence[int] = (1, 2, 3, 5),
) -> SensitivityGrid:
    """Recompute the metrics over trials whose thought fitness clears each threshold.

    Probes must carry ``thought_fitness`` (i.e. the experiment ran a
    conformance stage). Empty buckets are flagged, not fatal. At threshold
    0.0 the values are identical to the unrestricted experiment's.
    """
    usable = [p for p in probes if p.thought_fitness is not None]
    if not usable:
        raise ValueError("sensitivity analysis needs probes with thought_fitness")
    cells: dict[str, dict[float, dict]] = {"f1": {}, "mrr": {}}
    bucket_sizes: dict[float, int] = {}
    empty: list[float] = []
    for threshold in thresholds:
        bucket = [p for p in usable if p.thought_fitness >= threshold]
        bucket_sizes[threshold] = len(bucket)
        if not bucket:
            empty.append(threshold)
            for metric in cells:
                cells[metric][threshold] = {"embed": None, "conform": None, "hybrid": None}
            continue
        for metric_name, metric_fn in (("f1", f1_score), ("mrr", mrr)):
            values: dict = {}
            for method in ("embed", "conform"):
                trials = trials_for(bucket, method, k_first=1)
                values[method] = metric_fn(trials) if trials else None
            hybrid: dict[int, float] = {}
            for k in k_first_values:
                trials = trials_for(bucket, "hybrid", k_first=k)
                if trials:
                    hybrid[k] = metric_fn(trials)
            values["hybrid"] = hybrid or None
            cells[metric_name][threshold] = values
    return SensitivityGrid(
        thresholds=tuple(thresholds),
        k_first_values=tuple(k_first_values),
        cells=cells,
        bucket_sizes=bucket_sizes,
        empty_thresholds=tuple(empty),
    )
