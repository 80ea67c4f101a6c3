"""Command-line surface for the full pipeline.

Output is machine-first JSON on stdout; ``--pretty`` adds human tables.
Exit codes: 1 for input/configuration problems, 2 for write failures, 3 for
remote service failures.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from .conformance import alignment_fitness, token_replay
from .discovery import discover_skill
from .evaluation import (
    METHODS,
    QuerySpec,
    run_retrieval_experiment,
    sensitivity_analysis,
)
from .gateway import (
    HashingEmbeddingClient,
    HttpChatClient,
    HttpEmbeddingClient,
    StubChatClient,
    TransportError,
    generate_thought,
)
from .ingestion import (
    IngestionError,
    LibraryFormatError,
    load_event_logs_with_report,
    load_library,
    load_reference_dags,
    save_library,
)
from .model import SkillLibrary, Trace
from .retrieval import (
    retrieve_by_conformance,
    retrieve_by_embedding,
    retrieve_hybrid,
    embed_library,
)
from .serialize import alignment_to_json, petri_net_to_json
from .evaluation import default_catalog, library_plan_script
from .gateway import embed as embed_text

EXIT_INPUT = 1
EXIT_WRITE = 2
EXIT_REMOTE = 3


def _fail(message: str, code: int) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _stats_row(values: list[float]) -> dict:
    arr = np.asarray(values, dtype=float)
    return {
        "mean": round(float(arr.mean()), 4),
        "std": round(float(arr.std()), 4),
        "min": round(float(arr.min()), 4),
        "median": round(float(np.median(arr)), 4),
        "max": round(float(arr.max()), 4),
    }


@click.group()
def main() -> None:
    """Skill learning and retrieval via process mining."""


@main.command()
@click.option("--log", "log_path", required=True, type=click.Path(), help="Event log JSON file.")
@click.option("--out", "out_dir", required=True, type=click.Path(), help="Library output directory.")
@click.option("--freq-threshold", default=0, show_default=True, help="Drop DFG edges at or below this count.")
@click.option("--lenient", is_flag=True, help="Skip malformed records instead of failing.")
@click.option("--pretty", is_flag=True, help="Also print a human-readable stats table.")
def discover(log_path: str, out_dir: str, freq_threshold: int, lenient: bool, pretty: bool) -> None:
    """Discover one skill per event log and save the library."""
    try:
        logs, skipped = load_event_logs_with_report(log_path, lenient=lenient)
    except (IngestionError, ValueError) as exc:
        _fail(str(exc), EXIT_INPUT)
    if not logs:
        _fail(f"no event logs found in {log_path}", EXIT_INPUT)

    library = SkillLibrary()
    cases, activities, variants = [], [], []
    replay_per_case, alignment_per_case = [], []
    skills_payload = []
    for log in logs:
        try:
            skill = discover_skill(log, freq_threshold=freq_threshold)
        except ValueError as exc:
            _fail(f"discovery failed for {log.process_id!r}: {exc}", EXIT_INPUT)
        library.add(skill)
        cases.append(len(log.traces))
        activities.append(len(skill.tree.alphabet()))
        variants.append(len(log.variants))
        for trace in log.traces:
            replay_per_case.append(token_replay(trace, skill.net).fitness)
            alignment_per_case.append(alignment_fitness(trace, skill.net))
        skills_payload.append(
            {
                "skill_id": skill.skill_id,
                "tree": str(skill.tree),
                "num_cases": skill.provenance.num_cases,
                "num_variants": skill.provenance.num_variants,
            }
        )

    try:
        save_library(library, out_dir)
    except OSError as exc:
        _fail(f"could not write library to {out_dir}: {exc}", EXIT_WRITE)

    stats = {
        "cases_per_process": _stats_row(cases),
        "activities_per_process": _stats_row(activities),
        "variants_per_process": _stats_row(variants),
        "replay_fitness_per_case": _stats_row(replay_per_case),
        "alignment_fitness_per_case": _stats_row(alignment_per_case),
    }
    payload = {
        "library_dir": str(out_dir),
        "skills": skills_payload,
        "stats": stats,
        "skipped_records": [{"id": s.record_id, "reason": s.reason} for s in skipped],
    }
    click.echo(json.dumps(payload, indent=2))
    if pretty:
        click.echo(_render_stats(stats))


def _render_stats(stats: dict) -> str:
    lines = [f"{'':<28} {'mean':>8} {'std':>8} {'min':>8} {'median':>8} {'max':>8}"]
    for name, row in stats.items():
        lines.append(
            f"{name:<28} {row['mean']:>8} {row['std']:>8} {row['min']:>8}"
            f" {row['median']:>8} {row['max']:>8}"
        )
    return "\n".join(lines)


def _load_library_or_fail(library_dir: str) -> SkillLibrary:
    try:
        return load_library(library_dir)
    except LibraryFormatError as exc:
        _fail(str(exc), EXIT_INPUT)


def _clients(stub: bool):
    if stub:
        return StubChatClient(), HashingEmbeddingClient()
    try:
        return HttpChatClient(), HttpEmbeddingClient()
    except ValueError as exc:
        _fail(f"{exc} (or pass --stub)", EXIT_INPUT)


@main.command()
@click.option("--library", "library_dir", required=True, type=click.Path())
@click.option("--query", required=True, help="Query text.")
@click.option("--mode", required=True, help="embed | conform | hybrid")
@click.option("--k", default=3, show_default=True, help="Result list length.")
@click.option("--k-first", default=3, show_default=True, help="Hybrid stage-1 shortlist size.")
@click.option("--stub", is_flag=True, help="Use the offline stub clients.")
@click.option("--pretty", is_flag=True)
@click.pass_context
def retrieve(ctx: click.Context, query: str, mode: str, k: int, k_first: int, stub: bool, pretty: bool, library_dir: str) -> None:
    """Rank library skills for a query and print the list as JSON."""
    if mode not in METHODS:
        click.echo(ctx.get_help(), err=True)
        _fail(f"unknown mode {mode!r}; expected one of {', '.join(METHODS)}", EXIT_INPUT)
    library = _load_library_or_fail(library_dir)
    if len(library) == 0:
        _fail(f"library {library_dir} is empty", EXIT_INPUT)
    chat_client, embedding_client = _clients(stub)
    if stub:
        chat_client = StubChatClient(plan_script=library_plan_script(library))

    try:
        if mode in ("embed", "hybrid"):
            library = embed_library(library, embedding_client)
            query_vec = embed_text(query, embedding_client)
        if mode in ("conform", "hybrid"):
            thought = generate_thought(query, default_catalog(library), chat_client)
        if mode == "embed":
            ranking = retrieve_by_embedding(query_vec, library, k)
        elif mode == "conform":
            ranking = retrieve_by_conformance(thought.trace, library, k)
        else:
            ranking = retrieve_hybrid(query_vec, thought.trace, library, k_first=max(k_first, k), k_final=k)
    except TransportError as exc:
        _fail(str(exc), EXIT_REMOTE)
    except ValueError as exc:
        _fail(str(exc), EXIT_INPUT)

    payload = {
        "method": ranking.method.value,
        "entries": [
            {"skill_id": e.skill_id, "score": e.score, "rank": e.rank} for e in ranking.entries
        ],
    }
    if mode in ("conform", "hybrid"):
        payload["thought"] = list(thought.trace.labels())
        payload["diagnostics"] = {
            sid: alignment_to_json(a) for sid, a in sorted(ranking.diagnostics.items())
        }
    click.echo(json.dumps(payload, indent=2))
    if pretty:
        for entry in ranking.entries:
            click.echo(f"#{entry.rank} {entry.skill_id} score={entry.score:.4f}")


@main.command()
@click.option("--library", "library_dir", required=True, type=click.Path())
@click.option("--queries", "queries_path", required=True, type=click.Path())
@click.option("--modes", default="embed,conform,hybrid", show_default=True)
@click.option("--k-first", default=3, show_default=True)
@click.option("--sensitivity", default=None, help="Comma-separated fitness thresholds.")
@click.option("--k-first-grid", default="1,2,3,5", show_default=True, help="k_first sweep for the sensitivity grid.")
@click.option("--stub", is_flag=True, help="Use the offline stub clients.")
@click.option("--csv", "csv_path", default=None, type=click.Path(), help="Write the sensitivity grid as CSV.")
@click.option("--diagnostics", is_flag=True, help="Include per-trial details in the JSON report.")
@click.option("--pretty", is_flag=True)
def evaluate(
    library_dir: str,
    queries_path: str,
    modes: str,
    k_first: int,
    sensitivity: str | None,
    k_first_grid: str,
    stub: bool,
    csv_path: str | None,
    diagnostics: bool,
    pretty: bool,
) -> None:
    """Run the retrieval experiment (and optionally the sensitivity grid)."""
    methods = tuple(m.strip() for m in modes.split(",") if m.strip())
    for method in methods:
        if method not in METHODS:
            _fail(f"unknown mode {method!r}; expected subset of {', '.join(METHODS)}", EXIT_INPUT)
    library = _load_library_or_fail(library_dir)
    path = Path(queries_path)
    if not path.exists():
        _fail(f"no such file: {queries_path}", EXIT_INPUT)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        _fail(f"{queries_path}: not valid JSON: {exc}", EXIT_INPUT)
    if not isinstance(raw, list) or not raw:
        _fail(f"{queries_path}: expected a non-empty JSON list of queries", EXIT_INPUT)
    try:
        queries = [QuerySpec.from_json(item) for item in raw]
    except (KeyError, TypeError, ValueError) as exc:
        _fail(f"{queries_path}: malformed query entry: {exc}", EXIT_INPUT)

    chat_client, embedding_client = _clients(stub)
    if stub:
        chat_client = StubChatClient(plan_script=library_plan_script(library))
    try:
        if any(m in ("embed", "hybrid") for m in methods):
            library = embed_library(library, embedding_client)
        report = run_retrieval_experiment(
            library, queries, methods=methods, k_first=k_first,
            embedder=embedding_client, planner=chat_client,
        )
    except TransportError as exc:
        _fail(str(exc), EXIT_REMOTE)
    except ValueError as exc:
        _fail(str(exc), EXIT_INPUT)

    payload = report.to_json(include_trials=diagnostics)
    if sensitivity is not None:
        try:
            thresholds = [float(t) for t in sensitivity.split(",") if t.strip() != ""]
            k_values = [int(v) for v in k_first_grid.split(",") if v.strip() != ""]
        except ValueError as exc:
            _fail(f"bad --sensitivity/--k-first-grid value: {exc}", EXIT_INPUT)
        try:
            grid = sensitivity_analysis(report.probes, thresholds, k_values)
        except ValueError as exc:
            _fail(str(exc), EXIT_INPUT)
        payload["sensitivity"] = grid.to_json()
        if csv_path:
            try:
                Path(csv_path).write_text(grid.to_csv() + "\n", encoding="utf-8")
            except OSError as exc:
                _fail(f"could not write {csv_path}: {exc}", EXIT_WRITE)
    click.echo(json.dumps(payload, indent=2))
    if pretty:
        click.echo(report.render_table())


@main.command()
@click.option("--dag", "dag_path", required=True, type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--transitive-reduce", is_flag=True, help="Reduce redundant edges before converting.")
def convert(dag_path: str, out_path: str, transitive_reduce: bool) -> None:
    """Convert a DAG reference model to a Petri net JSON file."""
    from .petri import dag_to_petri

    try:
        dags = load_reference_dags(dag_path, transitive_reduce=transitive_reduce)
    except (IngestionError, ValueError) as exc:
        _fail(str(exc), EXIT_INPUT)
    if len(dags) != 1:
        _fail(f"expected exactly one DAG in {dag_path}, found {len(dags)}", EXIT_INPUT)
    _, dag = dags[0]
    net = dag_to_petri(dag)
    try:
        Path(out_path).write_text(json.dumps(petri_net_to_json(net), indent=2), encoding="utf-8")
    except OSError as exc:
        _fail(f"could not write {out_path}: {exc}", EXIT_WRITE)
    silent = sum(1 for t in net.transitions if t.is_silent)
    click.echo(
        json.dumps(
            {
                "out": str(out_path),
                "places": len(net.places),
                "transitions": len(net.transitions),
                "silent_transitions": silent,
            }
        )
    )


@main.command()
@click.option("--library", "library_dir", required=True, type=click.Path())
@click.option("--port", default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--stub", is_flag=True, help="Serve with the offline stub clients.")
def serve(library_dir: str, port: int, host: str, stub: bool) -> None:
    """Run the retrieval HTTP service."""
    import uvicorn

    from .service import create_app

    try:
        app = create_app(library_dir, stub=stub)
    except (LibraryFormatError, ValueError) as exc:
        _fail(str(exc), EXIT_INPUT)
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
