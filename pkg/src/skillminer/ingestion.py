"""Loading external datasets and persisting the skill library.

The library lives in a directory as ``index.json`` plus one
``skills/<file>.json`` per skill; writers hold an exclusive advisory lock
file while saving, and all files are written atomically (temp + rename).
"""

from __future__ import annotations

import json
import os
import re
from collections.abc import Iterator, Mapping, Sequence
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path

from .model import EventLog, Skill, SkillLibrary, validate_net
from .petri import DagModel
from .serialize import (
    FormatError,
    dag_from_json,
    event_log_from_json,
    skill_from_json,
    skill_to_json,
)

LIBRARY_FORMAT_VERSION = "v1"
LOCK_FILE = ".lock"


class IngestionError(ValueError):
    """A dataset file is malformed beyond recovery."""


class LibraryFormatError(ValueError):
    """A persisted library is missing files, corrupted, or version-incompatible."""


class LibraryLockError(RuntimeError):
    """Another writer currently holds the library lock."""


@dataclass(frozen=True, slots=True)
class SkippedRecord:
    record_id: str
    reason: str


# ---------------------------------------------------------------------------
# Event logs
# ---------------------------------------------------------------------------


def _read_json_records(path: Path) -> list:
    if not path.exists():
        raise IngestionError(f"no such file: {path}")
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".jsonl":
        records = []
        for i, line in enumerate(line for line in text.splitlines() if line.strip()):
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise IngestionError(f"{path}: line {i + 1} is not valid JSON: {exc}") from exc
        return records
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise IngestionError(f"{path}: not valid JSON: {exc}") from exc
    return data if isinstance(data, list) else [data]


def _adapt_log_record(record: Mapping) -> Mapping:
    """Map an external (ProcessTBench-style) record onto the canonical shape.

    Canonical records pass through untouched. The adapter accepts ``id`` for
    the process id, ``question``/``query`` plus ``paraphrases`` for the query
    texts, and ``plans``/``sequences`` (lists of action-name lists) for the
    traces. Everything else is a format error naming the record.
    """
    if "traces" in record and "process_id" in record:
        return record
    process_id = record.get("process_id", record.get("id"))
    if process_id is None:
        raise FormatError("record has neither 'process_id' nor 'id'")
    if "traces" in record:
        traces = record["traces"]
        if not isinstance(traces, list) or not all(isinstance(t, Mapping) for t in traces):
            raise FormatError(f"record {process_id!r}: 'traces' must be a list of objects")
    else:
        plans = record.get("plans", record.get("sequences"))
        if plans is None:
            raise FormatError(f"record {process_id!r}: no 'traces', 'plans', or 'sequences'")
        if not isinstance(plans, list):
            raise FormatError(f"record {process_id!r}: plans must be a list of action lists")
        traces = [
            {"id": f"{process_id}_case_{i}", "actions": actions}
            for i, actions in enumerate(plans)
        ]
    texts: list[str] = []
    for key in ("question", "query", "text"):
        if isinstance(record.get(key), str):
            texts.append(record[key])
            break
    paraphrases = record.get("paraphrases", record.get("query_texts", []))
    if isinstance(paraphrases, list):
        texts.extend(str(p) for p in paraphrases)
    return {
        "process_id": str(process_id),
        "query_texts": texts,
        "traces": traces,
    }


def load_event_logs_with_report(
    path: str | Path, *, lenient: bool = False
) -> tuple[list[EventLog], list[SkippedRecord]]:
    """Load event logs; under ``lenient`` malformed records are skipped and reported."""
    records = _read_json_records(Path(path))
    logs: list[EventLog] = []
    skipped: list[SkippedRecord] = []
    for i, record in enumerate(records):
        record_id = str(record.get("process_id", record.get("id", f"#{i}"))) if isinstance(record, Mapping) else f"#{i}"
        try:
            if not isinstance(record, Mapping):
                raise FormatError("record is not a JSON object")
            logs.append(event_log_from_json(_adapt_log_record(record)))
        except (FormatError, ValueError) as exc:
            if not lenient:
                raise IngestionError(f"record {record_id}: {exc}") from exc
            skipped.append(SkippedRecord(record_id=record_id, reason=str(exc)))
    return logs, skipped


def load_event_logs(path: str | Path, *, lenient: bool = False) -> list[EventLog]:
    """One :class:`EventLog` per problem in the file (canonical or adapted shape)."""
    logs, _ = load_event_logs_with_report(path, lenient=lenient)
    return logs


# ---------------------------------------------------------------------------
# Reference DAGs
# ---------------------------------------------------------------------------


def load_reference_dags(
    path: str | Path, *, transitive_reduce: bool = False
) -> list[tuple[str, DagModel]]:
    """Load (process_id, DAG) pairs; any cycle is fatal and names its edges."""
    records = _read_json_records(Path(path))
    out: list[tuple[str, DagModel]] = []
    for i, record in enumerate(records):
        if not isinstance(record, Mapping):
            raise IngestionError(f"{path}: record #{i} is not a JSON object")
        process_id = str(record.get("process_id", record.get("id", f"dag_{i}")))
        try:
            dag = dag_from_json(record)
        except (FormatError, ValueError) as exc:
            raise IngestionError(f"record {process_id!r}: {exc}") from exc
        if transitive_reduce:
            dag = dag.transitive_reduction()
        out.append((process_id, dag))
    return out


# ---------------------------------------------------------------------------
# Library persistence
# ---------------------------------------------------------------------------


@contextmanager
def library_lock(directory: str | Path) -> Iterator[None]:
    """Exclusive advisory write lock for a library directory."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    lock_path = directory / LOCK_FILE
    try:
        fd = os.open(lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise LibraryLockError(f"library {directory} is locked by another writer") from None
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield
    finally:
        try:
            lock_path.unlink()
        except FileNotFoundError:
            pass


def _atomic_write(path: Path, payload: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(payload, encoding="utf-8")
    os.replace(tmp, path)


def _skill_filename(skill_id: str, taken: set[str]) -> str:
    base = re.sub(r"[^A-Za-z0-9._-]", "_", skill_id) or "skill"
    name = f"{base}.json"
    suffix = 1
    while name in taken:
        name = f"{base}_{suffix}.json"
        suffix += 1
    taken.add(name)
    return name


def save_library(library: SkillLibrary, directory: str | Path) -> None:
    """Persist all skills plus an index; holds the write lock for the duration."""
    directory = Path(directory)
    with library_lock(directory):
        skills_dir = directory / "skills"
        skills_dir.mkdir(parents=True, exist_ok=True)
        taken: set[str] = set()
        index_entries = []
        for skill in library:
            filename = _skill_filename(skill.skill_id, taken)
            _atomic_write(
                skills_dir / filename, json.dumps(skill_to_json(skill), indent=2)
            )
            index_entries.append(
                {
                    "skill_id": skill.skill_id,
                    "file": f"skills/{filename}",
                    "num_cases": skill.provenance.num_cases,
                }
            )
        index = {"version": LIBRARY_FORMAT_VERSION, "skills": index_entries}
        _atomic_write(directory / "index.json", json.dumps(index, indent=2))


def load_library(directory: str | Path) -> SkillLibrary:
    """Load a persisted library; loudly fails on version or integrity problems."""
    directory = Path(directory)
    index_path = directory / "index.json"
    if not index_path.exists():
        raise LibraryFormatError(f"no library index at {index_path}")
    try:
        index = json.loads(index_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise LibraryFormatError(f"{index_path}: not valid JSON: {exc}") from exc
    version = index.get("version")
    if version != LIBRARY_FORMAT_VERSION:
        raise LibraryFormatError(
            f"library format {version!r} is not supported (expected {LIBRARY_FORMAT_VERSION!r})"
        )
    library = SkillLibrary()
    for entry in index.get("skills", []):
        skill_path = directory / entry["file"]
        if not skill_path.exists():
            raise LibraryFormatError(
                f"index references missing skill file {entry['file']!r}"
            )
        try:
            skill = skill_from_json(json.loads(skill_path.read_text(encoding="utf-8")))
        except (json.JSONDecodeError, ValueError) as exc:
            raise LibraryFormatError(f"{skill_path}: {exc}") from exc
        if skill.skill_id != entry["skill_id"]:
            raise LibraryFormatError(
                f"{skill_path}: holds skill {skill.skill_id!r}, index says {entry['skill_id']!r}"
            )
        report = validate_net(skill.net)
        if not report.ok:
            raise LibraryFormatError(
                f"{skill_path}: net fails validation: {'; '.join(report.violations)}"
            )
        library.add(skill)
    return library


def add_skill_to_library(skill: Skill, directory: str | Path) -> SkillLibrary:
    """Append one skill to a persisted library (single-writer; atomic rewrite)."""
    directory = Path(directory)
    library = load_library(directory) if (directory / "index.json").exists() else SkillLibrary()
    library.add(skill, replace=True)
    save_library(library, directory)
    return library
