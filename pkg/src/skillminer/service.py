"""HTTP retrieval service for agent clients.

Stateless between requests apart from the persisted skill library; skill
writes serialize through the library's advisory lock and land atomically.
Clients may bring their own thought on ``/retrieve``, in which case no LLM
call is made.
"""

from __future__ import annotations

from pathlib import Path

from fastapi import Body, FastAPI, HTTPException

from .discovery import discover_skill
from .evaluation import METHODS, default_catalog, library_plan_script
from .gateway import (
    HashingEmbeddingClient,
    HttpChatClient,
    HttpEmbeddingClient,
    ResponseParseError,
    TransportError,
    generate_thought,
)
from .gateway import embed as embed_text
from .ingestion import (
    LibraryFormatError,
    LibraryLockError,
    add_skill_to_library,
    load_library,
)
from .model import Skill, SkillLibrary, Trace
from .retrieval import (
    embed_library,
    retrieve_by_conformance,
    retrieve_by_embedding,
    retrieve_hybrid,
)
from .serialize import alignment_to_json, event_log_from_json, skill_to_json
from .conformance import optimal_alignment


def create_app(
    library_dir: str | Path | None = None,
    *,
    library: SkillLibrary | None = None,
    stub: bool = True,
    chat_client=None,
    embed_client=None,
    embed_strategy: str = "first",
) -> FastAPI:
    """Build the service around a persisted (or in-memory) skill library."""
    if library is None:
        if library_dir is None:
            raise ValueError("create_app needs a library directory or a SkillLibrary")
        library = load_library(library_dir)
    if chat_client is None:
        chat_client = (
            StubForLibrary(library) if stub else HttpChatClient()
        )
    if embed_client is None:
        embed_client = HashingEmbeddingClient() if stub else HttpEmbeddingClient()

    app = FastAPI(title="skillminer", version="0.1.0")
    state = app.state
    state.library_dir = Path(library_dir) if library_dir else None
    state.chat_client = chat_client
    state.embed_client = embed_client
    state.embed_strategy = embed_strategy
    state.library = embed_library(library, embed_client, strategy=embed_strategy)

    @app.get("/healthz")
    def healthz() -> dict:
        return {"status": "ok", "skills": len(state.library)}

    @app.get("/skills/{skill_id}")
    def get_skill(skill_id: str) -> dict:
        if skill_id not in state.library:
            raise HTTPException(status_code=404, detail=f"unknown skill {skill_id!r}")
        return skill_to_json(state.library.get(skill_id))

    @app.post("/conformance")
    def conformance(payload: dict = Body(...)) -> dict:
        skill_id = payload.get("skill_id")
        trace_raw = payload.get("trace")
        if not isinstance(skill_id, str) or not isinstance(trace_raw, list) or not all(
            isinstance(a, str) for a in trace_raw
        ):
            raise HTTPException(
                status_code=400,
                detail="body must be {skill_id: str, trace: [action, ...]}",
            )
        if skill_id not in state.library:
            raise HTTPException(status_code=404, detail=f"unknown skill {skill_id!r}")
        skill = state.library.get(skill_id)
        alignment = optimal_alignment(Trace(trace_raw), skill.net)
        return alignment_to_json(alignment)

    @app.post("/retrieve")
    def retrieve(payload: dict = Body(...)) -> dict:
        query = payload.get("query")
        mode = payload.get("mode", "hybrid")
        k = payload.get("k", 3)
        k_first = payload.get("k_first", 3)
        thought_raw = payload.get("thought")
        if not isinstance(query, str) or mode not in METHODS:
            raise HTTPException(
                status_code=400,
                detail=f"body must carry a string 'query' and mode in {sorted(METHODS)}",
            )
        if not isinstance(k, int) or k < 1 or not isinstance(k_first, int) or k_first < 1:
            raise HTTPException(status_code=400, detail="k and k_first must be positive integers")
        if len(state.library) == 0:
            raise HTTPException(status_code=400, detail="library is empty")

        thought_trace = None
        if mode in ("conform", "hybrid"):
            if thought_raw is not None:
                if not isinstance(thought_raw, list) or not all(isinstance(a, str) for a in thought_raw):
                    raise HTTPException(status_code=400, detail="'thought' must be a list of action names")
                thought_trace = Trace(thought_raw)
            else:
                try:
                    thought = generate_thought(query, default_catalog(state.library), state.chat_client)
                except TransportError as exc:
                    raise HTTPException(status_code=502, detail=str(exc)) from exc
                except ResponseParseError as exc:
                    raise HTTPException(status_code=502, detail=f"planner reply unusable: {exc}") from exc
                thought_trace = thought.trace

        try:
            if mode == "embed":
                query_vec = embed_text(query, state.embed_client)
                ranking = retrieve_by_embedding(query_vec, state.library, k)
            elif mode == "conform":
                ranking = retrieve_by_conformance(thought_trace, state.library, k)
            else:
                query_vec = embed_text(query, state.embed_client)
                ranking = retrieve_hybrid(
                    query_vec, thought_trace, state.library,
                    k_first=max(k_first, k), k_final=k,
                )
        except TransportError as exc:
            raise HTTPException(status_code=502, detail=str(exc)) from exc
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc

        body: dict = {
            "method": ranking.method.value,
            "entries": [
                {"skill_id": e.skill_id, "score": e.score, "rank": e.rank}
                for e in ranking.entries
            ],
        }
        if thought_trace is not None:
            body["thought"] = list(thought_trace.labels())
            body["diagnostics"] = {
                sid: alignment_to_json(a) for sid, a in sorted(ranking.diagnostics.items())
            }
        return body

    @app.post("/skills", status_code=201)
    def add_skill(payload: dict = Body(...)) -> dict:
        try:
            log = event_log_from_json(payload)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        if not log.traces:
            raise HTTPException(status_code=400, detail="event log has no traces")
        skill = discover_skill(log)
        embedded = Skill(
            skill_id=skill.skill_id,
            tree=skill.tree,
            net=skill.net,
            query_texts=skill.query_texts,
            embedding=embed_text(skill.canonical_text(), state.embed_client),
            provenance=skill.provenance,
        )
        if state.library_dir is not None:
            try:
                add_skill_to_library(embedded, state.library_dir)
            except LibraryLockError as exc:
                raise HTTPException(status_code=409, detail=str(exc)) from exc
            except LibraryFormatError as exc:
                raise HTTPException(status_code=400, detail=str(exc)) from exc
        state.library.add(embedded, replace=True)
        return skill_to_json(embedded)

    return app


class StubForLibrary:
    """Offline planner stub wired to answer the library's known query texts."""

    def __init__(self, library: SkillLibrary) -> None:
        from .gateway import StubChatClient

        self._inner = StubChatClient(plan_script=library_plan_script(library))
        self.source = self._inner.source

    @property
    def calls(self) -> int:
        return self._inner.calls

    def complete(self, prompt: str) -> str:
        return self._inner.complete(prompt)
