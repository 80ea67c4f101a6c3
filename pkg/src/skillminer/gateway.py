"""LLM service abstraction: thought generation, rephrasing, embeddings.

Remote clients speak plain HTTP+JSON with endpoint URLs and tokens taken
from ``LLM_ENDPOINT`` / ``LLM_API_KEY`` / ``EMBED_ENDPOINT`` /
``EMBED_API_KEY``; every exchange can be recorded to disk for replayable
fixtures. The stub clients are pure functions of their inputs and a seed, so
the whole pipeline runs offline and deterministically.
"""

from __future__ import annotations

import hashlib
import json
import os
import random
import re
import time
from collections.abc import Callable, Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path

import numpy as np

from .conformance import alignment_fitness
from .model import Action, EmbeddingVector, PetriNet, Skill, Trace, seq
from .petri import tree_to_petri

ENV_LLM_ENDPOINT = "LLM_ENDPOINT"
ENV_LLM_API_KEY = "LLM_API_KEY"
ENV_EMBED_ENDPOINT = "EMBED_ENDPOINT"
ENV_EMBED_API_KEY = "EMBED_API_KEY"

STUB_EMBED_DIM = 256
STUB_EMBED_TAG = f"feature-hash-{STUB_EMBED_DIM}"

THOUGHT_TEMPLATE = "thought_v1.txt"
REPHRASE_TEMPLATE = "rephrase_v1.txt"


class TransportError(RuntimeError):
    """A remote LLM/embedding call failed at the HTTP level."""


class ResponseParseError(ValueError):
    """A model response did not contain the demanded structured list."""

    def __init__(self, message: str, raw: str) -> None:
        super().__init__(message)
        self.raw = raw


class ThoughtSource(Enum):
    REMOTE = "REMOTE"
    STUB = "STUB"


class Language(Enum):
    EN = "English"
    DA = "Danish"
    FR = "French"


@dataclass(frozen=True)
class ToolCatalog:
    """Available tools: unique action names plus free-text descriptions."""

    tools: tuple[tuple[Action, str], ...]

    def __init__(self, tools: Iterable[tuple[Action | str, str]]) -> None:
        normalized = tuple(
            (a if isinstance(a, Action) else Action(a), desc) for a, desc in tools
        )
        names = [a.name for a, _ in normalized]
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise ValueError(f"duplicate tool names: {dupes}")
        object.__setattr__(self, "tools", normalized)

    def names(self) -> set[str]:
        return {a.name for a, _ in self.tools}

    def listing(self) -> str:
        return "\n".join(f"- {a.name}: {desc}" for a, desc in self.tools)

    def __len__(self) -> int:
        return len(self.tools)


@dataclass(frozen=True)
class Thought:
    """A one-shot ungrounded plan for a query, as parsed from a model reply.

    ``off_catalog`` flags plan actions absent from the tool catalog (they are
    kept in the trace). ``achieved_fitness``/``best_effort`` are filled by the
    noise planner.
    """

    trace: Trace
    source: ThoughtSource
    raw_response: str | None = None
    off_catalog: tuple[str, ...] = ()
    achieved_fitness: float | None = None
    best_effort: bool = False


def _template(name: str) -> str:
    return resources.files("skillminer.prompts").joinpath(name).read_text(encoding="utf-8")


# ---------------------------------------------------------------------------
# Clients
# ---------------------------------------------------------------------------


class _Recorder:
    def __init__(self, directory: str | Path | None) -> None:
        self.directory = Path(directory) if directory else None
        self._n = 0

    def record(self, url: str, request: object, response: object) -> None:
        if self.directory is None:
            return
        self.directory.mkdir(parents=True, exist_ok=True)
        payload = {"url": url, "request": request, "response": response, "time": time.time()}
        path = self.directory / f"exchange_{self._n:04d}.json"
        path.write_text(json.dumps(payload, indent=2), encoding="utf-8")
        self._n += 1


class HttpChatClient:
    """POSTs ``{"prompt": ...}`` to the chat endpoint and expects ``{"text": ...}``."""

    source = ThoughtSource.REMOTE

    def __init__(
        self,
        endpoint: str | None = None,
        api_key: str | None = None,
        record_dir: str | Path | None = None,
        timeout: float = 60.0,
    ) -> None:
        self.endpoint = endpoint or os.environ.get(ENV_LLM_ENDPOINT, "")
        self.api_key = api_key if api_key is not None else os.environ.get(ENV_LLM_API_KEY, "")
        if not self.endpoint:
            raise ValueError(f"no chat endpoint configured (set {ENV_LLM_ENDPOINT})")
        self.timeout = timeout
        self.recorder = _Recorder(record_dir)
        self.calls = 0

    def complete(self, prompt: str) -> str:
        import requests

        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        body = {"prompt": prompt}
        self.calls += 1
        try:
            response = requests.post(self.endpoint, json=body, headers=headers, timeout=self.timeout)
            response.raise_for_status()
            data = response.json()
        except Exception as exc:
            raise TransportError(f"chat endpoint failed: {exc}") from exc
        self.recorder.record(self.endpoint, body, data)
        if not isinstance(data, dict) or not isinstance(data.get("text"), str):
            raise ResponseParseError("chat endpoint reply lacks a 'text' field", str(data))
        return data["text"]


class HttpEmbeddingClient:
    """POSTs ``{"text": ...}`` and expects ``{"values": [...], "model_tag": ...}``."""

    def __init__(
        self,
        endpoint: str | None = None,
        api_key: str | None = None,
        record_dir: str | Path | None = None,
        timeout: float = 60.0,
    ) -> None:
        self.endpoint = endpoint or os.environ.get(ENV_EMBED_ENDPOINT, "")
        self.api_key = api_key if api_key is not None else os.environ.get(ENV_EMBED_API_KEY, "")
        if not self.endpoint:
            raise ValueError(f"no embedding endpoint configured (set {ENV_EMBED_ENDPOINT})")
        self.timeout = timeout
        self.recorder = _Recorder(record_dir)
        self.calls = 0

    def embed_text(self, text: str) -> EmbeddingVector:
        import requests

        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        body = {"text": text}
        self.calls += 1
        try:
            response = requests.post(self.endpoint, json=body, headers=headers, timeout=self.timeout)
            response.raise_for_status()
            data = response.json()
        except Exception as exc:
            raise TransportError(f"embedding endpoint failed: {exc}") from exc
        self.recorder.record(self.endpoint, body, data)
        try:
            return EmbeddingVector(data["values"], str(data.get("model_tag", "remote")))
        except Exception as exc:
            raise ResponseParseError("embedding reply lacks a numeric 'values' list", str(data)) from exc


_REPHRASE_OPENERS = (
    "Put differently:",
    "In other words:",
    "Restated:",
    "To phrase it another way:",
    "Another way to ask this:",
)
_LANGUAGE_MARKER = {
    Language.EN: "",
    Language.DA: "(dansk) ",
    Language.FR: "(français) ",
}


class StubChatClient:
    """Offline chat stub: answers the gateway prompts deterministically.

    Thought prompts are answered from ``plan_script`` (query text -> action
    names); unknown queries fall back to the catalog tools mentioned in the
    query, in catalog order. Rephrase prompts get template paraphrases that
    keep the original wording. ``calls`` counts completions for tests that
    assert no LLM round-trip happened.
    """

    source = ThoughtSource.STUB

    def __init__(
        self,
        plan_script: Mapping[str, Sequence[str]] | Callable[[str], Sequence[str] | None] | None = None,
    ) -> None:
        self.plan_script = plan_script
        self.calls = 0

    def _plan_for(self, query: str, tool_lines: list[str]) -> Sequence[str] | None:
        if callable(self.plan_script):
            plan = self.plan_script(query)
            if plan is not None:
                return plan
        elif self.plan_script and query in self.plan_script:
            return self.plan_script[query]
        mentioned = [name for name in tool_lines if name.lower() in query.lower()]
        return mentioned or None

    def complete(self, prompt: str) -> str:
        self.calls += 1
        query_match = re.search(r"^Problem: (.*)$", prompt, re.MULTILINE)
        query = query_match.group(1) if query_match else ""
        if "paraphrases" in prompt:
            n_match = re.search(r"exactly (\d+) paraphrases", prompt)
            n = int(n_match.group(1)) if n_match else 1
            lang_match = re.search(r"paraphrases\s+of the problem in (\w+)", prompt)
            lang_name = lang_match.group(1) if lang_match else "English"
            language = next((l for l in Language if l.value == lang_name), Language.EN)
            marker = _LANGUAGE_MARKER[language]
            lines = [
                f"{i + 1}. {marker}{_REPHRASE_OPENERS[i % len(_REPHRASE_OPENERS)]} {query}"
                for i in range(n)
            ]
            return "The problem asks for the same goal in different words.\n" + "\n".join(lines)
        tool_lines = re.findall(r"^- ([^:]+):", prompt, re.MULTILINE)
        plan = self._plan_for(query, tool_lines)
        if not plan:
            return "I could not produce a plan for this problem."
        return "\n".join(f"{i + 1}. {name}" for i, name in enumerate(plan))


class HashingEmbeddingClient:
    """Deterministic feature-hash embedder (dimension 256).

    Identical texts map to identical vectors; texts without shared tokens are
    near-orthogonal in expectation. Token order does not matter.
    """

    def __init__(self, dim: int = STUB_EMBED_DIM) -> None:
        self.dim = dim
        self.model_tag = f"feature-hash-{dim}"
        self.calls = 0

    def embed_text(self, text: str) -> EmbeddingVector:
        self.calls += 1
        tokens = re.findall(r"[a-z0-9]+", text.lower())
        values = np.zeros(self.dim)
        for token in tokens:
            digest = hashlib.sha256(token.encode("utf-8")).digest()
            index = int.from_bytes(digest[:4], "big") % self.dim
            sign = 1.0 if digest[4] % 2 == 0 else -1.0
            values[index] += sign
        norm = float(np.linalg.norm(values))
        if norm > 0:
            values = values / norm
        else:
            values[0] = 1.0  # texts with no tokens still need a usable vector
        return EmbeddingVector(values.tolist(), self.model_tag)


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


_PLAN_LINE = re.compile(r"^\s*\d+[.)]\s*(.+?)\s*$")


def parse_plan_lines(text: str) -> list[str]:
    """Extract the numbered-list plan from a model reply, ignoring preamble."""
    return [m.group(1) for line in text.splitlines() if (m := _PLAN_LINE.match(line))]


def generate_thought(query: str, catalog: ToolCatalog, client) -> Thought:
    """One-shot plan for the query: single inference, no execution feedback.

    Off-catalog actions in the reply are kept in the trace and flagged.
    Raises :class:`ResponseParseError` (carrying the raw reply) when the
    response holds no plan lines.
    """
    if len(catalog) == 0:
        raise ValueError("tool catalog is empty")
    prompt = _template(THOUGHT_TEMPLATE).format(query=query, tools=catalog.listing())
    raw = client.complete(prompt)
    steps = parse_plan_lines(raw)
    if not steps:
        raise ResponseParseError("model reply contains no numbered plan lines", raw)
    known = catalog.names()
    off = tuple(s for s in steps if s not in known)
    return Thought(
        trace=Trace(steps),
        source=getattr(client, "source", ThoughtSource.REMOTE),
        raw_response=raw,
        off_catalog=off,
    )


def rephrase(query: str, language: Language, n: int, client) -> list[str]:
    """Produce ``n`` paraphrases of the query in the given language.

    The prompt asks the model to reason about the problem before restating
    it; only the final numbered list is returned.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    prompt = _template(REPHRASE_TEMPLATE).format(query=query, n=n, language=language.value)
    raw = client.complete(prompt)
    lines = parse_plan_lines(raw)
    if len(lines) < n:
        raise ResponseParseError(f"expected {n} paraphrases, found {len(lines)}", raw)
    return lines[:n]


def embed(text: str, client) -> EmbeddingVector:
    """Embed a text via the client; rejects empty input."""
    if not text:
        raise ValueError("cannot embed empty text")
    return client.embed_text(text)


def noisy_planner(
    ground_truth: Trace,
    target_fitness: float,
    seed: int,
    model: Skill | PetriNet | None = None,
    *,
    tolerance: float = 0.05,
    max_attempts: int = 200,
) -> Thought:
    """Degrade a ground-truth plan until its alignment fitness hits a target band.

    Random adjacent swaps, deletions, and off-alphabet insertions are applied
    until fitness against ``model`` (default: the sequence model of the
    ground truth itself) lands in ``target +- tolerance``; otherwise the
    closest attempt is returned with ``best_effort`` set. Deterministic for a
    given seed.
    """
    if not 0.0 <= target_fitness <= 1.0:
        raise ValueError("target fitness must be in [0, 1]")
    if len(ground_truth) == 0:
        raise ValueError("ground truth trace must be non-empty")

    if model is None:
        net = tree_to_petri(seq(*ground_truth.labels()) if len(ground_truth) > 1
                            else _single_action_tree(ground_truth))
    elif isinstance(model, Skill):
        net = model.net
    else:
        net = model

    def fitness_of(labels: Sequence[str]) -> float:
        if not labels:
            return 0.0 if target_fitness < 1.0 else 1.0
        return alignment_fitness(Trace(labels), net)

    low = max(0.0, target_fitness - tolerance)
    high = min(1.0, target_fitness + tolerance)
    rng = random.Random(seed)
    original = list(ground_truth.labels())

    if target_fitness >= 1.0 - 1e-12:
        fit = fitness_of(original)
        return Thought(
            trace=Trace(original), source=ThoughtSource.STUB,
            achieved_fitness=fit, best_effort=not low <= fit <= high,
        )
    if target_fitness <= 1e-12:
        labels = [f"noise_{i}" for i in range(len(original))]
        fit = fitness_of(labels)
        return Thought(
            trace=Trace(labels), source=ThoughtSource.STUB,
            achieved_fitness=fit, best_effort=not low <= fit <= high,
        )

    def mutate(k: int) -> list[str]:
        labels = list(original)
        for _ in range(k):
            op = rng.choice(("swap", "delete", "insert"))
            if op == "swap" and len(labels) >= 2:
                i = rng.randrange(len(labels) - 1)
                labels[i], labels[i + 1] = labels[i + 1], labels[i]
            elif op == "delete" and len(labels) >= 2:
                del labels[rng.randrange(len(labels))]
            else:
                labels.insert(rng.randrange(len(labels) + 1), f"noise_{rng.randrange(10**6)}")
        return labels

    k = max(1, round((1.0 - target_fitness) * len(original)))
    best_labels = original
    best_fit = fitness_of(original)
    for _ in range(max_attempts):
        labels = mutate(k)
        fit = fitness_of(labels)
        if abs(fit - target_fitness) < abs(best_fit - target_fitness):
            best_labels, best_fit = labels, fit
        if low <= fit <= high:
            return Thought(
                trace=Trace(labels), source=ThoughtSource.STUB,
                achieved_fitness=fit, best_effort=False,
            )
        k = k + 1 if fit > high else max(1, k - 1)
    return Thought(
        trace=Trace(best_labels), source=ThoughtSource.STUB,
        achieved_fitness=best_fit, best_effort=True,
    )


def _single_action_tree(trace: Trace):
    from .model import leaf

    return leaf(trace.actions[0])
