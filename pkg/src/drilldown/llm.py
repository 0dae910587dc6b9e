"""Provider-agnostic LLM adapter layer.

One adapter protocol, two implementations: an OpenAI-compatible HTTP provider
and a fully deterministic mock. The mock computes chart-spec and relevance
replies from the prompt's structured context and replays digest-keyed fixture
payloads for insight/dimension schemas, so every pipeline is bit-deterministic
end to end without a network.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import time
from collections import Counter
from copy import deepcopy
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any, Mapping, Protocol, Sequence

import httpx

from .errors import (
    AdapterTimeout,
    AdapterUnavailable,
    MissingFixture,
    SchemaMismatch,
    UnparseablePayload,
)
from . import prompts
from .tabular import parse_predicate_label, predicate_from_json, render_predicate

if TYPE_CHECKING:
    from .intent import IntentBundle

log = logging.getLogger(__name__)

REASONING_LEVELS = ("low", "medium", "high")

#: Model-id prefixes whose endpoints accept a reasoning-effort parameter.
REASONING_CAPABLE_PREFIXES = ("gpt-5", "o1", "o3", "o4")

EXPECTED_SCHEMAS = ("chart_spec", "insight_batch", "dimension_list", "relevance_map")

ENV_API_KEY = "DRILLDOWN_API_KEY"
ENV_ENDPOINT = "DRILLDOWN_ENDPOINT"


@dataclass(frozen=True)
class ProviderConfig:
    model_id: str = "mock"
    reasoning_level: str = "medium"
    temperature: float = 0.1
    seed: int = 42
    endpoint: str = "https://api.openai.com/v1"
    timeout_ms: int = 30_000

    def __post_init__(self) -> None:
        if self.reasoning_level not in REASONING_LEVELS:
            raise ValueError(f"reasoning_level must be one of {REASONING_LEVELS}")
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError("temperature must be in [0, 2]")
        if self.timeout_ms <= 0:
            raise ValueError("timeout_ms must be positive")


@dataclass(frozen=True)
class PromptDocument:
    """One adapter request: text for the model plus a machine-readable context.

    ``context`` carries the structured inputs the text was rendered from; the
    HTTP provider ignores it, the mock derives its deterministic reply from it.
    """

    system_text: str
    user_text: str
    expected_schema: str
    context: Mapping[str, Any] | None = None

    def __post_init__(self) -> None:
        if self.expected_schema not in EXPECTED_SCHEMAS:
            raise ValueError(f"unknown expected_schema {self.expected_schema!r}")
        if not self.user_text:
            raise ValueError("user_text must be non-empty")


@dataclass(frozen=True)
class CompletionResult:
    raw_text: str
    parsed: Any | None
    latency_ms: int


class LlmAdapter(Protocol):
    def complete(self, config: ProviderConfig, prompt: PromptDocument) -> CompletionResult:
        ...


# ---------------------------------------------------------------------------
# Structured-output parsing
# ---------------------------------------------------------------------------

_FENCE_RE = re.compile(r"```(?:json)?\s*(.*?)```", re.DOTALL)


def _extract_json(text: str) -> Any:
    """First JSON object/array in the text, tolerating prose and code fences."""
    for m in _FENCE_RE.finditer(text):
        try:
            return json.loads(m.group(1))
        except ValueError:
            continue
    decoder = json.JSONDecoder()
    for i, ch in enumerate(text):
        if ch in "{[":
            try:
                obj, _ = decoder.raw_decode(text[i:])
                return obj
            except ValueError:
                continue
    raise UnparseablePayload("no JSON value found in reply")


def parse_structured(result: CompletionResult | str, schema: str) -> Any:
    """Extract and shape-check the reply payload for the declared schema."""
    text = result if isinstance(result, str) else result.raw_text
    if not text:
        raise UnparseablePayload("empty reply")
    payload = _extract_json(text)
    if schema == "chart_spec":
        if not isinstance(payload, dict) or not isinstance(payload.get("spec"), dict):
            raise SchemaMismatch("chart_spec reply must be an object with a 'spec' object")
    elif schema == "insight_batch":
        if not isinstance(payload, list) or not all(
            isinstance(e, dict) and isinstance(e.get("title"), str) for e in payload
        ):
            raise SchemaMismatch("insight_batch reply must be a list of titled objects")
    elif schema == "dimension_list":
        if not isinstance(payload, list) or not all(
            isinstance(e, dict) and ("label" in e or "field" in e) for e in payload
        ):
            raise SchemaMismatch("dimension_list reply must be a list of labeled objects")
    elif schema == "relevance_map":
        if not isinstance(payload, dict) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool)
            for v in payload.values()
        ):
            raise SchemaMismatch("relevance_map reply must map fields to numbers")
    else:
        raise ValueError(f"unknown schema {schema!r}")
    return payload


def _try_parse(text: str, schema: str) -> Any | None:
    try:
        return parse_structured(text, schema)
    except (UnparseablePayload, SchemaMismatch):
        return None


# ---------------------------------------------------------------------------
# Relevance coefficients
# ---------------------------------------------------------------------------

def relevance_coefficients(
    fields: Sequence[str],
    bundle: "IntentBundle | None",
    adapter: LlmAdapter,
    config: ProviderConfig,
) -> dict[str, float]:
    """Per-field alpha coefficients in [0, 1], LLM-rated against the intent.

    Cold start (no interactions and no instruction) returns all-1.0 without an
    adapter call; unparseable replies degrade to all-1.0 with a log entry.
    """
    if not fields:
        raise ValueError("fields must be non-empty")
    if bundle is None or (not bundle.interactions and not bundle.instruction):
        return {f: 1.0 for f in fields}
    prompt = build_relevance_prompt(fields, bundle)
    try:
        result = adapter.complete(config, prompt)
        payload = result.parsed
        if payload is None:
            payload = parse_structured(result, "relevance_map")
    except (UnparseablePayload, SchemaMismatch) as exc:
        log.warning("relevance reply unusable (%s); defaulting to 1.0", exc)
        return {f: 1.0 for f in fields}
    out = {}
    for f in fields:
        value = payload.get(f, 1.0)
        out[f] = min(1.0, max(0.0, float(value)))
    return out


def build_relevance_prompt(fields: Sequence[str], bundle: "IntentBundle") -> PromptDocument:
    lines = ["Fields:"]
    lines.extend(f"- {f}" for f in fields)
    if bundle.instruction:
        lines.append(f"Instruction: {bundle.instruction}")
    if bundle.interactions:
        lines.append("Recent interactions:")
        lines.extend(
            f"- {render_predicate(sig.predicate)} (x{sig.repeat_count})"
            for sig in bundle.interactions
        )
    if bundle.base_filters:
        lines.append("Active filters:")
        lines.extend(f"- {render_predicate(p)}" for p in bundle.base_filters)
    return PromptDocument(
        system_text=prompts.RELEVANCE_SYSTEM,
        user_text="\n".join(lines),
        expected_schema="relevance_map",
        context={
            "fields": list(fields),
            "instruction": bundle.instruction,
        },
    )


# ---------------------------------------------------------------------------
# HTTP provider (OpenAI-compatible chat completions)
# ---------------------------------------------------------------------------

class HttpProvider:
    """Single-round-trip chat-completion client; transport errors retried once."""

    def __init__(self, client: httpx.Client | None = None):
        self._client = client or httpx.Client()
        self._warned_reasoning = False

    def complete(self, config: ProviderConfig, prompt: PromptDocument) -> CompletionResult:
        endpoint = os.environ.get(ENV_ENDPOINT, config.endpoint).rstrip("/")
        url = f"{endpoint}/chat/completions"
        headers = {}
        api_key = os.environ.get(ENV_API_KEY)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        body: dict[str, Any] = {
            "model": config.model_id,
            "messages": [
                {"role": "system", "content": prompt.system_text},
                {"role": "user", "content": prompt.user_text},
            ],
            "temperature": config.temperature,
            "seed": config.seed,
        }
        if config.model_id.startswith(REASONING_CAPABLE_PREFIXES):
            body["reasoning_effort"] = config.reasoning_level
        elif not self._warned_reasoning:
            log.warning(
                "model %s does not accept a reasoning level; ignoring %r",
                config.model_id,
                config.reasoning_level,
            )
            self._warned_reasoning = True

        started = time.monotonic()
        last_error: Exception | None = None
        for attempt in (1, 2):
            try:
                response = self._client.post(
                    url, json=body, headers=headers, timeout=config.timeout_ms / 1000.0
                )
            except httpx.TimeoutException as exc:
                raise AdapterTimeout(f"no reply within {config.timeout_ms} ms") from exc
            except httpx.HTTPError as exc:
                last_error = exc
                continue
            if response.status_code >= 500 and attempt == 1:
                last_error = RuntimeError(f"HTTP {response.status_code}")
                continue
            if response.status_code != 200:
                raise AdapterUnavailable(
                    f"provider replied HTTP {response.status_code}: {response.text[:200]}"
                )
            try:
                raw_text = response.json()["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise AdapterUnavailable(f"malformed provider response: {exc}") from exc
            latency = int((time.monotonic() - started) * 1000)
            return CompletionResult(raw_text, _try_parse(raw_text, prompt.expected_schema), latency)
        raise AdapterUnavailable(f"transport failed after retry: {last_error}")


# ---------------------------------------------------------------------------
# Deterministic mock provider
# ---------------------------------------------------------------------------

def _tokens(text: str) -> set[str]:
    return set(re.findall(r"[a-z0-9]+", text.lower()))


def token_overlap(field_name: str, text: str | None) -> float:
    """|tokens(field) ∩ tokens(text)| / |tokens(field)|, in [0, 1]."""
    ft = _tokens(field_name)
    if not ft or not text:
        return 0.0
    return len(ft & _tokens(text)) / len(ft)


_TASK_KEYWORDS = (
    ("trend", "trend"),
    ("correlat", "correlation"),
    ("distribut", "distribution"),
    ("density", "density"),
    ("compar", "comparison"),
)


class MockProvider:
    """Adapter-free deterministic provider: identical prompt, identical reply.

    chart_spec and relevance_map replies are computed from the prompt context
    (appended intent predicates + heuristic mark table; 0.5 + 0.5 * token
    overlap between field names and the instruction). insight_batch and
    dimension_list replies replay fixtures keyed by a prompt digest, falling
    back to a per-schema default payload when one is registered.
    """

    def __init__(
        self,
        fixtures: Mapping[str, Any] | None = None,
        defaults: Mapping[str, Any] | None = None,
    ):
        self.fixtures = dict(fixtures or {})
        self.defaults = dict(defaults or {})
        self.calls = 0
        self.calls_by_schema: Counter[str] = Counter()

    @staticmethod
    def prompt_digest(prompt: PromptDocument) -> str:
        blob = f"{prompt.expected_schema}\n{prompt.system_text}\n{prompt.user_text}"
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]

    def add_fixture(self, prompt: PromptDocument, payload: Any) -> str:
        digest = self.prompt_digest(prompt)
        self.fixtures[digest] = payload
        return digest

    def complete(self, config: ProviderConfig, prompt: PromptDocument) -> CompletionResult:
        self.calls += 1
        self.calls_by_schema[prompt.expected_schema] += 1
        digest = self.prompt_digest(prompt)
        if digest in self.fixtures:
            payload = deepcopy(self.fixtures[digest])
        elif prompt.expected_schema == "chart_spec":
            payload = self._chart_spec_payload(prompt)
        elif prompt.expected_schema == "relevance_map":
            payload = self._relevance_payload(prompt)
        elif prompt.expected_schema in self.defaults:
            payload = deepcopy(self.defaults[prompt.expected_schema])
        else:
            raise MissingFixture(
                f"no fixture for schema {prompt.expected_schema!r} digest {digest}"
            )
        raw_text = payload if isinstance(payload, str) else json.dumps(payload, sort_keys=True)
        return CompletionResult(raw_text, _try_parse(raw_text, prompt.expected_schema), 0)

    # -- computed replies ---------------------------------------------------

    def _chart_spec_payload(self, prompt: PromptDocument) -> dict:
        from .chartspec import (  # runtime import keeps module layering acyclic
            mark_for_vega_types,
            parse_spec,
            append_filters,
        )
        from .errors import ConflictingFilter

        ctx = prompt.context
        if not ctx or "chart" not in ctx:
            raise MissingFixture("chart_spec prompt carries no context")
        spec = parse_spec(ctx["chart"])
        new_predicates = [predicate_from_json(p) for p in ctx.get("new_predicates", [])]
        instruction = ctx.get("instruction") or ""
        label_predicate = parse_predicate_label(instruction) if instruction else None
        if label_predicate is not None:
            new_predicates.append(label_predicate)

        hypotheses = []
        for p in new_predicates:
            try:
                spec = append_filters(spec, [p])
                hypotheses.append(f"constrain {render_predicate(p)}")
            except ConflictingFilter:
                hypotheses.append(f"skip conflicting {render_predicate(p)}")
        if instruction and label_predicate is None:
            hypotheses.append(f"interpret: {instruction}")
        if not hypotheses:
            hypotheses.append("survey the current view")

        task = next((t for kw, t in _TASK_KEYWORDS if kw in instruction.lower()), None)
        if task is not None:
            mark = mark_for_vega_types(task, spec)
            if mark is not None and mark != spec.mark:
                from dataclasses import replace

                spec = replace(spec, mark=mark)

        pool = list(ctx.get("candidate_pool", []))
        ranked = sorted(
            pool,
            key=lambda d: -token_overlap(str(d.get("field", "")), instruction),
        )
        dims = [
            {
                "label": d.get("label"),
                "field": d.get("field"),
                "filter": d.get("filter"),
                "rationale": "token overlap {:.2f}".format(
                    token_overlap(str(d.get("field", "")), instruction)
                ),
            }
            for d in ranked
        ]
        return {
            "task_hypotheses": hypotheses,
            "spec": spec.to_json(),
            "basic_dimensions": dims,
        }

    def _relevance_payload(self, prompt: PromptDocument) -> dict:
        ctx = prompt.context or {}
        instruction = ctx.get("instruction") or ""
        return {
            f: round(min(1.0, 0.5 + 0.5 * token_overlap(f, instruction)), 6)
            for f in ctx.get("fields", [])
        }


class ScriptedAdapter:
    """Test double replaying an explicit payload sequence and recording prompts."""

    def __init__(self, payloads: Sequence[Any]):
        self.queue = list(payloads)
        self.prompts: list[PromptDocument] = []

    def complete(self, config: ProviderConfig, prompt: PromptDocument) -> CompletionResult:
        self.prompts.append(prompt)
        if not self.queue:
            raise MissingFixture("scripted adapter exhausted")
        payload = self.queue.pop(0)
        raw_text = payload if isinstance(payload, str) else json.dumps(payload, sort_keys=True)
        return CompletionResult(raw_text, _try_parse(raw_text, prompt.expected_schema), 0)


def load_fixture_dir(path: str) -> tuple[dict[str, Any], dict[str, Any]]:
    """Load mock fixtures from ``*.json`` files in a directory.

    Top-level keys that name a schema become per-schema defaults; every other
    key is treated as a prompt digest.
    """
    fixtures: dict[str, Any] = {}
    defaults: dict[str, Any] = {}
    for name in sorted(os.listdir(path)):
        if not name.endswith(".json"):
            continue
        with open(os.path.join(path, name), "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        for key, payload in doc.items():
            if key in EXPECTED_SCHEMAS:
                defaults[key] = payload
            else:
                fixtures[key] = payload
    return fixtures, defaults


__all__ = [
    "ProviderConfig",
    "PromptDocument",
    "CompletionResult",
    "LlmAdapter",
    "parse_structured",
    "relevance_coefficients",
    "build_relevance_prompt",
    "HttpProvider",
    "MockProvider",
    "ScriptedAdapter",
    "load_fixture_dir",
    "token_overlap",
    "REASONING_LEVELS",
    "EXPECTED_SCHEMAS",
]
