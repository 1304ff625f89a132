"""Chat-completion client for the summarize/anonymize/translate stage.

Talks to a local inference server over a minimal chat wire format, validates
that responses carry the expected section headers, and ships a deterministic
mock backend so the whole pipeline runs offline.
"""

from __future__ import annotations

import hashlib
import json
import logging
import random
import re
import time
from dataclasses import dataclass, field
from importlib import resources
from math import ceil
from pathlib import Path

import httpx

from .corpus import Document

log = logging.getLogger(__name__)

SLOT = "[DOC]"

DEFAULT_SECTIONS = (
    "Administrative details",
    "Personal details",
    "Substance use",
    "LVM history",
    "Physical health issues",
    "Mental health issues",
    "Social conditions",
    "Arguments by the social board for why LVM-care is needed",
    "Arguments from the person on trial",
)

_MARKED = re.compile(r"⟦(.*?)⟧", re.DOTALL)


class GatewayError(RuntimeError):
    """Unrecoverable gateway failure (bad template, exhausted retries)."""


class TransportError(GatewayError):
    """A single backend call failed; callers may retry."""


@dataclass(frozen=True)
class PromptTemplate:
    preamble: str
    required_sections: tuple[str, ...] = DEFAULT_SECTIONS

    def __post_init__(self) -> None:
        slots = self.preamble.count(SLOT)
        if slots != 1:
            raise GatewayError(f"template must contain exactly one {SLOT} slot, found {slots}")
        if not self.required_sections:
            raise GatewayError("required_sections must be non-empty")


def default_template() -> PromptTemplate:
    text = resources.files("textveil.data").joinpath("summary_prompt.txt").read_text("utf-8")
    return PromptTemplate(preamble=text, required_sections=DEFAULT_SECTIONS)


def load_template(path: str | Path, sections: tuple[str, ...] = DEFAULT_SECTIONS) -> PromptTemplate:
    return PromptTemplate(Path(path).read_text("utf-8"), sections)


@dataclass(frozen=True)
class ChatBackendConfig:
    endpoint_url: str
    model_name: str = "local-chat"
    temperature: float = 0.0
    timeout: float = 120.0
    max_retries: int = 2
    concurrency_limit: int = 1
    response_field_path: str = "message.content"

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise GatewayError("temperature must be >= 0")
        if self.max_retries < 0:
            raise GatewayError("max_retries must be >= 0")
        if self.concurrency_limit < 1:
            raise GatewayError("concurrency_limit must be >= 1")


@dataclass(frozen=True)
class SummaryResult:
    doc_id: str
    summary_text: str
    sections_found: tuple[str, ...]
    attempts: int
    flagged: bool


def render_prompt(template: PromptTemplate, document_text: str) -> str:
    """Substitute the document into the template slot, nothing else."""
    if not document_text:
        raise GatewayError("document text must be non-empty")
    return template.preamble.replace(SLOT, document_text)


def validate_structure(
    summary_text: str, required_sections: tuple[str, ...] | list[str]
) -> tuple[tuple[str, ...], bool]:
    """Find which required headers open a line of the summary.

    A section counts as found when some line, after stripping list/markdown
    prefixes, starts with the header text (case-insensitive). Passing means at
    least two thirds of the required sections were found, rounded up.
    """
    prefixes = []
    for line in summary_text.splitlines():
        cleaned = line.strip().lstrip("#*-").strip().lower()
        if cleaned:
            prefixes.append(cleaned)
    found = tuple(
        section
        for section in required_sections
        if any(line.startswith(section.lower()) for line in prefixes)
    )
    threshold = ceil(2 * len(required_sections) / 3)
    return found, len(found) >= threshold


# ---------------------------------------------------------------------------
# Backends
# ---------------------------------------------------------------------------

_MOCK_VOCAB = (
    "the record notes ongoing contact with the care team and weekly visits to "
    "the unit during the review period with limited support at home and a plan "
    "for daily follow up on sleep meals and housing while staff report stable "
    "intake and regular attendance at the open ward"
).split()


class MockChatBackend:
    """Deterministic stand-in for a chat endpoint.

    Output is a pure function of (prompt, seed): a nine-section summary whose
    filler text is drawn from a hash-seeded generator. Any prompt substring
    wrapped in ⟦…⟧ is copied into the summary verbatim with the markers
    stripped, which models identifiers slipping through the model untouched.
    """

    def __init__(self, seed: int = 0):
        self.seed = seed

    def complete(self, prompt: str) -> str:
        digest = hashlib.sha256(f"{self.seed}\x1f{prompt}".encode("utf-8")).digest()
        rng = random.Random(int.from_bytes(digest[:8], "big"))
        carried = _MARKED.findall(prompt)

        def sentence() -> str:
            words = [rng.choice(_MOCK_VOCAB) for _ in range(rng.randint(5, 9))]
            return " ".join(words).capitalize() + "."

        lines = []
        for section in DEFAULT_SECTIONS:
            body = [sentence() for _ in range(rng.randint(1, 2))]
            if section == "Personal details":
                body = [f"The record retains {item} under review." for item in carried] + body
            lines.append(f"{section}: " + " ".join(body))
        return "\n".join(lines)


class HttpChatBackend:
    """POSTs a single-message chat request and extracts the reply text."""

    def __init__(self, config: ChatBackendConfig):
        self.config = config

    def complete(self, prompt: str) -> str:
        body = {
            "model": self.config.model_name,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.config.temperature,
            "stream": False,
        }
        try:
            response = httpx.post(self.config.endpoint_url, json=body, timeout=self.config.timeout)
            response.raise_for_status()
            payload = response.json()
        except (httpx.HTTPError, json.JSONDecodeError) as exc:
            raise TransportError(f"chat backend call failed: {exc}") from exc
        return extract_field(payload, self.config.response_field_path)


def extract_field(payload: object, path: str) -> str:
    """Walk a dotted path through nested dicts/lists; digits index lists."""
    node = payload
    for part in path.split("."):
        try:
            node = node[int(part)] if part.isdigit() else node[part]
        except (KeyError, IndexError, TypeError) as exc:
            raise TransportError(f"response missing field path {path!r} at {part!r}") from exc
    if not isinstance(node, str):
        raise TransportError(f"field path {path!r} did not resolve to text")
    return node


def mock_seed_from_url(url: str) -> int:
    tail = url.split("mock://", 1)[1]
    return int(tail) if tail.strip() else 0


def make_chat_backend(config: ChatBackendConfig):
    if config.endpoint_url.startswith("mock://"):
        return MockChatBackend(mock_seed_from_url(config.endpoint_url))
    return HttpChatBackend(config)


def summarize(
    document: Document,
    template: PromptTemplate,
    config: ChatBackendConfig,
    backend=None,
) -> SummaryResult:
    """Run one document through the chat backend with retry and validation.

    Transport failures and malformed structure both trigger a retry, up to
    max_retries extra attempts. A response that still misses the section
    threshold is returned flagged rather than raised; only an endpoint that
    never produces text becomes an error.
    """
    backend = backend or make_chat_backend(config)
    prompt = render_prompt(template, document.raw_text)
    attempts = 0
    last_text: str | None = None
    last_found: tuple[str, ...] = ()
    last_error: Exception | None = None
    started = time.monotonic()
    for _ in range(config.max_retries + 1):
        attempts += 1
        try:
            text = backend.complete(prompt)
        except TransportError as exc:
            last_error = exc
            continue
        found, ok = validate_structure(text, template.required_sections)
        if ok:
            log.debug("summarized %s in %.2fs", document.doc_id, time.monotonic() - started)
            return SummaryResult(document.doc_id, text, found, attempts, flagged=False)
        last_text, last_found = text, found
    if last_text is not None:
        log.warning("summary for %s failed structure validation; flagged", document.doc_id)
        return SummaryResult(document.doc_id, last_text, last_found, attempts, flagged=True)
    raise GatewayError(
        f"chat backend unreachable for {document.doc_id} after {attempts} attempts: {last_error}"
    )
