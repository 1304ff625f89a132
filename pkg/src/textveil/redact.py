"""Rule- and detector-based removal of identifying information from summaries.

Person names come from a pluggable detector (external service or a builtin
capitalization heuristic), pass through an allowlist of deliberately retained
terms, and are replaced together with personal identity numbers, street
addresses, and full birth dates. Matches are resolved on the input text in a
single coordinate system, so the report's spans index into the original
summary and text outside the spans survives byte for byte.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import httpx

DETECTOR_KINDS = ("external_ner", "builtin_heuristic")


class RedactionError(ValueError):
    """Invalid span, rule file, or detector input."""


class DetectorError(RuntimeError):
    """The external entity detector could not be reached or misbehaved."""


@dataclass(frozen=True)
class EntitySpan:
    start: int
    end: int
    surface: str
    detector: str
    kind: str = "person"

    def __post_init__(self) -> None:
        if not (0 <= self.start < self.end):
            raise RedactionError(f"invalid span ({self.start}, {self.end})")


def _check_spans(text: str, spans: list[EntitySpan]) -> None:
    for span in spans:
        if span.end > len(text):
            raise RedactionError(f"span ({span.start}, {span.end}) out of bounds for text")
        if text[span.start : span.end] != span.surface:
            raise RedactionError(f"span surface mismatch at ({span.start}, {span.end})")


@dataclass(frozen=True)
class Allowlist:
    terms: frozenset[str]

    @classmethod
    def from_terms(cls, terms) -> "Allowlist":
        cleaned = frozenset(t.strip().casefold() for t in terms if t.strip())
        return cls(cleaned)

    def __contains__(self, surface: str) -> bool:
        return surface.strip().casefold() in self.terms


def load_allowlist(path: str | Path) -> Allowlist:
    lines = Path(path).read_text("utf-8").splitlines()
    return Allowlist.from_terms(lines)


def default_allowlist() -> Allowlist:
    text = resources.files("textveil.data").joinpath("allowlist.txt").read_text("utf-8")
    return Allowlist.from_terms(text.splitlines())


# ---------------------------------------------------------------------------
# Rule set
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RedactionRuleSet:
    address_suffixes: tuple[str, ...]
    id_patterns: tuple[str, ...]
    date_formats: tuple[str, ...]
    month_names: tuple[str, ...]
    placeholders: dict

    def __post_init__(self) -> None:
        for kind in ("name", "personal_id", "address"):
            token = self.placeholders.get(kind, "")
            if not token:
                raise RedactionError(f"missing placeholder for {kind}")
            if any(ch.isdigit() for ch in token):
                raise RedactionError(f"placeholder {token!r} must not contain digits")

    def fingerprint(self) -> str:
        return json.dumps(
            {
                "address_suffixes": self.address_suffixes,
                "id_patterns": self.id_patterns,
                "date_formats": self.date_formats,
                "placeholders": self.placeholders,
            },
            sort_keys=True,
        )


def _rules_from_dict(raw: dict) -> RedactionRuleSet:
    try:
        return RedactionRuleSet(
            address_suffixes=tuple(raw["address_suffixes"]),
            id_patterns=tuple(raw["id_patterns"]),
            date_formats=tuple(raw["date_formats"]),
            month_names=tuple(raw["month_names"]),
            placeholders=dict(raw["placeholders"]),
        )
    except KeyError as exc:
        raise RedactionError(f"rule file missing key {exc.args[0]!r}") from exc


def load_rules(path: str | Path) -> RedactionRuleSet:
    return _rules_from_dict(json.loads(Path(path).read_text("utf-8")))


def default_rules() -> RedactionRuleSet:
    text = resources.files("textveil.data").joinpath("redaction_rules.json").read_text("utf-8")
    return _rules_from_dict(json.loads(text))


@dataclass(frozen=True)
class Replacement:
    kind: str
    surface: str
    start: int
    end: int
    rule: str
    replacement: str


@dataclass(frozen=True)
class RedactedSummary:
    doc_id: str
    text: str


@dataclass(frozen=True)
class RedactionReport:
    doc_id: str
    replacements: tuple[Replacement, ...]
    entity_candidates_for_review: tuple[tuple[str, int], ...]


# ---------------------------------------------------------------------------
# Person-entity detectors
# ---------------------------------------------------------------------------

_CAP_TOKEN = r"[A-ZÅÄÖÉ][a-zåäöéü]+(?:-[A-ZÅÄÖÉ]?[a-zåäöéü]+)*"
_RUN_RE = re.compile(rf"{_CAP_TOKEN}(?: {_CAP_TOKEN})*")

# Common sentence openers that start a capitalized run without being part of
# a name; trimmed from the front of a run before candidacy is decided.
_OPENERS = frozenset(
    "the a an he she it they we i you at in on and but or his her their this that "
    "then when now while after later during".split()
)


class BuiltinDetector:
    """Capitalization heuristic: runs of capitalized tokens are person
    candidates when the run has two or more tokens or hits the gazetteer;
    a gazetteer hit claims the whole run."""

    name = "builtin_heuristic"

    def __init__(self, gazetteer=()):
        self.gazetteer = frozenset(t.strip().casefold() for t in gazetteer if t.strip())

    def person_spans(self, text: str) -> list[EntitySpan]:
        spans = []
        for match in _RUN_RE.finditer(text):
            start, run = match.start(), match.group()
            tokens = run.split(" ")
            first = tokens[0]
            sentence_initial = start == 0 or text[:start].rstrip().endswith((".", "!", "?", ":", "\n"))
            if sentence_initial and first.casefold() in _OPENERS and len(tokens) > 1:
                start += len(first) + 1
                tokens = tokens[1:]
            if len(tokens) == 0:
                continue
            in_gazetteer = any(t.casefold() in self.gazetteer for t in tokens)
            if len(tokens) >= 2 or in_gazetteer:
                surface = " ".join(tokens)
                spans.append(EntitySpan(start, start + len(surface), surface, self.name))
        return spans


class ExternalNerDetector:
    """Client for an entity-recognition service; only PERSON labels are used."""

    name = "external_ner"

    def __init__(self, endpoint_url: str, timeout: float = 60.0):
        self.endpoint_url = endpoint_url
        self.timeout = timeout

    def person_spans(self, text: str) -> list[EntitySpan]:
        try:
            response = httpx.post(self.endpoint_url, json={"text": text}, timeout=self.timeout)
            response.raise_for_status()
            payload = response.json()
        except (httpx.HTTPError, json.JSONDecodeError) as exc:
            raise DetectorError(f"entity detector call failed: {exc}") from exc
        spans = []
        for ent in payload.get("entities", []):
            if str(ent.get("label", "")).upper() != "PERSON":
                continue
            start, end = int(ent["start"]), int(ent["end"])
            if not (0 <= start < end <= len(text)):
                raise DetectorError(f"detector returned invalid span ({start}, {end})")
            spans.append(EntitySpan(start, end, text[start:end], self.name))
        return spans


def default_gazetteer() -> list[str]:
    text = resources.files("textveil.data").joinpath("gazetteer.txt").read_text("utf-8")
    return [line.strip() for line in text.splitlines() if line.strip()]


def make_detector(ner_endpoint: str | None = None, gazetteer=None):
    if ner_endpoint and ner_endpoint != "builtin":
        return ExternalNerDetector(ner_endpoint)
    terms = default_gazetteer() if gazetteer is None else gazetteer
    return BuiltinDetector(terms)


def detect_person_spans(text: str, backend) -> list[EntitySpan]:
    """Run the configured detector; empty text short-circuits to no spans."""
    if not text:
        return []
    spans = backend.person_spans(text)
    _check_spans(text, spans)
    return sorted(spans, key=lambda s: (s.start, s.end))


def filter_allowlist(spans: list[EntitySpan], allow: Allowlist) -> list[EntitySpan]:
    return [span for span in spans if span.surface not in allow]


# ---------------------------------------------------------------------------
# Rule passes
# ---------------------------------------------------------------------------

def _merge_overlapping(spans: list[EntitySpan]) -> list[tuple[int, int]]:
    merged: list[list[int]] = []
    for span in sorted(spans, key=lambda s: (s.start, s.end)):
        if merged and span.start <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], span.end)
        else:
            merged.append([span.start, span.end])
    return [(a, b) for a, b in merged]


def _splice(text: str, pieces: list[tuple[int, int, str]]) -> str:
    """Replace non-overlapping (start, end, replacement) pieces, in order."""
    out, cursor = [], 0
    for start, end, repl in sorted(pieces):
        if start < cursor:
            raise RedactionError("overlapping replacement spans")
        out.append(text[cursor:start])
        out.append(repl)
        cursor = end
    out.append(text[cursor:])
    return "".join(out)


def redact_names(text: str, spans: list[EntitySpan], placeholder: str = "[NAME]") -> str:
    _check_spans(text, spans)
    pieces = [(a, b, placeholder) for a, b in _merge_overlapping(spans)]
    return _splice(text, pieces)


def _id_matches(text: str, rules: RedactionRuleSet) -> list[Replacement]:
    placeholder = rules.placeholders["personal_id"]
    found: dict[tuple[int, int], Replacement] = {}
    claimed: list[tuple[int, int]] = []
    for pattern in rules.id_patterns:
        for match in re.finditer(pattern, text):
            span = (match.start(), match.end())
            if any(a < span[1] and span[0] < b for a, b in claimed):
                continue
            claimed.append(span)
            found[span] = Replacement(
                "personal_id", match.group(), span[0], span[1], "personal_id_pattern", placeholder
            )
    return [found[k] for k in sorted(found)]


_HOUSE_NUMBER = r"\d+ ?[A-Za-z]?(?![A-Za-z0-9])"
_AT_PREPOSITION = r"(?<=[Aa]t |[Oo]n |[Pp]å )"


def _address_matches(text: str, rules: RedactionRuleSet) -> list[Replacement]:
    placeholder = rules.placeholders["address"]
    suffix_alt = "|".join(re.escape(s) for s in rules.address_suffixes)
    street = rf"[A-ZÅÄÖ][a-zåäöé]*(?:{suffix_alt})(?![a-zåäöéA-ZÅÄÖ])"
    out: list[Replacement] = []
    claimed: list[tuple[int, int]] = []
    for pattern in (rf"{street}\s+{_HOUSE_NUMBER}", rf"{_AT_PREPOSITION}{street}"):
        for match in re.finditer(pattern, text):
            span = (match.start(), match.end())
            if any(a < span[1] and span[0] < b for a, b in claimed):
                continue
            claimed.append(span)
            out.append(
                Replacement("address", match.group(), span[0], span[1], "address_pattern", placeholder)
            )
    return sorted(out, key=lambda r: r.start)


def _date_matches(text: str, rules: RedactionRuleSet) -> list[Replacement]:
    month_alt = "|".join(rules.month_names)
    day = r"(?:0?[1-9]|[12]\d|3[01])"
    shapes = {
        "iso": (
            rf"(?<!\d)(\d{{4}})-(0[1-9]|1[0-2])-{day}(?!\d)",
            lambda m: f"{m.group(1)}-{m.group(2)}",
        ),
        "day_month_year": (
            rf"\b{day}(?:st|nd|rd|th)? ({month_alt}),? (\d{{4}})\b",
            lambda m: f"{m.group(1)} {m.group(2)}",
        ),
        "month_day_year": (
            rf"\b({month_alt}) {day}(?:st|nd|rd|th)?, (\d{{4}})\b",
            lambda m: f"{m.group(1)} {m.group(2)}",
        ),
    }
    out: list[Replacement] = []
    claimed: list[tuple[int, int]] = []
    for name in rules.date_formats:
        if name not in shapes:
            raise RedactionError(f"unknown date format {name!r}")
        pattern, rewrite = shapes[name]
        for match in re.finditer(pattern, text, re.IGNORECASE):
            span = (match.start(), match.end())
            if any(a < span[1] and span[0] < b for a, b in claimed):
                continue
            claimed.append(span)
            out.append(
                Replacement(
                    "birth_date", match.group(), span[0], span[1], "birth_date_truncation", rewrite(match)
                )
            )
    return sorted(out, key=lambda r: r.start)


def _apply(text: str, matches: list[Replacement]) -> tuple[str, list[Replacement]]:
    return _splice(text, [(m.start, m.end, m.replacement) for m in matches]), matches


def redact_personal_ids(text: str, rules: RedactionRuleSet) -> tuple[str, list[Replacement]]:
    return _apply(text, _id_matches(text, rules))


def redact_addresses(text: str, rules: RedactionRuleSet) -> tuple[str, list[Replacement]]:
    return _apply(text, _address_matches(text, rules))


def truncate_birth_dates(text: str, rules: RedactionRuleSet) -> tuple[str, list[Replacement]]:
    return _apply(text, _date_matches(text, rules))


# ---------------------------------------------------------------------------
# Full document pass
# ---------------------------------------------------------------------------

def redact_document(
    summary, detector, allow: Allowlist, rules: RedactionRuleSet
) -> tuple[RedactedSummary, RedactionReport]:
    """Apply detector and rule passes to one summary.

    Pass priority follows application order: person spans claim their text
    first, then identity numbers, addresses, and birth dates; later passes
    never rewrite inside an earlier claim. All spans refer to the input text.
    """
    doc_id = getattr(summary, "doc_id", "")
    text = summary.summary_text if hasattr(summary, "summary_text") else str(summary)
    if not text:
        raise RedactionError("summary text must be non-empty")

    detected = detect_person_spans(text, detector)
    kept = filter_allowlist(detected, allow)
    allowlisted = [s for s in detected if s not in kept]

    name_placeholder = rules.placeholders["name"]
    detector_name = getattr(detector, "name", "external_ner")
    replacements: list[Replacement] = [
        Replacement("name", text[a:b], a, b, detector_name, name_placeholder)
        for a, b in _merge_overlapping(kept)
    ]
    claimed = [(r.start, r.end) for r in replacements]

    for stage_matches in (_id_matches(text, rules), _address_matches(text, rules), _date_matches(text, rules)):
        for match in stage_matches:
            if any(a < match.end and match.start < b for a, b in claimed):
                continue
            claimed.append((match.start, match.end))
            replacements.append(match)

    replacements.sort(key=lambda r: r.start)
    redacted = _splice(text, [(r.start, r.end, r.replacement) for r in replacements])

    candidates: dict[str, int] = {}
    for span in allowlisted:
        candidates[span.surface] = candidates.get(span.surface, 0) + 1
    for span in kept:
        if " " not in span.surface:  # single-token detections are lower confidence
            candidates[span.surface] = candidates.get(span.surface, 0) + 1
    report = RedactionReport(
        doc_id=doc_id,
        replacements=tuple(replacements),
        entity_candidates_for_review=tuple(sorted(candidates.items())),
    )
    return RedactedSummary(doc_id=doc_id, text=redacted), report
