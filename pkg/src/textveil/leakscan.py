"""Audit redacted summaries for ground-truth identifiers from metadata.

For every document the scanner searches its summary for the subject's full
name (exact, per-token, and fuzzy over token windows) and personal identity
number (exact and digit-normalized, catching reformatted variants). A clean
scan is the releasable-corpus criterion; any hit carries enough context for
human triage.
"""

from __future__ import annotations

import json
import math
import random
import re
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import SubjectMetadata

HIT_KINDS = ("name_exact", "name_fuzzy", "id_exact", "id_normalized")


class LeakScanError(ValueError):
    pass


@dataclass(frozen=True)
class LeakHit:
    doc_id: str
    kind: str
    matched_surface: str
    start: int
    end: int
    similarity: float


@dataclass(frozen=True)
class ScanConfig:
    fuzzy_threshold: float = 0.85
    name_token_min_len: int = 3
    sample_fraction_for_manual_review: float = 0.05
    sample_seed: int = 0

    def __post_init__(self) -> None:
        if not (0 < self.fuzzy_threshold <= 1):
            raise LeakScanError("fuzzy_threshold must be in (0, 1]")


@dataclass(frozen=True)
class ScanReport:
    scanned: int
    totals: dict
    hits: tuple[LeakHit, ...]
    offending_doc_ids: tuple[str, ...]

    @property
    def clean(self) -> bool:
        return not self.hits


def levenshtein(a: str, b: str, limit: int | None = None) -> int:
    """Edit distance; with a limit, any return value above it just means
    "distance exceeds limit" (the band may be abandoned early)."""
    if limit is not None and abs(len(a) - len(b)) > limit:
        return limit + 1
    if not a:
        return len(b)
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i]
        for j, cb in enumerate(b, start=1):
            current.append(min(previous[j] + 1, current[j - 1] + 1, previous[j - 1] + (ca != cb)))
        if limit is not None and min(current) > limit:
            return limit + 1
        previous = current
    return previous[-1]


def similarity(a: str, b: str) -> float:
    if not a and not b:
        return 1.0
    return 1.0 - levenshtein(a, b) / max(len(a), len(b))


_TOKEN_RE = re.compile(r"\w+", re.UNICODE)


def _tokens(text: str) -> list[tuple[int, int, str]]:
    return [(m.start(), m.end(), m.group()) for m in _TOKEN_RE.finditer(text)]


def _name_exact_hits(text: str, doc_id: str, full_name: str, min_len: int) -> list[LeakHit]:
    hits = []
    name_tokens = full_name.split()
    pattern = r"(?<!\w)" + r"\s+".join(re.escape(t) for t in name_tokens) + r"(?!\w)"
    for match in re.finditer(pattern, text, re.IGNORECASE):
        hits.append(LeakHit(doc_id, "name_exact", match.group(), match.start(), match.end(), 1.0))
    wanted = {t.casefold() for t in name_tokens if len(t) >= min_len}
    for start, end, token in _tokens(text):
        if token.casefold() in wanted:
            hits.append(LeakHit(doc_id, "name_exact", token, start, end, 1.0))
    return hits


def _name_fuzzy_hits(
    text: str, doc_id: str, full_name: str, config: ScanConfig, taken: set
) -> list[LeakHit]:
    tokens = _tokens(text)
    if not tokens:
        return []
    targets = [" ".join(full_name.split())]
    targets += [t for t in full_name.split() if len(t) >= config.name_token_min_len]
    best: dict[tuple[int, int], tuple[float, str]] = {}
    for target in targets:
        folded = target.casefold()
        n_target = len(target.split())
        sizes = {n for n in (n_target - 1, n_target, n_target + 1) if 1 <= n <= len(tokens)}
        for size in sizes:
            for i in range(len(tokens) - size + 1):
                start, end = tokens[i][0], tokens[i + size - 1][1]
                window = text[start:end]
                # fully lowercase windows are ordinary prose, not names; a
                # verbatim lowercase leak is still caught by the exact pass
                if not any(ch.isupper() for ch in window):
                    continue
                limit = math.floor((1 - config.fuzzy_threshold) * max(len(window), len(folded)))
                distance = levenshtein(window.casefold(), folded, limit)
                if distance > limit:
                    continue
                sim = 1.0 - distance / max(len(window), len(folded))
                if sim >= config.fuzzy_threshold:
                    span = (start, end)
                    if span in taken:
                        continue
                    if span not in best or sim > best[span][0]:
                        best[span] = (sim, window)
    return [
        LeakHit(doc_id, "name_fuzzy", surface, span[0], span[1], sim)
        for span, (sim, surface) in sorted(best.items())
    ]


def _id_hits(text: str, doc_id: str, personal_id: str) -> list[LeakHit]:
    hits = []
    taken = set()
    for match in re.finditer(re.escape(personal_id), text):
        taken.add((match.start(), match.end()))
        hits.append(LeakHit(doc_id, "id_exact", match.group(), match.start(), match.end(), 1.0))
    digits = [(i, ch) for i, ch in enumerate(text) if ch.isdigit()]
    stream = "".join(ch for _, ch in digits)
    target = "".join(ch for ch in personal_id if ch.isdigit())
    pos = stream.find(target)
    while pos != -1:
        start = digits[pos][0]
        end = digits[pos + len(target) - 1][0] + 1
        if (start, end) not in taken:
            hits.append(LeakHit(doc_id, "id_normalized", text[start:end], start, end, 1.0))
        pos = stream.find(target, pos + 1)
    return hits


def scan_document(summary_text: str, metadata: SubjectMetadata, config: ScanConfig) -> list[LeakHit]:
    """All identifier hits for one summary, ordered by position."""
    if not metadata.full_name:
        raise LeakScanError("metadata.full_name must be non-empty")
    doc_id = ""
    hits = _name_exact_hits(summary_text, doc_id, metadata.full_name, config.name_token_min_len)
    taken = {(h.start, h.end) for h in hits}
    hits += _name_fuzzy_hits(summary_text, doc_id, metadata.full_name, config, taken)
    if metadata.personal_id:
        hits += _id_hits(summary_text, doc_id, metadata.personal_id)
    return sorted(hits, key=lambda h: (h.start, h.end, h.kind))


def scan_corpus(
    summaries: dict, metadata_by_id: dict, config: ScanConfig
) -> ScanReport:
    """Scan every summary against its own document's metadata."""
    missing = sorted(set(summaries) - set(metadata_by_id))
    if missing:
        raise LeakScanError(f"missing metadata for doc_ids: {', '.join(missing[:5])}")
    all_hits: list[LeakHit] = []
    for doc_id in sorted(summaries):
        for hit in scan_document(summaries[doc_id], metadata_by_id[doc_id], config):
            all_hits.append(
                LeakHit(doc_id, hit.kind, hit.matched_surface, hit.start, hit.end, hit.similarity)
            )
    totals = {kind: 0 for kind in HIT_KINDS}
    for hit in all_hits:
        totals[hit.kind] += 1
    offending = tuple(sorted({h.doc_id for h in all_hits}))
    return ScanReport(
        scanned=len(summaries), totals=totals, hits=tuple(all_hits), offending_doc_ids=offending
    )


def sample_for_manual_review(doc_ids, config: ScanConfig) -> list[str]:
    """floor(fraction × count) ids, uniform without replacement, seed-stable."""
    ids = sorted(doc_ids)
    n = math.floor(config.sample_fraction_for_manual_review * len(ids))
    rng = random.Random(config.sample_seed)
    return rng.sample(ids, n)


def save_report(report: ScanReport, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        header = {"scanned": report.scanned, "totals": report.totals}
        handle.write(json.dumps(header, ensure_ascii=False) + "\n")
        for hit in report.hits:
            handle.write(json.dumps(hit.__dict__, ensure_ascii=False) + "\n")


def load_report(path: str | Path) -> ScanReport:
    lines = [l for l in Path(path).read_text("utf-8").splitlines() if l.strip()]
    if not lines:
        raise LeakScanError("empty scan report")
    header = json.loads(lines[0])
    hits = tuple(LeakHit(**json.loads(line)) for line in lines[1:])
    return ScanReport(
        scanned=header["scanned"],
        totals=header["totals"],
        hits=hits,
        offending_doc_ids=tuple(sorted({h.doc_id for h in hits})),
    )
