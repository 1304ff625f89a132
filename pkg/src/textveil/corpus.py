"""Core corpus types, line-delimited persistence, and a synthetic corpus generator.

A corpus is a UTF-8 JSONL file, one document per line. Stage outputs live in
per-stage JSONL stores keyed by doc_id. The synthetic generator produces
court-decision-shaped narratives with planted identifiers at known spans, so
the anonymization audit can be tested end to end without any real data.
"""

from __future__ import annotations

import hashlib
import json
import random
import re
from dataclasses import dataclass, field, replace
from datetime import date, datetime, timezone
from importlib import resources
from pathlib import Path

PERSONAL_ID_RE = re.compile(r"^\d{8}[-+]\d{4}$")

# Delimiters the mock chat backend copies through verbatim (see gateway module).
PASSTHROUGH_OPEN = "⟦"  # ⟦
PASSTHROUGH_CLOSE = "⟧"  # ⟧

PLANTED_KINDS = ("name", "personal_id", "address", "birth_date")
STAGES = ("summarized", "redacted", "embedded")


class CorpusError(ValueError):
    """Malformed corpus file or record."""


@dataclass(frozen=True)
class SubjectMetadata:
    """Ground-truth attributes of the person the document is about."""

    full_name: str
    personal_id: str | None
    court: str
    decision_date: date

    def __post_init__(self) -> None:
        if not self.full_name:
            raise CorpusError("metadata.full_name must be non-empty")
        if self.personal_id is not None and not PERSONAL_ID_RE.match(self.personal_id):
            raise CorpusError(
                f"metadata.personal_id {self.personal_id!r} does not match YYYYMMDD-NNNN"
            )
        if not isinstance(self.decision_date, date):
            raise CorpusError("metadata.decision_date must be a calendar date")

    def to_dict(self) -> dict:
        return {
            "full_name": self.full_name,
            "personal_id": self.personal_id,
            "court": self.court,
            "decision_date": self.decision_date.isoformat(),
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "SubjectMetadata":
        try:
            decision = date.fromisoformat(raw["decision_date"])
        except (KeyError, TypeError, ValueError) as exc:
            raise CorpusError(f"invalid field decision_date: {raw.get('decision_date')!r}") from exc
        return cls(
            full_name=raw.get("full_name", ""),
            personal_id=raw.get("personal_id"),
            court=raw.get("court", ""),
            decision_date=decision,
        )


@dataclass(frozen=True)
class Document:
    doc_id: str
    raw_text: str
    metadata: SubjectMetadata
    source_path: str | None = None

    def __post_init__(self) -> None:
        if not self.doc_id:
            raise CorpusError("doc_id must be non-empty")
        if not self.raw_text:
            raise CorpusError(f"document {self.doc_id!r} has empty raw_text")


@dataclass(frozen=True)
class PlantedIdentifier:
    """One identifier embedded in a synthetic document at a known span."""

    doc_id: str
    kind: str
    surface: str
    start: int
    end: int


@dataclass
class SyntheticCorpusSpec:
    """Configuration for the generator; ``planted`` is filled by generation."""

    n_docs: int
    seed: int
    mark_for_passthrough: bool = True
    planted: list[PlantedIdentifier] = field(default_factory=list)


def _doc_to_dict(doc: Document) -> dict:
    return {
        "doc_id": doc.doc_id,
        "raw_text": doc.raw_text,
        "metadata": doc.metadata.to_dict(),
        "source_path": doc.source_path,
    }


def _doc_from_dict(raw: dict, line_no: int) -> Document:
    for field_name in ("doc_id", "raw_text", "metadata"):
        if field_name not in raw:
            raise CorpusError(f"line {line_no}: missing field {field_name!r}")
    if not isinstance(raw["metadata"], dict):
        raise CorpusError(f"line {line_no}: field 'metadata' must be an object")
    try:
        metadata = SubjectMetadata.from_dict(raw["metadata"])
        return Document(
            doc_id=raw["doc_id"],
            raw_text=raw["raw_text"],
            metadata=metadata,
            source_path=raw.get("source_path"),
        )
    except CorpusError as exc:
        raise CorpusError(f"line {line_no}: {exc}") from exc


def load_corpus(path: str | Path) -> list[Document]:
    """Load a JSONL corpus, returning documents sorted by doc_id.

    Raises CorpusError naming the offending line for malformed records and
    for duplicate doc_ids.
    """
    path = Path(path)
    docs: dict[str, Document] = {}
    with path.open(encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"line {line_no}: invalid JSON ({exc.msg})") from exc
            doc = _doc_from_dict(raw, line_no)
            if doc.doc_id in docs:
                raise CorpusError(f"line {line_no}: duplicate doc_id {doc.doc_id!r}")
            docs[doc.doc_id] = doc
    return [docs[k] for k in sorted(docs)]


def save_corpus(documents: list[Document], path: str | Path) -> None:
    """Write documents as JSONL, sorted by doc_id for stable diffs."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    seen: set[str] = set()
    for doc in documents:
        if doc.doc_id in seen:
            raise CorpusError(f"duplicate doc_id {doc.doc_id!r}")
        seen.add(doc.doc_id)
    with path.open("w", encoding="utf-8") as handle:
        for doc in sorted(documents, key=lambda d: d.doc_id):
            handle.write(json.dumps(_doc_to_dict(doc), ensure_ascii=False) + "\n")


def save_planted(planted: list[PlantedIdentifier], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        for ident in planted:
            handle.write(json.dumps(ident.__dict__, ensure_ascii=False) + "\n")


def load_planted(path: str | Path) -> list[PlantedIdentifier]:
    out = []
    with Path(path).open(encoding="utf-8") as handle:
        for line in handle:
            if line.strip():
                out.append(PlantedIdentifier(**json.loads(line)))
    return out


# ---------------------------------------------------------------------------
# Synthetic corpus generation
# ---------------------------------------------------------------------------

def _load_vocab(name: str) -> list[str]:
    text = resources.files("textveil.data").joinpath(name).read_text(encoding="utf-8")
    return [line.strip() for line in text.splitlines() if line.strip()]


_SUBSTANCE_SENTENCES = [
    "Av utredningen framgår ett långvarigt och eskalerande missbruk av alkohol.",
    "Missbruket av alkohol har enligt socialnämnden pågått i flera år.",
    "Alkohol har använts dagligen under de senaste månaderna enligt journalen.",
]

_AMPHETAMINE_SENTENCES = [
    "Urinprov har vid upprepade tillfällen visat spår av amfetamin.",
    "Det finns dokumenterat blandmissbruk av alkohol och amfetamin.",
]

_HEROIN_SENTENCES = [
    "Journalen beskriver ett pågående intravenöst bruk av heroin.",
    "Vid inskrivningen uppgavs ett flerårigt bruk av heroin.",
]

_SUICIDE_SENTENCES = [
    "Det finns uppgifter om tidigare självmordsförsök och återkommande självmordstankar.",
    "Vårdpersonal har noterat uttalade suicidtankar under den senaste vårdperioden.",
]

_FILLER_SENTENCES = [
    "Socialnämnden har tidigare erbjudit frivilliga insatser utan varaktigt resultat.",
    "Boendesituationen beskrivs som instabil och kontakten med anhöriga är sporadisk.",
    "Läkarintyg enligt 9 § LVM har inhämtats och bifogats ansökan.",
    "Den enskilde har vid förhandlingen motsatt sig ansökan om vård.",
    "Nämnden bedömer att vårdbehovet inte kan tillgodoses på frivillig väg.",
    "Tidigare vårdepisoder har avbrutits i förtid vid upprepade tillfällen.",
    "Somatisk undersökning visar en allmänt nedsatt hälsa till följd av missbruket.",
    "Arbetslöshet och skuldsättning har förvärrat situationen under det senaste året.",
]

_OUTCOMES = [
    "Förvaltningsrätten bifaller socialnämndens ansökan om vård enligt LVM.",
    "Förvaltningsrätten avslår ansökan då förutsättningarna för vård inte är uppfyllda.",
]


class _TextBuilder:
    """Accumulates text while recording planted-identifier spans."""

    def __init__(self, doc_id: str, marked: bool):
        self.doc_id = doc_id
        self.marked = marked
        self.parts: list[str] = []
        self.length = 0
        self.planted: list[PlantedIdentifier] = []

    def add(self, text: str) -> None:
        self.parts.append(text)
        self.length += len(text)

    def plant(self, kind: str, surface: str) -> None:
        if self.marked:
            self.add(PASSTHROUGH_OPEN)
        start = self.length
        self.add(surface)
        self.planted.append(PlantedIdentifier(self.doc_id, kind, surface, start, start + len(surface)))
        if self.marked:
            self.add(PASSTHROUGH_CLOSE)

    def text(self) -> str:
        return "".join(self.parts)


def _make_personal_id(rng: random.Random) -> tuple[str, date]:
    birth = date(rng.randint(1950, 2003), rng.randint(1, 12), rng.randint(1, 28))
    serial = rng.randint(1000, 9999)
    return f"{birth.strftime('%Y%m%d')}-{serial}", birth


def generate_synthetic_corpus(
    spec: SyntheticCorpusSpec,
) -> tuple[list[Document], list[PlantedIdentifier]]:
    """Generate a deterministic corpus of court-decision-like narratives.

    Each document embeds, verbatim and at recorded spans, the subject's full
    name, personal identity number, street address, and birth date. When
    ``mark_for_passthrough`` is set those surfaces are wrapped in ⟦…⟧ so the
    mock chat backend carries them into its summaries, which is what the
    leak-scan tests rely on. Generation is a pure function of the seed.
    """
    first_names = _load_vocab("first_names.txt")
    last_names = _load_vocab("last_names.txt")
    street_stems = _load_vocab("street_stems.txt")
    courts = _load_vocab("courts.txt")
    suffixes = ["gatan", "vägen", "gränd", "stigen", "backen"]

    documents: list[Document] = []
    planted: list[PlantedIdentifier] = []
    for i in range(spec.n_docs):
        rng = random.Random(f"{spec.seed}:{i}")
        doc_id = f"doc-{i:05d}"
        full_name = f"{rng.choice(first_names)} {rng.choice(last_names)}"
        personal_id, birth = _make_personal_id(rng)
        address = f"{rng.choice(street_stems)}{rng.choice(suffixes)} {rng.randint(1, 99)}"
        if rng.random() < 0.3:
            address += rng.choice("ABC")
        court = rng.choice(courts)
        start_ord = date(2012, 7, 1).toordinal()
        end_ord = date(2024, 6, 30).toordinal()
        decision = date.fromordinal(rng.randint(start_ord, end_ord))

        b = _TextBuilder(doc_id, spec.mark_for_passthrough)
        b.add(f"{court.upper()}\n")
        b.add(f"Mål nr {rng.randint(1000, 9999)}-{decision.strftime('%y')}\n")
        b.add(f"Dom meddelad den {decision.isoformat()}.\n\n")
        b.add("SAKEN: Beredande av vård enligt lagen (1988:870) om vård av ")
        b.add("missbrukare i vissa fall (LVM).\n\n")
        b.add("Socialnämnden ansöker om att ")
        b.plant("name", full_name)
        b.add(", ")
        b.plant("personal_id", personal_id)
        b.add(", bosatt på ")
        b.plant("address", address)
        b.add(", ska beredas vård enligt LVM. Den enskilde är född ")
        b.plant("birth_date", birth.isoformat())
        b.add(".\n\n")

        sentences = [rng.choice(_SUBSTANCE_SENTENCES)]
        if rng.random() < 0.21:
            sentences.append(rng.choice(_AMPHETAMINE_SENTENCES))
        if rng.random() < 0.10:
            sentences.append(rng.choice(_HEROIN_SENTENCES))
        if rng.random() < 0.085:
            sentences.append(rng.choice(_SUICIDE_SENTENCES))
        sentences.extend(rng.sample(_FILLER_SENTENCES, k=rng.randint(2, 4)))
        b.add(" ".join(sentences))
        b.add("\n\nFÖRVALTNINGSRÄTTENS AVGÖRANDE: ")
        b.add(rng.choice(_OUTCOMES))
        b.add("\n")

        metadata = SubjectMetadata(
            full_name=full_name,
            personal_id=personal_id,
            court=court,
            decision_date=decision,
        )
        documents.append(Document(doc_id=doc_id, raw_text=b.text(), metadata=metadata))
        planted.extend(b.planted)

    return documents, planted


# ---------------------------------------------------------------------------
# Stage store
# ---------------------------------------------------------------------------

def content_hash(*parts: str) -> str:
    """Deterministic fingerprint of a stage input (text plus config facets)."""
    digest = hashlib.sha256()
    for part in parts:
        digest.update(part.encode("utf-8"))
        digest.update(b"\x1f")
    return digest.hexdigest()


@dataclass(frozen=True)
class StageRecord:
    doc_id: str
    stage: str
    content_hash: str
    payload: dict
    created_at: str


class StageStore:
    """One JSONL file per stage; append-only on disk, last record wins in memory.

    The loaded view upholds "at most one record per (doc_id, stage)"; the file
    may retain superseded lines until compact() rewrites it.
    """

    def __init__(self, path: str | Path, stage: str):
        if stage not in STAGES:
            raise ValueError(f"unknown stage {stage!r}")
        self.path = Path(path)
        self.stage = stage
        self._records: dict[str, StageRecord] = {}
        if self.path.exists():
            with self.path.open(encoding="utf-8") as handle:
                for line in handle:
                    if not line.strip():
                        continue
                    raw = json.loads(line)
                    rec = StageRecord(**raw)
                    self._records[rec.doc_id] = rec

    def __len__(self) -> int:
        return len(self._records)

    def has(self, doc_id: str, digest: str) -> bool:
        rec = self._records.get(doc_id)
        return rec is not None and rec.content_hash == digest

    def get(self, doc_id: str) -> StageRecord | None:
        return self._records.get(doc_id)

    def records(self) -> list[StageRecord]:
        return [self._records[k] for k in sorted(self._records)]

    def put(self, doc_id: str, digest: str, payload: dict) -> StageRecord:
        rec = StageRecord(
            doc_id=doc_id,
            stage=self.stage,
            content_hash=digest,
            payload=payload,
            created_at=datetime.now(timezone.utc).isoformat(),
        )
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with self.path.open("a", encoding="utf-8") as handle:
            handle.write(json.dumps(rec.__dict__, ensure_ascii=False) + "\n")
            handle.flush()
        self._records[doc_id] = rec
        return rec

    def compact(self) -> None:
        with self.path.open("w", encoding="utf-8") as handle:
            for rec in self.records():
                handle.write(json.dumps(rec.__dict__, ensure_ascii=False) + "\n")
