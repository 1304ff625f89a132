"""Turn texts into fixed-length vectors through a pluggable HTTP endpoint.

Ships a hash-seeded mock producing deterministic unit vectors, plus a flat
binary vector store (header + row-major float64 matrix + doc_id sidecar) with
constant-time row access and bit-exact round-trips.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import httpx
import numpy as np

SOURCE_STAGES = ("original_text", "redacted_summary")


class EmbeddingError(RuntimeError):
    pass


@dataclass(frozen=True)
class EmbeddingConfig:
    endpoint_url: str
    model_name: str = "local-embed"
    dim: int = 1536
    normalize: bool = True
    batch_size: int = 16
    timeout: float = 120.0

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise EmbeddingError("dim must be >= 1")
        if self.batch_size < 1:
            raise EmbeddingError("batch_size must be >= 1")


@dataclass(frozen=True)
class EmbeddingVector:
    doc_id: str
    values: np.ndarray
    source_stage: str

    def __post_init__(self) -> None:
        if self.source_stage not in SOURCE_STAGES:
            raise EmbeddingError(f"unknown source_stage {self.source_stage!r}")


def mock_embed(text: str, dim: int, seed: int = 0) -> np.ndarray:
    """Deterministic pseudo-random unit vector for (text, seed)."""
    if dim < 1:
        raise EmbeddingError("dim must be >= 1")
    digest = hashlib.sha256(f"{seed}\x1f{text}".encode("utf-8")).digest()
    rng = np.random.default_rng(int.from_bytes(digest, "big"))
    values = rng.standard_normal(dim)
    norm = float(np.linalg.norm(values))
    if norm == 0.0:  # unreachable in practice; keeps the contract total
        values[0] = 1.0
        norm = 1.0
    return values / norm


class MockEmbeddingBackend:
    def __init__(self, seed: int, dim: int):
        self.seed = seed
        self.dim = dim

    def embed(self, texts: list[str]) -> list[list[float]]:
        return [mock_embed(text, self.dim, self.seed).tolist() for text in texts]


class HttpEmbeddingBackend:
    def __init__(self, config: EmbeddingConfig):
        self.config = config

    def embed(self, texts: list[str]) -> list[list[float]]:
        body = {"model": self.config.model_name, "input": texts}
        try:
            response = httpx.post(self.config.endpoint_url, json=body, timeout=self.config.timeout)
            response.raise_for_status()
            payload = response.json()
        except (httpx.HTTPError, json.JSONDecodeError) as exc:
            raise EmbeddingError(f"embedding backend call failed: {exc}") from exc
        embeddings = payload.get("embeddings")
        if not isinstance(embeddings, list) or len(embeddings) != len(texts):
            raise EmbeddingError("backend returned wrong number of embeddings")
        return embeddings


def make_embedding_backend(config: EmbeddingConfig):
    if config.endpoint_url.startswith("mock://"):
        tail = config.endpoint_url.split("mock://", 1)[1]
        return MockEmbeddingBackend(int(tail) if tail.strip() else 0, config.dim)
    return HttpEmbeddingBackend(config)


def embed_texts(
    texts: list[str],
    config: EmbeddingConfig,
    doc_ids: list[str] | None = None,
    source_stage: str = "redacted_summary",
    backend=None,
) -> list[EmbeddingVector]:
    """Embed texts in order, batched, with dimension and finiteness checks."""
    for text in texts:
        if not text:
            raise EmbeddingError("texts must be non-empty strings")
    if doc_ids is None:
        doc_ids = [str(i) for i in range(len(texts))]
    if len(doc_ids) != len(texts):
        raise EmbeddingError("doc_ids must align with texts")
    backend = backend or make_embedding_backend(config)
    vectors: list[EmbeddingVector] = []
    for offset in range(0, len(texts), config.batch_size):
        batch = texts[offset : offset + config.batch_size]
        rows = backend.embed(batch)
        for i, row in enumerate(rows):
            values = np.asarray(row, dtype=np.float64)
            if values.shape != (config.dim,):
                raise EmbeddingError(
                    f"dimension mismatch: backend returned {values.shape[0] if values.ndim == 1 else values.shape}, expected {config.dim}"
                )
            if not np.all(np.isfinite(values)):
                raise EmbeddingError("backend returned non-finite values")
            if config.normalize:
                norm = float(np.linalg.norm(values))
                if norm == 0.0:
                    raise EmbeddingError("cannot normalize a zero vector")
                values = values / norm
            vectors.append(EmbeddingVector(doc_ids[offset + i], values, source_stage))
    return vectors


# ---------------------------------------------------------------------------
# Vector store
# ---------------------------------------------------------------------------

_MAGIC = b"TVEC"
_HEADER = struct.Struct("<4sIIQ8s")  # magic, version, dim, count, dtype name


class VectorStore:
    """Append-only matrix file with a doc_id sidecar (`<path>.ids`).

    Rows are float64; appending the same doc_id again supersedes the earlier
    row in the loaded view while the file keeps both (last wins).
    """

    def __init__(self, path: str | Path, dim: int):
        self.path = Path(path)
        self.ids_path = Path(str(path) + ".ids")
        self.dim = dim
        self._rows: dict[str, int] = {}
        self._count = 0
        if self.path.exists():
            self._load_index()
        else:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("wb") as handle:
                handle.write(_HEADER.pack(_MAGIC, 1, dim, 0, b"float64\x00"))
            self.ids_path.write_text("", encoding="utf-8")

    def _load_index(self) -> None:
        with self.path.open("rb") as handle:
            magic, version, dim, count, _ = _HEADER.unpack(handle.read(_HEADER.size))
        if magic != _MAGIC or version != 1:
            raise EmbeddingError(f"not a vector store: {self.path}")
        if dim != self.dim:
            raise EmbeddingError(f"store dimension {dim} does not match configured {self.dim}")
        ids = self.ids_path.read_text(encoding="utf-8").splitlines() if self.ids_path.exists() else []
        usable = min(count, len(ids))
        self._count = usable
        self._rows = {doc_id: row for row, doc_id in enumerate(ids[:usable])}

    def __len__(self) -> int:
        return len(self._rows)

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._rows

    def doc_ids(self) -> list[str]:
        return sorted(self._rows)

    def append(self, doc_id: str, values: np.ndarray) -> None:
        values = np.ascontiguousarray(values, dtype=np.float64)
        if values.shape != (self.dim,):
            raise EmbeddingError(f"expected shape ({self.dim},), got {values.shape}")
        row_bytes = values.tobytes()
        with self.path.open("r+b") as handle:
            handle.seek(0, 2)
            handle.write(row_bytes)
            handle.flush()
            self._count += 1
            handle.seek(0)
            handle.write(_HEADER.pack(_MAGIC, 1, self.dim, self._count, b"float64\x00"))
            handle.flush()
        with self.ids_path.open("a", encoding="utf-8") as handle:
            handle.write(doc_id + "\n")
            handle.flush()
        self._rows[doc_id] = self._count - 1

    def get(self, doc_id: str) -> np.ndarray:
        if doc_id not in self._rows:
            raise KeyError(doc_id)
        row = self._rows[doc_id]
        offset = _HEADER.size + row * self.dim * 8
        with self.path.open("rb") as handle:
            handle.seek(offset)
            data = handle.read(self.dim * 8)
        return np.frombuffer(data, dtype=np.float64).copy()

    def load_all(self) -> tuple[list[str], np.ndarray]:
        """Latest row per doc_id, sorted by doc_id."""
        ids = self.doc_ids()
        matrix = np.empty((len(ids), self.dim), dtype=np.float64)
        with self.path.open("rb") as handle:
            raw = handle.read()
        for i, doc_id in enumerate(ids):
            row = self._rows[doc_id]
            offset = _HEADER.size + row * self.dim * 8
            matrix[i] = np.frombuffer(raw[offset : offset + self.dim * 8], dtype=np.float64)
        return ids, matrix
