"""Confounder vectors: precomputed embedding files and a hashing fallback.

Binary file layout (little-endian)::

    b"CCEMB1" | u32 dims | u64 count | count x (u16 id_len | id utf-8 | dims x f32)
"""

from __future__ import annotations

import hashlib
import logging
import struct
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable

import numpy as np

from causalcite.errors import ContractError, FormatError
from causalcite.textprep import CleanedText, MediatorRemover, clean_paper

log = logging.getLogger(__name__)

MAGIC = b"CCEMB1"
_HEADER = struct.Struct("<6sIQ")
NORM_TOL = 1e-4


@dataclass(frozen=True)
class EmbeddingVector:
    paper_id: str
    values: np.ndarray

    @property
    def dims(self) -> int:
        return int(self.values.shape[0])


@dataclass
class LoadReport:
    loaded: int = 0
    renormalized: int = 0
    unknown_ids: int = 0
    rejected: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "loaded": self.loaded,
            "renormalized": self.renormalized,
            "unknown_ids": self.unknown_ids,
            "rejected": len(self.rejected),
            "rejections": self.rejected,
        }


def _as_array(v) -> np.ndarray:
    return v.values if isinstance(v, EmbeddingVector) else np.asarray(v)


def cosine_similarity(u, v) -> float:
    """Dot product of two unit vectors, accumulated in float64 and clamped."""
    a, b = _as_array(u), _as_array(v)
    if a.shape != b.shape:
        raise ContractError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    s = float(np.dot(a.astype(np.float64), b.astype(np.float64)))
    return min(1.0, max(-1.0, s))


class EmbeddingStore:
    """Immutable id -> unit vector table backed by one float32 matrix."""

    label = "precomputed"

    def __init__(self, ids: list[str], matrix: np.ndarray):
        self.ids = list(ids)
        self.matrix = np.ascontiguousarray(matrix, dtype=np.float32)
        self._row = {pid: i for i, pid in enumerate(self.ids)}
        self.dims = int(self.matrix.shape[1]) if self.matrix.ndim == 2 else 0

    def __len__(self) -> int:
        return len(self.ids)

    def __contains__(self, paper_id: str) -> bool:
        return paper_id in self._row

    def vector(self, paper_id: str) -> np.ndarray | None:
        row = self._row.get(paper_id)
        return None if row is None else self.matrix[row]

    def get(self, paper_id: str) -> EmbeddingVector | None:
        v = self.vector(paper_id)
        return None if v is None else EmbeddingVector(paper_id, v)


def load_embeddings(path, known_ids=None) -> tuple[EmbeddingStore, LoadReport]:
    """Read an embedding file, renormalizing every vector.

    ``known_ids`` (any container) is only used to warn about ids outside
    the corpus; such vectors are kept.
    """
    report = LoadReport()
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < _HEADER.size:
        raise FormatError("embedding file shorter than header")
    magic, dims, count = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if dims == 0:
        raise FormatError("dims must be positive")
    vec_bytes = 4 * dims
    ids: list[str] = []
    rows: list[np.ndarray] = []
    seen: set[str] = set()
    off = _HEADER.size
    for rec in range(1, count + 1):
        if off + 2 > len(data):
            raise FormatError(f"truncated at record {rec}")
        (id_len,) = struct.unpack_from("<H", data, off)
        off += 2
        if off + id_len + vec_bytes > len(data):
            raise FormatError(f"truncated at record {rec}")
        try:
            pid = data[off:off + id_len].decode("utf-8")
        except UnicodeDecodeError:
            raise FormatError(f"record {rec}: id is not UTF-8") from None
        off += id_len
        vec = np.frombuffer(data, dtype="<f4", count=dims, offset=off).astype(np.float64)
        off += vec_bytes
        if pid in seen:
            report.rejected.append({"record": rec, "id": pid, "reason": "duplicate id"})
            continue
        if not np.all(np.isfinite(vec)):
            report.rejected.append({"record": rec, "id": pid, "reason": "non-finite component"})
            continue
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            report.rejected.append({"record": rec, "id": pid, "reason": "zero norm"})
            continue
        if abs(norm - 1.0) > NORM_TOL:
            report.renormalized += 1
        seen.add(pid)
        ids.append(pid)
        rows.append((vec / norm).astype(np.float32))
        if known_ids is not None and pid not in known_ids:
            report.unknown_ids += 1
    if off != len(data):
        raise FormatError(f"{len(data) - off} trailing bytes after {count} records")
    if report.unknown_ids:
        log.warning("%d embedding ids are not in the corpus", report.unknown_ids)
    matrix = np.vstack(rows) if rows else np.zeros((0, dims), dtype=np.float32)
    report.loaded = len(ids)
    return EmbeddingStore(ids, matrix), report


def write_embeddings(path, items: Iterable[tuple[str, np.ndarray]]) -> int:
    items = list(items)
    if not items:
        raise ContractError("no vectors to write")
    dims = len(items[0][1])
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, dims, len(items)))
        for pid, vec in items:
            vec = np.asarray(vec, dtype="<f4")
            if vec.shape != (dims,):
                raise ContractError(f"vector for {pid!r} has wrong shape {vec.shape}")
            raw = pid.encode("utf-8")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            fh.write(vec.tobytes())
    return len(items)


class FallbackEncoder:
    """Signed feature hashing of a token bag, L2-normalized.

    For tests and demos only; real analyses should supply encoder output
    through an embedding file.
    """

    def __init__(self, dims: int = 256, seed: int = 0):
        if dims < 16:
            raise ContractError("fallback encoder needs dims >= 16")
        self.dims = dims
        self.seed = seed
        self._key = seed.to_bytes(8, "little", signed=False)

    @lru_cache(maxsize=1 << 16)
    def _slot(self, token: str) -> tuple[int, float]:
        h = int.from_bytes(
            hashlib.blake2b(token.encode("utf-8"), digest_size=8, key=self._key).digest(),
            "little",
        )
        return h % self.dims, (1.0 if h >> 63 == 0 else -1.0)

    def encode_tokens(self, tokens: Iterable[str]) -> np.ndarray:
        acc = np.zeros(self.dims, dtype=np.float64)
        for tok in tokens:
            bucket, sign = self._slot(tok)
            acc[bucket] += sign
        norm = float(np.linalg.norm(acc))
        if norm == 0.0:
            # empty text, or contributions cancelled exactly
            acc[:] = 0.0
            acc[0] = 1.0
            return acc.astype(np.float32)
        return (acc / norm).astype(np.float32)

    def encode(self, cleaned: CleanedText) -> EmbeddingVector:
        return EmbeddingVector(cleaned.paper_id, self.encode_tokens(cleaned.tokens))


def fallback_encode(cleaned: CleanedText, dims: int, seed: int = 0) -> EmbeddingVector:
    return FallbackEncoder(dims, seed).encode(cleaned)


class FallbackProvider:
    """Encodes corpus papers on demand with :class:`FallbackEncoder`."""

    label = "fallback-hashing (demo/test only)"

    def __init__(self, corpus, remover: MediatorRemover | None = None,
                 dims: int = 256, seed: int = 0):
        self.corpus = corpus
        self.remover = remover
        self.encoder = FallbackEncoder(dims, seed)
        self.dims = dims
        self.vector = lru_cache(maxsize=1 << 16)(self._vector)

    def _vector(self, paper_id: str) -> np.ndarray | None:
        if paper_id not in self.corpus:
            return None
        rec = self.corpus.get_paper(paper_id)
        cleaned = clean_paper(paper_id, rec.title, rec.abstract, self.remover)
        return self.encoder.encode_tokens(cleaned.tokens)

    def __contains__(self, paper_id: str) -> bool:
        return paper_id in self.corpus
