"""Evidence corpus ingestion, BM25 indexing/search, and embedding reranking.

The index is immutable after build and shareable across threads;
searches are read-only. Scoring follows the Lucene/Elasticsearch
defaults: ``idf(t) = ln(1 + (N - df + 0.5)/(df + 0.5))`` and
``tf / (tf + k1 * (1 - b + b * len_d / avg_len))`` with k1=1.2, b=0.75.
"""

from __future__ import annotations

import math
import os
import re
import struct
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Protocol, Sequence

import httpx

from .errors import (
    DataError,
    DimensionMismatch,
    EmptyCorpus,
    ProviderError,
)
from .core import read_jsonl, write_jsonl

# Unicode alphanumerics; underscores split like any other punctuation.
_TOKEN = re.compile(r"[^\W_]+", re.UNICODE)

DEFAULT_K1 = 1.2
DEFAULT_B = 0.75


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


@dataclass(frozen=True)
class EvidenceDoc:
    doc_id: str
    text: str
    title: str | None = None

    def __post_init__(self):
        if not self.doc_id:
            raise DataError("doc_id must be nonempty")
        if not self.text:
            raise DataError(f"doc {self.doc_id!r} has empty text")


@dataclass(frozen=True)
class RankedEvidence:
    """Reranked hits for one claim, sorted by score descending.

    Ties break by ascending doc_id so rankings are reproducible.
    """

    claim_id: str
    hits: tuple[tuple[str, float], ...]

    def __post_init__(self):
        for (a_id, a), (b_id, b) in zip(self.hits, self.hits[1:]):
            if a < b or (a == b and a_id > b_id):
                raise DataError(f"hits for {self.claim_id!r} are not sorted")

    @property
    def doc_ids(self) -> list[str]:
        return [doc_id for doc_id, _ in self.hits]


@dataclass(frozen=True)
class Bm25Index:
    doc_ids: tuple[str, ...]
    doc_lengths: tuple[int, ...]
    avg_doc_len: float
    postings: Mapping[str, tuple[tuple[int, int], ...]]  # term -> ((ordinal, tf), ...)
    k1: float = DEFAULT_K1
    b: float = DEFAULT_B

    @property
    def doc_count(self) -> int:
        return len(self.doc_ids)

    def __post_init__(self):
        if self.doc_count < 1:
            raise EmptyCorpus("index has no documents")
        mean = sum(self.doc_lengths) / self.doc_count
        if not math.isclose(mean, self.avg_doc_len, rel_tol=1e-9, abs_tol=1e-12):
            raise DataError("avg_doc_len does not match doc_lengths")
        for term, plist in self.postings.items():
            for ordinal, tf in plist:
                if not 0 <= ordinal < self.doc_count:
                    raise DataError(f"posting for {term!r} points outside corpus")

    def idf(self, term: str) -> float:
        df = len(self.postings.get(term, ()))
        n = self.doc_count
        return math.log(1.0 + (n - df + 0.5) / (df + 0.5))


def build_index(
    docs: Sequence[EvidenceDoc],
    k1: float = DEFAULT_K1,
    b: float = DEFAULT_B,
) -> Bm25Index:
    """Tokenize `docs` and build the inverted index."""
    if not docs:
        raise EmptyCorpus("no documents to index")
    seen: set[str] = set()
    postings: dict[str, list[tuple[int, int]]] = {}
    lengths: list[int] = []
    for ordinal, doc in enumerate(docs):
        if doc.doc_id in seen:
            raise DataError(f"duplicate doc_id {doc.doc_id!r}")
        seen.add(doc.doc_id)
        tokens = tokenize(doc.text)
        lengths.append(len(tokens))
        for term, tf in Counter(tokens).items():
            postings.setdefault(term, []).append((ordinal, tf))
    if sum(lengths) == 0:
        raise EmptyCorpus("corpus has no indexable tokens")
    return Bm25Index(
        doc_ids=tuple(d.doc_id for d in docs),
        doc_lengths=tuple(lengths),
        avg_doc_len=sum(lengths) / len(lengths),
        postings={t: tuple(p) for t, p in postings.items()},
        k1=k1,
        b=b,
    )


def bm25_search(index: Bm25Index, query: str, top_k: int) -> list[tuple[str, float]]:
    """Top-k documents for `query`; docs sharing no query term are omitted."""
    if top_k < 1:
        raise DataError(f"top_k must be >= 1, got {top_k}")
    scores: dict[int, float] = {}
    for term in tokenize(query):
        plist = index.postings.get(term)
        if not plist:
            continue
        idf = index.idf(term)
        for ordinal, tf in plist:
            norm = index.k1 * (
                1.0 - index.b + index.b * index.doc_lengths[ordinal] / index.avg_doc_len
            )
            scores[ordinal] = scores.get(ordinal, 0.0) + idf * tf / (tf + norm)
    ranked = sorted(
        ((index.doc_ids[o], s) for o, s in scores.items()),
        key=lambda hit: (-hit[1], hit[0]),
    )
    return ranked[:top_k]


# -- embedding providers -------------------------------------------------------


class EmbeddingProvider(Protocol):
    def embed(self, texts: Sequence[str]) -> list[list[float]]:
        """Return one fixed-dimension vector per input text, in order."""
        ...


class HttpEmbeddings:
    """Client for a ``POST {base}/embeddings`` endpoint.

    Wire format: ``{"input": [str, ...], "model": str}`` in,
    ``{"data": [{"embedding": [...]}, ...]}`` out, order-preserving.
    """

    def __init__(self, base_url: str, model: str = "paraphrase-minilm-l6-v2",
                 timeout: float = 30.0, api_key_env: str = "EMBEDDINGS_API_KEY"):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.timeout = timeout
        self.api_key_env = api_key_env

    def embed(self, texts: Sequence[str]) -> list[list[float]]:
        headers = {}
        key = os.environ.get(self.api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        try:
            resp = httpx.post(
                f"{self.base_url}/embeddings",
                json={"input": list(texts), "model": self.model},
                headers=headers,
                timeout=self.timeout,
            )
        except httpx.HTTPError as exc:
            raise ProviderError(f"embedding endpoint unreachable: {exc}") from exc
        if resp.status_code != 200:
            raise ProviderError(
                f"embedding endpoint returned {resp.status_code}: {resp.text[:200]}"
            )
        data = resp.json().get("data")
        if data is None or len(data) != len(texts):
            raise ProviderError("embedding response malformed or wrong length")
        return [row["embedding"] for row in data]


class FixtureEmbeddings:
    """Offline provider: exact text -> vector, loaded from a JSONL file
    of ``{"text": str, "embedding": [float, ...]}`` rows.
    """

    def __init__(self, vectors: Mapping[str, Sequence[float]]):
        self._vectors = {t: list(v) for t, v in vectors.items()}

    @classmethod
    def from_file(cls, path: str | Path) -> "FixtureEmbeddings":
        return cls({row["text"]: row["embedding"] for row in read_jsonl(path)})

    def embed(self, texts: Sequence[str]) -> list[list[float]]:
        out = []
        for text in texts:
            try:
                out.append(list(self._vectors[text]))
            except KeyError:
                raise ProviderError(f"no fixture embedding for text: {text[:60]!r}")
        return out


def cosine(u: Sequence[float], v: Sequence[float]) -> float:
    if len(u) != len(v):
        raise DimensionMismatch(f"vector lengths differ: {len(u)} vs {len(v)}")
    dot = sum(a * b for a, b in zip(u, v))
    nu = math.sqrt(sum(a * a for a in u))
    nv = math.sqrt(sum(b * b for b in v))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return dot / (nu * nv)


def rerank(
    claim_id: str,
    claim: str,
    candidates: Sequence[EvidenceDoc],
    provider: EmbeddingProvider,
    top_k: int = 3,
) -> RankedEvidence:
    """Rerank `candidates` by cosine similarity of claim and doc embeddings."""
    if not candidates:
        raise DataError("rerank needs a nonempty candidate list")
    vectors = provider.embed([claim] + [doc.text for doc in candidates])
    claim_vec, doc_vecs = vectors[0], vectors[1:]
    scored = [
        (doc.doc_id, cosine(claim_vec, vec))
        for doc, vec in zip(candidates, doc_vecs)
    ]
    scored.sort(key=lambda hit: (-hit[1], hit[0]))
    return RankedEvidence(claim_id=claim_id, hits=tuple(scored[:top_k]))


# -- corpus and index files ----------------------------------------------------

_MAGIC = b"BMIX"
_VERSION = 1


def load_corpus(path: str | Path) -> list[EvidenceDoc]:
    return [
        EvidenceDoc(doc_id=str(obj["doc_id"]), text=obj["text"], title=obj.get("title"))
        for obj in read_jsonl(path)
    ]


def save_corpus(path: str | Path, docs: Iterable[EvidenceDoc]) -> None:
    rows = []
    for d in docs:
        row = {"doc_id": d.doc_id, "text": d.text}
        if d.title is not None:
            row["title"] = d.title
        rows.append(row)
    write_jsonl(path, rows)


def ranked_to_dict(ranked: RankedEvidence) -> dict:
    return {
        "claim_id": ranked.claim_id,
        "hits": [{"doc_id": d, "score": s} for d, s in ranked.hits],
    }


def ranked_from_dict(obj: Mapping) -> RankedEvidence:
    return RankedEvidence(
        claim_id=obj["claim_id"],
        hits=tuple((h["doc_id"], h["score"]) for h in obj["hits"]),
    )


def _write_str(fh, s: str) -> None:
    raw = s.encode("utf-8")
    fh.write(struct.pack("<I", len(raw)))
    fh.write(raw)


def _read_exact(fh, n: int) -> bytes:
    raw = fh.read(n)
    if len(raw) != n:
        raise DataError("index file truncated")
    return raw


def _read_str(fh) -> str:
    (n,) = struct.unpack("<I", _read_exact(fh, 4))
    return _read_exact(fh, n).decode("utf-8")


def save_index(index: Bm25Index, path: str | Path) -> None:
    """Persist to the single-file binary format (magic "BMIX", v1, LE)."""
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", _VERSION))
        fh.write(struct.pack("<dd", index.k1, index.b))
        fh.write(struct.pack("<d", index.avg_doc_len))
        fh.write(struct.pack("<I", index.doc_count))
        for doc_id, length in zip(index.doc_ids, index.doc_lengths):
            _write_str(fh, doc_id)
            fh.write(struct.pack("<I", length))
        fh.write(struct.pack("<I", len(index.postings)))
        for term in sorted(index.postings):
            _write_str(fh, term)
            plist = index.postings[term]
            fh.write(struct.pack("<I", len(plist)))
            for ordinal, tf in plist:
                fh.write(struct.pack("<II", ordinal, tf))


def load_index(path: str | Path) -> Bm25Index:
    with open(path, "rb") as fh:
        if _read_exact(fh, 4) != _MAGIC:
            raise DataError(f"{path}: not a BM25 index file")
        (version,) = struct.unpack("<I", _read_exact(fh, 4))
        if version != _VERSION:
            raise DataError(f"{path}: unsupported index version {version}")
        k1, b = struct.unpack("<dd", _read_exact(fh, 16))
        (avg_len,) = struct.unpack("<d", _read_exact(fh, 8))
        (n_docs,) = struct.unpack("<I", _read_exact(fh, 4))
        doc_ids, lengths = [], []
        for _ in range(n_docs):
            doc_ids.append(_read_str(fh))
            (length,) = struct.unpack("<I", _read_exact(fh, 4))
            lengths.append(length)
        (n_terms,) = struct.unpack("<I", _read_exact(fh, 4))
        postings: dict[str, tuple[tuple[int, int], ...]] = {}
        for _ in range(n_terms):
            term = _read_str(fh)
            (n_post,) = struct.unpack("<I", _read_exact(fh, 4))
            plist = []
            for _ in range(n_post):
                ordinal, tf = struct.unpack("<II", _read_exact(fh, 8))
                plist.append((ordinal, tf))
            postings[term] = tuple(plist)
    return Bm25Index(
        doc_ids=tuple(doc_ids),
        doc_lengths=tuple(lengths),
        avg_doc_len=avg_len,
        postings=postings,
        k1=k1,
        b=b,
    )
