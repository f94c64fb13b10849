"""Field-aware inverted index with BM25F ranked retrieval.

The index is built once and then frozen; scoring follows the saturated
field-weighted form

    score(q, d) = sum over unique q terms of idf(t) * tf~(t,d) / (k1 + tf~(t,d))
    tf~(t, d)   = sum over fields of w_f * tf(t,f,d) / (1 + b_f * (len_f/avglen_f - 1))
    idf(t)      = ln(1 + (N - df(t) + 0.5) / (df(t) + 0.5))

The non-negative idf variant keeps retriever scores >= 0 so downstream score
fusion never flips sign from this side.
"""

from __future__ import annotations

import json
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from .analysis import analyze
from .corpus import ProcedureDoc

logger = logging.getLogger(__name__)

FIELDS = ("title", "headers", "norm_body")


class IndexingError(Exception):
    """Index build or lookup failure."""


@dataclass(frozen=True)
class IndexParams:
    """BM25F parameters; one (b, w) pair per field in FIELDS order."""

    k1: float = 1.2
    b: dict[str, float] = field(
        default_factory=lambda: {"title": 0.75, "headers": 0.75, "norm_body": 0.75}
    )
    w: dict[str, float] = field(
        default_factory=lambda: {"title": 2.0, "headers": 1.5, "norm_body": 1.0}
    )

    def __post_init__(self) -> None:
        if self.k1 <= 0:
            raise ValueError(f"k1 must be positive, got {self.k1}")
        for f in FIELDS:
            if f not in self.b or f not in self.w:
                raise ValueError(f"missing parameters for field {f!r}")
            if not 0.0 <= self.b[f] <= 1.0:
                raise ValueError(f"b[{f!r}] must be in [0, 1], got {self.b[f]}")
            if self.w[f] < 0:
                raise ValueError(f"w[{f!r}] must be non-negative, got {self.w[f]}")
        if not any(self.w[f] > 0 for f in FIELDS):
            raise ValueError("at least one field weight must be positive")


@dataclass
class RankedResult:
    """One candidate document in a ranked list.

    ``qa_score`` is the reader's best-span confidence for this doc (0.0 when
    the reader found nothing or has not run yet); ``combined_score`` is
    whatever the active combiner produced.
    """

    doc_id: str
    retriever_score: float
    qa_score: float = 0.0
    combined_score: float = 0.0
    rank: int = 0


class InvertedIndex:
    """Frozen postings over a corpus; build via :func:`build_index`."""

    def __init__(
        self,
        params: IndexParams,
        postings: dict[str, dict[str, dict[str, int]]],
        field_lengths: dict[str, dict[str, int]],
        docs: dict[str, ProcedureDoc],
    ) -> None:
        self.params = params
        self.postings = postings  # term -> doc_id -> field -> tf
        self.field_lengths = field_lengths  # doc_id -> field -> token count
        self.docs = docs
        self.doc_count = len(docs)
        self.avg_field_length = {
            f: (sum(fl[f] for fl in field_lengths.values()) / len(field_lengths))
            if field_lengths
            else 0.0
            for f in FIELDS
        }

    def document_frequency(self, term: str) -> int:
        return len(self.postings.get(term, {}))

    def idf(self, term: str) -> float:
        df = self.document_frequency(term)
        n = self.doc_count
        return math.log(1.0 + (n - df + 0.5) / (df + 0.5))

    def _weighted_tf(self, term: str, doc_id: str) -> float:
        by_field = self.postings.get(term, {}).get(doc_id)
        if not by_field:
            return 0.0
        params = self.params
        total = 0.0
        for f, tf in by_field.items():
            avg = self.avg_field_length[f]
            length = self.field_lengths[doc_id][f]
            # Empty field across the corpus: no occurrences can exist there.
            norm = 1.0 + params.b[f] * (length / avg - 1.0) if avg > 0 else 1.0
            total += params.w[f] * tf / norm
        return total

    def bm25f_score(self, query_terms: list[str], doc_id: str) -> float:
        if doc_id not in self.docs:
            raise IndexingError(f"unknown doc_id {doc_id!r}")
        score = 0.0
        for term in sorted(set(query_terms)):
            weighted = self._weighted_tf(term, doc_id)
            if weighted > 0.0:
                score += self.idf(term) * weighted / (self.params.k1 + weighted)
        return score

    def search(self, question: str, k: int) -> list[RankedResult]:
        """Top-k docs by BM25F, ties by ascending doc_id, zero scores dropped."""
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        terms = analyze(question)
        if not terms:
            return []
        candidates: set[str] = set()
        for term in set(terms):
            candidates.update(self.postings.get(term, {}))
        scored = [(self.bm25f_score(terms, doc_id), doc_id) for doc_id in candidates]
        scored = [(s, d) for s, d in scored if s > 0.0]
        scored.sort(key=lambda pair: (-pair[0], pair[1]))
        return [
            RankedResult(doc_id=d, retriever_score=s, rank=i)
            for i, (s, d) in enumerate(scored[:k], 1)
        ]

    def save(self, path: str | Path) -> None:
        record = {
            "format": "opsqa-index",
            "version": 1,
            "params": {"k1": self.params.k1, "b": self.params.b, "w": self.params.w},
            "postings": self.postings,
            "field_lengths": self.field_lengths,
            "docs": [
                {
                    "doc_id": d.doc_id,
                    "ata_chapter": d.ata_chapter,
                    "applicability": d.applicability,
                    "title": d.title,
                    "headers": d.headers,
                    "body": d.body,
                    "norm_body": d.norm_body,
                    "offset_map": d.offset_map,
                }
                for d in self.docs.values()
            ],
        }
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(record, handle, ensure_ascii=False, sort_keys=True)
            handle.write("\n")

    @classmethod
    def load(cls, path: str | Path) -> "InvertedIndex":
        try:
            record = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise IndexingError(f"cannot read index file {path}: {exc}") from exc
        if record.get("format") != "opsqa-index" or record.get("version") != 1:
            raise IndexingError(f"{path} is not a version-1 index file")
        params = IndexParams(
            k1=record["params"]["k1"], b=record["params"]["b"], w=record["params"]["w"]
        )
        docs = {d["doc_id"]: ProcedureDoc(**d) for d in record["docs"]}
        return cls(params, record["postings"], record["field_lengths"], docs)

    def dump_terms(self) -> str:
        """Human-readable postings, one term per line, for index debugging."""
        lines = []
        for term in sorted(self.postings):
            per_doc = self.postings[term]
            entries = ", ".join(
                f"{doc_id}({'/'.join(f'{f}:{tf}' for f, tf in sorted(per_doc[doc_id].items()))})"
                for doc_id in sorted(per_doc)
            )
            lines.append(f"{term}\tdf={len(per_doc)}\t{entries}")
        return "\n".join(lines)


def build_index(corpus: list[ProcedureDoc], params: IndexParams | None = None) -> InvertedIndex:
    """Index a corpus; duplicate doc_ids are a build error naming the id."""
    if not corpus:
        raise IndexingError("cannot index an empty corpus")
    params = params or IndexParams()
    docs: dict[str, ProcedureDoc] = {}
    postings: dict[str, dict[str, dict[str, int]]] = {}
    field_lengths: dict[str, dict[str, int]] = {}
    for doc in corpus:
        if doc.doc_id in docs:
            raise IndexingError(f"duplicate doc_id {doc.doc_id}")
        docs[doc.doc_id] = doc
        lengths: dict[str, int] = {}
        for f in FIELDS:
            tokens = analyze(getattr(doc, f))
            lengths[f] = len(tokens)
            for term, tf in Counter(tokens).items():
                postings.setdefault(term, {}).setdefault(doc.doc_id, {})[f] = tf
        field_lengths[doc.doc_id] = lengths
    index = InvertedIndex(params, postings, field_lengths, docs)
    logger.info("indexed %d docs, %d terms", index.doc_count, len(postings))
    return index
