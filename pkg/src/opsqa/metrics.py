"""Answer and ranking metrics plus the offline evaluation harnesses.

Answer scoring follows the usual extractive-QA convention: predictions and
golds are normalized (lowercase, punctuation to spaces, articles dropped,
whitespace collapsed), exact match is string equality after normalization, F1
is the token-multiset harmonic mean maximized over gold variants.  Unanswerable
questions count as correct only when the prediction is no-answer.

Ranking quality is nDCG@k with binary relevance and a single gold document per
query, so ideal DCG is always 1.
"""

from __future__ import annotations

import json
import logging
import random
import string
from collections import Counter
from dataclasses import dataclass, field
from math import log2
from pathlib import Path

from .corpus import ProcedureDoc
from .index import RankedResult
from .rerank import GbrtModel, build_features, gbrt_train, rerank

logger = logging.getLogger(__name__)

_PUNCT = set(string.punctuation)
_ARTICLES = {"a", "an", "the"}


class MetricsError(Exception):
    """Bad dataset or evaluation input."""


def normalize_answer(text: str) -> str:
    """Lowercase, punctuation to spaces, drop articles, collapse whitespace."""
    text = "".join(" " if ch in _PUNCT else ch for ch in text.lower())
    tokens = [t for t in text.split() if t not in _ARTICLES]
    return " ".join(tokens)


def em_f1(pred: str | None, golds: list[str]) -> tuple[int, float]:
    """Exact-match and token F1 of one prediction against gold variants.

    `pred` is None for a no-answer prediction; an empty gold list marks the
    question unanswerable.  Mismatched answerability scores (0, 0).
    """
    if pred is None or not golds:
        matched = pred is None and not golds
        return (1, 1.0) if matched else (0, 0.0)
    pred_norm = normalize_answer(pred)
    pred_tokens = pred_norm.split()
    best_em, best_f1 = 0, 0.0
    for gold in golds:
        gold_norm = normalize_answer(gold)
        gold_tokens = gold_norm.split()
        if pred_norm == gold_norm:
            best_em = 1
        if not pred_tokens or not gold_tokens:
            f1 = 1.0 if pred_tokens == gold_tokens else 0.0
        else:
            overlap = sum((Counter(pred_tokens) & Counter(gold_tokens)).values())
            if overlap == 0:
                f1 = 0.0
            else:
                precision = overlap / len(pred_tokens)
                recall = overlap / len(gold_tokens)
                f1 = 2 * precision * recall / (precision + recall)
        best_f1 = max(best_f1, f1)
    return best_em, best_f1


def ndcg_at_k(ranked_doc_ids: list[str], gold_doc_id: str, k: int = 10) -> float:
    """Binary-relevance nDCG truncated at k; the single gold has gain 1."""
    if k < 1:
        raise MetricsError(f"k must be >= 1, got {k}")
    for i, doc_id in enumerate(ranked_doc_ids[:k], 1):
        if doc_id == gold_doc_id:
            return 1.0 / log2(i + 1)
    return 0.0


# --------------------------------------------------------------------------
# Datasets
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class QaExample:
    """One evaluation question; empty answers mean unanswerable."""

    question: str
    gold_doc_id: str
    answers: list[tuple[str, int]] = field(default_factory=list)  # (text, char_start)

    def __post_init__(self) -> None:
        if not self.question:
            raise ValueError("question must be non-empty")


@dataclass(frozen=True)
class RankingExample:
    """One query's candidate list with retriever/reader scores attached."""

    query_id: str
    gold_doc_id: str
    candidates: list[RankedResult]


def load_qa_dataset(path: str | Path) -> list[QaExample]:
    """Read the JSONL QA fixture format (question, gold_doc_id, answers)."""
    examples = []
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, 1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                examples.append(
                    QaExample(
                        question=record["question"],
                        gold_doc_id=record["gold_doc_id"],
                        answers=[(a["text"], a["char_start"]) for a in record["answers"]],
                    )
                )
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise MetricsError(f"{path}:{lineno}: bad QA example: {exc}") from exc
    return examples


def load_ranking_dataset(path: str | Path) -> list[RankingExample]:
    """Read the JSONL ranking format (query_id, gold_doc_id, candidates)."""
    examples = []
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, 1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                candidates = [
                    RankedResult(
                        doc_id=c["doc_id"],
                        retriever_score=c["retriever_score"],
                        qa_score=c["qa_score"],
                        rank=i,
                    )
                    for i, c in enumerate(record["candidates"], 1)
                ]
                examples.append(
                    RankingExample(
                        query_id=record["query_id"],
                        gold_doc_id=record["gold_doc_id"],
                        candidates=candidates,
                    )
                )
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise MetricsError(f"{path}:{lineno}: bad ranking example: {exc}") from exc
    return examples


def write_ranking_dataset(examples: list[RankingExample], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for ex in examples:
            record = {
                "query_id": ex.query_id,
                "gold_doc_id": ex.gold_doc_id,
                "candidates": [
                    {
                        "doc_id": c.doc_id,
                        "retriever_score": c.retriever_score,
                        "qa_score": c.qa_score,
                    }
                    for c in ex.candidates
                ],
            }
            handle.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")


def squad_to_corpus(path: str | Path) -> tuple[list[ProcedureDoc], list[QaExample]]:
    """Adapt a SQuAD 2.0 file: one doc per paragraph, one example per question."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    docs, examples = [], []
    for article in data["data"]:
        for pi, paragraph in enumerate(article["paragraphs"]):
            context = paragraph["context"]
            doc_id = f"{article.get('title', 'untitled')}#{pi}"
            docs.append(
                ProcedureDoc(
                    doc_id=doc_id,
                    ata_chapter="",
                    applicability="",
                    title=article.get("title", ""),
                    headers="",
                    body=context,
                    norm_body=context,
                    offset_map=list(range(len(context))),
                )
            )
            for qa in paragraph["qas"]:
                answers = []
                if not qa.get("is_impossible", False):
                    answers = [(a["text"], a["answer_start"]) for a in qa["answers"]]
                examples.append(
                    QaExample(question=qa["question"], gold_doc_id=doc_id, answers=answers)
                )
    return docs, examples


# --------------------------------------------------------------------------
# Evaluation harnesses
# --------------------------------------------------------------------------


@dataclass
class EvalReport:
    """Answer-level evaluation outcome; EM/F1 are percentages."""

    n_examples: int
    n_errors: int
    em: float
    f1: float
    records: list[dict]

    def to_json(self) -> str:
        return json.dumps(
            {
                "n_examples": self.n_examples,
                "n_errors": self.n_errors,
                "em": self.em,
                "f1": self.f1,
                "records": self.records,
            },
            ensure_ascii=False,
            sort_keys=True,
            indent=2,
        )

    def summary(self) -> str:
        return (
            f"examples: {self.n_examples}  errors: {self.n_errors}  "
            f"EM: {self.em:.2f}  F1: {self.f1:.2f}"
        )


def evaluate_qa(examples: list[QaExample], pipeline) -> EvalReport:
    """Closed-document evaluation: the reader runs on each example's gold doc.

    `pipeline` must provide ``doc(doc_id)`` and ``answer_doc(question, doc)``
    (see the gateway module).  Examples whose gold doc is missing are recorded
    as errors and excluded from the means.
    """
    if not examples:
        raise MetricsError("empty dataset")
    records: list[dict] = []
    ems: list[int] = []
    f1s: list[float] = []
    n_errors = 0
    for ex in examples:
        doc = pipeline.doc(ex.gold_doc_id)
        if doc is None:
            n_errors += 1
            records.append(
                {"question": ex.question, "gold_doc_id": ex.gold_doc_id, "error": "missing doc"}
            )
            continue
        answer = pipeline.answer_doc(ex.question, doc)
        pred = answer.answer_text
        em, f1 = em_f1(pred, [text for text, _ in ex.answers])
        ems.append(em)
        f1s.append(f1)
        records.append(
            {
                "question": ex.question,
                "gold_doc_id": ex.gold_doc_id,
                "prediction": pred,
                "em": em,
                "f1": round(f1, 6),
            }
        )
    if not ems:
        raise MetricsError("no scorable examples (all gold docs missing)")
    return EvalReport(
        n_examples=len(ems),
        n_errors=n_errors,
        em=100.0 * sum(ems) / len(ems),
        f1=100.0 * sum(f1s) / len(f1s),
        records=records,
    )


@dataclass
class RankingReport:
    """Ranking evaluation outcome on the held-out test split."""

    ranker: str
    n_train: int
    n_test: int
    mean_ndcg: float
    per_query: list[dict]

    def to_json(self) -> str:
        return json.dumps(
            {
                "ranker": self.ranker,
                "n_train": self.n_train,
                "n_test": self.n_test,
                "mean_ndcg": self.mean_ndcg,
                "per_query": self.per_query,
            },
            ensure_ascii=False,
            sort_keys=True,
            indent=2,
        )

    def summary(self) -> str:
        return (
            f"ranker: {self.ranker}  train: {self.n_train}  test: {self.n_test}  "
            f"mean nDCG@10: {self.mean_ndcg:.4f}"
        )


def split_dataset(
    examples: list[RankingExample], split: float, seed: int
) -> tuple[list[RankingExample], list[RankingExample]]:
    """Deterministic shuffled train/test split."""
    if not 0.0 < split < 1.0:
        raise MetricsError(f"split must be in (0, 1), got {split}")
    indices = list(range(len(examples)))
    random.Random(seed).shuffle(indices)
    cut = int(len(examples) * split)
    train = [examples[i] for i in indices[:cut]]
    test = [examples[i] for i in indices[cut:]]
    if not test:
        raise MetricsError("test split empty")
    return train, test


def training_rows(examples: list[RankingExample]):
    """(features, binary label) rows for the boosted combiner."""
    rows = []
    for ex in examples:
        for cand, feats in zip(ex.candidates, build_features(ex.candidates)):
            rows.append((feats, 1 if cand.doc_id == ex.gold_doc_id else 0))
    return rows


def evaluate_ranking(
    examples: list[RankingExample],
    ranker: str,
    split: float = 0.8,
    seed: int = 42,
    k: int = 10,
    rounds: int = 100,
    model: GbrtModel | None = None,
) -> RankingReport:
    """Mean nDCG@k of one combiner on the test split.

    The gbrt combiner is trained on the train split unless a pre-trained
    model is passed in; fixed combiners ignore the train split entirely.
    """
    if not examples:
        raise MetricsError("empty dataset")
    train, test = split_dataset(examples, split, seed)
    if ranker == "gbrt" and model is None:
        model = gbrt_train(training_rows(train), rounds=rounds, seed=seed)
    per_query = []
    total = 0.0
    for ex in test:
        ranked = rerank(ex.candidates, ranker, model)
        score = ndcg_at_k([r.doc_id for r in ranked], ex.gold_doc_id, k)
        total += score
        per_query.append({"query_id": ex.query_id, "ndcg": round(score, 6)})
    return RankingReport(
        ranker=ranker,
        n_train=len(train),
        n_test=len(test),
        mean_ndcg=total / len(test),
        per_query=per_query,
    )
