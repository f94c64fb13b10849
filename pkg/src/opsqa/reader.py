"""Passage windowing, reader backends, and document-level answer aggregation.

A document is cut into overlapping token windows that fit the sequence budget
(max_seq_len minus question tokens minus 3 special-token slots).  Each window
goes to a reader backend, which returns candidate spans, a no-answer score and
a SPAN/NO_SPAN tag per passage.  Aggregation then produces one answer per
document: if every passage's best prediction is no answer the document answer
is no answer, otherwise the highest-scoring span wins; the document tag comes
from the passage with the highest tag score.

Two backends ship: a deterministic lexical-overlap baseline and an HTTP client
for any server speaking the span-prediction wire protocol (protocol: 1).
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import requests

from .analysis import analyze, content_tokens, token_spans
from .corpus import ProcedureDoc

logger = logging.getLogger(__name__)

SPAN = "SPAN"
NO_SPAN = "NO_SPAN"

PAD_ID, UNK_ID, CLS_ID, SEP_ID = 0, 1, 2, 3
_RESERVED_TOKENS = {"[PAD]": PAD_ID, "[UNK]": UNK_ID, "[CLS]": CLS_ID, "[SEP]": SEP_ID}

DEFAULT_STRIDE = 128
DEFAULT_MAX_ANSWER_LEN = 30
DEFAULT_N_BEST = 5
DEFAULT_TAG_THRESHOLD = 0.25


class ReaderError(Exception):
    """Reader failure (windowing, backend, aggregation contract)."""


class ReaderTransportError(ReaderError):
    """Backend unreachable or server-side failure; retriable."""


class ReaderTimeoutError(ReaderTransportError):
    """Backend did not answer within the configured timeout; retriable."""


class ReaderBackendError(ReaderError):
    """Backend answered but violated the wire protocol; not retriable."""


@dataclass(frozen=True)
class Passage:
    """A token window over one document's norm_body."""

    passage_id: str
    doc_id: str
    char_start: int
    char_end: int
    token_count: int

    def __post_init__(self) -> None:
        if self.char_start >= self.char_end:
            raise ValueError(f"empty char range for passage {self.passage_id!r}")


@dataclass(frozen=True)
class ScoredSpan:
    """One candidate answer span in norm_body character offsets."""

    start_char: int
    end_char: int
    score: float


@dataclass(frozen=True)
class SpanPrediction:
    """Reader output for one passage."""

    passage_id: str
    doc_id: str
    spans: list[ScoredSpan]
    no_answer_score: float
    tag: str
    tag_score: float


@dataclass(frozen=True)
class DocAnswer:
    """Document-level answer; ``answer_text`` is None for no-answer."""

    doc_id: str
    answer_text: str | None
    answer_char_span: tuple[int, int] | None
    qa_score: float
    tag: str
    tag_score: float

    @property
    def is_no_answer(self) -> bool:
        return self.answer_text is None


@dataclass(frozen=True)
class TrainingInstance:
    """One encoded (sequence, span, tag) training example.

    ``token_ids`` is exactly max_seq_len long: [CLS] question [SEP] passage
    [SEP] padding.  ``span_start``/``span_end`` are positions in ``token_ids``
    pointing at the passage region; both are 0 with tag NO_SPAN when the gold
    answer is absent from the window.
    """

    token_ids: list[int]
    span_start: int
    span_end: int
    tag: str

    def __post_init__(self) -> None:
        if self.span_start > self.span_end:
            raise ValueError("span_start must not exceed span_end")
        if (self.span_start, self.span_end) == (0, 0):
            if self.tag != NO_SPAN:
                raise ValueError("zero span positions require the NO_SPAN tag")
        elif self.tag != SPAN:
            raise ValueError("non-zero span positions require the SPAN tag")


@dataclass
class Vocab:
    """Whole-token vocabulary with reserved special tokens."""

    token_to_id: dict[str, int] = field(default_factory=lambda: dict(_RESERVED_TOKENS))

    def id_for(self, token: str, grow: bool = False) -> int:
        if token in self.token_to_id:
            return self.token_to_id[token]
        if grow:
            self.token_to_id[token] = len(self.token_to_id)
            return self.token_to_id[token]
        return UNK_ID

    def encode(self, tokens: list[str], grow: bool = False) -> list[int]:
        return [self.id_for(t, grow) for t in tokens]

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(self.token_to_id, handle, ensure_ascii=False, sort_keys=True)
            handle.write("\n")

    @classmethod
    def load(cls, path: str | Path) -> "Vocab":
        return cls(json.loads(Path(path).read_text(encoding="utf-8")))


# --------------------------------------------------------------------------
# Passage windowing
# --------------------------------------------------------------------------


def passage_budget(question_token_count: int, max_seq_len: int) -> int:
    # 3 slots reserved for [CLS] and the two [SEP] markers.
    return max_seq_len - question_token_count - 3


def window_passages(
    doc: ProcedureDoc,
    question_token_count: int,
    max_seq_len: int = 512,
    stride: int = DEFAULT_STRIDE,
) -> list[Passage]:
    """Cut norm_body into token windows; neighbors overlap by `stride` tokens.

    Windows start every (budget - stride) tokens until one reaches the end of
    the document, so every token lands in at least one window.
    """
    if max_seq_len not in (384, 512):
        raise ValueError(f"max_seq_len must be 384 or 512, got {max_seq_len}")
    budget = passage_budget(question_token_count, max_seq_len)
    if budget <= stride:
        raise ReaderError(
            f"question too long: {question_token_count} tokens leave a passage "
            f"budget of {budget} (<= stride {stride})"
        )
    spans = token_spans(doc.norm_body)
    if not spans:
        return []
    step = budget - stride
    starts = [0]
    while starts[-1] + budget < len(spans):
        starts.append(starts[-1] + step)
    passages = []
    for i, start in enumerate(starts):
        window = spans[start : start + budget]
        passages.append(
            Passage(
                passage_id=f"{doc.doc_id}:{i}",
                doc_id=doc.doc_id,
                char_start=window[0][1],
                char_end=window[-1][2],
                token_count=len(window),
            )
        )
    return passages


def passage_text(doc: ProcedureDoc, passage: Passage) -> str:
    if passage.doc_id != doc.doc_id:
        raise ReaderError(f"passage {passage.passage_id!r} does not belong to doc {doc.doc_id!r}")
    return doc.norm_body[passage.char_start : passage.char_end]


# --------------------------------------------------------------------------
# Training-instance encoding
# --------------------------------------------------------------------------


def encode_training_instance(
    question: str,
    passage: Passage,
    doc: ProcedureDoc,
    gold_answer: tuple[str, int] | None,
    max_seq_len: int,
    vocab: Vocab,
    grow_vocab: bool = False,
) -> TrainingInstance:
    """Encode one (question, passage) pair, labeling the gold span if present.

    `gold_answer` is (text, char_start) in the document's norm_body; a gold
    span fully inside the window yields token positions and tag SPAN, anything
    else (absent, straddling the boundary, unanswerable) yields (0, 0) with
    tag NO_SPAN.
    """
    question_tokens = analyze(question)
    text = passage_text(doc, passage)
    local_spans = [
        (tok, s + passage.char_start, e + passage.char_start) for tok, s, e in token_spans(text)
    ]
    ids = (
        [CLS_ID]
        + vocab.encode(question_tokens, grow_vocab)
        + [SEP_ID]
        + vocab.encode([t for t, _, _ in local_spans], grow_vocab)
        + [SEP_ID]
    )
    if len(ids) > max_seq_len:
        raise ReaderError(
            f"passage {passage.passage_id!r} overflows max_seq_len {max_seq_len}"
        )
    ids.extend([PAD_ID] * (max_seq_len - len(ids)))

    span_start, span_end, tag = 0, 0, NO_SPAN
    if gold_answer is not None:
        gold_text, gold_start = gold_answer
        gold_end = gold_start + len(gold_text)
        if gold_start >= passage.char_start and gold_end <= passage.char_end:
            covered = [
                i for i, (_, s, e) in enumerate(local_spans) if s < gold_end and e > gold_start
            ]
            if covered:
                region_offset = 2 + len(question_tokens)  # [CLS] question [SEP]
                span_start = region_offset + covered[0]
                span_end = region_offset + covered[-1]
                tag = SPAN
    return TrainingInstance(token_ids=ids, span_start=span_start, span_end=span_end, tag=tag)


def decode_span_text(
    instance: TrainingInstance, question: str, passage: Passage, doc: ProcedureDoc
) -> str | None:
    """Recover the answer text a SPAN instance points at (None for NO_SPAN)."""
    if instance.tag == NO_SPAN:
        return None
    region_offset = 2 + len(analyze(question))
    spans = token_spans(passage_text(doc, passage))
    first = spans[instance.span_start - region_offset]
    last = spans[instance.span_end - region_offset]
    return doc.norm_body[passage.char_start + first[1] : passage.char_start + last[2]]


# --------------------------------------------------------------------------
# Lexical baseline reader
# --------------------------------------------------------------------------


def _tag_from_score(best: float, threshold: float) -> tuple[str, float]:
    if best > threshold:
        scale = 1.0 - threshold
        return SPAN, (best - threshold) / scale if scale > 0 else 1.0
    return NO_SPAN, (threshold - best) / threshold if threshold > 0 else 1.0


def lexical_read(
    question: str,
    passage: Passage,
    doc: ProcedureDoc,
    max_answer_len: int = DEFAULT_MAX_ANSWER_LEN,
    n_best: int = DEFAULT_N_BEST,
    tag_threshold: float = DEFAULT_TAG_THRESHOLD,
) -> SpanPrediction:
    """Score candidate spans by question-term overlap, densest window first.

    A window's score is (distinct question content tokens it covers / question
    content token count) times (matching token positions in the window / window
    length), so padding a span with non-matching tokens drags it down.  Only
    windows starting and ending on a matching token can win; the rest are
    dominated and skipped.
    """
    q_content = set(content_tokens(question))
    text = passage_text(doc, passage)
    toks = token_spans(text)
    matched = [i for i, (tok, _, _) in enumerate(toks) if tok in q_content]

    candidates: list[tuple[float, int, int]] = []  # (score, start_tok, end_tok)
    if q_content and matched:
        matched_set = set(matched)
        for a, i in enumerate(matched):
            for j in matched[a:]:
                length = j - i + 1
                if length > max_answer_len:
                    break
                inside = [k for k in range(i, j + 1) if k in matched_set]
                distinct = len({toks[k][0] for k in inside})
                score = (distinct / len(q_content)) * (len(inside) / length)
                candidates.append((score, i, j))
    candidates.sort(key=lambda c: (-c[0], c[1], c[2] - c[1]))

    spans = [
        ScoredSpan(
            start_char=passage.char_start + toks[i][1],
            end_char=passage.char_start + toks[j][2],
            score=score,
        )
        for score, i, j in candidates[:n_best]
    ]
    best = candidates[0][0] if candidates else 0.0
    tag, tag_score = _tag_from_score(best, tag_threshold)
    return SpanPrediction(
        passage_id=passage.passage_id,
        doc_id=passage.doc_id,
        spans=spans,
        no_answer_score=1.0 - best,
        tag=tag,
        tag_score=tag_score,
    )


class LexicalReader:
    """Deterministic offline backend: lexical_read over each passage."""

    def __init__(
        self,
        max_answer_len: int = DEFAULT_MAX_ANSWER_LEN,
        n_best: int = DEFAULT_N_BEST,
        tag_threshold: float = DEFAULT_TAG_THRESHOLD,
    ) -> None:
        self.max_answer_len = max_answer_len
        self.n_best = n_best
        self.tag_threshold = tag_threshold

    def read(
        self, question: str, passages: list[Passage], doc: ProcedureDoc
    ) -> list[SpanPrediction]:
        return [
            lexical_read(
                question, p, doc, self.max_answer_len, self.n_best, self.tag_threshold
            )
            for p in passages
        ]


# --------------------------------------------------------------------------
# Remote reader (wire protocol version 1)
# --------------------------------------------------------------------------


def _require(condition: bool, passage_id: str, problem: str) -> None:
    if not condition:
        raise ReaderBackendError(f"bad prediction for {passage_id}: {problem}")


class RemoteReader:
    """HTTP client for external readers speaking the span-prediction protocol.

    Request: ``{protocol: 1, question, max_answer_len, passages: [{passage_id,
    text}]}``.  Response: ``{protocol: 1, predictions: [{passage_id, spans:
    [{start_char, end_char, score}], no_answer_score, tag, tag_score}]}`` with
    character offsets relative to the passage text and scores in [0, 1].
    """

    def __init__(
        self,
        endpoint: str,
        timeout: float = 10.0,
        max_answer_len: int = DEFAULT_MAX_ANSWER_LEN,
        n_best: int = DEFAULT_N_BEST,
    ) -> None:
        self.endpoint = endpoint
        self.timeout = timeout
        self.max_answer_len = max_answer_len
        self.n_best = n_best

    def read(
        self, question: str, passages: list[Passage], doc: ProcedureDoc
    ) -> list[SpanPrediction]:
        payload = {
            "protocol": 1,
            "question": question,
            "max_answer_len": self.max_answer_len,
            "passages": [
                {"passage_id": p.passage_id, "text": passage_text(doc, p)} for p in passages
            ],
        }
        try:
            response = requests.post(self.endpoint, json=payload, timeout=self.timeout)
        except requests.Timeout as exc:
            raise ReaderTimeoutError(f"reader backend timed out after {self.timeout}s") from exc
        except requests.RequestException as exc:
            raise ReaderTransportError(f"reader backend unreachable: {exc}") from exc
        if response.status_code >= 500:
            raise ReaderTransportError(f"reader backend returned {response.status_code}")
        if response.status_code != 200:
            raise ReaderBackendError(f"reader backend returned {response.status_code}")
        try:
            body = response.json()
        except ValueError as exc:
            raise ReaderBackendError(f"reader backend sent non-JSON response: {exc}") from exc
        if body.get("protocol") != 1:
            raise ReaderBackendError(f"unsupported reader protocol {body.get('protocol')!r}")

        by_id = {}
        for raw in body.get("predictions", []):
            if not isinstance(raw, dict) or "passage_id" not in raw:
                raise ReaderBackendError("prediction without passage_id")
            by_id[raw["passage_id"]] = raw

        predictions = []
        for p in passages:
            raw = by_id.get(p.passage_id)
            if raw is None:
                raise ReaderBackendError(f"missing prediction for {p.passage_id}")
            predictions.append(self._validate(raw, p, len(passage_text(doc, p))))
        return predictions

    def _validate(self, raw: dict, passage: Passage, text_len: int) -> SpanPrediction:
        pid = passage.passage_id
        for key in ("spans", "no_answer_score", "tag", "tag_score"):
            _require(key in raw, pid, f"missing field {key!r}")
        _require(raw["tag"] in (SPAN, NO_SPAN), pid, f"unknown tag {raw['tag']!r}")
        for key in ("no_answer_score", "tag_score"):
            value = raw[key]
            _require(
                isinstance(value, (int, float)) and 0.0 <= value <= 1.0,
                pid,
                f"{key} out of [0, 1]: {value!r}",
            )
        spans = []
        for s in raw["spans"]:
            for key in ("start_char", "end_char", "score"):
                _require(isinstance(s, dict) and key in s, pid, f"span missing {key!r}")
            _require(
                isinstance(s["start_char"], int) and isinstance(s["end_char"], int),
                pid,
                "span offsets must be integers",
            )
            _require(
                0 <= s["start_char"] < s["end_char"] <= text_len,
                pid,
                f"span offsets ({s['start_char']}, {s['end_char']}) out of range",
            )
            _require(0.0 <= s["score"] <= 1.0, pid, f"span score out of [0, 1]: {s['score']!r}")
            spans.append(
                ScoredSpan(
                    start_char=passage.char_start + s["start_char"],
                    end_char=passage.char_start + s["end_char"],
                    score=float(s["score"]),
                )
            )
        spans.sort(key=lambda s: (-s.score, s.start_char))
        return SpanPrediction(
            passage_id=pid,
            doc_id=passage.doc_id,
            spans=spans[: self.n_best],
            no_answer_score=float(raw["no_answer_score"]),
            tag=raw["tag"],
            tag_score=float(raw["tag_score"]),
        )


# --------------------------------------------------------------------------
# Aggregation
# --------------------------------------------------------------------------


def _passage_best_span(pred: SpanPrediction) -> ScoredSpan | None:
    """Best span of one passage, or None when no-answer dominates."""
    if not pred.spans:
        return None
    top = min(pred.spans, key=lambda s: (-s.score, s.start_char))
    return top if top.score > pred.no_answer_score else None


def aggregate_answer(preds: list[SpanPrediction], doc: ProcedureDoc) -> DocAnswer:
    """Combine per-passage predictions into one document answer.

    If every passage's best prediction is no answer, the document answer is no
    answer with the highest no-answer score as confidence.  Otherwise the
    globally highest-scoring span wins, ties broken by earlier passage then
    earlier character offset.
    """
    if not preds:
        raise ReaderError("aggregate_answer needs at least one prediction")
    bad = [p.passage_id for p in preds if p.doc_id != doc.doc_id]
    if bad:
        raise ReaderError(f"predictions for foreign doc in aggregation: {bad}")

    tag, tag_score = aggregate_tag(preds)
    bests = [(i, _passage_best_span(p)) for i, p in enumerate(preds)]
    spans = [(i, s) for i, s in bests if s is not None]
    if not spans:
        return DocAnswer(
            doc_id=doc.doc_id,
            answer_text=None,
            answer_char_span=None,
            qa_score=max(p.no_answer_score for p in preds),
            tag=tag,
            tag_score=tag_score,
        )
    idx, best = min(spans, key=lambda pair: (-pair[1].score, pair[0], pair[1].start_char))
    return DocAnswer(
        doc_id=doc.doc_id,
        answer_text=doc.norm_body[best.start_char : best.end_char],
        answer_char_span=(best.start_char, best.end_char),
        qa_score=best.score,
        tag=tag,
        tag_score=tag_score,
    )


def aggregate_tag(preds: list[SpanPrediction]) -> tuple[str, float]:
    """Tag of the prediction with the highest tag score; ties prefer earlier."""
    if not preds:
        raise ReaderError("aggregate_tag needs at least one prediction")
    best = min(enumerate(preds), key=lambda pair: (-pair[1].tag_score, pair[0]))[1]
    return best.tag, best.tag_score


# --------------------------------------------------------------------------
# Training-instance export (SQuAD-format input)
# --------------------------------------------------------------------------


def export_training_instances(
    squad_path: str | Path,
    out_path: str | Path,
    vocab_path: str | Path,
    max_seq_len: int = 384,
    stride: int = DEFAULT_STRIDE,
) -> int:
    """Write encoded instances for every (question, window) pair as JSONL.

    Token ids come from a vocabulary grown over this dataset and saved next to
    the instances; external trainers must load both files together.  Returns
    the number of instances written.
    """
    data = json.loads(Path(squad_path).read_text(encoding="utf-8"))
    vocab = Vocab()
    written = 0
    with open(out_path, "w", encoding="utf-8") as handle:
        for article in data["data"]:
            for pi, paragraph in enumerate(article["paragraphs"]):
                context = paragraph["context"]
                doc = ProcedureDoc(
                    doc_id=f"{article.get('title', 'untitled')}#{pi}",
                    ata_chapter="",
                    applicability="",
                    title=article.get("title", ""),
                    headers="",
                    body=context,
                    norm_body=context,
                    offset_map=list(range(len(context))),
                )
                for qa in paragraph["qas"]:
                    question = qa["question"]
                    gold = None
                    if not qa.get("is_impossible", False) and qa.get("answers"):
                        first = qa["answers"][0]
                        gold = (first["text"], first["answer_start"])
                    passages = window_passages(
                        doc, len(analyze(question)), max_seq_len, stride
                    )
                    for passage in passages:
                        instance = encode_training_instance(
                            question, passage, doc, gold, max_seq_len, vocab, grow_vocab=True
                        )
                        record = {
                            "question_id": qa["id"],
                            "passage_id": passage.passage_id,
                            "token_ids": instance.token_ids,
                            "span_start": instance.span_start,
                            "span_end": instance.span_end,
                            "tag": instance.tag,
                        }
                        handle.write(json.dumps(record, ensure_ascii=False) + "\n")
                        written += 1
    vocab.save(vocab_path)
    logger.info("wrote %d instances, vocab size %d", written, len(vocab.token_to_id))
    return written
