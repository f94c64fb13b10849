"""Answer normalization, EM/F1 against the frozen golden set, nDCG, harnesses."""

from __future__ import annotations

import json
import math
import random
from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from opsqa.corpus import ProcedureDoc
from opsqa.index import RankedResult
from opsqa.metrics import (
    EvalReport,
    MetricsError,
    QaExample,
    RankingExample,
    em_f1,
    evaluate_qa,
    evaluate_ranking,
    load_qa_dataset,
    load_ranking_dataset,
    ndcg_at_k,
    normalize_answer,
    split_dataset,
    squad_to_corpus,
    training_rows,
    write_ranking_dataset,
)
from opsqa.reader import NO_SPAN, SPAN, DocAnswer
from opsqa.rerank import build_features
from reference_squad import reference_em_f1, reference_normalize

GOLDEN = json.loads(Path("fixtures/golden_em_f1.json").read_text(encoding="utf-8"))


# --------------------------------------------------------------------------
# Normalization
# --------------------------------------------------------------------------


def test_normalize_answer_examples():
    assert normalize_answer("The Flaps-3") == "flaps 3"
    assert normalize_answer("An APU fire!") == "apu fire"
    assert normalize_answer("  38  kt ") == "38 kt"
    assert normalize_answer("a an the") == ""
    assert normalize_answer("") == ""
    assert normalize_answer("it's") == "it s"


@given(st.text(max_size=80))
def test_normalize_answer_is_idempotent(text):
    once = normalize_answer(text)
    assert normalize_answer(once) == once


@given(st.text(max_size=80))
def test_normalize_answer_output_shape(text):
    out = normalize_answer(text)
    tokens = out.split()
    assert out == " ".join(tokens)  # collapsed whitespace, no edges
    assert out == out.lower()
    for token in tokens:
        assert token not in ("a", "an", "the")
        assert not any(ch in token for ch in "!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~")


def test_normalize_agrees_with_reference():
    for case in GOLDEN:
        for text in ([case["pred"]] if case["pred"] is not None else []) + case["golds"]:
            assert normalize_answer(text) == reference_normalize(text)


# --------------------------------------------------------------------------
# EM / F1
# --------------------------------------------------------------------------


def test_em_f1_matches_frozen_golden_set():
    assert len(GOLDEN) == 30
    for case in GOLDEN:
        got = em_f1(case["pred"], case["golds"])
        assert got == (case["em"], case["f1"]), case
        # The golden file itself must match the independent reference.
        assert reference_em_f1(case["pred"], case["golds"]) == (case["em"], case["f1"])


def test_em_f1_no_answer_semantics():
    assert em_f1(None, []) == (1, 1.0)
    assert em_f1(None, ["gear down"]) == (0, 0.0)
    assert em_f1("gear down", []) == (0, 0.0)


def test_em_f1_partial_overlap_example():
    em, f1 = em_f1("gear down", ["landing gear down"])
    assert em == 0
    assert f1 == pytest.approx(0.8)


@given(st.text(max_size=60))
def test_em_f1_self_match(text):
    assert em_f1(text, [text]) == (1, 1.0)


@given(st.text(alphabet=st.characters(max_codepoint=127), max_size=60))
def test_em_f1_invariant_to_pred_case(text):
    golds = ["landing gear", "38 kt"]
    assert em_f1(text.upper(), golds) == em_f1(text.lower(), golds)


def test_em_f1_maximizes_over_golds():
    golds = ["completely different", "gear down", "landing gear down"]
    em, f1 = em_f1("gear down", golds)
    assert (em, f1) == (1, 1.0)
    shuffled = list(golds)
    random.Random(0).shuffle(shuffled)
    assert em_f1("gear down", shuffled) == (em, f1)


def test_em_implies_f1_on_golden_set():
    for case in GOLDEN:
        if case["em"] == 1:
            assert case["f1"] == 1.0


# --------------------------------------------------------------------------
# nDCG
# --------------------------------------------------------------------------


def test_ndcg_closed_form():
    ranked = ["a", "b", "c", "d"]
    assert ndcg_at_k(ranked, "a") == 1.0
    assert ndcg_at_k(ranked, "b") == pytest.approx(1.0 / math.log2(3), abs=1e-12)
    assert ndcg_at_k(ranked, "c") == pytest.approx(0.5, abs=1e-12)
    assert ndcg_at_k(ranked, "missing") == 0.0


def test_ndcg_truncates_at_k():
    ranked = ["a", "b", "c", "gold"]
    assert ndcg_at_k(ranked, "gold", k=3) == 0.0
    assert ndcg_at_k(ranked, "gold", k=4) == pytest.approx(1.0 / math.log2(5))


def test_ndcg_rejects_bad_k():
    with pytest.raises(MetricsError):
        ndcg_at_k(["a"], "a", k=0)


def test_ndcg_is_monotone_in_rank():
    ranked = [f"d{i}" for i in range(10)]
    values = [ndcg_at_k(ranked, f"d{i}") for i in range(10)]
    assert values == sorted(values, reverse=True)
    assert all(0.0 < v <= 1.0 for v in values)


# --------------------------------------------------------------------------
# Datasets
# --------------------------------------------------------------------------


def test_qa_example_requires_question():
    with pytest.raises(ValueError):
        QaExample(question="", gold_doc_id="d")


def test_load_qa_dataset(sanity_questions):
    assert len(sanity_questions) == 20
    for ex in sanity_questions:
        assert ex.question.endswith("?")
        assert ex.answers, ex.question
        for text, char_start in ex.answers:
            assert text and char_start >= 0


def test_load_qa_dataset_reports_line(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"question": "q", "gold_doc_id": "d", "answers": []}\nnot json\n')
    with pytest.raises(MetricsError) as exc:
        load_qa_dataset(path)
    assert ":2:" in str(exc.value)


def test_ranking_dataset_round_trip(tmp_path):
    examples = [
        RankingExample(
            query_id="q1",
            gold_doc_id="q1:gold",
            candidates=[
                RankedResult(doc_id="q1:gold", retriever_score=9.0, qa_score=0.8, rank=1),
                RankedResult(doc_id="q1:other", retriever_score=5.0, qa_score=0.1, rank=2),
            ],
        )
    ]
    path = tmp_path / "rank.jsonl"
    write_ranking_dataset(examples, path)
    loaded = load_ranking_dataset(path)
    assert loaded == examples
    with pytest.raises(MetricsError):
        bad = tmp_path / "bad.jsonl"
        bad.write_text("{}\n")
        load_ranking_dataset(bad)


def test_squad_to_corpus_shape():
    docs, examples = squad_to_corpus("fixtures/squad_sample.json")
    assert len(docs) == 3
    assert len(examples) == 8
    assert all("#" in d.doc_id for d in docs)
    assert all(d.norm_body == d.body for d in docs)
    unanswerable = [ex for ex in examples if not ex.answers]
    assert len(unanswerable) == 2
    by_id = {d.doc_id: d for d in docs}
    for ex in examples:
        for text, char_start in ex.answers:
            body = by_id[ex.gold_doc_id].body
            assert body[char_start : char_start + len(text)] == text


# --------------------------------------------------------------------------
# Closed-document evaluation
# --------------------------------------------------------------------------


def simple_doc(doc_id: str, body: str) -> ProcedureDoc:
    return ProcedureDoc(
        doc_id=doc_id,
        ata_chapter="",
        applicability="",
        title="",
        headers="",
        body=body,
        norm_body=body,
        offset_map=list(range(len(body))),
    )


class FakePipeline:
    """Closed-document pipeline stub with scripted answers."""

    def __init__(self, docs: dict[str, ProcedureDoc], answers: dict[str, str | None]):
        self.docs = docs
        self.answers = answers

    def doc(self, doc_id: str) -> ProcedureDoc | None:
        return self.docs.get(doc_id)

    def answer_doc(self, question: str, doc: ProcedureDoc) -> DocAnswer:
        text = self.answers[doc.doc_id]
        if text is None:
            return DocAnswer(doc.doc_id, None, None, 0.9, NO_SPAN, 0.8)
        start = doc.norm_body.index(text)
        return DocAnswer(doc.doc_id, text, (start, start + len(text)), 0.7, SPAN, 0.9)


def test_evaluate_qa_mixed_outcomes():
    docs = {
        "d1": simple_doc("d1", "the flap limit is 177 kt today"),
        "d2": simple_doc("d2", "no relevant content"),
    }
    pipeline = FakePipeline(docs, {"d1": "177 kt", "d2": None})
    examples = [
        QaExample(question="flap limit?", gold_doc_id="d1", answers=[("177 kt", 18)]),
        QaExample(question="unanswerable?", gold_doc_id="d2", answers=[]),
        QaExample(question="lost?", gold_doc_id="missing", answers=[("x", 0)]),
    ]
    report = evaluate_qa(examples, pipeline)
    assert report.n_examples == 2
    assert report.n_errors == 1
    assert report.em == 100.0
    assert report.f1 == 100.0
    assert report.records[2]["error"] == "missing doc"
    parsed = json.loads(report.to_json())
    assert parsed["em"] == 100.0
    assert "EM: 100.00" in report.summary()


def test_evaluate_qa_scores_wrong_answers():
    docs = {"d1": simple_doc("d1", "gear down and locked")}
    pipeline = FakePipeline(docs, {"d1": "gear down"})
    examples = [
        QaExample(question="gear?", gold_doc_id="d1", answers=[("landing gear down", 0)])
    ]
    report = evaluate_qa(examples, pipeline)
    assert report.em == 0.0
    assert report.f1 == pytest.approx(80.0)


def test_evaluate_qa_rejects_empty_and_all_missing():
    with pytest.raises(MetricsError):
        evaluate_qa([], FakePipeline({}, {}))
    examples = [QaExample(question="q?", gold_doc_id="nope", answers=[])]
    with pytest.raises(MetricsError):
        evaluate_qa(examples, FakePipeline({}, {}))


def test_evaluate_qa_sanity_corpus_is_perfect(lexical_pipeline, sanity_questions):
    report = evaluate_qa(sanity_questions, lexical_pipeline)
    assert report.n_errors == 0
    assert report.em == 100.0
    assert report.f1 == 100.0


# --------------------------------------------------------------------------
# Ranking evaluation
# --------------------------------------------------------------------------


def gold_first_examples(n: int) -> list[RankingExample]:
    out = []
    for qi in range(n):
        candidates = [
            RankedResult(doc_id=f"q{qi}:gold", retriever_score=9.0, qa_score=0.9, rank=1),
            RankedResult(doc_id=f"q{qi}:b", retriever_score=5.0, qa_score=0.2, rank=2),
            RankedResult(doc_id=f"q{qi}:c", retriever_score=4.0, qa_score=0.1, rank=3),
        ]
        out.append(
            RankingExample(query_id=f"q{qi}", gold_doc_id=f"q{qi}:gold", candidates=candidates)
        )
    return out


def test_split_dataset_is_deterministic_and_partitions():
    examples = gold_first_examples(50)
    train_a, test_a = split_dataset(examples, 0.8, seed=42)
    train_b, test_b = split_dataset(examples, 0.8, seed=42)
    assert train_a == train_b and test_a == test_b
    assert len(train_a) == 40 and len(test_a) == 10
    ids = sorted(ex.query_id for ex in train_a + test_a)
    assert ids == sorted(ex.query_id for ex in examples)
    _, test_c = split_dataset(examples, 0.8, seed=7)
    assert test_c != test_a  # different seed shuffles differently


def test_split_dataset_validation():
    examples = gold_first_examples(4)
    with pytest.raises(MetricsError):
        split_dataset(examples, 0.0, seed=1)
    with pytest.raises(MetricsError):
        split_dataset(examples, 1.0, seed=1)
    with pytest.raises(MetricsError):
        split_dataset([], 0.5, seed=1)


def test_training_rows_label_gold():
    examples = gold_first_examples(3)
    rows = training_rows(examples)
    assert len(rows) == 9
    assert sum(label for _, label in rows) == 3
    feats = build_features(examples[0].candidates)
    assert rows[0][0] == feats[0]
    assert [label for _, label in rows[:3]] == [1, 0, 0]


def test_evaluate_ranking_gold_first_is_perfect():
    report = evaluate_ranking(gold_first_examples(20), "retriever_only", split=0.8, seed=42)
    assert report.mean_ndcg == 1.0
    assert report.n_train == 16 and report.n_test == 4
    assert all(q["ndcg"] == 1.0 for q in report.per_query)
    assert "nDCG@10" in report.summary()


def test_evaluate_ranking_known_rank_value():
    examples = []
    for qi in range(10):
        candidates = [
            RankedResult(doc_id=f"q{qi}:a", retriever_score=9.0, qa_score=0.0, rank=1),
            RankedResult(doc_id=f"q{qi}:b", retriever_score=8.0, qa_score=0.0, rank=2),
            RankedResult(doc_id=f"q{qi}:gold", retriever_score=7.0, qa_score=0.0, rank=3),
        ]
        examples.append(
            RankingExample(query_id=f"q{qi}", gold_doc_id=f"q{qi}:gold", candidates=candidates)
        )
    report = evaluate_ranking(examples, "retriever_only", split=0.5, seed=42)
    assert report.mean_ndcg == pytest.approx(0.5)


def test_evaluate_ranking_is_deterministic():
    examples = gold_first_examples(30)
    a = evaluate_ranking(examples, "gbrt", split=0.8, seed=42, rounds=20)
    b = evaluate_ranking(examples, "gbrt", split=0.8, seed=42, rounds=20)
    assert a.to_json() == b.to_json()


def test_evaluate_ranking_rejects_empty():
    with pytest.raises(MetricsError):
        evaluate_ranking([], "retriever_only")
