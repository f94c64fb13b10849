"""Planted structure and determinism of the synthetic ranking set."""

from __future__ import annotations

import pytest

from opsqa.metrics import write_ranking_dataset
from opsqa.synthetic import make_ranking_dataset


def test_shape_and_roles():
    examples = make_ranking_dataset()
    assert len(examples) == 200
    for ex in examples:
        assert len(ex.candidates) == 10
        ids = [c.doc_id for c in ex.candidates]
        assert len(set(ids)) == 10
        assert ex.gold_doc_id == f"{ex.query_id}:gold"
        assert ex.gold_doc_id in ids
        assert f"{ex.query_id}:adv" in ids
        assert f"{ex.query_id}:bal" in ids


def test_candidates_come_retriever_ordered():
    for ex in make_ranking_dataset(n_queries=30):
        scores = [c.retriever_score for c in ex.candidates]
        assert scores == sorted(scores, reverse=True)
        assert [c.rank for c in ex.candidates] == list(range(1, 11))


def test_qa_scores_stay_in_unit_interval():
    for ex in make_ranking_dataset():
        for c in ex.candidates:
            assert 0.0 <= c.qa_score <= 1.0


def test_gold_alternates_strong_signal():
    examples = make_ranking_dataset(n_queries=40)
    for ex in examples:
        qi = int(ex.query_id[1:])
        by_role = {c.doc_id.split(":")[1]: c for c in ex.candidates}
        gold, adv = by_role["gold"], by_role["adv"]
        if qi % 2 == 0:
            # Retriever-strong queries: gold leads retrieval, trails the reader.
            assert gold.retriever_score > adv.retriever_score
            assert gold.qa_score < adv.qa_score
        else:
            assert gold.retriever_score < adv.retriever_score
            assert gold.qa_score > adv.qa_score


def test_generation_is_deterministic(tmp_path):
    a_path, b_path = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    write_ranking_dataset(make_ranking_dataset(), a_path)
    write_ranking_dataset(make_ranking_dataset(), b_path)
    assert a_path.read_bytes() == b_path.read_bytes()
    different = make_ranking_dataset(seed=14)
    assert different != make_ranking_dataset()


def test_rejects_too_few_candidates():
    with pytest.raises(ValueError):
        make_ranking_dataset(n_candidates=3)
