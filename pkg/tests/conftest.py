"""Shared fixtures: the generated manual corpus, its index, and pipelines.

Everything heavy is session-scoped; the corpus and index are immutable, so
sharing them across test modules is safe.
"""

from __future__ import annotations

from pathlib import Path

import pytest

from opsqa.corpus import AbbrevTable, ProcedureDoc, ingest_dir, load_unit_rules
from opsqa.gateway import Pipeline
from opsqa.index import InvertedIndex, build_index
from opsqa.metrics import QaExample, load_qa_dataset
from opsqa.reader import LexicalReader

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "fixtures"
DATA = ROOT / "src" / "opsqa" / "data"


@pytest.fixture(scope="session")
def abbrev_table() -> AbbrevTable:
    return AbbrevTable.from_tsv(DATA / "abbreviations.tsv")


@pytest.fixture(scope="session")
def unit_rules():
    return load_unit_rules(DATA / "units.tsv")


@pytest.fixture(scope="session")
def fixture_docs(abbrev_table, unit_rules) -> list[ProcedureDoc]:
    docs, warnings = ingest_dir(FIXTURES / "manuals", abbrev_table, unit_rules)
    assert not warnings, [w.message for w in warnings]
    return docs


@pytest.fixture(scope="session")
def fixture_index(fixture_docs) -> InvertedIndex:
    return build_index(fixture_docs)


@pytest.fixture(scope="session")
def lexical_pipeline(fixture_index) -> Pipeline:
    return Pipeline(fixture_index, LexicalReader())


@pytest.fixture(scope="session")
def sanity_questions() -> list[QaExample]:
    return load_qa_dataset(FIXTURES / "questions_sanity.jsonl")
