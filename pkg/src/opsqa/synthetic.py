"""Synthetic ranking dataset shaped after the re-ranking experiment.

Each query has ten candidates with a planted structure: the gold document is
strong on exactly one signal (retriever for even queries, reader for odd
ones), an adversarial candidate is even stronger on the opposite signal but
weak on the gold's, a balanced candidate is moderately good on both, and
seven chaff candidates are mediocre everywhere.  Retriever scores then get a
per-query positive affine distortion, so only their z-scores carry
cross-query meaning while reader scores stay on a fixed [0, 1] scale.

With this construction a single raw signal finds the gold in about half the
queries, adding z-scores confuses gold with the balanced candidate, and a
learned combiner that can condition one signal on the other separates gold
cleanly; the three ranker families therefore spread out in the expected
order.
"""

from __future__ import annotations

import random

from .index import RankedResult
from .metrics import RankingExample

GOLD_STRONG = 10.0
GOLD_WEAK = 4.2
ADVERSARY_STRONG = 9.7
ADVERSARY_WEAK = 1.0
BALANCED = 6.8
CHAFF_LOW, CHAFF_HIGH = 3.0, 5.0
VALUE_NOISE = 0.4
QA_SCALE = 15.0  # keeps qa_raw inside [0, 1] with headroom for noise


def make_ranking_dataset(
    n_queries: int = 200, n_candidates: int = 10, seed: int = 13
) -> list[RankingExample]:
    """Generate the planted ranking set; candidates come retriever-ordered."""
    if n_candidates < 4:
        raise ValueError(f"need at least 4 candidates per query, got {n_candidates}")
    rng = random.Random(seed)
    examples = []
    for qi in range(n_queries):
        retriever_strong = qi % 2 == 0
        roles = [
            ("gold", GOLD_STRONG, GOLD_WEAK) if retriever_strong else ("gold", GOLD_WEAK, GOLD_STRONG),
            ("adv", ADVERSARY_WEAK, ADVERSARY_STRONG)
            if retriever_strong
            else ("adv", ADVERSARY_STRONG, ADVERSARY_WEAK),
            ("bal", BALANCED, BALANCED),
        ]
        for ci in range(n_candidates - 3):
            roles.append(
                (f"chaff{ci}", rng.uniform(CHAFF_LOW, CHAFF_HIGH), rng.uniform(CHAFF_LOW, CHAFF_HIGH))
            )

        # Per-query affine distortion of the retriever scale.
        scale = rng.uniform(0.5, 3.0)
        offset = rng.uniform(0.0, 5.0)
        query_id = f"q{qi:04d}"
        candidates = []
        for role, v_retriever, v_qa in roles:
            retriever_score = scale * (v_retriever + rng.uniform(-VALUE_NOISE, VALUE_NOISE)) + offset
            qa_score = (v_qa + rng.uniform(-VALUE_NOISE, VALUE_NOISE)) / QA_SCALE
            candidates.append(
                RankedResult(
                    doc_id=f"{query_id}:{role}",
                    retriever_score=retriever_score,
                    qa_score=min(max(qa_score, 0.0), 1.0),
                )
            )
        candidates.sort(key=lambda c: (-c.retriever_score, c.doc_id))
        for rank, cand in enumerate(candidates, 1):
            cand.rank = rank
        examples.append(
            RankingExample(
                query_id=query_id, gold_doc_id=f"{query_id}:gold", candidates=candidates
            )
        )
    return examples
