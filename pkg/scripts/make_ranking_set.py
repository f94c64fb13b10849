#!/usr/bin/env python3
"""Generate the synthetic 200-query ranking set used by the re-ranking bench.

Usage: python scripts/make_ranking_set.py --out ranking.jsonl [--seed 13]
"""

from __future__ import annotations

import argparse
import sys

from opsqa.metrics import write_ranking_dataset
from opsqa.synthetic import make_ranking_dataset


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", required=True)
    parser.add_argument("--queries", type=int, default=200)
    parser.add_argument("--candidates", type=int, default=10)
    parser.add_argument("--seed", type=int, default=13)
    args = parser.parse_args()

    examples = make_ranking_dataset(args.queries, args.candidates, args.seed)
    write_ranking_dataset(examples, args.out)
    print(f"wrote {len(examples)} queries x {args.candidates} candidates to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
