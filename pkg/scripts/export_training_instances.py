#!/usr/bin/env python3
"""Export encoded (token_ids, span_start, span_end, tag) training instances.

Reads a SQuAD 2.0 file, windows every context, and writes one JSONL record
per (question, window) pair plus the vocabulary the ids refer to.  The ids
use this repository's own whole-token vocabulary, not any wordpiece model;
trainers must load the emitted vocab file alongside the instances.

Usage: python scripts/export_training_instances.py --squad data.json \
           --out instances.jsonl --vocab vocab.json [--max-seq-len 384]
"""

from __future__ import annotations

import argparse
import sys

from opsqa.reader import export_training_instances


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--squad", required=True)
    parser.add_argument("--out", required=True)
    parser.add_argument("--vocab", required=True)
    parser.add_argument("--max-seq-len", type=int, default=384, choices=(384, 512))
    parser.add_argument("--stride", type=int, default=128)
    args = parser.parse_args()

    n = export_training_instances(args.squad, args.out, args.vocab, args.max_seq_len, args.stride)
    print(f"wrote {n} instances to {args.out} (vocab: {args.vocab})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
