"""Command-line entry point: ingest, index, ask, eval, train-rerank, serve.

Exit codes: 0 on success, 1 on usage errors, 2 on data errors (unreadable or
malformed inputs, invalid configuration, failing pipelines).
"""

from __future__ import annotations

import argparse
import logging
import sys
from importlib import resources
from pathlib import Path

from . import metrics as metrics_mod
from .corpus import AbbrevTable, CorpusError, ingest_dir, load_unit_rules, read_corpus, write_corpus
from .dialog import DialogError
from .gateway import ConfigError, Pipeline, PipelineConfig, PipelineError, serve
from .index import IndexingError, IndexParams, InvertedIndex, build_index
from .metrics import MetricsError
from .reader import ReaderError
from .rerank import GbrtModel, RerankError, gbrt_train

USAGE_EXIT = 1
DATA_EXIT = 2

DATA_ERRORS = (
    CorpusError,
    IndexingError,
    ReaderError,
    RerankError,
    MetricsError,
    DialogError,
    ConfigError,
    PipelineError,
    OSError,
)


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage problems; this project reserves 2 for data errors.
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(USAGE_EXIT, f"{self.prog}: error: {message}\n")


def _bundled(name: str) -> str:
    return str(resources.files("opsqa").joinpath(f"data/{name}"))


def _build_parser() -> _Parser:
    parser = _Parser(prog="opsqa", description="conversational QA over operating manuals")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="parse and normalize manual sources")
    p.add_argument("--input", required=True, help="directory of source .xml files")
    p.add_argument("--abbrev", default=_bundled("abbreviations.tsv"), help="abbreviation TSV")
    p.add_argument("--units", default=_bundled("units.tsv"), help="unit rule TSV")
    p.add_argument("--out", required=True, help="output corpus JSONL")

    p = sub.add_parser("index", help="build the BM25F index from a corpus file")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--k1", type=float, default=1.2)
    for field_name, weight in (("title", 2.0), ("headers", 1.5), ("body", 1.0)):
        p.add_argument(f"--w-{field_name}", type=float, default=weight)
        p.add_argument(f"--b-{field_name}", type=float, default=0.75)

    p = sub.add_parser("ask", help="answer one question against a configured pipeline")
    p.add_argument("question")
    p.add_argument("--config", required=True)

    p = sub.add_parser("eval", help="run an evaluation harness")
    eval_sub = p.add_subparsers(dest="eval_kind", required=True, parser_class=_Parser)
    pq = eval_sub.add_parser("qa", help="closed-document EM/F1")
    pq.add_argument("--dataset", required=True, help="QA JSONL or SQuAD JSON")
    pq.add_argument("--config", required=True)
    pq.add_argument("--report", help="write the full JSON report here")
    pr = eval_sub.add_parser("rank", help="mean nDCG@10 on the held-out split")
    pr.add_argument("--dataset", required=True, help="ranking JSONL")
    pr.add_argument("--ranker", required=True)
    pr.add_argument("--split", type=float, default=0.8)
    pr.add_argument("--seed", type=int, default=42)
    pr.add_argument("--k", type=int, default=10)
    pr.add_argument("--rounds", type=int, default=100)
    pr.add_argument("--model", help="pre-trained model file (gbrt only)")
    pr.add_argument("--report", help="write the full JSON report here")

    p = sub.add_parser("train-rerank", help="train the boosted combiner")
    p.add_argument("--dataset", required=True, help="ranking JSONL")
    p.add_argument("--rounds", type=int, default=100)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--split", type=float, default=0.8, help="train on this share of queries")
    p.add_argument("--out", required=True, help="output model file")

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--config", required=True)
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--host", default="127.0.0.1")

    p = sub.add_parser("dump", help="debug helpers over a built index")
    p.add_argument("--index", required=True)
    p.add_argument("--terms", action="store_true", help="print human-readable postings")

    return parser


def _cmd_ingest(args: argparse.Namespace) -> int:
    abbrevs = AbbrevTable.from_tsv(args.abbrev)
    unit_rules = load_unit_rules(args.units)
    docs, warnings = ingest_dir(args.input, abbrevs, unit_rules)
    write_corpus(docs, args.out)
    for warning in warnings:
        print(f"warning: unit {warning.source_index}: {warning.message}", file=sys.stderr)
    print(f"ingested {len(docs)} docs ({len(warnings)} warnings) -> {args.out}")
    return 0


def _cmd_index(args: argparse.Namespace) -> int:
    docs = read_corpus(args.corpus)
    params = IndexParams(
        k1=args.k1,
        b={"title": args.b_title, "headers": args.b_headers, "norm_body": args.b_body},
        w={"title": args.w_title, "headers": args.w_headers, "norm_body": args.w_body},
    )
    index = build_index(docs, params)
    index.save(args.out)
    print(f"indexed {index.doc_count} docs, {len(index.postings)} terms -> {args.out}")
    return 0


def _cmd_ask(args: argparse.Namespace) -> int:
    pipeline = Pipeline.from_config(PipelineConfig.from_file(args.config))
    results = pipeline.answer(args.question)
    if not results:
        print("no matching documents")
        return 0
    for result, answer in results:
        text = answer.answer_text if not answer.is_no_answer else "<no answer>"
        print(
            f"{result.rank}. {result.doc_id}"
            f"  retriever={result.retriever_score:.6f}"
            f"  qa={result.qa_score:.6f}"
            f"  combined={result.combined_score:.6f}"
            f"  tag={answer.tag_score:.6f}"
            f"  {text}"
        )
    return 0


def _load_qa_dataset(path: str) -> tuple[list, list]:
    """Returns (examples, extra_docs); SQuAD inputs carry their own docs."""
    if path.endswith(".json"):
        docs, examples = metrics_mod.squad_to_corpus(path)
        return examples, docs
    return metrics_mod.load_qa_dataset(path), []


def _cmd_eval_qa(args: argparse.Namespace) -> int:
    examples, extra_docs = _load_qa_dataset(args.dataset)
    pipeline = Pipeline.from_config(PipelineConfig.from_file(args.config))
    if extra_docs:
        # SQuAD mode: evaluate over the dataset's own paragraphs instead of
        # the indexed corpus (closed-document either way).
        pipeline = Pipeline(
            build_index(extra_docs),
            pipeline.reader_backend,
            reranker=pipeline.reranker,
            model=pipeline.model,
            k=pipeline.k,
            max_seq_len=pipeline.max_seq_len,
            stride=pipeline.stride,
        )
    report = metrics_mod.evaluate_qa(examples, pipeline)
    if args.report:
        Path(args.report).write_text(report.to_json() + "\n", encoding="utf-8")
    print(report.summary())
    return 0


def _cmd_eval_rank(args: argparse.Namespace) -> int:
    examples = metrics_mod.load_ranking_dataset(args.dataset)
    model = GbrtModel.load(args.model) if args.model else None
    report = metrics_mod.evaluate_ranking(
        examples,
        args.ranker,
        split=args.split,
        seed=args.seed,
        k=args.k,
        rounds=args.rounds,
        model=model,
    )
    if args.report:
        Path(args.report).write_text(report.to_json() + "\n", encoding="utf-8")
    print(report.summary())
    return 0


def _cmd_train_rerank(args: argparse.Namespace) -> int:
    examples = metrics_mod.load_ranking_dataset(args.dataset)
    train, _ = metrics_mod.split_dataset(examples, args.split, args.seed)
    model = gbrt_train(metrics_mod.training_rows(train), rounds=args.rounds, seed=args.seed)
    model.save(args.out)
    print(
        f"trained {args.rounds} rounds on {len(train)} queries, "
        f"final train MSE {model.train_mse[-1]:.6f} -> {args.out}"
    )
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    serve(PipelineConfig.from_file(args.config), port=args.port, host=args.host)
    return 0


def _cmd_dump(args: argparse.Namespace) -> int:
    index = InvertedIndex.load(args.index)
    if args.terms:
        print(index.dump_terms())
    else:
        print(f"docs: {index.doc_count}  terms: {len(index.postings)}")
    return 0


_COMMANDS = {
    "ingest": _cmd_ingest,
    "index": _cmd_index,
    "ask": _cmd_ask,
    "train-rerank": _cmd_train_rerank,
    "serve": _cmd_serve,
    "dump": _cmd_dump,
}


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        if args.command == "eval":
            handler = _cmd_eval_qa if args.eval_kind == "qa" else _cmd_eval_rank
            return handler(args)
        return _COMMANDS[args.command](args)
    except DATA_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DATA_EXIT


if __name__ == "__main__":
    sys.exit(main())
