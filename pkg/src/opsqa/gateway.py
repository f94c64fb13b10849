"""Pipeline composition plus the HTTP service and its configuration.

The pipeline wires the four stages together: BM25F search for k candidates,
passage windowing and reading per candidate document, answer aggregation, and
score fusion for the final ranking.  The HTTP layer adds an in-memory session
store and exposes the dialog loop to the UI; all errors come back as JSON
``{code, message}`` objects.
"""

from __future__ import annotations

import logging
import os
import threading
import uuid
from dataclasses import dataclass, replace
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.exceptions import HTTPException, RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import dialog
from .analysis import analyze
from .corpus import ProcedureDoc
from .index import InvertedIndex, RankedResult
from .reader import (
    NO_SPAN,
    DocAnswer,
    LexicalReader,
    ReaderError,
    RemoteReader,
    aggregate_answer,
    window_passages,
)
from .rerank import COMBINERS, GbrtModel, rerank

logger = logging.getLogger(__name__)

PORT_ENV_VAR = "OPSQA_PORT"


class ConfigError(Exception):
    """Invalid pipeline configuration."""


class PipelineError(Exception):
    """All candidates failed; no answer list could be produced.

    Marked ``escalate`` so the dialog layer re-raises it instead of turning it
    into a polite reply; the HTTP layer maps it to a 502.
    """

    escalate = True


@dataclass(frozen=True)
class PipelineConfig:
    """Startup configuration; see docs/formats.md for the file format."""

    index_path: str
    reader: str = "lexical"
    reader_url: str | None = None
    reranker: str = "zscore_add"
    model_path: str | None = None
    k: int = 10
    max_seq_len: int = 512
    stride: int = 128
    reader_timeout: float = 10.0

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if self.max_seq_len not in (384, 512):
            raise ConfigError(f"max_seq_len must be 384 or 512, got {self.max_seq_len}")
        if self.reader not in ("lexical", "remote"):
            raise ConfigError(f"reader must be 'lexical' or 'remote', got {self.reader!r}")
        if self.reader == "remote" and not self.reader_url:
            raise ConfigError("remote reader requires reader_url")
        if self.reranker not in COMBINERS:
            raise ConfigError(f"reranker must be one of {COMBINERS}, got {self.reranker!r}")
        if self.reranker == "gbrt" and not self.model_path:
            raise ConfigError("gbrt reranker requires a model path")

    @classmethod
    def from_file(cls, path: str | Path) -> "PipelineConfig":
        """Parse the key=value config format (UTF-8, # comments)."""
        values: dict[str, str] = {}
        base = Path(path).parent
        for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, _, value = stripped.partition("=")
            values[key.strip()] = value.strip()

        def resolve(key: str) -> str | None:
            raw = values.get(key)
            return str(base / raw) if raw else None

        known = {"index", "reader", "reader_url", "reranker", "model", "k",
                 "max_seq_len", "stride", "reader_timeout"}
        unknown = set(values) - known
        if unknown:
            raise ConfigError(f"{path}: unknown config keys {sorted(unknown)}")
        index_path = resolve("index")
        if not index_path:
            raise ConfigError(f"{path}: missing required key 'index'")
        try:
            config = cls(
                index_path=index_path,
                reader=values.get("reader", "lexical"),
                reader_url=values.get("reader_url"),
                reranker=values.get("reranker", "zscore_add"),
                model_path=resolve("model"),
                k=int(values.get("k", "10")),
                max_seq_len=int(values.get("max_seq_len", "512")),
                stride=int(values.get("stride", "128")),
                reader_timeout=float(values.get("reader_timeout", "10")),
            )
        except ValueError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        for label, file_path in (("index", config.index_path), ("model", config.model_path)):
            if file_path and not Path(file_path).exists():
                raise ConfigError(f"{path}: {label} file not found: {file_path}")
        return config


class Pipeline:
    """search -> window -> read -> aggregate -> rerank, over a frozen index."""

    def __init__(
        self,
        index: InvertedIndex,
        reader_backend,
        reranker: str = "zscore_add",
        model: GbrtModel | None = None,
        k: int = 10,
        max_seq_len: int = 512,
        stride: int = 128,
    ) -> None:
        self.index = index
        self.reader_backend = reader_backend
        self.reranker = reranker
        self.model = model
        self.k = k
        self.max_seq_len = max_seq_len
        self.stride = stride

    @classmethod
    def from_config(cls, config: PipelineConfig) -> "Pipeline":
        index = InvertedIndex.load(config.index_path)
        if config.reader == "remote":
            backend = RemoteReader(config.reader_url, timeout=config.reader_timeout)
        else:
            backend = LexicalReader()
        model = GbrtModel.load(config.model_path) if config.model_path else None
        return cls(
            index,
            backend,
            reranker=config.reranker,
            model=model,
            k=config.k,
            max_seq_len=config.max_seq_len,
            stride=config.stride,
        )

    def doc(self, doc_id: str) -> ProcedureDoc | None:
        return self.index.docs.get(doc_id)

    def doc_title(self, doc_id: str) -> str:
        doc = self.doc(doc_id)
        return doc.title if doc else ""

    def answer_doc(self, question: str, doc: ProcedureDoc) -> DocAnswer:
        """Closed-document answer: window, read, aggregate one document."""
        passages = window_passages(
            doc, len(analyze(question)), self.max_seq_len, self.stride
        )
        if not passages:
            return DocAnswer(
                doc_id=doc.doc_id,
                answer_text=None,
                answer_char_span=None,
                qa_score=0.0,
                tag=NO_SPAN,
                tag_score=1.0,
            )
        predictions = self.reader_backend.read(question, passages, doc)
        return aggregate_answer(predictions, doc)

    def answer(self, question: str) -> list[tuple[RankedResult, DocAnswer]]:
        """Full pipeline; failed candidates are dropped, all failing is fatal."""
        candidates = self.index.search(question, self.k)
        if not candidates:
            return []
        answers: dict[str, DocAnswer] = {}
        kept: list[RankedResult] = []
        for candidate in candidates:
            doc = self.index.docs[candidate.doc_id]
            try:
                answer = answers[candidate.doc_id] = self.answer_doc(question, doc)
            except ReaderError as exc:
                logger.warning("dropping candidate %s: %s", candidate.doc_id, exc)
                continue
            # A no-answer confidence is not a span confidence; the fusion
            # features use 0 for documents without an extracted span.
            qa_score = 0.0 if answer.is_no_answer else answer.qa_score
            kept.append(replace(candidate, qa_score=qa_score))
        if not kept:
            raise PipelineError(f"reader backend failed for all {len(candidates)} candidates")
        ranked = rerank(kept, self.reranker, self.model)
        return [(result, answers[result.doc_id]) for result in ranked]


# --------------------------------------------------------------------------
# HTTP service
# --------------------------------------------------------------------------


class MessageIn(BaseModel):
    text: str


def _answer_payload(pair: tuple[RankedResult, DocAnswer]) -> dict:
    result, answer = pair
    return {
        "doc_id": result.doc_id,
        "answer_text": answer.answer_text,
        "char_span": list(answer.answer_char_span) if answer.answer_char_span else None,
        "tag": answer.tag,
        "tag_score": answer.tag_score,
        "retriever_score": result.retriever_score,
        "qa_score": result.qa_score,
        "combined_score": result.combined_score,
        "rank": result.rank,
    }


def create_app(
    pipeline: Pipeline,
    lexicon: dialog.PatternLexicon | None = None,
    templates: dialog.ReplyTemplates | None = None,
) -> FastAPI:
    lexicon = lexicon or dialog.PatternLexicon.bundled()
    templates = templates or dialog.ReplyTemplates.bundled()
    app = FastAPI(title="opsqa", docs_url=None, redoc_url=None)
    # The browser client is served as static files from another origin.
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    sessions: dict[str, dialog.DialogSession] = {}
    locks: dict[str, threading.Lock] = {}
    store_lock = threading.Lock()

    @app.exception_handler(HTTPException)
    async def http_error(_req: Request, exc: HTTPException) -> JSONResponse:
        if isinstance(exc.detail, dict):
            payload = exc.detail
        else:
            payload = {"code": f"http_{exc.status_code}", "message": str(exc.detail)}
        return JSONResponse(status_code=exc.status_code, content=payload)

    @app.exception_handler(RequestValidationError)
    async def validation_error(_req: Request, exc: RequestValidationError) -> JSONResponse:
        return JSONResponse(
            status_code=422, content={"code": "invalid_request", "message": str(exc.errors())}
        )

    @app.exception_handler(PipelineError)
    async def pipeline_error(_req: Request, exc: PipelineError) -> JSONResponse:
        return JSONResponse(status_code=502, content={"code": "pipeline_error", "message": str(exc)})

    def not_found(what: str) -> HTTPException:
        return HTTPException(status_code=404, detail={"code": "not_found", "message": what})

    @app.post("/api/sessions", status_code=201)
    def create_session() -> dict:
        session_id = uuid.uuid4().hex
        with store_lock:
            sessions[session_id] = dialog.DialogSession(session_id=session_id)
            locks[session_id] = threading.Lock()
        return {"session_id": session_id}

    @app.post("/api/sessions/{session_id}/messages")
    def post_message(session_id: str, message: MessageIn) -> dict:
        with store_lock:
            session = sessions.get(session_id)
            lock = locks.get(session_id)
        if session is None or lock is None:
            raise not_found(f"unknown session {session_id}")
        with lock:
            intent, action, reply = dialog.take_turn(
                session, message.text, pipeline, lexicon, templates
            )
            selected_rank = reply.result[0].rank if reply.result else None
            logger.info(
                "session=%s intent=%s action=%s answers=%d",
                session_id,
                intent.name,
                action.kind,
                len(session.current_results),
            )
            return {
                "intent": intent.name,
                "action": action.kind,
                "reply": reply.text,
                "selected_rank": selected_rank,
                "answers": [_answer_payload(pair) for pair in session.current_results],
            }

    @app.get("/api/docs/{doc_id}")
    def get_doc(doc_id: str) -> dict:
        doc = pipeline.doc(doc_id)
        if doc is None:
            raise not_found(f"unknown doc {doc_id}")
        return {
            "doc_id": doc.doc_id,
            "ata_chapter": doc.ata_chapter,
            "applicability": doc.applicability,
            "title": doc.title,
            "headers": doc.headers,
            "body": doc.body,
            "norm_body": doc.norm_body,
            "offset_map": doc.offset_map,
        }

    return app


def serve(config: PipelineConfig, port: int = 8080, host: str = "127.0.0.1") -> None:
    """Run the service until signalled; OPSQA_PORT overrides `port`."""
    import uvicorn

    pipeline = Pipeline.from_config(config)
    app = create_app(pipeline)
    port = int(os.environ.get(PORT_ENV_VAR, port))
    uvicorn.run(app, host=host, port=port, log_level="info")
