#!/usr/bin/env python3
"""Reference server for the span-prediction wire protocol (protocol: 1).

Serves the bundled lexical reader over HTTP so the remote backend path can be
exercised without a fine-tuned model.  Any real reader replacing this only has
to speak the same request/response shapes with passage-relative offsets.

Usage: python scripts/lexical_reader_server.py [--port 9090]
"""

from __future__ import annotations

import argparse
import json
import sys
from http.server import BaseHTTPRequestHandler, HTTPServer

from opsqa.corpus import ProcedureDoc
from opsqa.reader import Passage, lexical_read


def predict(question: str, passage_id: str, text: str, max_answer_len: int) -> dict:
    # Wrap the text as a standalone one-passage doc; offsets stay relative.
    doc = ProcedureDoc(
        doc_id="remote",
        ata_chapter="",
        applicability="",
        title="",
        headers="",
        body=text,
        norm_body=text,
        offset_map=list(range(len(text))),
    )
    passage = Passage(
        passage_id=passage_id, doc_id="remote", char_start=0, char_end=len(text),
        token_count=len(text.split()),
    )
    pred = lexical_read(question, passage, doc, max_answer_len=max_answer_len)
    return {
        "passage_id": passage_id,
        "spans": [
            {"start_char": s.start_char, "end_char": s.end_char, "score": s.score}
            for s in pred.spans
        ],
        "no_answer_score": pred.no_answer_score,
        "tag": pred.tag,
        "tag_score": pred.tag_score,
    }


class Handler(BaseHTTPRequestHandler):
    def do_POST(self) -> None:  # noqa: N802 - http.server API
        length = int(self.headers.get("Content-Length", 0))
        try:
            request = json.loads(self.rfile.read(length))
            if request.get("protocol") != 1:
                raise ValueError(f"unsupported protocol {request.get('protocol')!r}")
            response = {
                "protocol": 1,
                "predictions": [
                    predict(
                        request["question"],
                        p["passage_id"],
                        p["text"],
                        request.get("max_answer_len", 30),
                    )
                    for p in request["passages"]
                ],
            }
            body = json.dumps(response).encode("utf-8")
            self.send_response(200)
        except (ValueError, KeyError) as exc:
            body = json.dumps({"code": "bad_request", "message": str(exc)}).encode("utf-8")
            self.send_response(400)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, fmt: str, *args) -> None:
        print(f"{self.address_string()} {fmt % args}", file=sys.stderr)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--port", type=int, default=9090)
    args = parser.parse_args()
    server = HTTPServer(("127.0.0.1", args.port), Handler)
    print(f"lexical reader protocol server on http://127.0.0.1:{args.port}/")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    return 0


if __name__ == "__main__":
    sys.exit(main())
