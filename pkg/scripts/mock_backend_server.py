#!/usr/bin/env python3
"""Serve the mock backend over the remote wire protocol.

Usage:
  python3 scripts/mock_backend_server.py --listen 127.0.0.1:9400

Then point any session at it:
  STREAMCLAW_BACKEND=remote:127.0.0.1:9400 streamclaw run scenarios/trip_reminder.jsonl

Useful for exercising the remote client path and as a template for a real
model server: implement the same four ops and the runtime needs no changes.
"""

from __future__ import annotations

import argparse
import json
import socket
import threading

from streamclaw.backend import CacheEntryView, MockBackend
from streamclaw.ingest import Chunk, FrameRecord
from streamclaw.session import rewrite_memory_query
from streamclaw.vectors import zeros

BACKEND = MockBackend()


def handle(req: dict):
    op = req.get("op")
    if op == "embed":
        yield {"v": BACKEND.embed_text(req.get("text", "")).v}
    elif op == "caption":
        frames = [
            FrameRecord(f["t_abs_ms"], zeros(), f.get("labels", []), f.get("summary", ""))
            for f in req.get("frames", [])
        ]
        chunk = Chunk(0, req["start_ms"], max(req["end_ms"], req["start_ms"] + 1), frames)
        s, c = BACKEND.caption_chunk(chunk)
        yield {"s": s, "c": c}
    elif op == "classify":
        yield {"kind": BACKEND.classify_query(req.get("text", ""))}
    elif op == "decode":
        context = req.get("context", "")
        # session conventions: the backend owns query rewriting in remote mode
        if context.startswith("REWRITE_QUERY\n"):
            rewritten = rewrite_memory_query(context.split("\n", 1)[1])
            for tok in rewritten.split():
                yield {"token_text": tok, "q_feat": BACKEND.embed_text(tok).v, "attn_scores": {}}
            yield {"done": True}
            return
        snapshot = [
            CacheEntryView(e["entry_id"], e["modality"], e["key"])
            for e in req.get("cache", [])
        ]
        for step in BACKEND.decode(context, snapshot):
            yield {
                "token_text": step.token_text,
                "q_feat": step.q_feat,
                "attn_scores": {str(k): v for k, v in step.attn_scores.items()},
            }
    else:
        yield {"error": f"unknown op {op!r}"}
    yield {"done": True}


def serve_client(conn: socket.socket) -> None:
    with conn:
        fh = conn.makefile("r", encoding="utf-8")
        line = fh.readline()
        if not line.strip():
            return
        try:
            req = json.loads(line)
        except json.JSONDecodeError:
            conn.sendall(b'{"error":"invalid JSON"}\n{"done":true}\n')
            return
        for resp in handle(req):
            conn.sendall((json.dumps(resp) + "\n").encode("utf-8"))


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--listen", default="127.0.0.1:9400")
    args = parser.parse_args()
    host, _, port = args.listen.rpartition(":")
    srv = socket.create_server((host, int(port)))
    print(f"mock backend serving on {host}:{port}")
    while True:
        conn, _ = srv.accept()
        threading.Thread(target=serve_client, args=(conn,), daemon=True).start()


if __name__ == "__main__":
    raise SystemExit(main())
