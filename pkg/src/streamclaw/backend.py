"""Pluggable inference boundary.

``MockBackend`` is fully deterministic and weight-free: embeddings are an
FNV-1a hashed bag of words, captions are label/summary joins, query
classification is keyword-driven, and decode attention is a plain softmax
over key dot products. ``RemoteBackend`` delegates the same four operations
to a model server over newline-delimited JSON on a TCP socket.
"""

from __future__ import annotations

import json
import socket
from dataclasses import dataclass, field

from .errors import BackendUnavailable
from .ingest import Chunk
from .vectors import FEATURE_DIM, dot, normalize, softmax, zeros

PROACTIVE = "proactive"
MEMORY = "memory"
DIRECT = "direct"

PROACTIVE_KEYWORDS = ("remind", "alert", "notify", "warn", "watch for")
MEMORY_KEYWORDS = ("ago", "earlier", "before", "yesterday", "last time", "compared to")

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_U64 = 0xFFFFFFFFFFFFFFFF


def fnv1a64(s: str) -> int:
    """FNV-1a 64-bit hash of the UTF-8 bytes of s."""
    h = _FNV_OFFSET
    for b in s.encode("utf-8"):
        h ^= b
        h = (h * _FNV_PRIME) & _U64
    return h


@dataclass(frozen=True)
class TextEmbedding:
    """L2-normalized (or zero) feature vector of dimension 64."""

    v: list[float]


@dataclass(frozen=True)
class CacheEntryView:
    """Read-only snapshot of one KV cache entry handed to decode."""

    entry_id: int
    modality: str
    key: list[float]


@dataclass(frozen=True)
class DecodeStep:
    token_text: str
    q_feat: list[float]
    attn_scores: dict[int, float] = field(default_factory=dict)


class MockBackend:
    """Deterministic stand-in for the multimodal model. Stateless."""

    is_remote = False

    def embed_text(self, s: str) -> TextEmbedding:
        """Hashed bag of lowercase whitespace tokens, L2-normalized.

        Each token adds 1.0 at index fnv1a64(token) mod 64; the empty string
        embeds to the zero vector.
        """
        v = zeros()
        for tok in s.lower().split():
            v[fnv1a64(tok) % FEATURE_DIM] += 1.0
        return TextEmbedding(normalize(v))

    def caption_chunk(self, c: Chunk) -> tuple[str, str]:
        """(summary, detail): distinct labels in first-occurrence order; '; '-joined summaries."""
        seen: list[str] = []
        for f in c.frames:
            for lab in f.labels:
                if lab not in seen:
                    seen.append(lab)
        details = [f.summary for f in c.frames if f.summary]
        return " ".join(seen), "; ".join(details)

    def classify_query(self, q: str) -> str:
        ql = q.lower()
        if any(k in ql for k in PROACTIVE_KEYWORDS):
            return PROACTIVE
        if any(k in ql for k in MEMORY_KEYWORDS):
            return MEMORY
        return DIRECT

    def decode(self, context_text: str, cache_snapshot: list[CacheEntryView]) -> list[DecodeStep]:
        """One step per response token.

        The mock response is the last line of the context with a leading
        ``WINDOW:`` marker stripped, so decoding a standard prompt reads back
        the current window caption. Attention is softmax((q . k) / sqrt(d))
        over visual entries only.
        """
        lines = context_text.splitlines()
        last = lines[-1] if lines else ""
        if last.startswith("WINDOW:"):
            last = last[len("WINDOW:"):]
        visual = [e for e in cache_snapshot if e.modality == "visual"]
        steps = []
        scale = FEATURE_DIM ** 0.5
        for tok in last.split():
            q = self.embed_text(tok).v
            logits = [dot(q, e.key) / scale for e in visual]
            probs = softmax(logits)
            steps.append(DecodeStep(tok, q, {e.entry_id: p for e, p in zip(visual, probs)}))
        return steps


class RemoteBackend:
    """Client for a model server speaking newline-delimited JSON over TCP.

    One connection per call; any transport failure raises BackendUnavailable.
    Decode responses stream as one JSON object per step followed by a
    ``{"done": true}`` terminator, with attention scores averaged server-side
    over ``attention_layers``.
    """

    is_remote = True

    def __init__(self, host: str, port: int, attention_layers: tuple[int, ...] = (), timeout: float = 10.0):
        self.host = host
        self.port = port
        self.attention_layers = tuple(attention_layers)
        self.timeout = timeout

    def _exchange(self, request: dict) -> list[dict]:
        try:
            with socket.create_connection((self.host, self.port), timeout=self.timeout) as sock:
                sock.sendall((json.dumps(request) + "\n").encode("utf-8"))
                buf = b""
                responses: list[dict] = []
                while True:
                    data = sock.recv(65536)
                    if not data:
                        break
                    buf += data
                    while b"\n" in buf:
                        line, buf = buf.split(b"\n", 1)
                        if not line.strip():
                            continue
                        obj = json.loads(line)
                        if obj.get("done"):
                            return responses
                        responses.append(obj)
        except (OSError, json.JSONDecodeError, ValueError) as exc:
            raise BackendUnavailable(f"{self.host}:{self.port}: {exc}") from exc
        raise BackendUnavailable(f"{self.host}:{self.port}: connection closed before done")

    @staticmethod
    def _fit(v: list) -> list[float]:
        v = [float(x) for x in v[:FEATURE_DIM]]
        v += [0.0] * (FEATURE_DIM - len(v))
        return normalize(v)

    def embed_text(self, s: str) -> TextEmbedding:
        (resp,) = self._exchange({"op": "embed", "text": s}) or [{"v": []}]
        return TextEmbedding(self._fit(resp.get("v", [])))

    def caption_chunk(self, c: Chunk) -> tuple[str, str]:
        req = {
            "op": "caption",
            "start_ms": c.start_ms,
            "end_ms": c.end_ms,
            "frames": [
                {"t_abs_ms": f.t_abs_ms, "labels": f.labels, "summary": f.summary}
                for f in c.frames
            ],
        }
        (resp,) = self._exchange(req) or [{}]
        return str(resp.get("s", "")), str(resp.get("c", ""))

    def classify_query(self, q: str) -> str:
        (resp,) = self._exchange({"op": "classify", "text": q}) or [{}]
        kind = resp.get("kind", DIRECT)
        return kind if kind in (PROACTIVE, MEMORY, DIRECT) else DIRECT

    def decode(self, context_text: str, cache_snapshot: list[CacheEntryView]) -> list[DecodeStep]:
        req = {
            "op": "decode",
            "context": context_text,
            "attention_layers": list(self.attention_layers),
            "cache": [
                {"entry_id": e.entry_id, "modality": e.modality, "key": e.key}
                for e in cache_snapshot
            ],
        }
        steps = []
        for obj in self._exchange(req):
            scores = {int(k): float(v) for k, v in obj.get("attn_scores", {}).items()}
            steps.append(DecodeStep(str(obj.get("token_text", "")), self._fit(obj.get("q_feat", [])), scores))
        return steps


def backend_from_spec(spec: str):
    """Build a backend from 'mock' or 'remote:<host:port>'."""
    if spec == "mock":
        return MockBackend()
    if spec.startswith("remote:"):
        rest = spec[len("remote:"):]
        host, _, port = rest.rpartition(":")
        if not host or not port.isdigit():
            raise ValueError(f"bad remote backend spec: {spec!r}")
        return RemoteBackend(host, int(port))
    raise ValueError(f"unknown backend spec: {spec!r}")
