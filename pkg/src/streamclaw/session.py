"""The main reasoning loop: per-chunk inference, routing, and memory offload.

Each arriving chunk drives a fixed six-step cycle: refresh the prompt clock,
admit visual tokens, run the proactivity check, drain pending user queries,
decode and prune the KV window, then slide the window and forward expired
chunk content to the memory store. Queries route to exactly one of three
paths chosen by the classifier: proactive objective creation, memory-fused
answering, or a direct answer from the current window.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field

from .backend import BackendUnavailable, MEMORY, PROACTIVE
from .config import RuntimeConfig
from .errors import ChunkGap, UnparseableObjective
from .events import ANSWER, ERROR, OutEvent, PROACTIVE as PROACTIVE_EVENT
from .ingest import Chunk, Chunker, FAST, SharedStreamCache
from .kvcache import KVWindow
from .memory import MemoryStore
from .proactivity import ProactivityEngine, ProactiveSignal, SILENT_TOKEN, SkillCallSpec
from .toolskill import ExecContext, SkillCall, SkillRegistry, ToolSkillRuntime

_PREPOSITIONS = frozenset({"in", "of", "on", "at", "about", "for", "to"})
_LEAD_STOPWORDS = frozenset(
    {
        "what", "when", "where", "who", "how", "why", "has", "have", "had",
        "did", "do", "does", "is", "are", "was", "were", "changed", "happened",
        "the", "there", "describe", "tell", "me", "show",
    }
)
_NUMBER_WORDS = frozenset(
    {"one", "two", "three", "four", "five", "six", "seven", "eight", "nine",
     "ten", "a", "an", "few", "couple", "several"}
)
_TIME_UNITS = frozenset(
    {"second", "seconds", "minute", "minutes", "hour", "hours", "day", "days"}
)


def _clean(word: str) -> str:
    return word.strip(".,!?;:").lower()


def rewrite_memory_query(q: str) -> str:
    """Turn a user question into a retrieval instruction.

    The matched temporal span becomes the time reference; the noun phrase
    after the last preposition before it becomes the topic. Falls back to
    'scene' / 'earlier' when nothing extractable remains.
    """
    words = q.split()
    clean = [_clean(w) for w in words]
    span_start = span_end = None
    for i in range(len(clean) - 1):
        if clean[i] == "compared" and clean[i + 1] == "to":
            span_start, span_end = i + 2, len(words)
            pre_end = i
            break
    else:
        pre_end = len(words)
        for i, w in enumerate(clean):
            if w in ("ago", "earlier", "before", "yesterday"):
                span_start = i
                if i >= 1 and clean[i - 1] in _TIME_UNITS:
                    span_start = i - 1
                    if i >= 2 and (clean[i - 2] in _NUMBER_WORDS or clean[i - 2].isdigit()):
                        span_start = i - 2
                span_end = i + 1
                pre_end = span_start
                break
            if w == "last" and i + 1 < len(clean) and clean[i + 1] == "time":
                span_start, span_end = i, i + 2
                pre_end = i
                break
    if span_start is None:
        time_ref = "earlier"
        pre = words
    else:
        time_ref = " ".join(words[span_start:span_end]).rstrip(".,!?;:")
        pre = words[:pre_end]
    pre_clean = [_clean(w) for w in pre]
    topic_words: list[str] = []
    for j in range(len(pre) - 1, -1, -1):
        if pre_clean[j] in _PREPOSITIONS:
            topic_words = pre[j + 1:]
            break
    if not topic_words:
        k = 0
        while k < len(pre) and pre_clean[k] in _LEAD_STOPWORDS:
            k += 1
        topic_words = pre[k:]
    topic = " ".join(topic_words).rstrip(".,!?;:") or "scene"
    return f"Describe the {topic} and key characteristics {time_ref} in detail."


@dataclass
class Session:
    """One stream, one sequential event loop, disjoint state per session."""

    backend: object
    config: RuntimeConfig
    cache: SharedStreamCache
    chunker: Chunker
    kv: KVWindow
    memory: MemoryStore
    engine: ProactivityEngine
    runtime: ToolSkillRuntime
    registry: SkillRegistry

    on_event: object = None  # callable(OutEvent)
    on_signal: object = None  # callable(ProactiveSignal)
    on_step: object = None  # trace seam: callable(str)

    now_ms: int = 0
    system_prompt: str = ""
    pending_queries: deque = field(default_factory=deque)
    transcript: list[OutEvent] = field(default_factory=list)
    signals: list[ProactiveSignal] = field(default_factory=list)

    _last_chunk_id: int | None = None
    _pending_mem: deque = field(default_factory=deque)
    _mem_seq: int = 0

    def __post_init__(self):
        self.runtime.memory_writer = self._enqueue_skill_memory
        self.system_prompt = self.build_prompt()

    # -- prompt -------------------------------------------------------------

    def current_window_caption(self) -> str:
        since = self.now_ms - round(self.config.kv.window_seconds * 1000)
        frames = self.cache.window(since, FAST)
        if not frames:
            return ""
        chunk = Chunk(0, since, max(self.now_ms, since + 1), frames)
        s, _ = self.backend.caption_chunk(chunk)
        return s

    def build_prompt(self) -> str:
        lines = [f"NOW_ABS_MS={self.now_ms}", "SKILLS:"]
        for name, desc in self.registry.listing():
            lines.append(f"- {name}: {desc}")
        cap = self.current_window_caption()
        lines.append(f"WINDOW: {cap}" if cap else "WINDOW:")
        return "\n".join(lines)

    # -- inputs ---------------------------------------------------------------

    def enqueue_query(self, query_id: str, text: str, t_abs_ms: int) -> None:
        self.pending_queries.append((query_id, text, t_abs_ms))

    def load_skill(self, name: str):
        manifest = self.registry.load(name)
        self.engine.register_token(manifest.token)
        return manifest

    # -- the per-chunk cycle ----------------------------------------------------

    def on_chunk(self, c: Chunk) -> list[OutEvent]:
        if self._last_chunk_id is not None and c.chunk_id != self._last_chunk_id + 1:
            raise ChunkGap(f"chunk {c.chunk_id} after {self._last_chunk_id}")
        self._last_chunk_id = c.chunk_id
        events: list[OutEvent] = []

        # (1) clock and prompt
        self.now_ms = c.end_ms
        chunk_s, chunk_detail = self.backend.caption_chunk(c)
        self.system_prompt = self.build_prompt()
        self._step("prompt")

        # (2) admit visual tokens
        self.kv.write_visual_tokens([(f.feat, f.feat, f.t_abs_ms) for f in c.frames])
        self._mem_enqueue(c.end_ms, "chunk", (c, chunk_s, chunk_detail))
        self._step("write_visual")

        # (3) proactivity
        self._check_proactivity(c, events)
        self._step("proactivity")

        # (4) drain queries
        while self.pending_queries:
            qid, text, t = self.pending_queries.popleft()
            self._emit(self.route_query(text, t, qid), events)
        self._step("drain")

        # (5) decode, score, prune
        steps = self.backend.decode(self.system_prompt, self.kv.snapshot_views())
        for st in steps:
            self.kv.apply_attention(st.attn_scores)
        if steps:
            self.kv.write_textual_tokens([(st.q_feat, st.q_feat, self.now_ms) for st in steps])
        self._step("decode")
        self.kv.prune_top_p()
        self._step("prune")

        # (6) slide the window and archive what fell out
        self.kv.slide_window(self.now_ms)
        self._flush_memory()
        self._step("slide")
        return events

    def _check_proactivity(self, c: Chunk, events: list[OutEvent]):
        signals = self.engine.check_chunk(c)
        for sig in signals:
            self.signals.append(sig)
            if self.on_signal is not None:
                self.on_signal(sig)
            if sig.token == SILENT_TOKEN:
                continue
            node = self.engine.nodes[sig.rid]
            self._emit(
                OutEvent(
                    PROACTIVE_EVENT,
                    self.now_ms,
                    sig.response_text or "",
                    payload={"rid": sig.rid, "token": sig.token},
                ),
                events,
            )
            for call_spec in node.calls:
                self._emit(self._run_condition_call(call_spec, c), events)
        return signals

    def _run_condition_call(self, spec: SkillCallSpec, c: Chunk) -> OutEvent:
        try:
            self.load_skill(spec.skill)
            args = self.runtime.build_skill_args(spec.function, spec.args, c)
            return self.runtime.execute_skill_call(
                SkillCall(spec.function, args),
                ExecContext(now_ms=self.now_ms, chunk=c, engine=self.engine),
            )
        except Exception as exc:
            return OutEvent(
                ERROR,
                self.now_ms,
                f"skill call {spec.function} failed: {exc}",
                payload={"skill": spec.skill, "function": spec.function},
            )

    # -- query routing -----------------------------------------------------------

    def route_query(self, text: str, t: int, query_id: str | None = None) -> OutEvent:
        """Classify and answer one query; never raises."""
        try:
            kind = self.backend.classify_query(text)
            if kind == PROACTIVE:
                return self._route_proactive(text, t, query_id)
            if kind == MEMORY:
                rewritten = self._rewrite(text)
                recalled = self.runtime.call_memory(rewritten)
                cap = self.current_window_caption()
                return OutEvent(
                    ANSWER,
                    self.now_ms,
                    f"{recalled}\nNOW: {cap}",
                    query_id,
                    payload={"rewritten_query": rewritten},
                )
            cap = self.current_window_caption()
            return OutEvent(ANSWER, self.now_ms, cap, query_id)
        except BackendUnavailable as exc:
            return OutEvent(ERROR, self.now_ms, f"backend unavailable: {exc}", query_id)

    def _route_proactive(self, text: str, t: int, query_id: str | None) -> OutEvent:
        try:
            node = self.engine.create_reminder(text, t)
        except UnparseableObjective:
            return OutEvent(
                ANSWER,
                self.now_ms,
                "I could not turn that into a monitorable objective; please rephrase.",
                query_id,
                payload={"error": "unparseable_objective"},
            )
        payload = {"rid": node.rid, "kind": node.kind}
        if node.trigger_at_ms is not None:
            payload["trigger_at_ms"] = node.trigger_at_ms
        else:
            payload["labels"] = sorted(node.condition_labels)
        return OutEvent(ANSWER, self.now_ms, f"Reminder #{node.rid} armed.", query_id, payload)

    def _rewrite(self, text: str) -> str:
        if getattr(self.backend, "is_remote", False):
            try:
                steps = self.backend.decode(f"REWRITE_QUERY\n{text}", [])
                out = " ".join(s.token_text for s in steps).strip()
                if out:
                    return out
            except BackendUnavailable:
                pass
        return rewrite_memory_query(text)

    # -- memory offload -----------------------------------------------------------

    def _mem_enqueue(self, end_ms: int, kind: str, payload) -> None:
        self._pending_mem.append((end_ms, self._mem_seq, kind, payload))
        self._mem_seq += 1

    def _enqueue_skill_memory(self, function: str, result: dict, ctx: ExecContext) -> None:
        # skill results ride the offload pipeline so memory writes stay monotone
        if ctx.chunk is not None:
            span = (ctx.chunk.start_ms, ctx.chunk.end_ms)
        else:
            span = (max(self.now_ms - 1, 0), max(self.now_ms, 1))
        self._mem_enqueue(span[1], "skill", (function, result, span))

    def _write_mem_record(self, kind: str, payload) -> None:
        if kind == "chunk":
            chunk, s, detail = payload
            self.memory.write_segment(chunk, s, detail)
        else:
            function, result, span = payload
            synth = Chunk(0, span[0], max(span[1], span[0] + 1), [])
            self.memory.write_segment(
                synth,
                f"skill:{function}",
                json.dumps(result, sort_keys=True, separators=(",", ":")),
            )

    def _flush_memory(self) -> None:
        cutoff = self.now_ms - round(self.config.kv.window_seconds * 1000)
        while self._pending_mem and self._pending_mem[0][0] <= cutoff:
            _, _, kind, payload = self._pending_mem.popleft()
            self._write_mem_record(kind, payload)

    def flush_all_memory(self) -> None:
        """Archive everything still queued; used at orderly shutdown."""
        while self._pending_mem:
            _, _, kind, payload = self._pending_mem.popleft()
            self._write_mem_record(kind, payload)

    # -- bookkeeping ---------------------------------------------------------------

    def _emit(self, ev: OutEvent, events: list[OutEvent]) -> None:
        events.append(ev)
        self.transcript.append(ev)
        if self.on_event is not None:
            self.on_event(ev)

    def _step(self, name: str) -> None:
        if self.on_step is not None:
            self.on_step(name)

    def memory_stats(self) -> dict:
        stats = self.memory.stats()
        stats["kv_visual_count"] = self.kv.visual_count()
        return stats


def build_session(backend, config: RuntimeConfig | None = None, **hooks) -> Session:
    """Wire a full session from a backend and config."""
    config = config or RuntimeConfig()
    cache = SharedStreamCache(config.ingest.cache_max_frames, config.ingest.slow_stride)
    chunker = Chunker(config.ingest.chunk_seconds)
    kv = KVWindow(config.kv)
    memory = MemoryStore(backend, config.memory)
    engine = ProactivityEngine(backend, config.proactivity)
    registry = SkillRegistry(config.skills_dir)
    runtime = ToolSkillRuntime(backend, memory, engine, registry)
    return Session(
        backend=backend,
        config=config,
        cache=cache,
        chunker=chunker,
        kv=kv,
        memory=memory,
        engine=engine,
        runtime=runtime,
        registry=registry,
        **hooks,
    )
