"""Tool registry, dynamically loaded skills, and the agentic call loop.

Tools are single-step primitives (clip captioning, memory lookup, stubs for
the conventional web/magnify helpers). Skills ship as one manifest file each;
discovery reads only names and descriptions, the full output schema is parsed
on first load and then validates every structured call. The agentic loop
parses at most one call per step from backend output and is bounded by a
hard step cap.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from pathlib import Path

from .backend import MEMORY_KEYWORDS
from .errors import (
    InvalidTimeRange,
    ManifestInvalid,
    SchemaViolation,
    SkillNotFound,
    SourceNotFound,
)
from .events import ERROR, OutEvent, SKILL_EXEC, TOOL_RESULT
from .ingest import Chunk, FrameRecord
from .memory import REASONING_VIEW, RetrievalCommand, SALIENCE_FIRST, SINGLE_FACT, TEMPORAL

MAX_AGENT_STEPS = 8

TIME_UNIT_WORDS = frozenset(
    {"second", "seconds", "minute", "minutes", "hour", "hours", "day", "days"}
)

FATIGUE_LEVELS = {
    "eyes_closed": 2,
    "yawning": 1,
    "phone_use": 0,
    "head_down": 0,
    "gaze_deviation": 0,
}


def fatigue_level(labels) -> int:
    """Graded warning policy: the most severe matching behavior wins."""
    hits = [lvl for lab, lvl in FATIGUE_LEVELS.items() if lab in labels]
    return max(hits) if hits else 0


def has_time_reference(query: str) -> bool:
    ql = query.lower()
    if any(k in ql for k in MEMORY_KEYWORDS):
        return True
    return any(w.strip(".,!?") in TIME_UNIT_WORDS for w in ql.split())


# -- tools ----------------------------------------------------------------


@dataclass(frozen=True)
class ToolArg:
    name: str
    type_tag: str
    required: bool = True
    default: object = None


@dataclass(frozen=True)
class ToolSpec:
    name: str
    description: str
    args: tuple[ToolArg, ...]
    returns: str = "textual response"

    def __post_init__(self):
        for a in self.args:
            if a.required and a.default is not None:
                raise ValueError(f"{self.name}.{a.name}: required args have no default")


# -- skills ----------------------------------------------------------------


@dataclass(frozen=True)
class SkillFunction:
    name: str
    properties: dict
    required: tuple[str, ...]


@dataclass(frozen=True)
class SkillManifest:
    name: str
    description: str
    token: str
    trigger_scenarios: tuple[str, ...]
    output_schemas: tuple[SkillFunction, ...]
    raw: dict


@dataclass(frozen=True)
class SkillCall:
    name: str
    args: dict


def _require(data: dict, key: str, kind, path: str):
    if key not in data:
        raise ManifestInvalid(f"{path}.{key}" if path else key, "missing")
    value = data[key]
    if not isinstance(value, kind):
        raise ManifestInvalid(f"{path}.{key}" if path else key, f"expected {kind.__name__}")
    return value


def parse_manifest(data: dict) -> SkillManifest:
    name = _require(data, "name", str, "")
    description = _require(data, "description", str, "")
    token = _require(data, "token", str, "")
    scenarios = _require(data, "trigger_scenarios", list, "")
    for i, s in enumerate(scenarios):
        if not isinstance(s, str):
            raise ManifestInvalid(f"trigger_scenarios[{i}]", "expected str")
    schemas_raw = _require(data, "output_schemas", list, "")
    schemas = []
    for i, schema in enumerate(schemas_raw):
        path = f"output_schemas[{i}]"
        if not isinstance(schema, dict):
            raise ManifestInvalid(path, "expected object")
        fn_name = _require(schema, "name", str, path)
        params = _require(schema, "parameters", dict, path)
        props = _require(params, "properties", dict, f"{path}.parameters")
        required = _require(params, "required", list, f"{path}.parameters")
        for arg in required:
            if arg not in props:
                raise ManifestInvalid(
                    f"{path}.parameters.required", f"{arg!r} not in properties"
                )
        schemas.append(SkillFunction(fn_name, props, tuple(required)))
    return SkillManifest(name, description, token, tuple(scenarios), tuple(schemas), data)


class SkillRegistry:
    """Discovers manifests at startup; parses schemas only on load.

    Loading is idempotent and safe under concurrent first-load: a single
    parsed manifest wins and is cached.
    """

    def __init__(self, skills_dir: str | Path):
        self.skills_dir = Path(skills_dir)
        self._descriptions: dict[str, tuple[str, Path]] = {}
        self._loaded: dict[str, SkillManifest] = {}
        self._lock = threading.Lock()
        self.discover()

    def discover(self) -> None:
        self._descriptions = {}
        if not self.skills_dir.is_dir():
            return
        for path in sorted(self.skills_dir.glob("*.json")):
            try:
                data = json.loads(path.read_text())
            except json.JSONDecodeError:
                continue
            name = data.get("name")
            if isinstance(name, str):
                self._descriptions[name] = (str(data.get("description", "")), path)

    def listing(self) -> list[tuple[str, str]]:
        """(name, description) pairs for prompt construction; no schema text."""
        return [(n, d) for n, (d, _) in sorted(self._descriptions.items())]

    def is_loaded(self, name: str) -> bool:
        return name in self._loaded

    def loaded_manifests(self) -> list[SkillManifest]:
        return list(self._loaded.values())

    def load(self, name: str) -> SkillManifest:
        with self._lock:
            if name in self._loaded:
                return self._loaded[name]
            if name not in self._descriptions:
                raise SkillNotFound(name)
            _, path = self._descriptions[name]
            manifest = parse_manifest(json.loads(path.read_text()))
            self._loaded[name] = manifest
            return manifest

    def find_function(self, function: str) -> tuple[SkillManifest, SkillFunction]:
        for manifest in self._loaded.values():
            for fn in manifest.output_schemas:
                if fn.name == function:
                    return manifest, fn
        raise SkillNotFound(f"no loaded skill provides function {function!r}")


def validate_call(fn: SkillFunction, call: SkillCall) -> dict:
    """Fill defaults, then require required ⊆ keys ⊆ properties."""
    filled = dict(call.args)
    for prop, spec in fn.properties.items():
        if prop not in filled and isinstance(spec, dict) and "default" in spec:
            filled[prop] = spec["default"]
    unknown = set(filled) - set(fn.properties)
    missing = set(fn.required) - set(filled)
    if unknown or missing:
        raise SchemaViolation(fn.name, missing=missing, unknown=unknown)
    return filled


@dataclass
class ExecContext:
    """Ambient state a handler may consult during execution."""

    now_ms: int = 0
    chunk: Chunk | None = None
    engine: object = None


class ToolSkillRuntime:
    """Executes tools and validated skill calls against the live session state."""

    def __init__(self, backend, memory, engine=None, registry: SkillRegistry | None = None):
        self.backend = backend
        self.memory = memory
        self.engine = engine
        self.registry = registry
        self._frame_sources: dict[str, list[FrameRecord]] = {}
        self.memory_writer = self._write_skill_segment
        self.tools: dict[str, ToolSpec] = {}
        self._tool_handlers: dict[str, object] = {}
        self._register_builtin_tools()

    # -- tool registry ----------------------------------------------------

    def register_tool(self, spec: ToolSpec, handler) -> None:
        if spec.name in self.tools:
            raise ValueError(f"duplicate tool name {spec.name!r}")
        self.tools[spec.name] = spec
        self._tool_handlers[spec.name] = handler

    def _register_builtin_tools(self) -> None:
        self.register_tool(
            ToolSpec(
                "video_cut",
                "Given two timestamps, propose the corresponding sub-clips and return the analysis results.",
                (
                    ToolArg("query", "string"),
                    ToolArg("path", "string"),
                    ToolArg("start_time", "number"),
                    ToolArg("end_time", "number"),
                ),
            ),
            lambda args: self.video_cut(**args),
        )
        self.register_tool(
            ToolSpec(
                "call_memory",
                "Perform memory retrieval for the given query.",
                (ToolArg("query", "string"),),
            ),
            lambda args: self.call_memory(args["query"]),
        )
        # conventional helpers, stubbed
        self.register_tool(
            ToolSpec("web_search", "Search the web for the query.", (ToolArg("query", "string"),)),
            lambda args: f"web_search is not available offline (query: {args['query']})",
        )
        self.register_tool(
            ToolSpec("magnify", "Magnify an image region.", (ToolArg("region", "string"),)),
            lambda args: f"magnify is not available offline (region: {args['region']})",
        )

    def run_tool(self, name: str, args: dict) -> str:
        if name not in self.tools:
            raise SkillNotFound(f"no tool named {name!r}")
        spec = self.tools[name]
        filled = dict(args)
        for arg in spec.args:
            if arg.name not in filled and arg.default is not None:
                filled[arg.name] = arg.default
        missing = {a.name for a in spec.args if a.required} - set(filled)
        unknown = set(filled) - {a.name for a in spec.args}
        if missing or unknown:
            raise SchemaViolation(name, missing=missing, unknown=unknown)
        return self._tool_handlers[name](filled)

    # -- frame sources and the two featured tools --------------------------

    def register_frames(self, path: str, frames: list[FrameRecord]) -> None:
        self._frame_sources[path] = list(frames)

    @staticmethod
    def _fmt_seconds(x: float) -> str:
        return str(int(x)) if float(x) == int(x) else str(x)

    def video_cut(self, query: str, path: str, start_time: float, end_time: float) -> str:
        """Caption the frames inside [start_time, end_time) seconds; text only.

        The result never re-enters the frame cache; it is context for the
        caller alone.
        """
        if end_time <= start_time:
            raise InvalidTimeRange(f"end_time {end_time} must be larger than start_time {start_time}")
        if path not in self._frame_sources:
            raise SourceNotFound(path)
        lo = round(start_time * 1000)
        hi = round(end_time * 1000)
        frames = [f for f in self._frame_sources[path] if lo <= f.t_abs_ms < hi]
        chunk = Chunk(0, lo, hi, frames)
        s, _ = self.backend.caption_chunk(chunk)
        prefix = f"[{self._fmt_seconds(start_time)}-{self._fmt_seconds(end_time)}]"
        return f"{prefix} {s}".rstrip()

    def call_memory(self, query: str) -> str:
        """Hierarchical retrieval under the reasoning view, rendered as text."""
        cmd = RetrievalCommand(
            query=query,
            mode=TEMPORAL if has_time_reference(query) else SINGLE_FACT,
            traversal=SALIENCE_FIRST,
            budget=64,
            top_k=3,
            hit_threshold=0.8,
        )
        rows = self.memory.retrieve(cmd, REASONING_VIEW)
        if not rows:
            return "NO_MEMORY"
        return "\n".join(f"[{r.start_ms}-{r.tau}] {r.s} -- {r.c}" for r in rows)

    # -- skill execution ----------------------------------------------------

    def _write_skill_segment(self, function: str, result: dict, ctx: ExecContext) -> None:
        if ctx.chunk is not None:
            start, end = ctx.chunk.start_ms, ctx.chunk.end_ms
        else:
            last = getattr(self.memory, "_last_tau", None) or 0
            start, end = last, last + 1
        synth = Chunk(0, start, end, [])
        self.memory.write_segment(
            synth, f"skill:{function}", json.dumps(result, sort_keys=True, separators=(",", ":"))
        )

    def _handle(self, function: str, args: dict, ctx: ExecContext) -> tuple[dict, str]:
        if function == "driver_fatigue_warning":
            state = args["fatigue_state"]
            return {"fatigue_state": state}, f"fatigue_state={state}"
        if function == "proactive_caring_inquiry":
            return {"query": args["query"]}, args["query"]
        if function == "dial_emergency_number":
            result = {
                "phone_num": args["phone_num"],
                "scene_description": args.get("scene_description", ""),
            }
            return result, f"Dialing {result['phone_num']}: {result['scene_description']}"
        if function == "solve_problems":
            # route to the backend; the solver model sees the typed request
            steps = self.backend.decode(
                f"SOLVE ({args['question_type']})\n{args['query']}", []
            )
            solved = " ".join(s.token_text for s in steps).strip()
            answer = f"Solution ({args['question_type']}): {solved}"
            return {
                "query": args["query"],
                "question_type": args["question_type"],
                "answer": answer,
            }, answer
        if function == "create_proactive_node":
            engine = ctx.engine or self.engine
            node = engine.create_reminder(args["query"], ctx.now_ms)
            return {"rid": node.rid}, f"Reminder #{node.rid} armed."
        raise SkillNotFound(f"no handler for function {function!r}")

    def execute_skill_call(self, call: SkillCall, ctx: ExecContext | None = None) -> OutEvent:
        """Validate, dispatch, and record one structured skill call.

        The result lands in the transcript (via the returned event) and in
        memory as a segment summarized ``skill:<function>``. Handler failures
        surface as an error event; the session continues.
        """
        ctx = ctx or ExecContext()
        if self.registry is None:
            raise SkillNotFound("no skill registry attached")
        manifest, fn = self.registry.find_function(call.name)
        filled = validate_call(fn, SkillCall(call.name, call.args))
        try:
            result, text = self._handle(call.name, filled, ctx)
        except SchemaViolation:
            raise
        except Exception as exc:  # handler failure is not fatal to the session
            return OutEvent(
                ERROR,
                ctx.now_ms,
                f"skill {call.name} failed: {exc}",
                payload={"skill": manifest.name, "function": call.name},
            )
        self.memory_writer(call.name, result, ctx)
        return OutEvent(
            SKILL_EXEC,
            ctx.now_ms,
            text,
            payload={"skill": manifest.name, "function": call.name, "result": result},
        )

    def build_skill_args(self, function: str, static_args: dict, chunk: Chunk | None) -> dict:
        """Merge condition-configured args with context-derived ones."""
        args = dict(static_args)
        if function == "driver_fatigue_warning" and "fatigue_state" not in args:
            args["fatigue_state"] = fatigue_level(chunk.labels() if chunk else set())
        return args


# -- agentic loop -----------------------------------------------------------


@dataclass
class AgentLoopResult:
    answer: str
    steps: int
    events: list[OutEvent] = field(default_factory=list)
    forced: bool = False
    failed: bool = False


def parse_decision(text: str):
    """First non-empty line decides: a JSON object is a call, anything else a final answer.

    Returns ("call", {"tool": ..., "args": ...}), ("final", text), or
    ("bad", reason).
    """
    stripped = text.strip()
    first = stripped.splitlines()[0].strip() if stripped else ""
    if not first.startswith("{"):
        return "final", stripped
    try:
        obj = json.loads(first)
    except json.JSONDecodeError as exc:
        return "bad", f"invalid JSON: {exc}"
    if not isinstance(obj, dict) or not isinstance(obj.get("tool"), str):
        return "bad", "call object needs a string 'tool' field"
    if not isinstance(obj.get("args", {}), dict):
        return "bad", "'args' must be an object"
    return "call", {"tool": obj["tool"], "args": obj.get("args", {})}


def run_agent_loop(decide, runtime: ToolSkillRuntime, context: str, now_ms: int = 0,
                   ctx: ExecContext | None = None, max_steps: int = MAX_AGENT_STEPS) -> AgentLoopResult:
    """Call-parse-execute-writeback until a final answer or the step cap.

    ``decide`` is one backend invocation taking the running context and
    returning text. One call executes per step; its result is written back
    into the context. An unparseable call earns exactly one retry prompt,
    then an error. Hitting the cap forces a final answer from partial
    results.
    """
    events: list[OutEvent] = []
    results: list[str] = []
    retried = False
    steps = 0
    while steps < max_steps:
        out = decide(context)
        steps += 1
        kind, payload = parse_decision(out)
        if kind == "final":
            return AgentLoopResult(payload, steps, events)
        if kind == "bad":
            if retried:
                events.append(OutEvent(ERROR, now_ms, f"unparseable call: {payload}"))
                return AgentLoopResult("", steps, events, failed=True)
            retried = True
            context += "\nRETRY: emit {\"tool\": <name>, \"args\": {...}} on one line, or a plain final answer."
            continue
        retried = False
        name, args = payload["tool"], payload["args"]
        try:
            if name in runtime.tools:
                result_text = runtime.run_tool(name, args)
                events.append(
                    OutEvent(TOOL_RESULT, now_ms, result_text, payload={"tool": name, "args": args})
                )
            else:
                ev = runtime.execute_skill_call(SkillCall(name, args), ctx or ExecContext(now_ms=now_ms))
                events.append(ev)
                result_text = ev.text
        except Exception as exc:
            result_text = f"ERROR: {exc}"
            events.append(OutEvent(ERROR, now_ms, result_text, payload={"tool": name}))
        results.append(result_text)
        context += f"\nRESULT: {result_text}"
    return AgentLoopResult("PARTIAL: " + " | ".join(results), steps, events, forced=True)
