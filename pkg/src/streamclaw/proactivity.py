"""Reminder node lifecycle, per-chunk trigger matching, and the signal protocol.

Objectives become monitorable reminder nodes: time-aware nodes fire on the
first chunk whose end reaches the trigger time, event-grounding nodes fire
when chunk labels intersect the configured condition labels. Every chunk
produces at least one signal; ``<SILENT>`` means nothing fired.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .backend import BackendUnavailable
from .errors import UnparseableObjective
from .ingest import Chunk

TIME_AWARE = "time_aware"
EVENT_GROUNDING = "event_grounding"

ARMED = "armed"
FIRED = "fired"
CANCELLED = "cancelled"

ONCE = "once"
PERSISTENT = "persistent"

SILENT_TOKEN = "<SILENT>"
DEFAULT_TIME_TOKEN = "<TRIG:time_due>"

_DURATION_RE = re.compile(r"\bin\s+(\d+)\s+(minutes?|seconds?)\b", re.IGNORECASE)


@dataclass(frozen=True)
class SkillCallSpec:
    """A skill function to run when the owning condition fires."""

    skill: str
    function: str
    args: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ConditionSpec:
    """One entry of the scenario's condition mapping, keyed by phrase."""

    key: str
    labels: frozenset[str]
    token: str
    template: str
    recurrence: str = ONCE
    calls: tuple[SkillCallSpec, ...] = ()


@dataclass
class ProactivityConfig:
    time_template: str = "Time is up."
    time_token: str = DEFAULT_TIME_TOKEN
    conditions: dict[str, ConditionSpec] = field(default_factory=dict)
    default_recurrence: str = ONCE


@dataclass
class ReminderNode:
    rid: int
    kind: str
    condition_text: str
    response_template: str
    token: str
    state: str = ARMED
    recurrence: str = ONCE
    trigger_at_ms: int | None = None
    condition_labels: frozenset[str] = frozenset()
    calls: tuple[SkillCallSpec, ...] = ()


@dataclass(frozen=True)
class ProactiveSignal:
    token: str
    t_abs_ms: int
    rid: int | None = None
    response_text: str | None = None


def _parse_duration_ms(q: str) -> int | None:
    m = _DURATION_RE.search(q)
    if not m:
        return None
    n = int(m.group(1))
    unit = 60_000 if m.group(2).lower().startswith("minute") else 1_000
    return n * unit


class ProactivityEngine:
    """Owns reminder nodes and the registered scenario-token table."""

    def __init__(self, backend, config: ProactivityConfig | None = None):
        self.backend = backend
        self.config = config or ProactivityConfig()
        self.nodes: dict[int, ReminderNode] = {}
        self._next_rid = 1
        self.token_table: set[str] = {self.config.time_token}
        for spec in self.config.conditions.values():
            self.token_table.add(spec.token)

    def register_token(self, token: str) -> None:
        if token == SILENT_TOKEN:
            raise ValueError(f"{SILENT_TOKEN} is reserved")
        self.token_table.add(token)

    def _match_condition(self, q: str) -> ConditionSpec | None:
        ql = q.lower()
        for key in sorted(self.config.conditions, key=lambda k: (-len(k), k)):
            if key.lower() in ql:
                return self.config.conditions[key]
        return None

    def _build(self, node: ReminderNode, q: str, t_now: int) -> None:
        """Fill trigger fields of ``node`` from objective text; raises if unparseable."""
        offset = _parse_duration_ms(q)
        if offset is not None:
            node.kind = TIME_AWARE
            node.trigger_at_ms = t_now + offset
            node.condition_labels = frozenset()
            node.condition_text = q
            node.response_template = self.config.time_template
            node.token = self.config.time_token
            node.calls = ()
            return
        spec = self._match_condition(q)
        if spec is None:
            raise UnparseableObjective(q)
        node.kind = EVENT_GROUNDING
        node.trigger_at_ms = None
        node.condition_labels = spec.labels
        node.condition_text = spec.key
        node.response_template = spec.template
        node.token = spec.token
        node.recurrence = spec.recurrence
        node.calls = spec.calls

    def create_reminder(self, q: str, t_now: int) -> ReminderNode:
        node = ReminderNode(
            rid=self._next_rid,
            kind=TIME_AWARE,
            condition_text=q,
            response_template="",
            token=self.config.time_token,
            recurrence=self.config.default_recurrence,
        )
        self._build(node, q, t_now)
        self._next_rid += 1
        self.nodes[node.rid] = node
        return node

    def evolve_objective(self, rid: int, new_q: str, t_now: int) -> ReminderNode:
        """Re-parse the objective onto the same node, re-arming it; 'cancel' cancels."""
        node = self.nodes[rid]
        if node.state == CANCELLED:
            raise UnparseableObjective(f"reminder {rid} is cancelled")
        if new_q.strip().lower() == "cancel":
            node.state = CANCELLED
            return node
        self._build(node, new_q, t_now)  # raises before any field changes
        node.state = ARMED
        return node

    def respond(self, node: ReminderNode, c: Chunk) -> str:
        """Render the node's response against the chunk it fired on.

        {time} substitutes the chunk end in ms, {labels} the chunk caption.
        A remote backend may rewrite the rendered text; transport failure
        falls back to the plain substitution.
        """
        caption, _ = self.backend.caption_chunk(c)
        rendered = node.response_template.replace("{time}", str(c.end_ms)).replace(
            "{labels}", caption
        )
        if getattr(self.backend, "is_remote", False):
            try:
                steps = self.backend.decode(f"RESPOND\n{caption}\n{rendered}", [])
                text = " ".join(s.token_text for s in steps).strip()
                if text:
                    return text
            except BackendUnavailable:
                pass
        return rendered

    def check_chunk(self, c: Chunk) -> list[ProactiveSignal]:
        """Match every armed node against one chunk.

        All firings land in one signal list; a chunk with none yields exactly
        one silent signal. Once-nodes move to fired and never fire again.
        """
        labels = c.labels()
        signals: list[ProactiveSignal] = []
        for rid in sorted(self.nodes):
            node = self.nodes[rid]
            if node.state != ARMED:
                continue
            if node.kind == TIME_AWARE:
                hit = node.trigger_at_ms is not None and c.end_ms >= node.trigger_at_ms
            else:
                hit = bool(labels & node.condition_labels)
            if not hit:
                continue
            if node.token not in self.token_table:
                raise RuntimeError(f"unregistered trigger token {node.token!r}")
            signals.append(ProactiveSignal(node.token, c.end_ms, rid, self.respond(node, c)))
            if node.recurrence == ONCE:
                node.state = FIRED
        if not signals:
            signals.append(ProactiveSignal(SILENT_TOKEN, c.end_ms))
        return signals
