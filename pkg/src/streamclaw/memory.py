"""Hierarchical multimodal memory: storage, evolution, and retrieval.

Every written chunk becomes a segment node (compressed reference, summary,
detail, end timestamp) and immediately evolves upward: segments merge into
atomic actions by a blend of semantic similarity and temporal continuity,
atomic actions aggregate into events under scene similarity. Retrieval is
command-driven, scored in concurrent waves against an immutable snapshot,
and can stop early once a hit clears the threshold.

All mutations append full-state records to an append-only log, so a store
can be reconstructed bit-exactly by replay without any backend.
"""

from __future__ import annotations

import json
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple

from .config import MemoryConfig
from .errors import TimestampRegression
from .ingest import Chunk, FrameRecord
from .vectors import cosine, weighted_centroid, zeros

SEGMENT = "segment"
ATOMIC_ACTION = "atomic_action"
EVENT = "event"
LEVELS = (SEGMENT, ATOMIC_ACTION, EVENT)

SINGLE_FACT = "single_fact"
TEMPORAL = "temporal"

FORWARD = "forward"
REVERSE = "reverse"
SALIENCE_FIRST = "salience_first"


@dataclass(frozen=True)
class SegmentRef:
    """Compressed stand-in for raw footage: feature centroid plus frame ids."""

    centroid: tuple[float, ...]
    frame_ids: tuple[int, ...]

    @property
    def count(self) -> int:
        return len(self.frame_ids)


@dataclass
class MemoryNode:
    node_id: int
    level: str
    z: SegmentRef
    s: str
    c: str
    tau: int
    start_ms: int
    emb: list[float]
    salience: float
    children: list[int] = field(default_factory=list)


@dataclass(frozen=True)
class RetrievalCommand:
    query: str
    mode: str = SINGLE_FACT
    traversal: str = SALIENCE_FIRST
    budget: int = 64
    top_k: int = 3
    hit_threshold: float = 0.8

    def __post_init__(self):
        if not self.budget >= self.top_k >= 1:
            raise ValueError("budget >= top_k >= 1 required")
        if self.hit_threshold < 0:
            raise ValueError("hit_threshold must be >= 0")


@dataclass(frozen=True)
class AgentView:
    agent: str
    levels: frozenset[str]


REASONING_VIEW = AgentView("reasoning", frozenset({ATOMIC_ACTION, EVENT}))
PROACTIVITY_VIEW = AgentView("proactivity", frozenset({SEGMENT, ATOMIC_ACTION}))


class RetrievedNode(NamedTuple):
    node_id: int
    relevance: float
    s: str
    c: str
    start_ms: int
    tau: int


class _Candidate(NamedTuple):
    node_id: int
    emb: list[float]
    salience: float
    tau: int
    start_ms: int
    s: str
    c: str


_TRAVERSAL_KEYS = {
    FORWARD: lambda n: (n.tau, n.node_id),
    REVERSE: lambda n: (-n.tau, -n.node_id),
    SALIENCE_FIRST: lambda n: (-n.salience, -n.tau, -n.node_id),
}


class MemoryStore:
    """Unified write/retrieve surface shared by all agents.

    Writes are serialized; retrieval snapshots the node set under the lock
    and scores outside it, so a reader never observes a half-applied merge.
    Node field values are replaced, never mutated in place, which keeps
    snapshot rows immutable by construction.
    """

    def __init__(self, backend, config: MemoryConfig | None = None):
        self.backend = backend
        self.config = config or MemoryConfig()
        self.nodes: dict[int, MemoryNode] = {}
        self.log_lines: list[str] = []
        self.log_sink = None  # optional callable(str), e.g. file.write
        self.score_hook = None  # test seam: called per scored candidate
        self._by_level: dict[str, list[int]] = {lvl: [] for lvl in LEVELS}
        self._parent: dict[int, int] = {}
        self._next_id = 0
        self._last_tau: int | None = None
        self._lock = threading.RLock()
        self.scored_candidates_last = 0

    # -- write path ------------------------------------------------------

    def write_segment(self, chunk: Chunk, s: str, c_detail: str) -> int:
        """Store one chunk as a segment node and evolve the hierarchy.

        Salience is write-time novelty: one minus the max cosine between the
        new summary embedding and the last few segment embeddings, clamped to
        [0, 1]; the first write, or a zero embedding, scores 1.0.
        """
        with self._lock:
            if self._last_tau is not None and chunk.end_ms < self._last_tau:
                raise TimestampRegression(
                    f"segment ending {chunk.end_ms} after tau {self._last_tau}"
                )
            emb = self.backend.embed_text(s).v
            recent = self._by_level[SEGMENT][-self.config.salience_history:]
            if not recent or not any(emb):
                salience = 1.0
            else:
                worst = max(cosine(emb, self.nodes[i].emb) for i in recent)
                salience = min(1.0, max(0.0, 1.0 - worst))
            z = SegmentRef(
                tuple(weighted_centroid([(f.feat, 1) for f in chunk.frames])),
                tuple(f.t_abs_ms for f in chunk.frames),
            )
            node = MemoryNode(
                node_id=self._next_id,
                level=SEGMENT,
                z=z,
                s=s,
                c=c_detail,
                tau=chunk.end_ms,
                start_ms=chunk.start_ms,
                emb=emb,
                salience=salience,
            )
            self._next_id += 1
            self.nodes[node.node_id] = node
            self._by_level[SEGMENT].append(node.node_id)
            self._last_tau = chunk.end_ms
            self._log("segment", node)
            self._induce_atomic_action(node.node_id)
            return node.node_id

    def induce_atomic_action(self, seg_id: int) -> tuple[int, bool]:
        with self._lock:
            return self._induce_atomic_action(seg_id)

    def _compatibility(self, seg: MemoryNode, action: MemoryNode) -> float:
        dt_s = max(0, seg.start_ms - action.tau) / 1000.0
        return self.config.semantic_weight * cosine(seg.emb, action.emb) + (
            self.config.temporal_weight * math.exp(-dt_s / self.config.time_constant_s)
        )

    def _induce_atomic_action(self, seg_id: int) -> tuple[int, bool]:
        """Merge a segment into a recent compatible atomic action or open a new one.

        Candidates are the few most recent atomic actions, most recent first;
        the first one whose compatibility clears the threshold wins.
        """
        seg = self.nodes[seg_id]
        if seg.level != SEGMENT:
            raise ValueError(f"node {seg_id} is not a segment")
        if seg_id in self._parent:
            return self._parent[seg_id], False
        actions = sorted(
            (self.nodes[i] for i in self._by_level[ATOMIC_ACTION]),
            key=lambda n: (-n.tau, -n.node_id),
        )[: self.config.action_candidates]
        for action in actions:
            if self._compatibility(seg, action) >= self.config.action_threshold:
                self._merge_child(action, seg)
                self._log("action_merge", action, child=seg_id)
                parent_ev = self._parent.get(action.node_id)
                if parent_ev is not None:
                    self._refresh_parent(self.nodes[parent_ev])
                    self._log("event_refresh", self.nodes[parent_ev])
                return action.node_id, False
        action = self._wrap(seg, ATOMIC_ACTION)
        self._log("action_new", action)
        self._aggregate_event(action.node_id)
        return action.node_id, True

    def aggregate_event(self, aa_id: int) -> tuple[int, bool]:
        with self._lock:
            return self._aggregate_event(aa_id)

    def _aggregate_event(self, aa_id: int) -> tuple[int, bool]:
        """Fold an atomic action into the most recent event if the scene matches.

        Merge requires centroid similarity at or above the event threshold and
        a start gap no larger than the configured bound.
        """
        aa = self.nodes[aa_id]
        if aa.level != ATOMIC_ACTION:
            raise ValueError(f"node {aa_id} is not an atomic action")
        if aa_id in self._parent:
            return self._parent[aa_id], False
        events = self._by_level[EVENT]
        if events:
            ev = max((self.nodes[i] for i in events), key=lambda n: (n.tau, n.node_id))
            scene_sim = cosine(list(aa.z.centroid), list(ev.z.centroid))
            gap_ms = aa.start_ms - ev.tau
            if scene_sim >= self.config.event_threshold and gap_ms <= self.config.event_gap_s * 1000:
                self._merge_child(ev, aa)
                self._log("event_merge", ev, child=aa_id)
                return ev.node_id, False
        ev = self._wrap(aa, EVENT)
        self._log("event_new", ev)
        return ev.node_id, True

    def _wrap(self, child: MemoryNode, level: str) -> MemoryNode:
        node = MemoryNode(
            node_id=self._next_id,
            level=level,
            z=child.z,
            s=child.s,
            c=child.c,
            tau=child.tau,
            start_ms=child.start_ms,
            emb=list(child.emb),
            salience=child.salience,
            children=[child.node_id],
        )
        self._next_id += 1
        self.nodes[node.node_id] = node
        self._by_level[level].append(node.node_id)
        self._parent[child.node_id] = node.node_id
        return node

    def _merge_child(self, parent: MemoryNode, child: MemoryNode) -> None:
        parent.children = parent.children + [child.node_id]
        self._parent[child.node_id] = parent.node_id
        self._refresh_parent(parent)

    def _refresh_parent(self, parent: MemoryNode) -> None:
        """Re-derive a parent's summary, detail, embedding, centroid, and span.

        The summary is re-captioned from the concatenated child summaries
        (treated as label streams), so repeated vocabulary collapses the same
        way chunk captions do.
        """
        kids = [self.nodes[i] for i in parent.children]
        start = min(k.start_ms for k in kids)
        tau = max(k.tau for k in kids)
        frames = [
            FrameRecord(k.start_ms, zeros(), k.s.split(), k.c) for k in kids
        ]
        s, c = self.backend.caption_chunk(Chunk(0, start, max(tau, start + 1), frames))
        parent.s = s
        parent.c = c
        parent.emb = self.backend.embed_text(s).v
        parent.start_ms = start
        parent.tau = tau
        centroid = weighted_centroid([(list(k.z.centroid), k.z.count) for k in kids])
        frame_ids = tuple(fid for k in kids for fid in k.z.frame_ids)
        parent.z = SegmentRef(tuple(centroid), frame_ids)
        parent.salience = max(k.salience for k in kids)

    def prune_low_salience(self) -> list[int]:
        """Maintenance only, never auto-triggered: drop dull redundant segments.

        A segment is removable once its salience is below the configured
        floor and its parent atomic action keeps at least two children.
        """
        removed = []
        with self._lock:
            for seg_id in list(self._by_level[SEGMENT]):
                node = self.nodes[seg_id]
                parent_id = self._parent.get(seg_id)
                if parent_id is None or node.salience >= self.config.prune_salience:
                    continue
                parent = self.nodes[parent_id]
                if len(parent.children) < 2:
                    continue
                parent.children = [i for i in parent.children if i != seg_id]
                del self.nodes[seg_id]
                del self._parent[seg_id]
                self._by_level[SEGMENT].remove(seg_id)
                removed.append(seg_id)
                self._log_raw({"op": "prune", "node_id": seg_id, "parent": parent_id})
        return removed

    # -- read path -------------------------------------------------------

    def retrieve(self, cmd: RetrievalCommand, view: AgentView) -> list[RetrievedNode]:
        """Score candidates in concurrent waves; order is interleaving-independent.

        Candidates follow the commanded traversal and are scored in waves of
        ``wave_size`` against a snapshot. single_fact stops after the first
        wave containing a relevance at or above the hit threshold; temporal
        always consumes the budget. Results are the top_k scored candidates
        by (relevance desc, tau asc, node_id asc).
        """
        with self._lock:
            snapshot = [
                _Candidate(n.node_id, n.emb, n.salience, n.tau, n.start_ms, n.s, n.c)
                for n in self.nodes.values()
                if n.level in view.levels
            ]
        snapshot.sort(key=_TRAVERSAL_KEYS[cmd.traversal])
        candidates = snapshot[: cmd.budget]
        qemb = self.backend.embed_text(cmd.query).v
        hook = self.score_hook

        def score(cand: _Candidate) -> float:
            if hook is not None:
                hook(cand.node_id)
            return cosine(qemb, cand.emb)

        scored: list[tuple[_Candidate, float]] = []
        wb = self.config.wave_size
        with ThreadPoolExecutor(max_workers=self.config.retrieval_workers) as pool:
            for at in range(0, len(candidates), wb):
                wave = candidates[at: at + wb]
                relevances = list(pool.map(score, wave))
                scored.extend(zip(wave, relevances))
                if cmd.mode == SINGLE_FACT and any(r >= cmd.hit_threshold for r in relevances):
                    break
        self.scored_candidates_last = len(scored)
        scored.sort(key=lambda cr: (-cr[1], cr[0].tau, cr[0].node_id))
        return [
            RetrievedNode(c.node_id, r, c.s, c.c, c.start_ms, c.tau)
            for c, r in scored[: cmd.top_k]
        ]

    def view_nodes(self, view: AgentView, since_ms: int, until_ms: int) -> list[MemoryNode]:
        """Nodes of the view's levels overlapping [since, until], ascending tau."""
        if since_ms > until_ms:
            raise ValueError("since_ms must be <= until_ms")
        with self._lock:
            hits = [
                n
                for n in self.nodes.values()
                if n.level in view.levels and n.start_ms <= until_ms and n.tau >= since_ms
            ]
        hits.sort(key=lambda n: (n.tau, n.node_id))
        return hits

    def stats(self) -> dict[str, int]:
        with self._lock:
            return {
                "segments": len(self._by_level[SEGMENT]),
                "atomic_actions": len(self._by_level[ATOMIC_ACTION]),
                "events": len(self._by_level[EVENT]),
            }

    # -- mutation log ----------------------------------------------------

    def _dump_node(self, node: MemoryNode) -> dict:
        return {
            "node_id": node.node_id,
            "level": node.level,
            "s": node.s,
            "c": node.c,
            "tau": node.tau,
            "start_ms": node.start_ms,
            "salience": node.salience,
            "emb": node.emb,
            "z": {"centroid": list(node.z.centroid), "frame_ids": list(node.z.frame_ids)},
            "children": list(node.children),
        }

    def _log(self, op: str, node: MemoryNode, child: int | None = None) -> None:
        record = {"op": op, "node": self._dump_node(node)}
        if child is not None:
            record["child"] = child
        self._log_raw(record)

    def _log_raw(self, record: dict) -> None:
        line = json.dumps(record, separators=(",", ":"))
        self.log_lines.append(line)
        if self.log_sink is not None:
            self.log_sink(line + "\n")

    @classmethod
    def replay(cls, lines) -> "MemoryStore":
        """Reconstruct a store from its mutation log; no backend involved."""
        store = cls(backend=None)
        for line in lines:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            op = record["op"]
            if op == "prune":
                seg_id = record["node_id"]
                parent = store.nodes[record["parent"]]
                parent.children = [i for i in parent.children if i != seg_id]
                del store.nodes[seg_id]
                store._parent.pop(seg_id, None)
                store._by_level[SEGMENT].remove(seg_id)
                continue
            data = record["node"]
            node = MemoryNode(
                node_id=data["node_id"],
                level=data["level"],
                z=SegmentRef(tuple(data["z"]["centroid"]), tuple(data["z"]["frame_ids"])),
                s=data["s"],
                c=data["c"],
                tau=data["tau"],
                start_ms=data["start_ms"],
                emb=list(data["emb"]),
                salience=data["salience"],
                children=list(data["children"]),
            )
            fresh = node.node_id not in store.nodes
            store.nodes[node.node_id] = node
            if fresh:
                store._by_level[node.level].append(node.node_id)
            for child in node.children:
                store._parent[child] = node.node_id
            store._next_id = max(store._next_id, node.node_id + 1)
            if node.level == SEGMENT:
                store._last_tau = max(store._last_tau or 0, node.tau)
        return store


def format_forest(store: MemoryStore) -> str:
    """Render the three-level forest as indented text, ascending by time."""
    lines: list[str] = []

    def emit(node_id: int, depth: int) -> None:
        n = store.nodes[node_id]
        pad = "  " * depth
        lines.append(
            f"{pad}{n.level}#{n.node_id} [{n.start_ms}-{n.tau}] salience={n.salience:.4f} s={n.s!r}"
        )
        for child in n.children:
            emit(child, depth + 1)

    roots = sorted(
        (i for i in store._by_level[EVENT]), key=lambda i: (store.nodes[i].tau, i)
    )
    for root in roots:
        emit(root, 0)
    return "\n".join(lines)
