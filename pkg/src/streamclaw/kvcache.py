"""Sliding-window KV cache with attention-score pruning and redundancy skipping.

Visual tokens are admitted only when no cached visual key is more similar
than the redundancy threshold, scored by the cross-attention each decode pass
reports, then pruned to the top p percent by score. Textual tokens are never
pruned; the time window is the only cap on them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .backend import CacheEntryView
from .errors import UnknownEntry
from .vectors import cosine

VISUAL = "visual"
TEXTUAL = "textual"


@dataclass(frozen=True)
class PruneConfig:
    p_percent: float = 25.0
    redundancy_threshold: float = 0.95
    window_seconds: float = 20.0
    layers: tuple[int, ...] = ()

    def __post_init__(self):
        if not 0 < self.p_percent <= 100:
            raise ValueError("p_percent must be in (0, 100]")
        if not 0 <= self.redundancy_threshold <= 1:
            raise ValueError("redundancy_threshold must be in [0, 1]")
        if self.window_seconds <= 0:
            raise ValueError("window_seconds must be > 0")


@dataclass
class KVCacheEntry:
    entry_id: int
    modality: str
    key: list[float]
    value: list[float]
    write_ms: int
    score: float = 0.0


def retain_count(p_percent: float, n_visual: int) -> int:
    """ceil(p% of n), computed exactly so 30% of 10 is 3, not a float artifact."""
    if n_visual == 0:
        return 0
    return math.ceil(Fraction(p_percent) * n_visual / 100)


class KVWindow:
    """Single-owner KV cache for one session loop."""

    def __init__(self, config: PruneConfig | None = None):
        self.config = config or PruneConfig()
        self._entries: list[KVCacheEntry] = []
        self._next_id = 0
        self._fresh_scores = False
        # per-operation probe counters, read by tests and memory_stats
        self.last_written = 0
        self.last_skipped = 0
        self.last_pre_prune_visual = 0

    def __len__(self) -> int:
        return len(self._entries)

    def entries(self) -> list[KVCacheEntry]:
        return list(self._entries)

    def visual_count(self) -> int:
        return sum(1 for e in self._entries if e.modality == VISUAL)

    def snapshot_views(self) -> list[CacheEntryView]:
        return [CacheEntryView(e.entry_id, e.modality, e.key) for e in self._entries]

    def write_visual_tokens(self, tokens: list[tuple[list[float], list[float], int]]) -> tuple[int, int]:
        """Admit (key, value, write_ms) tokens in order; returns (written, skipped).

        A token is skipped iff the max cosine between its key and the keys of
        visual entries already cached at its write moment is strictly above
        the redundancy threshold; accepted tokens immediately join the cache
        and screen the ones behind them.
        """
        written = skipped = 0
        theta = self.config.redundancy_threshold
        for key, value, write_ms in tokens:
            best = 0.0
            redundant = False
            for e in self._entries:
                if e.modality != VISUAL:
                    continue
                sim = cosine(key, e.key)
                if sim > best:
                    best = sim
                if best > theta:
                    redundant = True
                    break
            if redundant:
                skipped += 1
                continue
            self._entries.append(KVCacheEntry(self._next_id, VISUAL, key, value, write_ms))
            self._next_id += 1
            written += 1
        self.last_written = written
        self.last_skipped = skipped
        return written, skipped

    def write_textual_tokens(self, tokens: list[tuple[list[float], list[float], int]]) -> int:
        """Textual tokens are always admitted; no redundancy screen applies."""
        for key, value, write_ms in tokens:
            self._entries.append(KVCacheEntry(self._next_id, TEXTUAL, key, value, write_ms))
            self._next_id += 1
        return len(tokens)

    def apply_attention(self, scores: dict[int, float]) -> None:
        """Overwrite the score of each named visual entry; unknown ids are an error."""
        if not scores:
            return
        by_id = {e.entry_id: e for e in self._entries}
        for entry_id in scores:
            if entry_id not in by_id:
                raise UnknownEntry(f"no cache entry with id {entry_id}")
        for entry_id, value in scores.items():
            e = by_id[entry_id]
            if e.modality == VISUAL:
                e.score = value
        self._fresh_scores = True

    def prune_top_p(self) -> list[int]:
        """Keep the ceil(p%) highest-scored visual entries; returns removed ids.

        Runs once per decode pass: a no-op until apply_attention has supplied
        fresh scores, and again a no-op if called twice without new scores.
        Ties retain the earlier write, then the lower entry id. Textual
        entries are untouched.
        """
        if not self._fresh_scores:
            return []
        self._fresh_scores = False
        visual = [e for e in self._entries if e.modality == VISUAL]
        self.last_pre_prune_visual = len(visual)
        if not visual:
            return []
        k = retain_count(self.config.p_percent, len(visual))
        ranked = sorted(visual, key=lambda e: (-e.score, e.write_ms, e.entry_id))
        keep = {e.entry_id for e in ranked[:k]}
        removed = sorted(e.entry_id for e in visual if e.entry_id not in keep)
        if removed:
            gone = set(removed)
            self._entries = [e for e in self._entries if e.entry_id not in gone]
        return removed

    def slide_window(self, now_ms: int) -> list[KVCacheEntry]:
        """Drop and return every entry strictly older than the window, any modality."""
        cutoff = now_ms - round(self.config.window_seconds * 1000)
        offloaded = [e for e in self._entries if e.write_ms < cutoff]
        if offloaded:
            self._entries = [e for e in self._entries if e.write_ms >= cutoff]
        return offloaded
