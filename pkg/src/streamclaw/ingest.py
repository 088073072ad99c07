"""Timeline standardization and the shared streaming frame cache.

Device-relative timestamps are mapped onto one absolute millisecond axis via
anchors. Frames accumulate in a bounded FIFO cache shared by every reader and
are tiled into fixed-duration chunks, the unit of all downstream inference.
"""

from __future__ import annotations

import threading
from collections import deque
from dataclasses import dataclass, field

from .errors import AnchorMissing, TimestampRegression
from .vectors import FEATURE_DIM

FAST = "fast"
SLOW = "slow"


@dataclass(frozen=True)
class TimeAnchor:
    """Maps one device-relative instant to absolute epoch milliseconds."""

    device_rel_s: float
    abs_ms: int

    def __post_init__(self):
        if self.abs_ms < 0:
            raise ValueError("abs_ms must be >= 0")


def align_timestamp(rel_s: float, anchor: TimeAnchor | None) -> int:
    """Absolute ms for a device-relative time under the active anchor."""
    if anchor is None:
        raise AnchorMissing("no time anchor set for this stream")
    return anchor.abs_ms + round(1000.0 * (rel_s - anchor.device_rel_s))


@dataclass
class FrameRecord:
    t_abs_ms: int
    feat: list[float]
    labels: list[str]
    summary: str = ""

    def __post_init__(self):
        if len(self.feat) != FEATURE_DIM:
            raise ValueError(f"feat must have dimension {FEATURE_DIM}, got {len(self.feat)}")


@dataclass
class Chunk:
    chunk_id: int
    start_ms: int
    end_ms: int
    frames: list[FrameRecord]
    density: str = FAST

    def __post_init__(self):
        if self.start_ms >= self.end_ms:
            raise ValueError("chunk must have start_ms < end_ms")

    def labels(self) -> set[str]:
        out: set[str] = set()
        for f in self.frames:
            out.update(f.labels)
        return out


class SharedStreamCache:
    """Bounded FIFO of frames with one writer and concurrent snapshot readers.

    Eviction is strictly oldest-first. ``window`` returns a consistent
    snapshot; a concurrent push never produces a torn read.
    """

    def __init__(self, max_len: int = 256, slow_stride: int = 5):
        if max_len < 1:
            raise ValueError("max_len must be >= 1")
        if slow_stride < 1:
            raise ValueError("slow_stride must be >= 1")
        self.max_len = max_len
        self.slow_stride = slow_stride
        self._queue: deque[FrameRecord] = deque()
        self._last_t: int | None = None
        self._lock = threading.Lock()

    def __len__(self) -> int:
        with self._lock:
            return len(self._queue)

    def push_frame(self, f: FrameRecord) -> list[FrameRecord]:
        """Append one frame; returns frames evicted past max_len, oldest first."""
        with self._lock:
            if self._last_t is not None and f.t_abs_ms < self._last_t:
                raise TimestampRegression(
                    f"frame at {f.t_abs_ms} ms after frame at {self._last_t} ms"
                )
            self._last_t = f.t_abs_ms
            self._queue.append(f)
            evicted: list[FrameRecord] = []
            while len(self._queue) > self.max_len:
                evicted.append(self._queue.popleft())
            return evicted

    def window(self, since_ms: int, density: str = FAST) -> list[FrameRecord]:
        """Cached frames with t >= since_ms; slow density keeps every stride-th."""
        with self._lock:
            snap = [f for f in self._queue if f.t_abs_ms >= since_ms]
        if density == SLOW:
            return snap[:: self.slow_stride]
        return snap


@dataclass
class Chunker:
    """Tiles pushed frames into consecutive [start, start + T_c) chunks.

    The grid is anchored lazily at the first observed event time, floored to
    a chunk boundary, so chunks partition the observed timeline with no gaps.
    """

    chunk_seconds: float = 2.0
    density: str = FAST
    _pending: list[FrameRecord] = field(default_factory=list)
    _last_end: int | None = None
    _next_id: int = 0

    @property
    def chunk_ms(self) -> int:
        return round(self.chunk_seconds * 1000)

    @property
    def last_end_ms(self) -> int | None:
        return self._last_end

    def observe(self, t_abs_ms: int) -> None:
        """Anchor the chunk grid at the first event time."""
        if self._last_end is None:
            self._last_end = (t_abs_ms // self.chunk_ms) * self.chunk_ms

    def add_frame(self, f: FrameRecord) -> None:
        self.observe(f.t_abs_ms)
        self._pending.append(f)

    def _take(self, end_ms: int) -> list[FrameRecord]:
        taken = [f for f in self._pending if f.t_abs_ms < end_ms]
        self._pending = [f for f in self._pending if f.t_abs_ms >= end_ms]
        return taken

    def cut_chunk(self, now_ms: int) -> Chunk | None:
        """Emit the next full chunk once now_ms reaches its end boundary.

        Returns at most one chunk per call; callers loop until None when time
        jumps across several boundaries.
        """
        if self._last_end is None:
            return None
        end = self._last_end + self.chunk_ms
        if now_ms < end:
            return None
        chunk = Chunk(self._next_id, self._last_end, end, self._take(end), self.density)
        self._next_id += 1
        self._last_end = end
        return chunk

    def flush(self, end_ms: int) -> Chunk | None:
        """Emit the final partial chunk [last_end, end_ms) at stream end."""
        if self._last_end is None or end_ms <= self._last_end:
            return None
        chunk = Chunk(self._next_id, self._last_end, end_ms, self._take(end_ms), self.density)
        self._next_id += 1
        self._last_end = end_ms
        return chunk
