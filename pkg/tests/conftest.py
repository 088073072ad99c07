from __future__ import annotations

import random
from pathlib import Path

import pytest

from streamclaw.backend import MockBackend
from streamclaw.ingest import Chunk, FrameRecord
from streamclaw.vectors import FEATURE_DIM, normalize

REPO_ROOT = Path(__file__).resolve().parents[1]
SCENARIO_DIR = REPO_ROOT / "scenarios"
GOLDEN_DIR = Path(__file__).resolve().parent / "golden"


@pytest.fixture
def backend():
    return MockBackend()


def random_unit_vector(rng: random.Random) -> list[float]:
    v = [rng.gauss(0.0, 1.0) for _ in range(FEATURE_DIM)]
    return normalize(v)


def make_frame(t_ms: int, labels=(), summary: str = "", feat=None) -> FrameRecord:
    return FrameRecord(t_ms, feat if feat is not None else [0.0] * FEATURE_DIM, list(labels), summary)


def make_chunk(chunk_id: int, start_ms: int, end_ms: int, frames) -> Chunk:
    return Chunk(chunk_id, start_ms, end_ms, list(frames))
