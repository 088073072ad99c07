#!/usr/bin/env python3
"""Sweep the KV window parameters over a synthetic stream.

Reports, per (p_percent, redundancy_threshold) cell: how many visual tokens
the redundancy screen skipped, the mean post-prune cache size, and the peak
size. Useful for eyeballing how aggressively a deployment can prune before
the window starves.

  python3 scripts/kv_window_experiment.py [--minutes 5] [--seed 7]
"""

from __future__ import annotations

import argparse
import random

from streamclaw.backend import MockBackend
from streamclaw.config import IngestConfig, RuntimeConfig
from streamclaw.kvcache import PruneConfig
from streamclaw.session import build_session
from streamclaw.vectors import FEATURE_DIM, normalize

WORDS = ["road", "clear", "traffic", "jam", "goal", "scored", "market", "crowd"]


def run_cell(minutes: float, seed: int, p: float, theta: float) -> dict:
    rng = random.Random(seed)
    cfg = RuntimeConfig(
        ingest=IngestConfig(chunk_seconds=2.0, cache_max_frames=512),
        kv=PruneConfig(p_percent=p, redundancy_threshold=theta, window_seconds=20.0),
    )
    session = build_session(MockBackend(), cfg)
    base = [normalize([rng.gauss(0, 1) for _ in range(FEATURE_DIM)]) for _ in range(10)]
    skipped = written = 0
    sizes: list[int] = []

    original = session.on_chunk

    def probed(chunk):
        nonlocal skipped, written
        events = original(chunk)
        skipped += session.kv.last_skipped
        written += session.kv.last_written
        sizes.append(session.kv.visual_count())
        return events

    session.on_chunk = probed
    from streamclaw.ingest import FrameRecord

    for t in range(0, round(minutes * 60_000), 500):
        if rng.random() < 0.5:
            feat = list(rng.choice(base))  # revisit a known scene
        else:
            feat = normalize([rng.gauss(0, 1) for _ in range(FEATURE_DIM)])
        frame = FrameRecord(t, feat, [rng.choice(WORDS)])
        session.chunker.observe(t)
        while (c := session.chunker.cut_chunk(t)) is not None:
            session.on_chunk(c)
        session.cache.push_frame(frame)
        session.chunker.add_frame(frame)
    total = written + skipped
    return {
        "skip_rate": skipped / total if total else 0.0,
        "mean_size": sum(sizes) / len(sizes) if sizes else 0.0,
        "peak_size": max(sizes) if sizes else 0,
    }


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--minutes", type=float, default=5.0)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()
    header = f"{'p%':>5} {'theta':>6} {'skip%':>7} {'mean':>7} {'peak':>5}"
    print(header)
    print("-" * len(header))
    for p in (10.0, 25.0, 50.0, 100.0):
        for theta in (0.8, 0.95, 1.0):
            cell = run_cell(args.minutes, args.seed, p, theta)
            print(
                f"{p:>5.0f} {theta:>6.2f} {cell['skip_rate'] * 100:>6.1f}% "
                f"{cell['mean_size']:>7.1f} {cell['peak_size']:>5d}"
            )


if __name__ == "__main__":
    main()
