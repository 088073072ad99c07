"""Runtime configuration: dataclasses plus the JSON config file loader."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path

from .kvcache import PruneConfig
from .proactivity import ConditionSpec, ProactivityConfig, SkillCallSpec

DEFAULT_SKILLS_DIR = Path(__file__).parent / "skills"


@dataclass
class IngestConfig:
    chunk_seconds: float = 2.0
    cache_max_frames: int = 256
    slow_stride: int = 5


@dataclass
class MemoryConfig:
    semantic_weight: float = 0.7
    temporal_weight: float = 0.3
    action_threshold: float = 0.6
    time_constant_s: float = 30.0
    event_threshold: float = 0.5
    event_gap_s: float = 10.0
    salience_history: int = 5
    action_candidates: int = 3
    wave_size: int = 8
    hit_threshold: float = 0.8
    prune_salience: float = 0.05
    retrieval_workers: int = 4


@dataclass
class RuntimeConfig:
    ingest: IngestConfig = field(default_factory=IngestConfig)
    kv: PruneConfig = field(default_factory=PruneConfig)
    memory: MemoryConfig = field(default_factory=MemoryConfig)
    proactivity: ProactivityConfig = field(default_factory=ProactivityConfig)
    skills_dir: Path = DEFAULT_SKILLS_DIR
    endpoints: dict = field(default_factory=dict)
    device: str | None = None
    gateway_queue_cap: int = 1024


def _pick(cls, data: dict):
    names = {f.name for f in fields(cls)}
    return cls(**{k: v for k, v in data.items() if k in names})


def _parse_conditions(raw: dict) -> dict[str, ConditionSpec]:
    conditions = {}
    for key, entry in raw.items():
        calls = tuple(
            SkillCallSpec(c["skill"], c["function"], dict(c.get("args", {})))
            for c in entry.get("calls", [])
        )
        conditions[key] = ConditionSpec(
            key=key,
            labels=frozenset(entry.get("labels", [])),
            token=entry["token"],
            template=entry.get("template", ""),
            recurrence=entry.get("recurrence", "once"),
            calls=calls,
        )
    return conditions


def load_config(path: str | Path | None, base_dir: Path | None = None) -> RuntimeConfig:
    """Build a RuntimeConfig from a JSON file; missing keys keep defaults.

    Top-level ingest keys sit flat (chunk_seconds, cache_max_frames,
    slow_stride); kv/memory/proactivity/endpoints nest. A ``device`` key
    selects an endpoint override set merged over the flat ingest keys.
    """
    if path is None:
        return RuntimeConfig()
    path = Path(path)
    data = json.loads(path.read_text())
    base_dir = base_dir or path.parent

    ingest_keys = {f.name for f in fields(IngestConfig)}
    flat = {k: v for k, v in data.items() if k in ingest_keys}
    endpoints = data.get("endpoints", {})
    device = data.get("device")
    if device is not None:
        overrides = endpoints.get(device, {})
        flat.update({k: v for k, v in overrides.items() if k in ingest_keys})

    kv_raw = dict(data.get("kv", {}))
    if "layers" in kv_raw:
        kv_raw["layers"] = tuple(kv_raw["layers"])
    pro_raw = data.get("proactivity", {})
    proactivity = ProactivityConfig(
        time_template=pro_raw.get("time_template", "Time is up."),
        time_token=pro_raw.get("time_token", "<TRIG:time_due>"),
        conditions=_parse_conditions(pro_raw.get("conditions", {})),
        default_recurrence=pro_raw.get("default_recurrence", "once"),
    )

    skills_dir = data.get("skills_dir")
    if skills_dir is None:
        skills_path = DEFAULT_SKILLS_DIR
    else:
        skills_path = Path(skills_dir)
        if not skills_path.is_absolute():
            skills_path = base_dir / skills_path

    return RuntimeConfig(
        ingest=_pick(IngestConfig, flat),
        kv=_pick(PruneConfig, kv_raw),
        memory=_pick(MemoryConfig, data.get("memory", {})),
        proactivity=proactivity,
        skills_dir=skills_path,
        endpoints=endpoints,
        device=device,
        gateway_queue_cap=data.get("gateway", {}).get("queue_cap", 1024),
    )
