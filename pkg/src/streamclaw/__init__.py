"""Streaming video agent runtime.

Chunked timeline ingest, a pruned sliding-window KV cache, hierarchical
multimodal memory, proactive reminder triggering, and a tool/skill runtime,
all behind a pluggable (and fully deterministic mock) inference backend.
"""

from .backend import MockBackend, RemoteBackend, backend_from_spec
from .config import RuntimeConfig, load_config
from .events import OutEvent
from .gateway import GatewayServer, SessionConfig, run_scenario, serve
from .ingest import Chunk, Chunker, FrameRecord, SharedStreamCache, TimeAnchor, align_timestamp
from .kvcache import KVCacheEntry, KVWindow, PruneConfig
from .memory import (
    AgentView,
    MemoryNode,
    MemoryStore,
    PROACTIVITY_VIEW,
    REASONING_VIEW,
    RetrievalCommand,
)
from .proactivity import ProactiveSignal, ProactivityEngine, ReminderNode
from .session import Session, build_session
from .toolskill import SkillCall, SkillManifest, SkillRegistry, ToolSkillRuntime

__version__ = "0.1.0"

__all__ = [
    "AgentView",
    "Chunk",
    "Chunker",
    "FrameRecord",
    "GatewayServer",
    "KVCacheEntry",
    "KVWindow",
    "MemoryNode",
    "MemoryStore",
    "MockBackend",
    "OutEvent",
    "PROACTIVITY_VIEW",
    "ProactiveSignal",
    "ProactivityEngine",
    "PruneConfig",
    "REASONING_VIEW",
    "ReminderNode",
    "RemoteBackend",
    "RetrievalCommand",
    "RuntimeConfig",
    "Session",
    "SessionConfig",
    "SharedStreamCache",
    "SkillCall",
    "SkillManifest",
    "SkillRegistry",
    "TimeAnchor",
    "ToolSkillRuntime",
    "align_timestamp",
    "backend_from_spec",
    "build_session",
    "load_config",
    "run_scenario",
    "serve",
]
