"""Scenario file loading: line-delimited JSON records on one absolute timeline.

Record shapes:
  {"type": "anchor", "device_rel_s": F, "abs_ms": I}
  {"type": "frame", "t_rel_s": F, "feat": [64 floats]?, "labels": [...], "summary": S?}
  {"type": "query", "t_rel_s": F, "text": S}

Anchors apply to every later line until replaced. Frames without ``feat``
get the deterministic text embedding of their summary, or zeros. Any
malformed line, unknown type, missing anchor, or time regression is a
parse error carrying the 1-based line number.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import ScenarioParseError
from .ingest import FrameRecord, TimeAnchor, align_timestamp
from .vectors import FEATURE_DIM, zeros

FRAME = "frame"
QUERY = "query"


@dataclass(frozen=True)
class ScenarioEvent:
    kind: str
    t_abs_ms: int
    line_no: int
    frame: FrameRecord | None = None
    text: str | None = None


def _number(obj: dict, key: str, line_no: int) -> float:
    if key not in obj:
        raise ScenarioParseError(line_no, f"missing field {key!r}")
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioParseError(line_no, f"field {key!r} must be a number")
    return value


def load_scenario(path: str | Path, backend) -> list[ScenarioEvent]:
    events: list[ScenarioEvent] = []
    anchor: TimeAnchor | None = None
    last_t: int | None = None
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ScenarioParseError(line_no, f"invalid JSON ({exc.msg})") from exc
            if not isinstance(obj, dict):
                raise ScenarioParseError(line_no, "record must be an object")
            kind = obj.get("type")
            if kind == "anchor":
                rel = _number(obj, "device_rel_s", line_no)
                abs_ms = _number(obj, "abs_ms", line_no)
                if abs_ms != int(abs_ms) or abs_ms < 0:
                    raise ScenarioParseError(line_no, "abs_ms must be a nonnegative integer")
                anchor = TimeAnchor(float(rel), int(abs_ms))
                continue
            if kind not in (FRAME, QUERY):
                raise ScenarioParseError(line_no, f"unknown type {kind!r}")
            if anchor is None:
                raise ScenarioParseError(line_no, "no anchor set before timed record")
            t_abs = align_timestamp(float(_number(obj, "t_rel_s", line_no)), anchor)
            if last_t is not None and t_abs < last_t:
                raise ScenarioParseError(
                    line_no, f"time regression: {t_abs} ms after {last_t} ms"
                )
            last_t = t_abs
            if kind == FRAME:
                labels = obj.get("labels")
                if not isinstance(labels, list) or not all(isinstance(x, str) for x in labels):
                    raise ScenarioParseError(line_no, "labels must be a list of strings")
                summary = obj.get("summary", "")
                if not isinstance(summary, str):
                    raise ScenarioParseError(line_no, "summary must be a string")
                feat = obj.get("feat")
                if feat is None:
                    feat = backend.embed_text(summary).v if summary else zeros()
                else:
                    if (
                        not isinstance(feat, list)
                        or len(feat) != FEATURE_DIM
                        or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in feat)
                    ):
                        raise ScenarioParseError(
                            line_no, f"feat must be a list of {FEATURE_DIM} numbers"
                        )
                    feat = [float(x) for x in feat]
                frame = FrameRecord(t_abs, feat, list(labels), summary)
                events.append(ScenarioEvent(FRAME, t_abs, line_no, frame=frame))
            else:
                text = obj.get("text")
                if not isinstance(text, str):
                    raise ScenarioParseError(line_no, "query text must be a string")
                events.append(ScenarioEvent(QUERY, t_abs, line_no, text=text))
    return events
