"""Session output events and their transcript wire form."""

from __future__ import annotations

import json
from dataclasses import dataclass

ANSWER = "answer"
PROACTIVE = "proactive"
TOOL_RESULT = "tool_result"
SKILL_EXEC = "skill_exec"
ERROR = "error"


@dataclass
class OutEvent:
    kind: str
    t_abs_ms: int
    text: str
    query_id: str | None = None
    payload: dict | None = None

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "t_abs_ms": self.t_abs_ms}
        if self.query_id is not None:
            d["query_id"] = self.query_id
        d["text"] = self.text
        if self.payload is not None:
            d["payload"] = self.payload
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))
