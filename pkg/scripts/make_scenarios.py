#!/usr/bin/env python3
"""Regenerate the checked-in golden scenario inputs deterministically."""

from __future__ import annotations

import json
from pathlib import Path

OUT = Path(__file__).resolve().parents[1] / "scenarios"


def _line(obj) -> str:
    return json.dumps(obj, separators=(",", ":")) + "\n"


def anchor(device_rel_s=0.0, abs_ms=0):
    return _line({"type": "anchor", "device_rel_s": device_rel_s, "abs_ms": abs_ms})


def frame(t, labels, summary=None):
    obj = {"type": "frame", "t_rel_s": t, "labels": labels}
    if summary is not None:
        obj["summary"] = summary
    return _line(obj)


def query(t, text):
    return _line({"type": "query", "t_rel_s": t, "text": text})


def write(name: str, lines: list[str], config: dict):
    (OUT / f"{name}.jsonl").write_text("".join(lines))
    (OUT / f"{name}.config.json").write_text(json.dumps(config, indent=2) + "\n")
    print(f"wrote {name}: {len(lines)} lines")


def driver_fatigue():
    lines = [anchor()]
    for t in range(0, 30):
        summary = "steady traffic on the ring road" if t % 10 == 0 else None
        lines.append(frame(float(t), ["road_clear"], summary))
        if t == 3:
            lines.append(query(3.2, "Watch for driver fatigue"))
    for t in (30, 31):
        lines.append(frame(float(t), ["yawning"], "driver yawning at the wheel"))
    for t in range(32, 45):
        lines.append(frame(float(t), ["road_clear"]))
    lines.append(
        query(45.0, "What has changed in traffic conditions compared to five minutes ago?")
    )
    for t in range(45, 50):
        lines.append(frame(float(t), ["road_clear"]))
    lines.append(query(50.0, "What color is the car?"))
    for t in range(50, 66):
        lines.append(frame(float(t), ["road_clear"]))
    config = {
        "chunk_seconds": 2.0,
        "kv": {"window_seconds": 20.0},
        "proactivity": {
            "conditions": {
                "driver fatigue": {
                    "labels": [
                        "eyes_closed", "yawning", "phone_use", "head_down", "gaze_deviation",
                    ],
                    "token": "<TRIG:driver_fatigue>",
                    "template": "Fatigue detected: {labels}",
                    "calls": [
                        {"skill": "driver_monitoring", "function": "driver_fatigue_warning"}
                    ],
                }
            }
        },
    }
    write("driver_fatigue", lines, config)


def household_fall():
    lines = [anchor()]
    for t in range(0, 20):
        summary = "living room is quiet" if t % 8 == 0 else None
        lines.append(frame(float(t), ["room_tidy"], summary))
        if t == 0:
            lines.append(query(0.5, "Alert me if a person falls down"))
    for t in (20, 21):
        lines.append(frame(float(t), ["person_fallen"], "an elderly man lies on the floor"))
    for t in range(22, 50):
        lines.append(frame(float(t), ["room_tidy"]))
    config = {
        "chunk_seconds": 2.0,
        "kv": {"window_seconds": 20.0},
        "proactivity": {
            "conditions": {
                "a person falls": {
                    "labels": ["person_fallen"],
                    "token": "<TRIG:fall_detected>",
                    "template": "Fall detected. {labels}",
                    "calls": [
                        {
                            "skill": "household_care",
                            "function": "proactive_caring_inquiry",
                            "args": {"query": "Are you okay? I detected a fall."},
                        },
                        {"skill": "household_care", "function": "dial_emergency_number"},
                    ],
                }
            }
        },
    }
    write("household_fall", lines, config)


def tutor_proactive():
    lines = [anchor()]
    for t in range(0, 10):
        lines.append(frame(float(t), ["classroom"], "students working" if t == 0 else None))
        if t == 0:
            lines.append(query(0.5, "Notify me when a student raises a hand"))
    lines.append(frame(10.0, ["hand_raised"], "a student raises a hand"))
    for t in range(11, 80):
        lines.append(frame(float(t), ["classroom"]))
    config = {
        "chunk_seconds": 2.0,
        "kv": {"window_seconds": 20.0},
        "proactivity": {
            "time_template": "Time is up. Checking on the student's progress now.",
            "conditions": {
                "raises a hand": {
                    "labels": ["hand_raised"],
                    "token": "<TRIG:hand_raised>",
                    "template": "A student raised a hand.",
                    "calls": [
                        {
                            "skill": "education_tutor",
                            "function": "create_proactive_node",
                            "args": {"query": "remind me to check progress in 1 minute"},
                        }
                    ],
                }
            },
        },
    }
    write("tutor_proactive", lines, config)


def trip_reminder():
    lines = [anchor()]
    for t in range(0, 310, 2):
        summary = f"passing mile marker {t // 20}" if t % 20 == 0 else None
        lines.append(frame(float(t), ["highway"], summary))
        if t == 4:
            lines.append(query(4.0, "Remind me to get off in 5 minute"))
    config = {
        "chunk_seconds": 2.0,
        "kv": {"window_seconds": 20.0},
        "proactivity": {"time_template": "Time is up. Please get ready to get off"},
    }
    write("trip_reminder", lines, config)


if __name__ == "__main__":
    OUT.mkdir(exist_ok=True)
    driver_fatigue()
    household_fall()
    tutor_proactive()
    trip_reminder()
