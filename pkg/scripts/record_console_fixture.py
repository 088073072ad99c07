#!/usr/bin/env python3
"""Record a live gateway session into the console's test fixtures.

Drives a served household_fall scenario with scripted steering covering the
full objective lifecycle (create, fire, evolve, re-fire, cancel), a chat
query, an unparseable objective, and both state_request scopes. Writes:

  frontend/tests/fixtures/feed.jsonl      every server line, verbatim
  frontend/tests/fixtures/steering.jsonl  every client line, verbatim
"""

from __future__ import annotations

import json
import socket
from pathlib import Path

from streamclaw.gateway import GatewayServer, SessionConfig

ROOT = Path(__file__).resolve().parents[1]
FIXTURES = ROOT / "frontend" / "tests" / "fixtures"


def main() -> None:
    FIXTURES.mkdir(parents=True, exist_ok=True)
    cfg = SessionConfig(
        scenario_path=ROOT / "scenarios" / "household_fall.jsonl",
        config_path=ROOT / "scenarios" / "household_fall.config.json",
        listen=("127.0.0.1", 0),
        start_paused=True,
        # replay at 25x so mid-stream steering (evolve after the first fire)
        # lands while chunks are still flowing
        speed=25.0,
    )
    server = GatewayServer(cfg)
    server.start()
    sent: list[str] = []
    received: list[str] = []
    sock = socket.create_connection(server.address, timeout=10)
    sock.settimeout(10)
    fh = sock.makefile("r", encoding="utf-8")

    last_seen = 0

    def send(mid: str, mtype: str, body_pairs: list[tuple[str, object]]) -> None:
        body = dict(body_pairs + [("t_abs_ms", last_seen)])
        line = json.dumps({"id": mid, "type": mtype, "body": body}, separators=(",", ":"))
        sent.append(line)
        sock.sendall((line + "\n").encode())

    def wait(pred):
        nonlocal last_seen
        while True:
            line = fh.readline()
            if not line:
                raise SystemExit("server closed early")
            received.append(line.rstrip("\n"))
            msg = json.loads(line)
            t = msg.get("body", {}).get("t_abs_ms")
            if isinstance(t, int):
                last_seen = max(last_seen, t)
            if pred(msg):
                return msg

    send("o-1", "set_objective", [("text", "Remind me to check the oven in 10 seconds")])
    ack = wait(lambda m: m.get("reply_to") == "o-1")
    rid = ack["body"]["payload"]["rid"]

    send("o-2", "set_objective", [("text", "please do something impossible")])
    wait(lambda m: m.get("reply_to") == "o-2")

    send("q-1", "query", [("text", "What color is the car?")])
    send("c-1", "resume", [])
    wait(lambda m: m.get("reply_to") == "c-1")
    wait(lambda m: m.get("reply_to") == "q-1")
    wait(
        lambda m: m["type"] == "proactive"
        and m["body"].get("payload", {}).get("rid") == rid
    )

    send("o-3", "evolve_objective", [("rid", rid), ("text", "Remind me to check the oven in 5 seconds")])
    wait(lambda m: m.get("reply_to") == "o-3")
    wait(
        lambda m: m["type"] == "proactive"
        and m["body"].get("payload", {}).get("rid") == rid
    )

    send("o-4", "cancel_objective", [("rid", rid)])
    wait(lambda m: m.get("reply_to") == "o-4")

    server.replay_done.wait(30)
    send("s-1", "state_request", [("scope", "stats")])
    wait(lambda m: m.get("reply_to") == "s-1")
    send("s-2", "state_request", [("scope", "nodes"), ("since_ms", 0), ("until_ms", 10 ** 9)])
    wait(lambda m: m.get("reply_to") == "s-2" and "nodes" in m["body"])

    sock.close()
    server.stop()

    (FIXTURES / "feed.jsonl").write_text("".join(line + "\n" for line in received))
    (FIXTURES / "steering.jsonl").write_text("".join(line + "\n" for line in sent))
    print(f"recorded {len(received)} feed lines, {len(sent)} steering lines")
    kinds = {}
    for line in received:
        kinds[json.loads(line)["type"]] = kinds.get(json.loads(line)["type"], 0) + 1
    print("feed message types:", dict(sorted(kinds.items())))


if __name__ == "__main__":
    main()
