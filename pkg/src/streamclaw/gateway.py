"""Scenario replay and the live-session wire protocol.

``run_scenario`` replays a scenario file through a full session at a chosen
speed and writes the transcript and signal log. ``GatewayServer`` exposes the
same session over a TCP socket speaking newline-delimited JSON: clients steer
with query/objective/pause messages and receive sequenced broadcasts of every
chunk, answer, proactive event, signal, and memory stat.

See docs/gateway-protocol.md for the field-by-field message catalog.
"""

from __future__ import annotations

import json
import os
import queue
import socket
import sys
import threading
import time
from dataclasses import dataclass
from pathlib import Path

from .backend import backend_from_spec
from .config import RuntimeConfig, load_config
from .errors import BackendUnavailable, ScenarioParseError, UnparseableObjective
from .events import OutEvent
from .memory import AgentView, REASONING_VIEW
from .proactivity import ProactiveSignal
from .scenario import FRAME, ScenarioEvent, load_scenario
from .session import Session, build_session

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_BACKEND = 3
EXIT_PORT = 4

CLIENT_TYPES = (
    "query",
    "set_objective",
    "evolve_objective",
    "cancel_objective",
    "pause",
    "resume",
    "state_request",
)

ENV_BACKEND = "STREAMCLAW_BACKEND"

_ALL_VIEW = AgentView("console", frozenset({"segment", "atomic_action", "event"}))


@dataclass
class SessionConfig:
    scenario_path: Path
    config_path: Path | None = None
    speed: float = 0.0
    backend_spec: str | None = None
    transcript_path: Path | None = None
    signal_log_path: Path | None = None
    memory_log_path: Path | None = None
    listen: tuple[str, int] | None = None
    start_paused: bool = False

    def __post_init__(self):
        if self.speed < 0:
            raise ValueError("speed must be >= 0")


def resolve_backend(spec: str | None, runtime_cfg: RuntimeConfig | None = None):
    backend = backend_from_spec(spec or os.environ.get(ENV_BACKEND, "mock"))
    if runtime_cfg is not None and getattr(backend, "is_remote", False) and runtime_cfg.kv.layers:
        backend.attention_layers = tuple(runtime_cfg.kv.layers)
    return backend


def signal_to_json(sig: ProactiveSignal) -> str:
    d: dict = {"token": sig.token, "t_abs_ms": sig.t_abs_ms}
    if sig.rid is not None:
        d["rid"] = sig.rid
    if sig.response_text is not None:
        d["response_text"] = sig.response_text
    return json.dumps(d, separators=(",", ":"))


def _advance(session: Session, t_abs_ms: int) -> None:
    """Cut and process every chunk whose boundary now_ms has reached."""
    session.chunker.observe(t_abs_ms)
    while True:
        chunk = session.chunker.cut_chunk(t_abs_ms)
        if chunk is None:
            break
        session.on_chunk(chunk)


def _replay(session: Session, events: list[ScenarioEvent], speed: float,
            gate=None) -> None:
    """Feed scenario events through the session in timestamp order.

    ``gate`` is an optional callable invoked before each event (the server
    uses it to apply steering and honor pause).
    """
    qcount = 0
    prev_t: int | None = None
    for ev in events:
        if gate is not None:
            gate()
        if speed > 0 and prev_t is not None and ev.t_abs_ms > prev_t:
            time.sleep((ev.t_abs_ms - prev_t) / 1000.0 / speed)
        prev_t = ev.t_abs_ms
        _advance(session, ev.t_abs_ms)
        if ev.kind == FRAME:
            session.cache.push_frame(ev.frame)
            session.chunker.add_frame(ev.frame)
        else:
            qcount += 1
            session.enqueue_query(f"q{qcount}", ev.text, ev.t_abs_ms)
    if events:
        final = session.chunker.flush(events[-1].t_abs_ms + 1)
        if final is not None:
            session.on_chunk(final)


def _write_outputs(cfg: SessionConfig, session: Session) -> None:
    if cfg.transcript_path is not None:
        text = "".join(ev.to_json() + "\n" for ev in session.transcript)
        Path(cfg.transcript_path).write_text(text)
    if cfg.signal_log_path is not None:
        text = "".join(signal_to_json(s) + "\n" for s in session.signals)
        Path(cfg.signal_log_path).write_text(text)
    if cfg.memory_log_path is not None:
        text = "".join(line + "\n" for line in session.memory.log_lines)
        Path(cfg.memory_log_path).write_text(text)


def _build(cfg: SessionConfig, **hooks) -> tuple[Session, list[ScenarioEvent]]:
    runtime_cfg = load_config(cfg.config_path)
    backend = resolve_backend(cfg.backend_spec, runtime_cfg)
    session = build_session(backend, runtime_cfg, **hooks)
    events = load_scenario(cfg.scenario_path, backend)
    frames = [ev.frame for ev in events if ev.kind == FRAME]
    session.runtime.register_frames(str(cfg.scenario_path), frames)
    session.runtime.register_frames(Path(cfg.scenario_path).name, frames)
    return session, events


def run_scenario(cfg: SessionConfig) -> int:
    """Replay to completion; 0 clean, 2 parse error, 3 backend failure."""
    try:
        session, events = _build(cfg)
    except ScenarioParseError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except BackendUnavailable as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    try:
        _replay(session, events, cfg.speed)
    except BackendUnavailable as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    _write_outputs(cfg, session)
    return EXIT_OK


class _Client:
    def __init__(self, sock: socket.socket):
        self.sock = sock
        self.lock = threading.Lock()
        self.alive = True

    def send_line(self, line: str) -> None:
        if not self.alive:
            return
        try:
            with self.lock:
                self.sock.sendall((line + "\n").encode("utf-8"))
        except OSError:
            self.alive = False


class GatewayServer:
    """One session loop plus a connection layer that serializes steering.

    Inbound client messages queue FIFO (bounded; overflow earns an explicit
    error reply) and apply on the session thread between scenario events.
    Every broadcast carries a sequence number; ``state_request`` with a
    ``from_seq`` replays the buffered tail for reconnecting clients.
    """

    REPLAY_BUFFER = 4096

    def __init__(self, cfg: SessionConfig):
        self.cfg = cfg
        self.session, self.events = _build(
            cfg, on_event=self._on_event, on_signal=self._on_signal
        )
        self._inbound: queue.Queue = queue.Queue(
            maxsize=self.session.config.gateway_queue_cap
        )
        self._clients: list[_Client] = []
        self._clients_lock = threading.Lock()
        self._seq = 0
        self._seq_lock = threading.Lock()
        self._buffer: list[str] = []
        self._paused = threading.Event()
        if cfg.start_paused:
            self._paused.set()
        self._stop = threading.Event()
        self.replay_done = threading.Event()
        self._listen_sock: socket.socket | None = None
        self._threads: list[threading.Thread] = []
        self._anon = 0

    # -- broadcasting ------------------------------------------------------

    def _broadcast(self, mtype: str, body: dict, reply_to: str | None = None) -> None:
        with self._seq_lock:
            seq = self._seq
            self._seq += 1
            msg: dict = {"seq": seq, "type": mtype}
            if reply_to is not None:
                msg["reply_to"] = reply_to
            msg["body"] = body
            line = json.dumps(msg, separators=(",", ":"))
            self._buffer.append(line)
            if len(self._buffer) > self.REPLAY_BUFFER:
                del self._buffer[: len(self._buffer) - self.REPLAY_BUFFER]
        with self._clients_lock:
            clients = list(self._clients)
        for client in clients:
            client.send_line(line)

    _EVENT_TYPE = {
        "answer": "answer",
        "proactive": "proactive",
        "skill_exec": "proactive",
        "tool_result": "answer",
        "error": "error",
    }

    def _on_event(self, ev: OutEvent) -> None:
        self._broadcast(self._EVENT_TYPE[ev.kind], ev.to_dict(), reply_to=ev.query_id)

    def _on_signal(self, sig: ProactiveSignal) -> None:
        body: dict = {"t_abs_ms": sig.t_abs_ms, "token": sig.token}
        if sig.rid is not None:
            body["rid"] = sig.rid
        if sig.response_text is not None:
            body["response_text"] = sig.response_text
        self._broadcast("signal", body)

    def _chunk_meta(self, chunk) -> None:
        self._broadcast(
            "chunk_meta",
            {
                "t_abs_ms": chunk.end_ms,
                "chunk_id": chunk.chunk_id,
                "start_ms": chunk.start_ms,
                "end_ms": chunk.end_ms,
                "frame_count": len(chunk.frames),
            },
        )

    # -- steering ----------------------------------------------------------

    def _apply_steering(self, client: _Client, msg: dict) -> None:
        mid = msg.get("id")
        mtype = msg.get("type")
        body = msg.get("body", {}) or {}
        session = self.session
        now = session.now_ms
        if mtype == "query":
            text = str(body.get("text", ""))
            if mid is None:
                self._anon += 1
                mid = f"anon{self._anon}"
            if self.replay_done.is_set():
                ev = session.route_query(text, now, mid)
                session.transcript.append(ev)
                self._on_event(ev)
            else:
                session.enqueue_query(mid, text, now)
            return
        if mtype == "set_objective":
            ev = session._route_proactive(str(body.get("text", "")), now, mid)
            session.transcript.append(ev)
            self._on_event(ev)
            return
        if mtype in ("evolve_objective", "cancel_objective"):
            rid = body.get("rid")
            text = "cancel" if mtype == "cancel_objective" else str(body.get("text", ""))
            try:
                node = session.engine.evolve_objective(int(rid), text, now)
            except (KeyError, TypeError, UnparseableObjective) as exc:
                ev = OutEvent("error", now, f"objective update failed: {exc}", mid)
            else:
                state = "cancelled" if node.state == "cancelled" else "armed"
                ev = OutEvent(
                    "answer", now, f"Reminder #{node.rid} {state}.", mid,
                    payload={"rid": node.rid, "state": node.state},
                )
            session.transcript.append(ev)
            self._on_event(ev)
            return
        if mtype == "pause":
            self._paused.set()
            ev = OutEvent("answer", now, "paused", mid)
            session.transcript.append(ev)
            self._on_event(ev)
            return
        if mtype == "resume":
            self._paused.clear()
            ev = OutEvent("answer", now, "resumed", mid)
            session.transcript.append(ev)
            self._on_event(ev)
            return
        if mtype == "state_request":
            from_seq = body.get("from_seq")
            if from_seq is not None:
                with self._seq_lock:
                    tail = [
                        line
                        for line in self._buffer
                        if json.loads(line)["seq"] >= int(from_seq)
                    ]
                for line in tail:
                    client.send_line(line)
            if body.get("scope") == "nodes":
                nodes = session.memory.view_nodes(
                    REASONING_VIEW if body.get("view") == "reasoning" else _ALL_VIEW,
                    int(body.get("since_ms", 0)),
                    int(body.get("until_ms", 2 ** 62)),
                )
                payload = {
                    "t_abs_ms": now,
                    "nodes": [
                        {
                            "node_id": n.node_id,
                            "level": n.level,
                            "start_ms": n.start_ms,
                            "tau": n.tau,
                            "s": n.s,
                            "salience": n.salience,
                            "children": list(n.children),
                        }
                        for n in nodes
                    ],
                }
            else:
                payload = {"t_abs_ms": now, **session.memory_stats()}
            self._broadcast("memory_stats", payload, reply_to=mid)
            return
        client.send_line(
            json.dumps(
                {
                    "seq": -1,
                    "type": "error",
                    "reply_to": mid,
                    "body": {"t_abs_ms": now, "reason": f"unknown message type {mtype!r}"},
                },
                separators=(",", ":"),
            )
        )

    def _drain_steering(self, timeout: float = 0.0) -> None:
        while True:
            try:
                client, msg = self._inbound.get(timeout=timeout)
            except queue.Empty:
                return
            self._apply_steering(client, msg)
            timeout = 0.0

    def _gate(self) -> None:
        self._drain_steering()
        while self._paused.is_set() and not self._stop.is_set():
            self._drain_steering(timeout=0.02)

    # -- socket plumbing -----------------------------------------------------

    def _reader(self, client: _Client) -> None:
        fh = client.sock.makefile("r", encoding="utf-8")
        try:
            for raw in fh:
                line = raw.strip()
                if not line:
                    continue
                try:
                    msg = json.loads(line)
                except json.JSONDecodeError:
                    client.send_line(
                        json.dumps(
                            {"seq": -1, "type": "error", "body": {"t_abs_ms": 0, "reason": "invalid JSON"}},
                            separators=(",", ":"),
                        )
                    )
                    continue
                try:
                    self._inbound.put_nowait((client, msg))
                except queue.Full:
                    client.send_line(
                        json.dumps(
                            {
                                "seq": -1,
                                "type": "error",
                                "reply_to": msg.get("id"),
                                "body": {"t_abs_ms": 0, "reason": "queue_full"},
                            },
                            separators=(",", ":"),
                        )
                    )
        except OSError:
            pass
        finally:
            client.alive = False
            with self._clients_lock:
                if client in self._clients:
                    self._clients.remove(client)

    def _accept_loop(self) -> None:
        # closing a blocked listener does not wake accept() on Linux; poll instead
        self._listen_sock.settimeout(0.1)
        while not self._stop.is_set():
            try:
                sock, _ = self._listen_sock.accept()
            except TimeoutError:
                continue
            except OSError:
                return
            client = _Client(sock)
            with self._clients_lock:
                self._clients.append(client)
            t = threading.Thread(target=self._reader, args=(client,), daemon=True)
            t.start()

    def _replay_thread(self) -> None:
        session = self.session
        original_on_chunk = session.on_chunk

        def traced(chunk):
            events = original_on_chunk(chunk)
            self._chunk_meta(chunk)
            return events

        session.on_chunk = traced
        try:
            self._gate()
            _replay(session, self.events, self.cfg.speed, gate=self._gate)
        except BackendUnavailable as exc:
            self._broadcast("error", {"t_abs_ms": session.now_ms, "reason": str(exc)})
        finally:
            session.on_chunk = original_on_chunk
            self.replay_done.set()
        while not self._stop.is_set():
            self._drain_steering(timeout=0.05)

    # -- lifecycle -------------------------------------------------------------

    def start(self) -> None:
        host, port = self.cfg.listen
        self._listen_sock = socket.create_server((host, port))
        for target in (self._accept_loop, self._replay_thread):
            t = threading.Thread(target=target, daemon=True)
            t.start()
            self._threads.append(t)

    @property
    def address(self) -> tuple[str, int]:
        return self._listen_sock.getsockname()[:2]

    def stop(self) -> None:
        self._stop.set()
        self._paused.clear()
        if self._listen_sock is not None:
            try:
                self._listen_sock.close()
            except OSError:
                pass
        for t in self._threads:
            t.join(timeout=2.0)
        with self._clients_lock:
            for client in self._clients:
                try:
                    client.sock.close()
                except OSError:
                    pass
            self._clients.clear()
        _write_outputs(self.cfg, self.session)


def serve(cfg: SessionConfig) -> int:
    """Serve until interrupted; 2 parse error, 3 backend failure, 4 port busy."""
    try:
        server = GatewayServer(cfg)
    except ScenarioParseError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except BackendUnavailable as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    try:
        server.start()
    except OSError as exc:
        print(f"cannot listen on {cfg.listen}: {exc}", file=sys.stderr)
        return EXIT_PORT
    host, port = server.address
    print(f"serving on {host}:{port}", file=sys.stderr)
    try:
        while True:
            time.sleep(0.5)
    except KeyboardInterrupt:
        pass
    finally:
        server.stop()
    return EXIT_OK
