from __future__ import annotations

import random

import pytest

from streamclaw.errors import UnparseableObjective
from streamclaw.proactivity import (
    ARMED,
    CANCELLED,
    ConditionSpec,
    EVENT_GROUNDING,
    FIRED,
    PERSISTENT,
    ProactivityConfig,
    ProactivityEngine,
    SILENT_TOKEN,
    TIME_AWARE,
)

from .conftest import make_chunk, make_frame


def _engine(backend, **kw) -> ProactivityEngine:
    conditions = {
        "a goal is scored": ConditionSpec(
            key="a goal is scored",
            labels=frozenset({"goal_scored"}),
            token="<TRIG:goal>",
            template="A goal has been scored. {labels}",
        ),
        "driver fatigue": ConditionSpec(
            key="driver fatigue",
            labels=frozenset({"eyes_closed", "yawning"}),
            token="<TRIG:driver_fatigue>",
            template="Fatigue detected: {labels}",
        ),
    }
    return ProactivityEngine(backend, ProactivityConfig(conditions=conditions, **kw))


def _chunk(start, end, labels=()):
    return make_chunk(0, start, end, [make_frame(start, labels=labels)])


class TestCreateReminder:
    def test_five_minutes(self, backend):
        node = _engine(backend).create_reminder("Remind me to get off in 5 minute", 0)
        assert node.kind == TIME_AWARE
        assert node.trigger_at_ms == 300_000
        assert node.state == ARMED

    def test_seconds_unit(self, backend):
        node = _engine(backend).create_reminder("notify me in 30 seconds", 12_000)
        assert node.trigger_at_ms == 42_000

    def test_event_grounding_mapping(self, backend):
        node = _engine(backend).create_reminder("Alert me when a goal is scored", 0)
        assert node.kind == EVENT_GROUNDING
        assert node.condition_labels == frozenset({"goal_scored"})
        assert node.condition_text == "a goal is scored"
        assert node.token == "<TRIG:goal>"

    def test_unparseable(self, backend):
        with pytest.raises(UnparseableObjective):
            _engine(backend).create_reminder("remind me when pigs fly", 0)

    def test_rids_are_monotone(self, backend):
        engine = _engine(backend)
        a = engine.create_reminder("in 1 minute", 0)
        b = engine.create_reminder("in 2 minute", 0)
        assert (a.rid, b.rid) == (1, 2)


class TestCheckChunk:
    def test_time_boundary(self, backend):
        engine = _engine(backend)
        engine.create_reminder("remind me in 5 minute", 0)
        signals = engine.check_chunk(_chunk(296_000, 298_000))
        assert [s.token for s in signals] == [SILENT_TOKEN]
        signals = engine.check_chunk(_chunk(298_000, 300_000))
        assert len(signals) == 1
        assert signals[0].token == "<TRIG:time_due>"

    def test_fire_exactly_at_trigger(self, backend):
        # end_ms == trigger_at_ms fires: the firing rule is end >= trigger
        engine = _engine(backend)
        engine.create_reminder("remind me in 5 minute", 0)
        signals = engine.check_chunk(_chunk(299_000, 300_000))
        assert signals[0].token == "<TRIG:time_due>"

    def test_event_fire_renders_template(self, backend):
        engine = _engine(backend)
        node = engine.create_reminder("watch for a goal is scored", 0)
        signals = engine.check_chunk(_chunk(0, 2000, labels=["goal_scored"]))
        assert signals[0].token == "<TRIG:goal>"
        assert signals[0].rid == node.rid
        assert signals[0].response_text == "A goal has been scored. goal_scored"

    def test_silent_when_nothing_armed(self, backend):
        signals = _engine(backend).check_chunk(_chunk(0, 2000))
        assert [s.token for s in signals] == [SILENT_TOKEN]
        assert signals[0].rid is None and signals[0].response_text is None

    def test_once_node_fires_exactly_once(self, backend):
        engine = _engine(backend)
        engine.create_reminder("watch for a goal is scored", 0)
        fired = []
        for i in range(5):
            sig = engine.check_chunk(_chunk(i * 2000, (i + 1) * 2000, labels=["goal_scored"]))
            fired.extend(s for s in sig if s.token != SILENT_TOKEN)
        assert len(fired) == 1

    def test_persistent_node_keeps_firing(self, backend):
        engine = _engine(backend, default_recurrence=PERSISTENT)
        node = engine.create_reminder("remind me in 1 minute", 0)
        assert node.recurrence == PERSISTENT
        for i in range(3):
            sig = engine.check_chunk(_chunk(60_000 + i * 2000, 62_000 + i * 2000))
            assert sig[0].token == "<TRIG:time_due>"

    def test_three_nodes_three_tokens_single_pass(self, backend):
        engine = _engine(backend)
        engine.create_reminder("remind me in 1 minute", 0)
        engine.create_reminder("watch for a goal is scored", 0)
        engine.create_reminder("alert on driver fatigue", 0)
        chunk = make_chunk(
            0, 60_000, 62_000, [make_frame(60_500, labels=["goal_scored", "eyes_closed"])]
        )
        signals = engine.check_chunk(chunk)
        assert len(signals) == 3
        assert [s.token for s in signals] == [
            "<TRIG:time_due>", "<TRIG:goal>", "<TRIG:driver_fatigue>",
        ]

    def test_every_token_registered(self, backend):
        engine = _engine(backend)
        engine.create_reminder("remind me in 1 minute", 0)
        engine.create_reminder("watch for a goal is scored", 0)
        chunk = make_chunk(0, 60_000, 61_000, [make_frame(60_000, labels=["goal_scored"])])
        for sig in engine.check_chunk(chunk):
            assert sig.token == SILENT_TOKEN or sig.token in engine.token_table

    def test_randomized_first_fire_latency(self, backend):
        rng = random.Random(17)
        for _ in range(50):
            chunk_ms = rng.choice([500, 1000, 2000, 3000])
            trigger = rng.randrange(1, 50_000)
            engine = _engine(backend)
            engine.create_reminder(f"remind me in {trigger} seconds", 0)
            trigger_ms = trigger * 1000
            fired_at = None
            end = 0
            while fired_at is None:
                start, end = end, end + chunk_ms
                sig = engine.check_chunk(_chunk(start, end))
                if sig[0].token != SILENT_TOKEN:
                    fired_at = end
            assert fired_at >= trigger_ms
            assert fired_at - trigger_ms <= chunk_ms


class TestEvolveObjective:
    def test_reparse_same_rid(self, backend):
        engine = _engine(backend)
        node = engine.create_reminder("remind me in 5 minute", 0)
        evolved = engine.evolve_objective(node.rid, "remind me in 2 minute", 60_000)
        assert evolved.rid == node.rid
        assert evolved.trigger_at_ms == 180_000

    def test_cancel_sentinel(self, backend):
        engine = _engine(backend)
        node = engine.create_reminder("remind me in 1 minute", 0)
        engine.evolve_objective(node.rid, "cancel", 0)
        assert node.state == CANCELLED
        signals = engine.check_chunk(_chunk(60_000, 62_000))
        assert signals[0].token == SILENT_TOKEN

    def test_fired_once_node_rearms_and_fires_again(self, backend):
        engine = _engine(backend)
        node = engine.create_reminder("remind me in 1 minute", 0)
        assert engine.check_chunk(_chunk(60_000, 62_000))[0].rid == node.rid
        assert node.state == FIRED
        engine.evolve_objective(node.rid, "remind me in 1 minute", 62_000)
        assert node.state == ARMED
        sig = engine.check_chunk(_chunk(122_000, 124_000))
        assert sig[0].rid == node.rid

    def test_unparseable_leaves_node_unchanged(self, backend):
        engine = _engine(backend)
        node = engine.create_reminder("remind me in 5 minute", 0)
        before = (node.kind, node.trigger_at_ms, node.state)
        with pytest.raises(UnparseableObjective):
            engine.evolve_objective(node.rid, "remind me when pigs fly", 0)
        assert (node.kind, node.trigger_at_ms, node.state) == before

    def test_kind_can_flip(self, backend):
        engine = _engine(backend)
        node = engine.create_reminder("remind me in 5 minute", 0)
        engine.evolve_objective(node.rid, "watch for a goal is scored", 0)
        assert node.kind == EVENT_GROUNDING
        assert node.trigger_at_ms is None


class TestRespond:
    def test_plain_template_verbatim(self, backend):
        engine = _engine(backend, time_template="Time is up. Please get ready to get off")
        node = engine.create_reminder("remind me in 1 minute", 0)
        assert engine.respond(node, _chunk(60_000, 62_000)) == (
            "Time is up. Please get ready to get off"
        )

    def test_labels_substitution(self, backend):
        engine = _engine(backend)
        node = engine.create_reminder("watch for a goal is scored", 0)
        node.response_template = "{labels}"
        chunk = _chunk(0, 2000, labels=["goal_scored"])
        assert engine.respond(node, chunk) == "goal_scored"

    def test_time_substitution_and_determinism(self, backend):
        engine = _engine(backend)
        node = engine.create_reminder("remind me in 1 minute", 0)
        node.response_template = "t={time}"
        chunk = _chunk(60_000, 62_000)
        assert engine.respond(node, chunk) == "t=62000"
        assert engine.respond(node, chunk) == engine.respond(node, chunk)


class TestRemoteRespond:
    def test_transport_failure_falls_back_to_template(self, backend):
        from streamclaw.errors import BackendUnavailable

        class FlakyRemote:
            is_remote = True

            def caption_chunk(self, c):
                return backend.caption_chunk(c)

            def decode(self, context, snapshot):
                raise BackendUnavailable("down")

        engine = ProactivityEngine(FlakyRemote(), ProactivityConfig())
        node = engine.create_reminder("remind me in 1 minute", 0)
        node.response_template = "Time is up at {time}."
        assert engine.respond(node, _chunk(60_000, 62_000)) == "Time is up at 62000."

    def test_remote_generation_wins_when_available(self, backend):
        class EchoRemote:
            is_remote = True

            def caption_chunk(self, c):
                return backend.caption_chunk(c)

            def decode(self, context, snapshot):
                from streamclaw.backend import DecodeStep

                return [DecodeStep("generated", [0.0] * 64, {})]

        engine = ProactivityEngine(EchoRemote(), ProactivityConfig())
        node = engine.create_reminder("remind me in 1 minute", 0)
        assert engine.respond(node, _chunk(60_000, 62_000)) == "generated"


class TestTokenTable:
    def test_silent_is_reserved(self, backend):
        engine = _engine(backend)
        with pytest.raises(ValueError):
            engine.register_token(SILENT_TOKEN)

    def test_registration(self, backend):
        engine = _engine(backend)
        engine.register_token("<TRIG:fall_detected>")
        assert "<TRIG:fall_detected>" in engine.token_table
