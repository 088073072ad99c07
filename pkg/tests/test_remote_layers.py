from __future__ import annotations

import json

from streamclaw.backend import MockBackend, RemoteBackend
from streamclaw.config import load_config
from streamclaw.gateway import resolve_backend


def test_config_layers_reach_remote_backend(tmp_path):
    conf = tmp_path / "conf.json"
    conf.write_text(json.dumps({"kv": {"layers": [4, 9, 13]}}))
    backend = resolve_backend("remote:127.0.0.1:65500", load_config(conf))
    assert isinstance(backend, RemoteBackend)
    assert backend.attention_layers == (4, 9, 13)


def test_mock_backend_ignores_layers(tmp_path):
    conf = tmp_path / "conf.json"
    conf.write_text(json.dumps({"kv": {"layers": [4]}}))
    backend = resolve_backend("mock", load_config(conf))
    assert isinstance(backend, MockBackend)
