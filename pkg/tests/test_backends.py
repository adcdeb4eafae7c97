import base64
import json
import socket
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from waterway_qa.backends import (
    BackendProfile,
    ChatMessage,
    EmbeddingVector,
    HttpBackend,
    MockBackend,
    MockRule,
    MockScript,
    Role,
    mock_profile,
    sequential_rules,
)
from waterway_qa.errors import (
    BackendFailure,
    InvalidArgument,
    ProtocolError,
    TransportError,
)


def make_mock(role=Role.REASONER, rules=None, **script_kwargs):
    script = MockScript(rules=rules or [], **script_kwargs)
    return MockBackend(mock_profile(role), script)


def user(text, frames=()):
    return ChatMessage(role="user", text=text, frames=tuple(frames))


# --- mock backend -------------------------------------------------------------


def test_mock_rule_lookup():
    backend = make_mock(rules=[MockRule(contains="hello", response="world")])
    assert backend.chat([user("hello")]).response_text == "world"


def test_mock_requires_user_message():
    backend = make_mock(default_response="x")
    with pytest.raises(InvalidArgument):
        backend.chat([ChatMessage(role="system", text="only system")])


def test_mock_unmatched_without_default_fails():
    backend = make_mock()
    with pytest.raises(BackendFailure):
        backend.chat([user("anything")])


def test_mock_sequential_rules_by_call_index():
    rules = sequential_rules("reasoner", ["first", "second"])
    backend = make_mock(rules=rules)
    assert backend.chat([user("q")]).response_text == "first"
    assert backend.chat([user("q")]).response_text == "second"


def test_mock_transcripts_are_reproducible():
    def run():
        backend = make_mock(
            rules=[
                MockRule(contains="alpha", response="A"),
                MockRule(index=1, response="B"),
            ],
            default_response="Z",
        )
        out = [
            backend.chat([user("alpha one")]).response_text,
            backend.chat([user("beta")]).response_text,
            backend.chat([user("gamma")]).response_text,
        ]
        return out

    assert run() == run() == ["A", "B", "Z"]


def test_mock_captures_frame_attachments():
    backend = make_mock(default_response="ok")
    backend.chat([user("look", frames=("f1.jpg", "f2.jpg", "f3.jpg", "f4.jpg"))])
    attached = sum(len(m.frames) for m in backend.exchanges[0].messages)
    assert attached == 4


def test_mock_embed_explicit_geometry():
    rules = [
        MockRule(role="embedder", equals="a", vector=(1.0, 0.0)),
        MockRule(role="embedder", equals="b", vector=(0.0, 1.0)),
    ]
    backend = make_mock(role=Role.EMBEDDER, rules=rules)
    va, vb = backend.embed(["a", "b"])
    assert va.values == (1.0, 0.0)
    assert vb.values == (0.0, 1.0)


def test_mock_embed_same_text_same_vector():
    backend = make_mock(role=Role.EMBEDDER, rules=[MockRule(equals="a", vector=(2.0, 0.0))])
    va1, va2 = backend.embed(["a", "a"])
    assert va1 == va2


def test_embed_normalizes_vectors():
    backend = make_mock(role=Role.EMBEDDER, rules=[MockRule(equals="t", vector=(3.0, 4.0))])
    (v,) = backend.embed(["t"])
    assert v.values == pytest.approx((0.6, 0.8))
    assert sum(x * x for x in v.values) == pytest.approx(1.0, abs=1e-12)


def test_embed_rejects_blank_text():
    backend = make_mock(role=Role.EMBEDDER, default_vector=(1.0,))
    with pytest.raises(InvalidArgument):
        backend.embed([])
    with pytest.raises(InvalidArgument):
        backend.embed(["ok", "   "])


def test_embed_dimension_mismatch_is_protocol_error():
    rules = [
        MockRule(equals="a", vector=(1.0, 0.0)),
        MockRule(equals="b", vector=(1.0, 0.0, 0.0)),
    ]
    backend = make_mock(role=Role.EMBEDDER, rules=rules)
    with pytest.raises(ProtocolError):
        backend.embed(["a", "b"])


def test_embed_dimension_pinned_per_instance():
    rules = [
        MockRule(equals="a", vector=(1.0, 0.0)),
        MockRule(equals="b", vector=(1.0, 0.0, 0.0)),
    ]
    backend = make_mock(role=Role.EMBEDDER, rules=rules)
    backend.embed(["a"])
    with pytest.raises(ProtocolError):
        backend.embed(["b"])


def test_zero_vector_rejected():
    with pytest.raises(ProtocolError):
        EmbeddingVector.normalized((0.0, 0.0))


def test_max_parallel_interleaving_is_bounded():
    profile = BackendProfile(
        role=Role.REASONER,
        endpoint="mock://local",
        model_id="scripted",
        max_parallel=3,
    )
    backend = MockBackend(profile, MockScript(default_response="ok"), delay_s=0.02)
    with ThreadPoolExecutor(max_workers=12) as pool:
        list(pool.map(lambda _: backend.chat([user("q")]), range(24)))
    assert backend.chat_call_count == 24
    assert backend.peak_in_flight <= 3


# --- HTTP backend --------------------------------------------------------------


class _Script:
    """Mutable behavior shared with the stub server handler."""

    def __init__(self):
        self.fail_first_with = None
        self.chat_text = "stub answer"
        self.raw_body = None
        self.captured = []


def _make_handler(script: _Script):
    class Handler(BaseHTTPRequestHandler):
        def do_POST(self):
            length = int(self.headers.get("Content-Length", "0"))
            body = json.loads(self.rfile.read(length) or b"{}")
            script.captured.append((self.path, body, dict(self.headers)))
            if script.fail_first_with is not None:
                status = script.fail_first_with
                script.fail_first_with = None
                self.send_response(status)
                self.end_headers()
                self.wfile.write(b"{}")
                return
            if script.raw_body is not None:
                payload = script.raw_body
            elif self.path.endswith("/embeddings"):
                payload = json.dumps(
                    {
                        "data": [
                            {"index": i, "embedding": [float(len(t)), 1.0]}
                            for i, t in enumerate(body["input"])
                        ]
                    }
                ).encode()
            else:
                payload = json.dumps(
                    {
                        "choices": [{"message": {"content": script.chat_text}}],
                        "usage": {"prompt_tokens": 5, "completion_tokens": 2},
                    }
                ).encode()
            self.send_response(200)
            self.send_header("Content-Type", "application/json")
            self.end_headers()
            self.wfile.write(payload)

        def log_message(self, *args):
            pass

    return Handler


@pytest.fixture()
def stub_server():
    script = _Script()
    server = ThreadingHTTPServer(("127.0.0.1", 0), _make_handler(script))
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_port}", script
    server.shutdown()
    thread.join(timeout=2)


def http_backend(endpoint, role=Role.REASONER, timeout_s=5.0, max_retries=1):
    profile = BackendProfile(
        role=role,
        endpoint=endpoint,
        model_id="test-model",
        timeout_s=timeout_s,
        max_retries=max_retries,
    )
    return HttpBackend(profile, backoff_s=0.01)


def test_http_chat_round_trip(stub_server):
    endpoint, script = stub_server
    backend = http_backend(endpoint)
    exchange = backend.chat([user("ping")])
    assert exchange.response_text == "stub answer"
    assert exchange.latency_ms >= 0.0
    assert exchange.token_usage == {"prompt_tokens": 5, "completion_tokens": 2}
    path, body, _ = script.captured[0]
    assert path.endswith("/chat/completions")
    assert body["model"] == "test-model"
    assert body["messages"][0] == {"role": "user", "content": "ping"}


def test_http_chat_attaches_base64_image_parts(stub_server, tmp_path):
    endpoint, script = stub_server
    frame_paths = []
    for i in range(4):
        p = tmp_path / f"frame{i}.jpg"
        p.write_bytes(b"JPEGDATA%d" % i)
        frame_paths.append(str(p))
    backend = http_backend(endpoint)
    backend.chat([user("describe", frames=frame_paths)])
    _, body, _ = script.captured[0]
    parts = body["messages"][0]["content"]
    image_parts = [p for p in parts if p["type"] == "image_url"]
    assert len(image_parts) == 4
    url = image_parts[0]["image_url"]["url"]
    prefix, encoded = url.split(",", 1)
    assert prefix == "data:image/jpeg;base64"
    assert base64.b64decode(encoded) == b"JPEGDATA0"


def test_http_embed_round_trip(stub_server):
    endpoint, _ = stub_server
    backend = http_backend(endpoint, role=Role.EMBEDDER)
    vectors = backend.embed(["ab", "xyz"])
    assert len(vectors) == 2
    assert vectors[0].dim == 2
    assert sum(v * v for v in vectors[0].values) == pytest.approx(1.0)


def test_http_retries_transient_500_then_succeeds(stub_server):
    endpoint, script = stub_server
    script.fail_first_with = 500
    backend = http_backend(endpoint, max_retries=2)
    assert backend.chat([user("q")]).response_text == "stub answer"
    assert len(script.captured) == 2


def test_http_non2xx_is_backend_failure(stub_server):
    endpoint, script = stub_server
    script.fail_first_with = 404
    backend = http_backend(endpoint, max_retries=3)
    with pytest.raises(BackendFailure) as excinfo:
        backend.chat([user("q")])
    assert excinfo.value.status == 404
    assert len(script.captured) == 1  # deterministic 4xx is not retried


def test_http_malformed_body_is_protocol_error(stub_server):
    endpoint, script = stub_server
    script.raw_body = json.dumps({"surprise": True}).encode()
    backend = http_backend(endpoint)
    with pytest.raises(ProtocolError):
        backend.chat([user("q")])


def test_http_timeout_raises_transport_error_after_retries():
    # a bound socket that never accepts: connects stall until the client gives up
    sink = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    sink.bind(("127.0.0.1", 0))
    sink.listen(0)
    port = sink.getsockname()[1]
    try:
        backend = http_backend(f"http://127.0.0.1:{port}", timeout_s=0.05, max_retries=2)
        started = time.monotonic()
        with pytest.raises(TransportError):
            backend.chat([user("q")])
        assert time.monotonic() - started < 5.0
    finally:
        sink.close()


def test_http_bearer_token_from_env(stub_server, monkeypatch):
    endpoint, script = stub_server
    monkeypatch.setenv("WATERWAY_QA_API_KEY", "sekret")
    backend = http_backend(endpoint)
    backend.chat([user("q")])
    _, _, headers = script.captured[0]
    assert headers.get("Authorization") == "Bearer sekret"
