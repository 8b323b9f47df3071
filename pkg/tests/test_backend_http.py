"""OpenAI-compatible chat backend: wire-format and failure behavior."""

import base64
import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import numpy as np
import pytest

from afforda.errors import BackendError
from afforda.loop.backends import OpenAIChatBackend, TOKEN_ENV_VAR


class _Handler(BaseHTTPRequestHandler):
    captured = []
    reply_status = 200
    reply_body = None

    def do_POST(self):
        length = int(self.headers["Content-Length"])
        payload = json.loads(self.rfile.read(length))
        type(self).captured.append({
            "path": self.path,
            "auth": self.headers.get("Authorization"),
            "payload": payload,
        })
        body = self.reply_body or {
            "choices": [{"message": {"content": "(1, 2, 3, 4)"}}]}
        data = json.dumps(body).encode()
        self.send_response(self.reply_status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):
        pass


@pytest.fixture()
def server():
    _Handler.captured = []
    _Handler.reply_status = 200
    _Handler.reply_body = None
    httpd = HTTPServer(("127.0.0.1", 0), _Handler)
    thread = threading.Thread(target=httpd.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{httpd.server_port}/v1", _Handler
    httpd.shutdown()


def test_request_shape_and_reply(server, monkeypatch):
    url, handler = server
    monkeypatch.setenv(TOKEN_ENV_VAR, "sekrit")
    backend = OpenAIChatBackend(url, model="test-model")
    image = np.zeros((4, 4, 3), dtype=np.uint8)
    reply = backend.send("where to touch?", [image])
    assert reply == "(1, 2, 3, 4)"

    request = handler.captured[0]
    assert request["path"] == "/v1/chat/completions"
    assert request["auth"] == "Bearer sekrit"
    payload = request["payload"]
    assert payload["model"] == "test-model"
    assert payload["temperature"] == 0.0
    content = payload["messages"][0]["content"]
    assert content[0] == {"type": "text", "text": "where to touch?"}
    image_url = content[1]["image_url"]["url"]
    prefix = "data:image/png;base64,"
    assert image_url.startswith(prefix)
    decoded = base64.b64decode(image_url[len(prefix):])
    assert decoded[:4] == b"\x89PNG"


def test_no_token_sends_no_auth_header(server, monkeypatch):
    url, handler = server
    monkeypatch.delenv(TOKEN_ENV_VAR, raising=False)
    OpenAIChatBackend(url, model="m").send("hi", [])
    assert handler.captured[0]["auth"] is None


def test_http_error_is_backend_error(server, monkeypatch):
    url, handler = server
    monkeypatch.delenv(TOKEN_ENV_VAR, raising=False)
    handler.reply_status = 500
    with pytest.raises(BackendError):
        OpenAIChatBackend(url, model="m").send("hi", [])


def test_malformed_reply_is_backend_error(server, monkeypatch):
    url, handler = server
    monkeypatch.delenv(TOKEN_ENV_VAR, raising=False)
    handler.reply_body = {"unexpected": True}
    with pytest.raises(BackendError):
        OpenAIChatBackend(url, model="m").send("hi", [])


def test_unreachable_host_is_backend_error():
    backend = OpenAIChatBackend("http://127.0.0.1:9/v1", model="m",
                                timeout=0.2)
    with pytest.raises(BackendError):
        backend.send("hi", [])
