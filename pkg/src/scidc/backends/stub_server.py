"""Reference stub server for the v1 wire protocol.

Serves ``/v1/logits`` and ``/v1/generate`` over any local backend,
normally a MockBackend. Exists so the remote client can be integration
tested without a real inference server.
"""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .base import DecoderBackend


class StubServer:
    """Owns the HTTP server and its serving thread."""

    def __init__(self, backend: DecoderBackend, *, host: str = "127.0.0.1",
                 port: int = 0, token: str | None = None):
        self._backend = backend
        self._token = token
        handler = _make_handler(backend, token)
        self._server = ThreadingHTTPServer((host, port), handler)
        self._thread = threading.Thread(
            target=self._server.serve_forever, daemon=True)

    @property
    def endpoint(self) -> str:
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> "StubServer":
        self._thread.start()
        return self

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        self._thread.join(timeout=5)

    def __enter__(self) -> "StubServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()


def _make_handler(backend: DecoderBackend, token: str | None):
    class Handler(BaseHTTPRequestHandler):
        def log_message(self, fmt, *args):
            pass

        def _reply(self, status: int, doc: dict) -> None:
            body = json.dumps(doc).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def _authorized(self) -> bool:
            if token is None:
                return True
            return self.headers.get("Authorization") == f"Bearer {token}"

        def do_POST(self):
            if not self._authorized():
                self._reply(401, {"error": "unauthorized"})
                return
            length = int(self.headers.get("Content-Length", "0"))
            try:
                payload = json.loads(self.rfile.read(length) or b"{}")
            except ValueError:
                self._reply(400, {"error": "malformed JSON"})
                return
            try:
                if self.path == "/v1/logits":
                    context = payload.get("context", [])
                    if not isinstance(context, list):
                        self._reply(400, {"error": "context must be a list"})
                        return
                    logits = backend.next_logits([int(t) for t in context])
                    self._reply(200, {"logits": [float(v) for v in logits]})
                elif self.path == "/v1/generate":
                    text = backend.generate_unconstrained(
                        str(payload.get("prompt", "")),
                        max_tokens=int(payload.get("max_tokens", 256)),
                        temperature=float(payload.get("temperature", 0.0)),
                        stop=payload.get("stop"),
                    )
                    self._reply(200, {"text": text})
                else:
                    self._reply(404, {"error": f"unknown route {self.path}"})
            except Exception as exc:  # surface backend failures as 500s
                self._reply(500, {"error": f"{type(exc).__name__}: {exc}"})

    return Handler
