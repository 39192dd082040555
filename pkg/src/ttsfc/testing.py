"""Threaded in-process HTTP servers for offline tests and demos.

These implement the package's wire contracts (chat completions,
embeddings, verifier scoring) against fixture data so end-to-end runs
never need a network. Each server binds an ephemeral localhost port and
is used as a context manager yielding its base URL.
"""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Callable, Mapping, Sequence

from .verifier import frame_hash
from .core import parse_verdict
from .errors import UnknownVerdict


class _FixtureServer:
    def __init__(self, handler_cls):
        self._server = ThreadingHTTPServer(("127.0.0.1", 0), handler_cls)
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)

    @property
    def base_url(self) -> str:
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}"

    def __enter__(self) -> str:
        self._thread.start()
        return self.base_url

    def __exit__(self, *exc):
        self._server.shutdown()
        self._server.server_close()
        self._thread.join(timeout=5)


def _json_handler(route: str, respond: Callable[[dict], tuple[int, dict]]):
    class Handler(BaseHTTPRequestHandler):
        def do_POST(self):
            if self.path != route:
                self._send(404, {"error": f"unknown route {self.path}"})
                return
            length = int(self.headers.get("Content-Length", 0))
            try:
                payload = json.loads(self.rfile.read(length) or b"{}")
            except json.JSONDecodeError:
                self._send(400, {"error": "malformed JSON"})
                return
            status, body = respond(payload)
            self._send(status, body)

        def _send(self, status: int, body: dict):
            raw = json.dumps(body).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(raw)))
            self.end_headers()
            self.wfile.write(raw)

        def log_message(self, fmt, *args):
            pass

    return Handler


def score_fixture_server(scores: Mapping[str, float],
                         default: float | None = None) -> _FixtureServer:
    """Serve ``POST /v1/score`` from a framed-example-hash -> score map.

    Implements the same contract as a real scoring service: 400 on
    malformed JSON, 422 on an unknown verdict token.
    """

    def respond(payload: dict) -> tuple[int, dict]:
        items = payload.get("items")
        if not isinstance(items, list):
            return 400, {"error": "missing items"}
        out = []
        for item in items:
            try:
                verdict = parse_verdict(item["verdict"])
            except (UnknownVerdict, KeyError):
                return 422, {"error": f"unknown verdict in item: {item!r}"}
            key = frame_hash(item.get("claim", ""), item.get("reasoning", ""), verdict)
            value = scores.get(key, default)
            if value is None:
                return 422, {"error": f"no fixture score for key {key}"}
            out.append(value)
        return 200, {"scores": out}

    return _FixtureServer(_json_handler("/v1/score", respond))


def embedding_fixture_server(vectors: Mapping[str, Sequence[float]]) -> _FixtureServer:
    """Serve ``POST /embeddings`` from an exact text -> vector map."""

    def respond(payload: dict) -> tuple[int, dict]:
        texts = payload.get("input")
        if not isinstance(texts, list):
            return 400, {"error": "missing input"}
        data = []
        for text in texts:
            if text not in vectors:
                return 422, {"error": f"no fixture embedding for {text[:60]!r}"}
            data.append({"embedding": list(vectors[text])})
        return 200, {"data": data}

    return _FixtureServer(_json_handler("/embeddings", respond))


def chat_script_server(script: Sequence[tuple[int, list[str] | None]]) -> _FixtureServer:
    """Serve ``POST /chat/completions`` from a scripted (status, contents)
    sequence, consuming one entry per request. Used to exercise retry
    behavior; the final entry repeats once the script is exhausted.
    """
    state = {"i": 0}
    lock = threading.Lock()

    def respond(payload: dict) -> tuple[int, dict]:
        with lock:
            idx = min(state["i"], len(script) - 1)
            state["i"] += 1
        status, contents = script[idx]
        if status != 200:
            return status, {"error": "scripted failure"}
        n = payload.get("n", 1)
        texts = contents if contents is not None else []
        if len(texts) != n:
            # scripts must provision exactly n choices per 200
            return 500, {"error": f"script has {len(texts)} choices, asked {n}"}
        return 200, {"choices": [{"message": {"content": t}} for t in texts]}

    return _FixtureServer(_json_handler("/chat/completions", respond))
