"""HTTP scoring service implementing the ``POST /v1/score`` contract.

Request: ``{"items": [{"claim", "reasoning", "verdict", "evidence"?}...]}``
Response: ``{"scores": [float, ...]}`` in item order; each score is the
positive-class probability (sigmoid of the verifier logit). 400 on
malformed JSON, 422 on an unknown verdict token. Stateless across
requests; a fixed checkpoint gives identical responses for identical
requests.
"""

from __future__ import annotations

import json
import logging
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import torch

from .train import FramingError, frame_row, load_verifier

logger = logging.getLogger(__name__)


class Scorer:
    def __init__(self, checkpoint_dir: str | Path, batch_size: int = 32,
                 device: str = "cpu"):
        self.model, self.tokenizer, self.manifest = load_verifier(checkpoint_dir)
        self.model.to(device)
        self.batch_size = batch_size
        self.device = device
        self._lock = threading.Lock()

    @torch.no_grad()
    def score(self, items: list[dict]) -> list[float]:
        texts = [frame_row(item) for item in items]
        scores: list[float] = []
        # serialized: eval-mode forward passes are cheap at desk scale and
        # this keeps the service trivially thread-safe
        with self._lock:
            for start in range(0, len(texts), self.batch_size):
                ids, mask = self.tokenizer.batch(texts[start:start + self.batch_size])
                logits = self.model(ids.to(self.device), mask.to(self.device))
                scores.extend(torch.sigmoid(logits).cpu().tolist())
        return scores


def make_handler(scorer: Scorer):
    class Handler(BaseHTTPRequestHandler):
        def do_POST(self):
            if self.path != "/v1/score":
                self._send(404, {"error": f"unknown route {self.path}"})
                return
            length = int(self.headers.get("Content-Length", 0))
            try:
                payload = json.loads(self.rfile.read(length))
            except (json.JSONDecodeError, ValueError):
                self._send(400, {"error": "malformed JSON"})
                return
            items = payload.get("items") if isinstance(payload, dict) else None
            if not isinstance(items, list):
                self._send(400, {"error": "body must be {\"items\": [...]}"})
                return
            try:
                scores = scorer.score(items)
            except FramingError as exc:
                self._send(422, {"error": str(exc)})
                return
            except (KeyError, TypeError) as exc:
                self._send(422, {"error": f"bad item: {exc}"})
                return
            self._send(200, {"scores": scores})

        def _send(self, status: int, body: dict):
            raw = json.dumps(body).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(raw)))
            self.end_headers()
            self.wfile.write(raw)

        def log_message(self, fmt, *args):
            logger.debug("scoring server: " + fmt, *args)

    return Handler


class ScoringServer:
    """Threaded server; use as a context manager in tests or call
    serve_forever for a long-lived process."""

    def __init__(self, checkpoint_dir: str | Path, port: int = 0,
                 host: str = "127.0.0.1", batch_size: int = 32,
                 device: str = "cpu"):
        scorer = Scorer(checkpoint_dir, batch_size=batch_size, device=device)
        self._server = ThreadingHTTPServer((host, port), make_handler(scorer))
        self._thread = threading.Thread(target=self._server.serve_forever,
                                        daemon=True)

    @property
    def base_url(self) -> str:
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}"

    def __enter__(self) -> str:
        self._thread.start()
        return self.base_url

    def __exit__(self, *exc):
        self.shutdown()

    def serve_forever(self):
        logger.info("scoring server listening on %s", self.base_url)
        self._server.serve_forever()

    def shutdown(self):
        self._server.shutdown()
        self._server.server_close()
        if self._thread.is_alive():
            self._thread.join(timeout=5)


def serve_scores(checkpoint_dir: str | Path, port: int, host: str = "0.0.0.0"):
    """Blocking entry point for a long-lived scoring service."""
    server = ScoringServer(checkpoint_dir, port=port, host=host)
    print(f"scoring server on {server.base_url}", flush=True)
    server.serve_forever()
