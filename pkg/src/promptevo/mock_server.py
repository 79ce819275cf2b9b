"""A threaded HTTP server that serves a toy world over the wire protocol.

Used by the integration tests and handy for trying the HTTP clients by
hand::

    with MockBackendServer(load_world()) as server:
        suite = http_backends(server.url, server.url, server.url)

``faults`` injects protocol violations per endpoint path, e.g.
``server.faults["/v1/generate"] = "malformed"``. Supported faults:
``"malformed"`` (missing field), ``"not-json"``, ``"unavailable"`` (HTTP
503), ``"bad-label"`` (classify only), ``"unsorted"`` (fill_mask only),
``"empty"`` (empty result list). ``delay`` adds a random sleep of up to
that many seconds to every call, drawn from an unseeded RNG on purpose.
"""

from __future__ import annotations

import json
import random
import threading
import time
from collections import Counter
from dataclasses import fields
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .backends import GenerationParams
from .errors import NoMaskInRequest, PromptEvoError
from .simworld import ToyWorld


class _Handler(BaseHTTPRequestHandler):
    server: "_Server"

    def log_message(self, format, *args):  # keep test output quiet
        pass

    def do_GET(self):
        self._send(200, {"status": "ok"})

    def do_POST(self):
        owner = self.server.owner
        path = self.path
        with owner.lock:
            owner.calls[path] += 1
        if owner.delay:
            time.sleep(owner.rng.uniform(0, owner.delay))
        fault = owner.faults.get(path)
        if fault == "unavailable":
            return self._send(503, {"error": "unavailable"})
        if fault == "not-json":
            return self._send_raw(200, b"<html>oops</html>")
        try:
            length = int(self.headers.get("Content-Length", 0))
            body = json.loads(self.rfile.read(length) or b"{}")
            owner.requests.append((path, body))
            handler = {
                "/v1/fill_mask": owner.fill_mask,
                "/v1/generate": owner.generate,
                "/v1/classify": owner.classify,
            }.get(path)
            if handler is None:
                return self._send(404, {"error": "not_found"})
            out = handler(body, fault)
        except NoMaskInRequest:
            return self._send(400, {"error": "no_mask"})
        except (KeyError, TypeError, ValueError, PromptEvoError) as exc:
            return self._send(400, {"error": "bad_request", "detail": str(exc)})
        self._send(200, out)

    def _send(self, status: int, payload: dict):
        self._send_raw(status, json.dumps(payload).encode("utf-8"))

    def _send_raw(self, status: int, data: bytes):
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)


class _Server(ThreadingHTTPServer):
    daemon_threads = True
    owner: "MockBackendServer"


class MockBackendServer:
    def __init__(self, world: ToyWorld, host: str = "127.0.0.1", port: int = 0, delay: float = 0.0):
        self.world = world
        self.delay = delay
        self.rng = random.Random()
        self.faults: dict[str, str] = {}
        self.calls: Counter = Counter()
        self.requests: list[tuple[str, dict]] = []
        self.lock = threading.Lock()
        self._httpd = _Server((host, port), _Handler)
        self._httpd.owner = self
        self._thread: threading.Thread | None = None

    @property
    def url(self) -> str:
        host, port = self._httpd.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> "MockBackendServer":
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
        if self._thread is not None:
            self._thread.join()

    def __enter__(self) -> "MockBackendServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()

    # endpoint bodies

    def fill_mask(self, body: dict, fault: str | None) -> dict:
        mask = body.get("mask_sentinel", self.world.mask_sentinel)
        props = self.world.propose(body["text"], int(body["top_k"]), mask=mask)
        out = [{"token": p.token, "score": p.score} for p in props]
        if fault == "malformed":
            return {"tokens": out}
        if fault == "unsorted" and len(out) > 1:
            out = out[::-1]
        if fault == "empty":
            out = []
        return {"proposals": out}

    def generate(self, body: dict, fault: str | None) -> dict:
        names = {f.name for f in fields(GenerationParams)}
        params = GenerationParams(**{k: body[k] for k in names})
        texts = self.world.generate(body["prompt"], params, body.get("seed"))
        if fault == "malformed":
            return {"text": texts}
        if fault == "empty":
            texts = []
        return {"texts": texts}

    def classify(self, body: dict, fault: str | None) -> dict:
        labels = [v.label for v in self.world.classify(body["texts"], body.get("label_set"))]
        if fault == "malformed":
            return {"predictions": labels}
        if fault == "bad-label":
            labels = ["bewilderment"] + labels[1:]
        return {"labels": labels}
