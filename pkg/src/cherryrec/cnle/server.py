"""cnle/1 stub server backed by the mock evaluator (``cherryrec mock-llm-serve``)."""

from __future__ import annotations

import logging
import threading

from ..errors import ProtocolError
from ..httpjson import JsonHandler, start_server
from .mock import evaluate_mock
from .protocol import request_from_wire, response_to_wire

log = logging.getLogger(__name__)


class MockLLMHandler(JsonHandler):
    def do_GET(self):
        if self.path == "/v1/health":
            self.send_json(200, {"status": "ok"})
        else:
            self.send_json(404, {"error": "not_found"})

    def do_POST(self):
        if self.path != "/v1/evaluate":
            self.send_json(404, {"error": "not_found"})
            return
        try:
            request = request_from_wire(self.read_json())
        except ProtocolError as exc:
            self.send_json(400, {"error": "bad_request", "detail": str(exc)})
            return
        server = self.server
        with server.stats_lock:
            server.in_flight += 1
            server.max_in_flight = max(server.max_in_flight, server.in_flight)
        try:
            if server.delay:
                threading.Event().wait(server.delay)
            response = evaluate_mock(request)
        finally:
            # released before replying: the client may send its next request as soon as it reads the body
            with server.stats_lock:
                server.in_flight -= 1
                server.handled += 1
        self.send_json(200, response_to_wire(response, request.request_id))


def serve_mock_llm(bind: str = "127.0.0.1", port: int = 0, delay: float = 0.0):
    """Start the stub in a background thread and return the server.

    ``delay`` holds each request open for that many seconds, which makes
    concurrent in-flight requests observable (``server.max_in_flight``).
    """
    return start_server(
        MockLLMHandler, bind, port,
        delay=delay, stats_lock=threading.Lock(), in_flight=0, max_in_flight=0, handled=0,
    )
