"""HTTP client for a cnle/1 evaluator service."""

from __future__ import annotations

import json
import logging
import socket
import time
import urllib.error
import urllib.request
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor

from ..errors import EvaluatorError, ProtocolError, RequestRejected, TransportError
from .mock import MockEvaluator
from .protocol import EvaluationRequest, EvaluationResponse, request_to_wire, validate_response

log = logging.getLogger(__name__)


class RemoteEvaluator:
    """POSTs requests to ``<endpoint>/v1/evaluate``.

    Timeouts, connection failures and 5xx answers are retried up to
    ``retries`` times with exponential backoff; 4xx answers are not.
    ``evaluate_many`` keeps at most ``concurrency`` requests in flight.
    """

    name = "remote"

    def __init__(
        self,
        endpoint: str,
        timeout: float = 10.0,
        retries: int = 3,
        concurrency: int = 4,
        backoff: float = 0.1,
    ):
        if concurrency < 1:
            raise ValueError("concurrency must be >= 1")
        self.url = endpoint.rstrip("/") + "/v1/evaluate"
        self.timeout = timeout
        self.retries = retries
        self.concurrency = concurrency
        self.backoff = backoff

    def _post(self, body: bytes) -> dict:
        req = urllib.request.Request(
            self.url, data=body, method="POST",
            headers={"Content-Type": "application/json; charset=utf-8"},
        )
        with urllib.request.urlopen(req, timeout=self.timeout) as resp:
            raw = resp.read()
        try:
            return json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ProtocolError(f"response is not UTF-8 JSON: {exc}") from None

    def evaluate(self, request: EvaluationRequest) -> EvaluationResponse:
        body = json.dumps(request_to_wire(request), ensure_ascii=False).encode("utf-8")
        last: Exception | None = None
        for attempt in range(self.retries + 1):
            if attempt:
                time.sleep(self.backoff * 2 ** (attempt - 1))
            try:
                payload = self._post(body)
            except urllib.error.HTTPError as exc:
                if 400 <= exc.code < 500:
                    raise RequestRejected(f"{self.url} rejected request {request.request_id}: HTTP {exc.code}") from None
                last = exc
            except (urllib.error.URLError, socket.timeout, ConnectionError, TimeoutError) as exc:
                last = exc
            else:
                return validate_response(request, payload)
            log.warning("evaluator attempt %d/%d failed: %s", attempt + 1, self.retries + 1, last)
        raise TransportError(f"{self.url} unavailable after {self.retries + 1} attempts: {last}")

    def evaluate_many(self, requests: Sequence[EvaluationRequest]) -> list[EvaluationResponse]:
        if len(requests) <= 1 or self.concurrency == 1:
            return [self.evaluate(r) for r in requests]
        with ThreadPoolExecutor(max_workers=self.concurrency) as pool:
            futures = {r.request_id: pool.submit(self.evaluate, r) for r in requests}
            return [futures[r.request_id].result() for r in requests]

    def close(self) -> None:
        pass


class FallbackEvaluator:
    """Uses ``primary`` and falls back to the mock evaluator on any evaluator error."""

    def __init__(self, primary, fallback=None):
        self.primary = primary
        self.fallback = fallback or MockEvaluator()
        self.name = f"{primary.name}+fallback"

    def evaluate(self, request: EvaluationRequest) -> EvaluationResponse:
        try:
            return self.primary.evaluate(request)
        except EvaluatorError as exc:
            log.warning("evaluator failed (%s); using %s", exc, self.fallback.name)
            return self.fallback.evaluate(request)

    def evaluate_many(self, requests: Sequence[EvaluationRequest]) -> list[EvaluationResponse]:
        try:
            return self.primary.evaluate_many(requests)
        except EvaluatorError as exc:
            log.warning("evaluator failed (%s); using %s", exc, self.fallback.name)
            return self.fallback.evaluate_many(requests)

    def close(self) -> None:
        self.primary.close()
