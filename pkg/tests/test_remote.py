from __future__ import annotations

import json
import threading
import urllib.request

import pytest

from cherryrec.cnle import BEHAVIORAL, FallbackEvaluator, MockEvaluator, RemoteEvaluator, render_prompt
from cherryrec.cnle.server import serve_mock_llm
from cherryrec.core import UserProfile
from cherryrec.errors import ProtocolError, RequestRejected, TransportError
from cherryrec.httpjson import JsonHandler, server_url, start_server


@pytest.fixture()
def stub():
    server = serve_mock_llm(delay=0.05)
    yield server
    server.shutdown()
    server.server_close()


def _requests(n):
    profile = UserProfile("u", domain_focus=("football",))
    return [render_prompt(BEHAVIORAL, profile, [("a", "football now"), ("b", "markets")], request_id=f"r{i}")
            for i in range(n)]


def test_remote_matches_mock_with_concurrency(stub):
    reqs = _requests(8)
    remote = RemoteEvaluator(server_url(stub), concurrency=4)
    assert remote.evaluate_many(reqs) == MockEvaluator().evaluate_many(reqs)
    assert stub.handled == 8
    assert 2 <= stub.max_in_flight <= 4


def test_stub_health_and_bad_request(stub):
    with urllib.request.urlopen(server_url(stub) + "/v1/health") as resp:
        assert json.loads(resp.read()) == {"status": "ok"}
    bad = urllib.request.Request(server_url(stub) + "/v1/evaluate", data=b"{}", method="POST")
    with pytest.raises(urllib.error.HTTPError) as err:
        urllib.request.urlopen(bad)
    assert err.value.code == 400


class _Scripted(JsonHandler):
    def do_POST(self):
        body = self.read_json()
        server = self.server
        with server.lock:
            server.calls += 1
            step = server.script[min(server.calls, len(server.script)) - 1]
        if isinstance(step, int):
            self.send_json(step, {"error": "scripted"})
        else:
            self.send_json(200, step(body))


@pytest.fixture()
def scripted():
    servers = []

    def make(*script):
        server = start_server(_Scripted, script=list(script), calls=0, lock=threading.Lock())
        servers.append(server)
        return server

    yield make
    for s in servers:
        s.shutdown()
        s.server_close()


def _echo(scores):
    def reply(body):
        return {"protocol": "cnle/1", "request_id": body["request_id"], "chosen_id": scores[0][0],
                "scores": [{"id": n, "score": s} for n, s in scores]}
    return reply


def test_retries_server_errors_then_succeeds(scripted):
    server = scripted(503, 500, _echo([("a", 0.3), ("b", 0.3)]))
    resp = RemoteEvaluator(server_url(server), retries=3, backoff=0.001).evaluate(_requests(1)[0])
    assert server.calls == 3 and resp.chosen_id == "a"


def test_client_errors_not_retried(scripted):
    server = scripted(422)
    with pytest.raises(RequestRejected):
        RemoteEvaluator(server_url(server), retries=3, backoff=0.001).evaluate(_requests(1)[0])
    assert server.calls == 1


def test_exhausted_retries_raise_transport_error(scripted):
    server = scripted(500)
    with pytest.raises(TransportError):
        RemoteEvaluator(server_url(server), retries=2, backoff=0.001).evaluate(_requests(1)[0])
    assert server.calls == 3


def test_unreachable_endpoint():
    with pytest.raises(TransportError):
        RemoteEvaluator("http://127.0.0.1:9", retries=1, backoff=0.001, timeout=0.5).evaluate(_requests(1)[0])


def test_unknown_id_is_protocol_error(scripted):
    server = scripted(_echo([("a", 0.3), ("zzz", 0.3)]))
    with pytest.raises(ProtocolError):
        RemoteEvaluator(server_url(server), retries=0).evaluate(_requests(1)[0])


def test_out_of_range_score_clamped(scripted):
    server = scripted(_echo([("a", 1.7), ("b", 0.2)]))
    resp = RemoteEvaluator(server_url(server), retries=0).evaluate(_requests(1)[0])
    assert resp.score_map()["a"] == 1.0


def test_fallback_uses_mock(scripted):
    server = scripted(500)
    ev = FallbackEvaluator(RemoteEvaluator(server_url(server), retries=0))
    reqs = _requests(3)
    assert ev.evaluate_many(reqs) == MockEvaluator().evaluate_many(reqs)
