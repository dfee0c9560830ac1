"""HTTP recommendation service (``cherryrec serve``)."""

from __future__ import annotations

import logging

from .errors import ContractError, NotFoundError, PipelineError
from .httpjson import JsonHandler, start_server
from .pipeline import Engine

log = logging.getLogger(__name__)


def parse_recommend_body(body) -> tuple[str, int]:
    if not isinstance(body, dict):
        raise ContractError("body must be a JSON object")
    user_id, k = body.get("user_id"), body.get("k", 10)
    if not isinstance(user_id, str) or not user_id:
        raise ContractError("user_id must be a non-empty string")
    if not isinstance(k, int) or isinstance(k, bool) or k < 1:
        raise ContractError("k must be an integer >= 1")
    return user_id, k


class RecommendHandler(JsonHandler):
    def do_GET(self):
        if self.path == "/v1/health":
            self.send_json(200, {"status": "ok", "users": len(self.server.engine.snapshot.profiles)})
        else:
            self.send_json(404, {"error": "not_found"})

    def do_POST(self):
        if self.path != "/v1/recommend":
            self.send_json(404, {"error": "not_found"})
            return
        try:
            user_id, k = parse_recommend_body(self.read_json())
        except ContractError as exc:
            self.send_json(400, {"error": "bad_request", "detail": str(exc)})
            return
        try:
            items = self.server.engine.recommend(user_id, k)
        except NotFoundError:
            self.send_json(404, {"error": "user_not_found", "user_id": user_id})
            return
        except PipelineError as exc:
            log.error("recommend failed for %s: %s", user_id, exc)
            self.send_json(500, {"error": "pipeline_failure", "stage": exc.stage, "detail": str(exc)})
            return
        self.send_json(200, {
            "user_id": user_id,
            "items": [{"id": c.news_id, "score": c.vans_prediction} for c in items],
        })


def serve_recommendations(engine: Engine, bind: str = "127.0.0.1", port: int = 0):
    """Start the service on a background thread and return the server."""
    return start_server(RecommendHandler, bind, port, engine=engine)
