"""Prompt tasks, request/response types and the cnle/1 wire format."""

from __future__ import annotations

import logging
import math
import uuid
from collections.abc import Mapping, Sequence
from dataclasses import dataclass

from ..core import UserProfile
from ..errors import ContractError, ProtocolError
from ..text import truncate_title

log = logging.getLogger(__name__)

PROTOCOL = "cnle/1"
MAX_CANDIDATES = 20
TITLE_TOKEN_CAP = 32
HISTORY_CAP = 20

INTEREST_ROLE = "interest_role"
DOMAIN_FOCUS = "domain_focus"
COLLECTION_FOCUS = "collection_focus"
BEHAVIORAL = "behavioral"


@dataclass(frozen=True, slots=True)
class PromptTask:
    kind: str
    instruction: str
    input_spec: str
    output_spec: str

    def __post_init__(self) -> None:
        if not (self.instruction and self.input_spec and self.output_spec):
            raise ContractError(f"task {self.kind}: all text fields are required")


_OUTPUT = "The ID and title of the single recommended item."

TASKS: dict[str, PromptTask] = {
    INTEREST_ROLE: PromptTask(
        INTEREST_ROLE,
        "Given this reader's interests and the work they do, pick the one candidate "
        "article they should read next and give its ID.",
        "Reader interests and job role; candidate articles.",
        _OUTPUT,
    ),
    DOMAIN_FOCUS: PromptTask(
        DOMAIN_FOCUS,
        "Given the subject areas this reader follows, pick the one candidate "
        "article that fits them best and give its ID.",
        "Subject areas the reader follows; candidate articles.",
        _OUTPUT,
    ),
    COLLECTION_FOCUS: PromptTask(
        COLLECTION_FOCUS,
        "Given the articles this reader has saved, pick the one candidate "
        "article closest to what they keep and give its ID.",
        "Titles of saved articles; candidate titles.",
        _OUTPUT,
    ),
    BEHAVIORAL: PromptTask(
        BEHAVIORAL,
        "Given what this reader recently opened, pick the one candidate article "
        "they are most likely to open next and give its ID.",
        "Recent reading activity; candidate titles.",
        _OUTPUT,
    ),
}


@dataclass(frozen=True, slots=True)
class EvaluationRequest:
    task: str
    prompt: str
    profile: str
    candidates: tuple[tuple[str, str], ...]
    request_id: str = ""
    fallback_from: str | None = None

    def __post_init__(self) -> None:
        if self.task not in TASKS:
            raise ContractError(f"unknown task kind {self.task!r}")
        if not 1 <= len(self.candidates) <= MAX_CANDIDATES:
            raise ContractError(f"need 1..{MAX_CANDIDATES} candidates, got {len(self.candidates)}")
        ids = [c[0] for c in self.candidates]
        if len(set(ids)) != len(ids):
            raise ContractError("duplicate candidate ids")
        if any(len(t.split()) > TITLE_TOKEN_CAP for _, t in self.candidates):
            raise ContractError(f"candidate title longer than {TITLE_TOKEN_CAP} tokens")

    @property
    def candidate_ids(self) -> list[str]:
        return [c[0] for c in self.candidates]


@dataclass(frozen=True, slots=True)
class EvaluationResponse:
    scores: tuple[tuple[str, float], ...]
    chosen_id: str

    @classmethod
    def from_scores(cls, scores: Sequence[tuple[str, float]]) -> EvaluationResponse:
        if not scores:
            raise ContractError("empty score list")
        chosen = min(scores, key=lambda s: (-s[1], s[0]))[0]
        return cls(tuple((n, float(v)) for n, v in scores), chosen)

    def score_map(self) -> dict[str, float]:
        return dict(self.scores)


def choose_task(profile: UserProfile, prefer_collection: bool = False) -> str:
    """Task kind for a user when the caller does not force one."""
    if prefer_collection and profile.collection_list:
        return COLLECTION_FOCUS
    if profile.role_positioning.strip():
        return INTEREST_ROLE
    return BEHAVIORAL


def _one_line(text: str) -> str:
    return " ".join(text.split())


def summarize_profile(
    profile: UserProfile,
    titles: Mapping[str, str],
    history_cap: int = HISTORY_CAP,
    title_cap: int = TITLE_TOKEN_CAP,
) -> str:
    """The ``profile`` field of a request: role, focus and recent clicked titles."""
    lines = [f"role: {_one_line(profile.role_positioning)}",
             f"domain_focus: {', '.join(profile.domain_focus)}",
             "history:"]
    clicked = [it.news_id for it in profile.clicked_history() if it.news_id in titles]
    for nid in clicked[-history_cap:]:
        lines.append(f"- {_one_line(truncate_title(titles[nid], title_cap))}")
    return "\n".join(lines)


def _profile_section(kind: str, profile: UserProfile, titles: Mapping[str, str],
                     history_cap: int, title_cap: int) -> str:
    focus = ", ".join(profile.domain_focus) or "(none)"
    if kind == INTEREST_ROLE:
        return f"Role: {_one_line(profile.role_positioning) or '(unspecified)'}\nInterests: {focus}"
    if kind == DOMAIN_FOCUS:
        return f"Domain focus: {focus}"
    if kind == COLLECTION_FOCUS:
        saved = [truncate_title(titles[n], title_cap) for n in profile.collection_list if n in titles]
        return "Saved articles:\n" + "\n".join(f"- {_one_line(t)}" for t in saved)
    recent = profile.behavior_history[-history_cap:]
    rows = [
        f"- {it.label}: {_one_line(truncate_title(titles.get(it.news_id, it.news_id), title_cap))}"
        for it in recent
    ]
    return "Recent activity:\n" + ("\n".join(rows) if rows else "(none)")


def render_prompt(
    kind: str,
    profile: UserProfile,
    candidates: Sequence[tuple[str, str]],
    titles: Mapping[str, str] | None = None,
    *,
    request_id: str | None = None,
    history_cap: int = HISTORY_CAP,
    title_cap: int = TITLE_TOKEN_CAP,
) -> EvaluationRequest:
    """Assemble the evaluation request for ``candidates`` (``(news_id, title)`` pairs).

    ``titles`` resolves news ids in the profile (history, saved items) to titles.
    A collection-focus request for a user with nothing saved is rendered as a
    behavioral request and flagged via ``fallback_from``.
    """
    if kind not in TASKS:
        raise ContractError(f"unknown task kind {kind!r}")
    if not candidates:
        raise ContractError("render_prompt needs at least one candidate")
    if len(candidates) > MAX_CANDIDATES:
        raise ContractError(f"at most {MAX_CANDIDATES} candidates per request, got {len(candidates)}")
    titles = titles or {}
    fallback_from = None
    if kind == COLLECTION_FOCUS and not profile.collection_list:
        fallback_from, kind = kind, BEHAVIORAL
    task = TASKS[kind]
    cands = tuple((nid, _one_line(truncate_title(title, title_cap))) for nid, title in candidates)
    listing = "\n".join(f"{i}. [{nid}] {title}" for i, (nid, title) in enumerate(cands, start=1))
    prompt = (
        f"{task.instruction}\n\n"
        f"{_profile_section(kind, profile, titles, history_cap, title_cap)}\n\n"
        f"Candidates:\n{listing}\n\n"
        f"Answer: {task.output_spec}"
    )
    return EvaluationRequest(
        task=kind,
        prompt=prompt,
        profile=summarize_profile(profile, titles, history_cap, title_cap),
        candidates=cands,
        request_id=request_id or uuid.uuid4().hex,
        fallback_from=fallback_from,
    )


# --- wire format -------------------------------------------------------------------

def request_to_wire(req: EvaluationRequest) -> dict:
    return {
        "protocol": PROTOCOL,
        "request_id": req.request_id,
        "task": req.task,
        "prompt": req.prompt,
        "profile": req.profile,
        "candidates": [{"id": nid, "title": title} for nid, title in req.candidates],
    }


def request_from_wire(payload: object, title_cap: int = TITLE_TOKEN_CAP) -> EvaluationRequest:
    """Parse a request body; raises ``ProtocolError`` on any schema violation.

    Titles are re-truncated here in case the client counted tokens differently.
    """
    if not isinstance(payload, dict) or payload.get("protocol") != PROTOCOL:
        raise ProtocolError("not a cnle/1 request")
    try:
        cands = payload["candidates"]
        fields = [payload[k] for k in ("request_id", "task", "prompt", "profile")]
        if not isinstance(cands, list) or not all(isinstance(f, str) for f in fields):
            raise TypeError
        pairs = tuple((str(c["id"]), truncate_title(str(c["title"]), title_cap)) for c in cands)
        return EvaluationRequest(
            task=payload["task"], prompt=payload["prompt"], profile=payload["profile"],
            candidates=pairs, request_id=payload["request_id"],
        )
    except (KeyError, TypeError) as exc:
        raise ProtocolError(f"malformed cnle/1 request: {exc!r}") from None
    except ContractError as exc:
        raise ProtocolError(str(exc)) from None


def response_to_wire(resp: EvaluationResponse, request_id: str) -> dict:
    return {
        "protocol": PROTOCOL,
        "request_id": request_id,
        "scores": [{"id": nid, "score": score} for nid, score in resp.scores],
        "chosen_id": resp.chosen_id,
    }


def validate_response(req: EvaluationRequest, payload: object) -> EvaluationResponse:
    """Check a response against its request; every evaluator result passes through here.

    Out-of-range scores are clamped to [0, 1] with a warning. Unknown, duplicate
    or missing ids raise ``ProtocolError``. The chosen id is re-derived from the
    clamped scores.
    """
    if isinstance(payload, EvaluationResponse):
        payload = response_to_wire(payload, req.request_id)
    if not isinstance(payload, dict) or payload.get("protocol") != PROTOCOL:
        raise ProtocolError("not a cnle/1 response")
    if payload.get("request_id") != req.request_id:
        raise ProtocolError(f"response for {payload.get('request_id')!r}, expected {req.request_id!r}")
    raw = payload.get("scores")
    if not isinstance(raw, list):
        raise ProtocolError("scores must be a list")
    expected = set(req.candidate_ids)
    scores: dict[str, float] = {}
    for entry in raw:
        try:
            nid, value = str(entry["id"]), float(entry["score"])
        except (KeyError, TypeError, ValueError):
            raise ProtocolError(f"malformed score entry {entry!r}") from None
        if nid not in expected:
            raise ProtocolError(f"response scores unknown id {nid!r}")
        if nid in scores:
            raise ProtocolError(f"duplicate score for {nid!r}")
        if not math.isfinite(value):
            raise ProtocolError(f"non-finite score for {nid!r}")
        if not 0.0 <= value <= 1.0:
            log.warning("score %r for %s outside [0, 1]; clamped", value, nid)
            value = min(1.0, max(0.0, value))
        scores[nid] = value
    missing = expected - scores.keys()
    if missing:
        raise ProtocolError(f"response misses scores for {sorted(missing)}")
    chosen = payload.get("chosen_id")
    if chosen not in expected:
        raise ProtocolError(f"chosen_id {chosen!r} is not a candidate")
    resp = EvaluationResponse.from_scores([(nid, scores[nid]) for nid in req.candidate_ids])
    if chosen != resp.chosen_id:
        log.warning("chosen_id %s is not the top score; using %s", chosen, resp.chosen_id)
    return resp
