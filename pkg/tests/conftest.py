from __future__ import annotations

from pathlib import Path

import pytest

from cherryrec.core import CLICKED, SHOWN, Interaction, InteractionSequence, NewsItem, UserProfile
from cherryrec.ingest import build_snapshot
from cherryrec.synthetic import SyntheticSpec, generate

FIXTURES = Path(__file__).parent / "fixtures"
SMALL_SPEC = SyntheticSpec(users=48, news=240, categories=4, seed=3)


def item(nid: str, title: str = "plain title", category: str = "sports", *, source: str = "ap",
         publish_time: int = 0, subcategory: str | None = None, clicks: int = 0, impressions: int = 0) -> NewsItem:
    return NewsItem(id=nid, title=title, category=category, source=source, publish_time=publish_time,
                    subcategory=subcategory, click_count=clicks, impression_count=impressions)


def clicks_profile(user_id: str, news_ids, *, start: int = 0, role: str = "", focus=()) -> UserProfile:
    history = tuple(Interaction(n, start + i, CLICKED) for i, n in enumerate(news_ids))
    return UserProfile(user_id, role_positioning=role, domain_focus=tuple(focus), behavior_history=history)


def sequence(user_id: str, events) -> InteractionSequence:
    """``events``: (news_id, timestamp) clicks or (news_id, timestamp, clicked, impression_id)."""
    items = []
    for ev in events:
        if len(ev) == 2:
            items.append(Interaction(ev[0], ev[1], CLICKED))
        else:
            items.append(Interaction(ev[0], ev[1], CLICKED if ev[2] else SHOWN, ev[3]))
    return InteractionSequence(user_id, tuple(items))


@pytest.fixture(scope="session")
def small_raw(tmp_path_factory):
    return generate(SMALL_SPEC, tmp_path_factory.mktemp("small_raw"))


@pytest.fixture(scope="session")
def small_snapshot(small_raw):
    return build_snapshot(small_raw["news"], small_raw["behaviors"], small_raw["roles"])


@pytest.fixture(scope="session")
def small_trained(small_snapshot):
    from cherryrec.pipeline import train

    return train(small_snapshot)


# --- acceptance summary --------------------------------------------------------------

_CRITERIA: list[tuple[str, str, str]] = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or report.when != "call":
        return
    detail = dict(item.user_properties).get("detail", "")
    line = ("PASS" if report.passed else "FAIL", marker.kwargs.get("name", item.name), detail)
    _CRITERIA.append(line)
    print(f"\n[acceptance] {line[0]} {line[1]}" + (f" ({detail})" if detail else ""))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for status, name, detail in _CRITERIA:
        terminalreporter.write_line(f"{status} {name}" + (f"  [{detail}]" if detail else ""))
