"""Synthetic MIND-format datasets with a planted category preference.

Every user reads exactly one category. Each item is clicked by at least
``min_clicks`` readers of its category shortly after publication, so the
dataset survives a ``min_clicks``-core filter intact. Each click is logged as
one impression that also shows ``negatives`` already-published items from
other categories.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

CATEGORIES = {
    "sports": ["match", "league", "coach", "season", "striker", "playoff", "stadium", "transfer", "injury", "title"],
    "finance": ["stocks", "market", "investors", "bond", "earnings", "rates", "inflation", "bank", "shares", "fund"],
    "politics": ["senate", "election", "vote", "campaign", "governor", "policy", "congress", "ballot", "party", "bill"],
    "health": ["vaccine", "doctors", "hospital", "diet", "virus", "patients", "therapy", "clinic", "sleep", "fitness"],
    "technology": ["software", "startup", "chip", "phone", "robot", "cloud", "hackers", "browser", "battery", "app"],
    "travel": ["airline", "beach", "resort", "passport", "cruise", "island", "hotel", "flight", "tourists", "museum"],
    "food": ["recipe", "chef", "restaurant", "baking", "dinner", "cheese", "vegan", "kitchen", "dessert", "coffee"],
    "weather": ["storm", "snow", "hurricane", "forecast", "rain", "heatwave", "flood", "tornado", "frost", "wind"],
    "autos": ["sedan", "truck", "electric", "dealer", "recall", "engine", "pickup", "mileage", "tesla", "suv"],
    "music": ["album", "concert", "singer", "band", "tour", "grammy", "guitar", "festival", "rapper", "song"],
    "movies": ["film", "director", "sequel", "actress", "oscar", "trailer", "premiere", "studio", "boxoffice", "cast"],
    "science": ["nasa", "planet", "fossil", "telescope", "climate", "species", "physics", "mars", "genome", "ocean"],
}
FILLER = ["new", "report", "says", "week", "after", "big", "first", "why", "how", "what", "today", "year"]
SOURCES = ["ap", "reuters", "bbc", "npr", "nytimes", "wsj", "msn", "yahoo", "local", "blog", "tabloid"]
START = int(datetime(2019, 11, 1, tzinfo=timezone.utc).timestamp())


@dataclass(slots=True)
class SyntheticSpec:
    users: int = 200
    news: int = 2000
    categories: int = 12
    days: int = 14
    min_clicks: int = 5
    max_clicks: int = 6
    negatives: int = 4
    click_delay_hours: float = 36.0
    seed: int = 0


def _iso(ts: int) -> str:
    return datetime.fromtimestamp(ts, tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def generate(spec: SyntheticSpec, out_dir: str | os.PathLike) -> dict[str, Path]:
    """Write ``news.tsv``, ``behaviors.tsv`` and ``roles.tsv`` under ``out_dir``."""
    if not 1 <= spec.categories <= len(CATEGORIES):
        raise ValueError(f"categories must be in 1..{len(CATEGORIES)}")
    if spec.users < spec.categories * spec.max_clicks:
        raise ValueError("need at least categories * max_clicks users")
    rng = np.random.default_rng(spec.seed)
    cats = list(CATEGORIES)[: spec.categories]
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    span = spec.days * 86400
    news = []  # (id, category, publish)
    lines = []
    for i in range(spec.news):
        cat = cats[i % len(cats)]
        words = CATEGORIES[cat]
        nid = f"N{i + 1:05d}"
        publish = START + int(rng.integers(0, span))
        title_words = list(rng.choice(words, size=int(rng.integers(3, 6)), replace=False))
        title_words += list(rng.choice(FILLER, size=2, replace=False))
        rng.shuffle(title_words)
        title = " ".join(title_words).capitalize()
        sub = words[int(rng.integers(0, len(words)))]
        source = SOURCES[int(rng.integers(0, len(SOURCES)))]
        abstract = f"{title}. More on {cat}."
        lines.append("\t".join([nid, cat, sub, title, abstract, source, _iso(publish)]))
        news.append((nid, cat, publish))
    news_path = out / "news.tsv"
    news_path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    readers = {c: [u for u in range(spec.users) if u % len(cats) == ci] for ci, c in enumerate(cats)}
    delay = int(spec.click_delay_hours * 3600)
    clicks = []  # (time, user, news_id)
    for nid, cat, publish in news:
        pool = readers[cat]
        count = int(rng.integers(spec.min_clicks, spec.max_clicks + 1))
        for u in rng.choice(pool, size=min(count, len(pool)), replace=False).tolist():
            clicks.append((publish + 60 + int(rng.integers(0, delay)), u, nid))
    clicks.sort()

    by_time = sorted(news, key=lambda n: (n[2], n[0]))
    pubs = np.array([n[2] for n in by_time])
    rows = []
    for imp, (t, u, nid) in enumerate(clicks, start=1):
        cat = cats[u % len(cats)]
        live = int(np.searchsorted(pubs, t, side="right"))
        shown: list[str] = []
        for _ in range(20 * spec.negatives):
            if len(shown) == spec.negatives:
                break
            cand = by_time[int(rng.integers(0, live))]
            if cand[1] != cat and cand[0] not in shown:
                shown.append(cand[0])
        tokens = [f"{n}-0" for n in shown] + [f"{nid}-1"]
        order = rng.permutation(len(tokens)).tolist()
        rows.append("\t".join([f"I{imp}", f"U{u + 1:04d}", _iso(t), "", " ".join(tokens[i] for i in order)]))
    behaviors_path = out / "behaviors.tsv"
    behaviors_path.write_text("\n".join(rows) + "\n", encoding="utf-8")

    roles_path = out / "roles.tsv"
    roles_path.write_text(
        "".join(f"U{u + 1:04d}\t{cats[u % len(cats)]} reader\n" for u in range(0, spec.users, 2)),
        encoding="utf-8",
    )
    return {"news": news_path, "behaviors": behaviors_path, "roles": roles_path}
