"""MIND-style dataset loading, k-core filtering, profiles and snapshot files."""

from __future__ import annotations

import json
import logging
import os
from collections import Counter, defaultdict, deque
from collections.abc import Iterable, Mapping
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from urllib.parse import urlparse

from .core import (
    CLICKED,
    BehaviorRecord,
    Interaction,
    InteractionSequence,
    NewsItem,
    UserProfile,
    build_sequences,
    parse_timestamp,
)
from .errors import DataError

log = logging.getLogger(__name__)

SNAPSHOT_FORMAT_VERSION = 1
DOMAIN_FOCUS_SIZE = 3


@dataclass(slots=True)
class LoadReport:
    path: str
    rows: int = 0
    accepted: int = 0
    rejected: int = 0
    diagnostics: list[str] = field(default_factory=list)

    def reject(self, line_no: int, reason: str) -> None:
        self.rejected += 1
        msg = f"{self.path}:{line_no}: {reason}"
        self.diagnostics.append(msg)
        log.warning(msg)


def _read_lines(path: str | os.PathLike) -> list[str]:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read().splitlines()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc


def load_news_catalog(path: str | os.PathLike) -> tuple[dict[str, NewsItem], LoadReport]:
    """Parse the news TSV.

    Expected columns: id, category, subcategory, title, abstract, source,
    publish_time. The 8-column MIND news file (url and entity columns instead
    of source/publish_time) is accepted too; its source becomes the url host
    and publish time is left unset for the snapshot builder to fill in.
    """
    report = LoadReport(str(path))
    catalog: dict[str, NewsItem] = {}
    for line_no, line in enumerate(_read_lines(path), start=1):
        if not line.strip():
            continue
        report.rows += 1
        cols = line.split("\t")
        if len(cols) == 7:
            nid, cat, subcat, title, abstract, source, ptime = cols
        elif len(cols) == 8:
            nid, cat, subcat, title, abstract, url = cols[:6]
            source, ptime = urlparse(url).netloc, ""
        else:
            report.reject(line_no, f"expected 7 columns, got {len(cols)}")
            continue
        nid, title = nid.strip(), title.strip()
        if not nid:
            report.reject(line_no, "empty news id")
            continue
        if not title:
            report.reject(line_no, f"{nid}: empty title")
            continue
        if nid in catalog:
            report.reject(line_no, f"{nid}: duplicate id")
            continue
        publish: int | None = None
        if ptime.strip():
            try:
                publish = parse_timestamp(ptime)
            except ValueError as exc:
                report.reject(line_no, f"{nid}: {exc}")
                continue
        catalog[nid] = NewsItem(
            id=nid,
            title=title,
            category=cat.strip(),
            subcategory=subcat.strip() or None,
            body=abstract.strip() or None,
            source=source.strip(),
            publish_time=publish,
        )
        report.accepted += 1
    return catalog, report


def load_behaviors(path: str | os.PathLike) -> tuple[list[BehaviorRecord], LoadReport]:
    """Parse the behaviors TSV into raw records.

    Columns: impression_id, user_id, time, history, impressions. History ids
    become click records (once per user, stamped with the user's earliest
    impression time, no impression id). Impression tokens ``nid-1`` / ``nid-0``
    become clicked / shown records tagged with the impression id.
    """
    report = LoadReport(str(path))
    rows: list[tuple[int, str, str, str, list[str], list[str]]] = []
    earliest: dict[str, tuple[int, str]] = {}
    for line_no, line in enumerate(_read_lines(path), start=1):
        if not line.strip():
            continue
        report.rows += 1
        cols = line.split("\t")
        if len(cols) != 5:
            report.reject(line_no, f"expected 5 columns, got {len(cols)}")
            continue
        imp_id, uid, time_text, history, impressions = (c.strip() for c in cols)
        if not uid:
            report.reject(line_no, "empty user id")
            continue
        try:
            ts = parse_timestamp(time_text)
            if uid not in earliest or ts < earliest[uid][0]:
                earliest[uid] = (ts, time_text)
        except ValueError:
            pass  # build_sequences rejects these records with a diagnostic
        rows.append((line_no, imp_id, uid, time_text, history.split(), impressions.split()))
        report.accepted += 1

    records: list[BehaviorRecord] = []
    seen_history: dict[str, set[str]] = defaultdict(set)
    for line_no, imp_id, uid, time_text, history, impressions in rows:
        hist_time: int | str = earliest[uid][0] if uid in earliest else time_text
        for nid in history:
            if nid not in seen_history[uid]:
                seen_history[uid].add(nid)
                records.append(BehaviorRecord(uid, nid, hist_time, CLICKED, None))
        for token in impressions:
            nid, sep, label = token.rpartition("-")
            if not sep or not nid or label not in ("0", "1"):
                report.diagnostics.append(f"{report.path}:{line_no}: bad impression token {token!r}")
                continue
            records.append(BehaviorRecord(uid, nid, time_text, label, imp_id or f"L{line_no}"))
    return records, report


def load_role_hints(path: str | os.PathLike | None) -> dict[str, str]:
    """user_id -> role text. A malformed file is ignored as a whole, with a warning."""
    if path is None:
        return {}
    hints: dict[str, str] = {}
    try:
        lines = _read_lines(path)
    except DataError as exc:
        log.warning("ignoring role hints: %s", exc)
        return {}
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        cols = line.split("\t")
        if len(cols) != 2 or not cols[0].strip():
            log.warning("ignoring role hints file %s: malformed line %d", path, line_no)
            return {}
        hints[cols[0].strip()] = cols[1].strip()
    return hints


def apply_k_core(
    sequences: Mapping[str, InteractionSequence],
    catalog: Mapping[str, NewsItem],
    k: int = 5,
) -> tuple[dict[str, InteractionSequence], dict[str, NewsItem]]:
    """Reduce to the k-core of the user/news click graph.

    Degrees count distinct (user, news) click pairs. Every retained user ends
    up with >= k clicked news among retained news and every retained news item
    with >= k clicking users among retained users. Sequences keep only records
    on retained news; news that never reaches degree k leaves the catalog.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    user_adj: dict[str, set[str]] = {}
    item_adj: dict[str, set[str]] = defaultdict(set)
    for uid, seq in sequences.items():
        items = {it.news_id for it in seq.items if it.clicked and it.news_id in catalog}
        user_adj[uid] = items
        for nid in items:
            item_adj[nid].add(uid)

    alive_users = set(user_adj)
    alive_items = set(item_adj)
    user_deg = {u: len(v) for u, v in user_adj.items()}
    item_deg = {n: len(v) for n, v in item_adj.items()}
    queue: deque[tuple[str, str]] = deque()
    queue.extend(("u", u) for u in sorted(alive_users) if user_deg[u] < k)
    queue.extend(("n", n) for n in sorted(alive_items) if item_deg[n] < k)
    while queue:
        kind, key = queue.popleft()
        if kind == "u":
            if key not in alive_users:
                continue
            alive_users.discard(key)
            for nid in user_adj[key]:
                if nid in alive_items:
                    item_deg[nid] -= 1
                    if item_deg[nid] < k:
                        queue.append(("n", nid))
        else:
            if key not in alive_items:
                continue
            alive_items.discard(key)
            for uid in item_adj[key]:
                if uid in alive_users:
                    user_deg[uid] -= 1
                    if user_deg[uid] < k:
                        queue.append(("u", uid))

    kept_catalog = {nid: item for nid, item in catalog.items() if nid in alive_items}
    kept_sequences = {
        uid: InteractionSequence(uid, tuple(it for it in seq.items if it.news_id in alive_items))
        for uid, seq in sequences.items()
        if uid in alive_users
    }
    return kept_sequences, kept_catalog


def domain_focus(clicked_ids: Iterable[str], catalog: Mapping[str, NewsItem], size: int = DOMAIN_FOCUS_SIZE) -> tuple[str, ...]:
    """Most-clicked categories, most frequent first (ties by name)."""
    counts = Counter(catalog[n].category for n in clicked_ids if n in catalog and catalog[n].category)
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return tuple(cat for cat, _ in ranked[:size])


def build_user_profiles(
    sequences: Mapping[str, InteractionSequence],
    catalog: Mapping[str, NewsItem],
    role_hints: Mapping[str, str] | str | os.PathLike | None = None,
    bookmarks: Mapping[str, Iterable[str]] | None = None,
) -> dict[str, UserProfile]:
    if role_hints is None or isinstance(role_hints, Mapping):
        hints = dict(role_hints or {})
    else:
        hints = load_role_hints(role_hints)
    bookmarks = bookmarks or {}
    profiles = {}
    for uid, seq in sequences.items():
        collection = tuple(n for n in bookmarks.get(uid, ()) if n in catalog)
        profiles[uid] = UserProfile(
            user_id=uid,
            role_positioning=hints.get(uid, ""),
            domain_focus=domain_focus(seq.clicked_ids(), catalog),
            collection_list=collection,
            behavior_history=seq.items,
        )
    return profiles


@dataclass(slots=True)
class DatasetSnapshot:
    catalog: dict[str, NewsItem]
    sequences: dict[str, InteractionSequence]
    profiles: dict[str, UserProfile]
    provenance: dict = field(default_factory=dict)

    @property
    def as_of(self) -> int:
        """Latest event time in the snapshot; the default 'now' for serving."""
        latest = [seq.items[-1].timestamp for seq in self.sequences.values() if seq.items]
        if latest:
            return max(latest)
        times = [n.publish_time for n in self.catalog.values() if n.publish_time is not None]
        return max(times, default=0)

    def check_integrity(self) -> None:
        for uid, seq in self.sequences.items():
            if uid not in self.profiles:
                raise DataError(f"user {uid} has no profile")
            for it in seq.items:
                if it.news_id not in self.catalog:
                    raise DataError(f"user {uid} references unknown news {it.news_id}")


def _fill_item_stats(
    catalog: Mapping[str, NewsItem], sequences: Mapping[str, InteractionSequence]
) -> tuple[dict[str, NewsItem], int]:
    clicks: Counter[str] = Counter()
    shows: Counter[str] = Counter()
    first_seen: dict[str, int] = {}
    for seq in sequences.values():
        for it in seq.items:
            shows[it.news_id] += 1
            if it.clicked:
                clicks[it.news_id] += 1
            if it.news_id not in first_seen or it.timestamp < first_seen[it.news_id]:
                first_seen[it.news_id] = it.timestamp
    out: dict[str, NewsItem] = {}
    dropped = 0
    for nid, item in catalog.items():
        publish = item.publish_time if item.publish_time is not None else first_seen.get(nid)
        if publish is None:
            dropped += 1
            continue
        out[nid] = replace(item, publish_time=publish, click_count=clicks[nid], impression_count=shows[nid])
    return out, dropped


def build_snapshot(
    news_path: str | os.PathLike,
    behaviors_path: str | os.PathLike,
    role_hints_path: str | os.PathLike | None = None,
    k: int = 5,
) -> DatasetSnapshot:
    catalog, news_report = load_news_catalog(news_path)
    records, beh_report = load_behaviors(behaviors_path)
    sequences, seq_stats = build_sequences(catalog, records)
    catalog, no_time = _fill_item_stats(catalog, sequences)
    if no_time:
        log.info("dropped %d news items with no publish time and no impressions", no_time)
        sequences = {
            uid: InteractionSequence(uid, tuple(it for it in seq.items if it.news_id in catalog))
            for uid, seq in sequences.items()
        }
    users_before, news_before = len(sequences), len(catalog)
    sequences, catalog = apply_k_core(sequences, catalog, k)
    catalog, _ = _fill_item_stats(catalog, sequences)
    profiles = build_user_profiles(sequences, catalog, role_hints_path)
    provenance = {
        "news": {"path": str(news_path), "rows": news_report.rows, "accepted": news_report.accepted,
                 "rejected": news_report.rejected},
        "behaviors": {"path": str(behaviors_path), "rows": beh_report.rows, "accepted": beh_report.accepted,
                      "rejected": beh_report.rejected},
        "role_hints": str(role_hints_path) if role_hints_path else None,
        "filters": {
            "k_core": k,
            "records": seq_stats.records,
            "dropped_unknown_news": seq_stats.dropped_unknown,
            "rejected_timestamps": seq_stats.rejected_timestamp,
            "dropped_news_without_time": no_time,
            "users_before_k_core": users_before,
            "news_before_k_core": news_before,
        },
    }
    snap = DatasetSnapshot(catalog, sequences, profiles, provenance)
    snap.check_integrity()
    return snap


# --- snapshot persistence -------------------------------------------------------

def _interaction_row(it: Interaction) -> list:
    return [it.news_id, it.timestamp, it.label, it.impression_id]


def _write_jsonl(path: Path, rows: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False, sort_keys=True))
            fh.write("\n")


def _read_jsonl(path: Path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def save_snapshot(snap: DatasetSnapshot, directory: str | os.PathLike) -> Path:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    _write_jsonl(out / "news.jsonl", (asdict(snap.catalog[n]) for n in sorted(snap.catalog)))
    _write_jsonl(
        out / "sequences.jsonl",
        ({"user_id": u, "items": [_interaction_row(it) for it in snap.sequences[u].items]}
         for u in sorted(snap.sequences)),
    )
    _write_jsonl(
        out / "profiles.jsonl",
        ({"user_id": p.user_id, "role_positioning": p.role_positioning,
          "domain_focus": list(p.domain_focus), "collection_list": list(p.collection_list)}
         for p in (snap.profiles[u] for u in sorted(snap.profiles))),
    )
    manifest = {
        "format_version": SNAPSHOT_FORMAT_VERSION,
        "counts": {
            "news": len(snap.catalog),
            "users": len(snap.sequences),
            "interactions": sum(len(s.items) for s in snap.sequences.values()),
            "clicks": sum(s.length for s in snap.sequences.values()),
        },
        "provenance": snap.provenance,
    }
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return out


def load_snapshot(directory: str | os.PathLike) -> DatasetSnapshot:
    root = Path(directory)
    try:
        with open(root / "manifest.json", encoding="utf-8") as fh:
            manifest = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"{root}: not a snapshot directory ({exc})") from exc
    if manifest.get("format_version") != SNAPSHOT_FORMAT_VERSION:
        raise DataError(f"{root}: unsupported snapshot format {manifest.get('format_version')!r}")
    catalog = {row["id"]: NewsItem(**row) for row in _read_jsonl(root / "news.jsonl")}
    sequences = {
        row["user_id"]: InteractionSequence(
            row["user_id"], tuple(Interaction(n, t, lab, imp) for n, t, lab, imp in row["items"])
        )
        for row in _read_jsonl(root / "sequences.jsonl")
    }
    profiles = {}
    for row in _read_jsonl(root / "profiles.jsonl"):
        uid = row["user_id"]
        seq = sequences.get(uid)
        profiles[uid] = UserProfile(
            user_id=uid,
            role_positioning=row["role_positioning"],
            domain_focus=tuple(row["domain_focus"]),
            collection_list=tuple(row["collection_list"]),
            behavior_history=seq.items if seq else (),
        )
    snap = DatasetSnapshot(catalog, sequences, profiles, manifest.get("provenance", {}))
    snap.check_integrity()
    return snap
