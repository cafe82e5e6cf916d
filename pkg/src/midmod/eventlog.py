"""Normalized tweet-like event records: ingest, validation, indexing, topics.

Records arrive as line-delimited JSON (one object per line)::

    {"event_id": 7, "user": 3, "ts": 1538400000, "kind": "retweet",
     "ref_event": 2, "ref_author": 1, "tokens": ["coffee", "daily"],
     "hashtags": 1, "urls": 0, "media": 0, "mentions": [1], "sentiment": 0.5}

``hashtags``, ``urls``, ``media`` default to 0, ``tokens`` and ``mentions`` to
empty lists, ``sentiment`` to absent.  Reactions (everything except
``tweet``) must carry ``ref_event`` and ``ref_author``; tweets must not.
"""

from __future__ import annotations

import json
import logging
import os
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping

log = logging.getLogger(__name__)

KINDS = ("tweet", "retweet", "quote", "reply", "favorite")
REACTION_KINDS = frozenset(KINDS[1:])
FORWARD_KINDS = frozenset({"retweet", "quote"})
POST_KINDS = frozenset({"tweet", "retweet", "quote", "reply"})

SECONDS_PER_DAY = 86400.0

# Small general-purpose polarity lexicon used when records carry no sentiment.
DEFAULT_LEXICON: dict[str, float] = {
    "good": 0.6, "great": 0.8, "love": 0.9, "happy": 0.7, "excellent": 0.9,
    "benefit": 0.5, "healthy": 0.6, "win": 0.6, "best": 0.8, "hope": 0.4,
    "thanks": 0.5, "amazing": 0.9, "support": 0.4, "safe": 0.4, "calm": 0.3,
    "bad": -0.6, "terrible": -0.9, "hate": -0.9, "sad": -0.6, "worst": -0.9,
    "risk": -0.4, "angry": -0.7, "fail": -0.6, "shutdown": -0.3, "crisis": -0.7,
    "fear": -0.6, "sick": -0.5, "wrong": -0.5, "corrupt": -0.8, "danger": -0.7,
}


class IngestError(Exception):
    """The input could not be read at all."""


class RecordError(ValueError):
    """A single record violates the event schema."""


@dataclass(frozen=True, slots=True)
class EventRecord:
    event_id: int
    user: int
    ts: float
    kind: str
    ref_event: int | None = None
    ref_author: int | None = None
    tokens: tuple[str, ...] = ()
    hashtags: int = 0
    urls: int = 0
    media: int = 0
    mentions: tuple[int, ...] = ()
    sentiment: float | None = None

    @property
    def is_original(self) -> bool:
        return self.kind == "tweet"

    @property
    def is_forward(self) -> bool:
        return self.kind in FORWARD_KINDS

    @property
    def is_reaction(self) -> bool:
        return self.kind in REACTION_KINDS

    @property
    def is_post(self) -> bool:
        return self.kind in POST_KINDS

    def to_json(self) -> dict:
        out = {"event_id": self.event_id, "user": self.user, "ts": self.ts, "kind": self.kind}
        if self.ref_event is not None:
            out["ref_event"] = self.ref_event
            out["ref_author"] = self.ref_author
        out["tokens"] = list(self.tokens)
        out["hashtags"] = self.hashtags
        out["urls"] = self.urls
        out["media"] = self.media
        out["mentions"] = list(self.mentions)
        if self.sentiment is not None:
            out["sentiment"] = self.sentiment
        return out


def _count(obj: Mapping, key: str) -> int:
    val = obj.get(key, 0)
    if isinstance(val, bool) or not isinstance(val, int) or val < 0:
        raise RecordError(f"{key} must be a non-negative integer, got {val!r}")
    return val


def _node(val, key: str) -> int:
    if isinstance(val, bool) or not isinstance(val, int) or val < 0:
        raise RecordError(f"{key} must be a non-negative integer id, got {val!r}")
    return val


def record_from_json(obj: Mapping) -> EventRecord:
    """Validate one decoded JSON object and build a record from it."""
    if not isinstance(obj, Mapping):
        raise RecordError("record is not a JSON object")
    for key in ("event_id", "user", "ts", "kind"):
        if key not in obj:
            raise RecordError(f"missing field {key!r}")
    kind = obj["kind"]
    if kind not in KINDS:
        raise RecordError(f"unknown kind {kind!r}")
    ts = obj["ts"]
    if isinstance(ts, bool) or not isinstance(ts, (int, float)) or ts < 0:
        raise RecordError(f"ts must be a non-negative number, got {ts!r}")
    ref_event = obj.get("ref_event")
    ref_author = obj.get("ref_author")
    if kind == "tweet":
        if ref_event is not None or ref_author is not None:
            raise RecordError("tweet records must not reference another event")
    else:
        if ref_event is None:
            raise RecordError(f"{kind} record is missing ref_event")
        if ref_author is None:
            raise RecordError(f"{kind} record is missing ref_author")
        ref_event = _node(ref_event, "ref_event")
        ref_author = _node(ref_author, "ref_author")
    tokens = obj.get("tokens", [])
    if not isinstance(tokens, list) or not all(isinstance(t, str) for t in tokens):
        raise RecordError("tokens must be a list of strings")
    mentions = obj.get("mentions", [])
    if not isinstance(mentions, list):
        raise RecordError("mentions must be a list of user ids")
    sentiment = obj.get("sentiment")
    if sentiment is not None:
        if isinstance(sentiment, bool) or not isinstance(sentiment, (int, float)):
            raise RecordError(f"sentiment must be numeric, got {sentiment!r}")
        if not -1.0 <= sentiment <= 1.0:
            raise RecordError(f"sentiment {sentiment} outside [-1, 1]")
        sentiment = float(sentiment)
    return EventRecord(
        event_id=_node(obj["event_id"], "event_id"),
        user=_node(obj["user"], "user"),
        ts=ts,
        kind=kind,
        ref_event=ref_event,
        ref_author=ref_author,
        tokens=tuple(t.lower() for t in tokens),
        hashtags=_count(obj, "hashtags"),
        urls=_count(obj, "urls"),
        media=_count(obj, "media"),
        mentions=tuple(_node(m, "mentions") for m in mentions),
        sentiment=sentiment,
    )


class EventLog:
    """Time-ordered, indexed, read-only collection of event records.

    ``window`` defaults to the span of the record timestamps.
    """

    def __init__(self, records: Iterable[EventRecord], window: tuple[float, float] | None = None):
        recs = sorted(records, key=lambda r: (r.ts, r.event_id))
        self.records: tuple[EventRecord, ...] = tuple(recs)
        self.by_id: dict[int, EventRecord] = {}
        self.by_user: dict[int, list[EventRecord]] = defaultdict(list)
        self.reactions: dict[int, list[EventRecord]] = defaultdict(list)
        for r in self.records:
            if r.event_id in self.by_id:
                raise RecordError(f"duplicate event_id {r.event_id}")
            self.by_id[r.event_id] = r
            self.by_user[r.user].append(r)
            if r.ref_event is not None:
                self.reactions[r.ref_event].append(r)
        if window is None:
            if self.records:
                window = (float(self.records[0].ts), float(self.records[-1].ts))
            else:
                window = (0.0, 0.0)
        if window[1] < window[0]:
            raise ValueError(f"window end precedes start: {window}")
        self.window = (float(window[0]), float(window[1]))

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def window_length(self) -> float:
        return self.window[1] - self.window[0]

    @property
    def window_days(self) -> float:
        return max(self.window_length / SECONDS_PER_DAY, 1.0)

    def user_records(self, user: int) -> list[EventRecord]:
        return self.by_user.get(user, [])

    def reactions_to(self, event_id: int) -> list[EventRecord]:
        return self.reactions.get(event_id, [])

    def dangling_references(self) -> list[int]:
        """Event ids of reactions whose ``ref_event`` is not in the log."""
        return [r.event_id for r in self.records if r.ref_event is not None and r.ref_event not in self.by_id]


@dataclass(frozen=True, slots=True)
class Topic:
    name: str
    keywords: frozenset[str]

    def __post_init__(self):
        if not self.keywords:
            raise ValueError(f"topic {self.name!r} needs at least one keyword")
        object.__setattr__(self, "keywords", frozenset(k.lower() for k in self.keywords))


def is_relevant(record: EventRecord, topic: Topic) -> bool:
    """A record belongs to a topic when any of its tokens is a topic keyword."""
    return not topic.keywords.isdisjoint(record.tokens)


def sentiment_score(tokens: Iterable[str], lexicon: Mapping[str, float]) -> float:
    """Mean weight of lexicon hits, clamped to [-1, 1]; 0.0 when nothing matches."""
    total = 0.0
    hits = 0
    for t in tokens:
        w = lexicon.get(t)
        if w is not None:
            total += w
            hits += 1
    if hits == 0:
        return 0.0
    return min(1.0, max(-1.0, total / hits))


def record_sentiment(record: EventRecord, lexicon: Mapping[str, float] | None = None) -> float:
    """Record-level sentiment wins; otherwise score the tokens with ``lexicon``."""
    if record.sentiment is not None:
        return record.sentiment
    return sentiment_score(record.tokens, DEFAULT_LEXICON if lexicon is None else lexicon)


@dataclass(frozen=True, slots=True)
class UserProfile:
    user: int
    account_created: float
    has_description: bool = False
    followers_count: int = 0
    friends_count: int = 0
    # fields absent from the source record (filled with 0 / False)
    missing_fields: tuple[str, ...] = ()

    def to_json(self) -> dict:
        return {
            "user": self.user,
            "created": self.account_created,
            "has_description": self.has_description,
            "followers": self.followers_count,
            "friends": self.friends_count,
        }


PROFILE_FIELDS = ("created", "has_description", "followers", "friends")


def profile_from_json(obj: Mapping) -> UserProfile:
    if "user" not in obj:
        raise RecordError("profile is missing 'user'")
    created = obj.get("created", 0)
    if isinstance(created, bool) or not isinstance(created, (int, float)) or created < 0:
        raise RecordError(f"created must be a non-negative timestamp, got {created!r}")
    missing = tuple(k for k in PROFILE_FIELDS if k not in obj)
    return UserProfile(
        user=_node(obj["user"], "user"),
        account_created=created,
        has_description=bool(obj.get("has_description", False)),
        followers_count=_count(obj, "followers"),
        friends_count=_count(obj, "friends"),
        missing_fields=missing,
    )


@dataclass
class IngestReport:
    log: EventLog
    profiles: dict[int, UserProfile] = field(default_factory=dict)
    malformed: list[tuple[int, str]] = field(default_factory=list)
    malformed_profiles: list[tuple[int, str]] = field(default_factory=list)
    dangling: list[int] = field(default_factory=list)
    profile_warnings: list[str] = field(default_factory=list)

    @property
    def malformed_count(self) -> int:
        return len(self.malformed)

    @property
    def missing_profile_fields(self) -> int:
        return sum(len(p.missing_fields) for p in self.profiles.values())

    def summary(self) -> dict:
        return {
            "records": len(self.log),
            "window": list(self.log.window),
            "malformed": self.malformed_count,
            "malformed_lines": [{"line": n, "reason": why} for n, why in self.malformed],
            "profiles": len(self.profiles),
            "malformed_profiles": len(self.malformed_profiles),
            "missing_profile_fields": self.missing_profile_fields,
            "dangling_references": self.dangling,
            "profile_warnings": self.profile_warnings,
        }


def _read_jsonl(path, parse):
    good, bad = [], []
    try:
        fh = open(path)
    except OSError as exc:
        raise IngestError(f"cannot read {path}: {exc}") from exc
    with fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                good.append((lineno, parse(json.loads(line))))
            except (json.JSONDecodeError, RecordError) as exc:
                bad.append((lineno, str(exc)))
    return good, bad


def ingest(
    events_path: str | os.PathLike,
    profiles_path: str | os.PathLike | None = None,
    window: tuple[float, float] | None = None,
) -> IngestReport:
    """Read an event log (and optionally profiles), validating as we go.

    Malformed lines are collected in the report together with their line
    number; reactions pointing at unknown events are listed as dangling.
    """
    records, bad = _read_jsonl(events_path, record_from_json)
    seen: set[int] = set()
    unique = []
    for lineno, r in records:
        if r.event_id in seen:
            bad.append((lineno, f"duplicate event_id {r.event_id}"))
            continue
        seen.add(r.event_id)
        unique.append(r)
    bad.sort()
    elog = EventLog(unique, window=window)
    report = IngestReport(log=elog, malformed=bad, dangling=elog.dangling_references())
    if profiles_path is not None:
        profiles, pbad = _read_jsonl(profiles_path, profile_from_json)
        report.malformed_profiles = pbad
        for _, p in profiles:
            if p.account_created > elog.window[0]:
                report.profile_warnings.append(f"user {p.user} created after window start")
            report.profiles[p.user] = p
    if bad:
        log.warning("%s: %d malformed line(s)", events_path, len(bad))
    return report


def write_events(records: Iterable[EventRecord], path: str | os.PathLike) -> None:
    with open(path, "w") as fh:
        for r in records:
            fh.write(json.dumps(r.to_json(), separators=(",", ":")))
            fh.write("\n")


def write_profiles(profiles: Iterable[UserProfile], path: str | os.PathLike) -> None:
    with open(path, "w") as fh:
        for p in sorted(profiles, key=lambda p: p.user):
            fh.write(json.dumps(p.to_json(), separators=(",", ":")))
            fh.write("\n")


def load_topic(path: str | os.PathLike) -> Topic:
    with open(path) as fh:
        obj = json.load(fh)
    return Topic(name=str(obj["name"]), keywords=frozenset(obj["keywords"]))


def write_topic(topic: Topic, path: str | os.PathLike) -> None:
    with open(path, "w") as fh:
        json.dump({"name": topic.name, "keywords": sorted(topic.keywords)}, fh, indent=2)


def load_lexicon(path: str | os.PathLike) -> dict[str, float]:
    """Lines of ``word weight``; blank lines and ``#`` comments are skipped."""
    lexicon = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'word weight'")
            lexicon[parts[0].lower()] = float(parts[1])
    return lexicon
