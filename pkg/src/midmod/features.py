"""Per-user behavioral features and labeled edge samples.

Each directed edge ``(v, u)`` ("u follows v") becomes one sample per time bin:
the 27 features of the source ``v``, the 27 features of the destination
``u`` and their social homogeneity.  The label says whether ``u`` ever
forwarded (retweet or quote) one of ``v``'s on-topic records.

Vocabulary used below, per user:

* originals -- ``tweet`` records
* forwards -- ``retweet`` and ``quote`` records
* reactions -- every non-``tweet`` record (retweet, quote, reply, favorite)
* posts -- everything but favorites

Time bins split the UTC day into four 6-hour blocks: 0 = 00:00-05:59,
1 = 06:00-11:59, 2 = 12:00-17:59, 3 = 18:00-23:59.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .eventlog import SECONDS_PER_DAY, EventLog, Topic, UserProfile, is_relevant, record_sentiment
from .graph import SocialGraph

logger = logging.getLogger(__name__)

N_BINS = 4
BIN_SECONDS = 6 * 3600

NETWORK_FEATURES = ["followers_count", "friends_count", "follower_friend_ratio"]
INTERACTION_FEATURES = [
    "tweet_volume_lifetime",
    "directed_tweet_ratio",
    "active_interaction",
    "mention_rate",
    "retweeted_tweet_ratio",
    "tweets_with_hashtags_ratio",
    "retweets_with_hashtags_ratio",
    "retweet_volume_lifetime",
    "avg_tweets_per_day",
    "avg_mentions_excl_retweets",
    "mentions_to_tweet_ratio",
    "tweets_with_url_ratio",
    "retweets_with_url_ratio",
    "tweets_with_media_ratio",
    "retweets_with_media_ratio",
    "has_description",
    "favorited_to_tweet_ratio",
]
SEMANTIC_FEATURES = ["has_topic_keywords", "positive_polarity", "negative_polarity"]
TEMPORAL_FEATURES = [
    "tweets_in_bin_ratio",
    "tweets_retweeted_in_bin_ratio",
    "reactions_in_bin_ratio",
    "avg_time_to_first_retweet",
]
USER_FEATURES = NETWORK_FEATURES + INTERACTION_FEATURES + SEMANTIC_FEATURES + TEMPORAL_FEATURES
N_USER_FEATURES = len(USER_FEATURES)

EDGE_FEATURES = [f"src_{n}" for n in USER_FEATURES] + [f"dst_{n}" for n in USER_FEATURES] + ["social_homogeneity"]
N_EDGE_FEATURES = len(EDGE_FEATURES)

RATIO_FEATURES = [
    "directed_tweet_ratio",
    "retweeted_tweet_ratio",
    "tweets_with_hashtags_ratio",
    "retweets_with_hashtags_ratio",
    "mentions_to_tweet_ratio",
    "tweets_with_url_ratio",
    "retweets_with_url_ratio",
    "tweets_with_media_ratio",
    "retweets_with_media_ratio",
    "favorited_to_tweet_ratio",
    "positive_polarity",
    "negative_polarity",
    "tweets_in_bin_ratio",
    "tweets_retweeted_in_bin_ratio",
    "reactions_in_bin_ratio",
    "avg_time_to_first_retweet",
]
BOOLEAN_FEATURES = ["active_interaction", "has_description", "has_topic_keywords"]

_COL = {name: j for j, name in enumerate(USER_FEATURES)}
_ACTIVE = _COL["active_interaction"]
_TEMPORAL_COLS = [_COL[n] for n in TEMPORAL_FEATURES]

assert N_USER_FEATURES == 27 and N_EDGE_FEATURES == 55


def time_bin(ts: float) -> int:
    """UTC 6-hour block of a timestamp."""
    return int((ts % SECONDS_PER_DAY) // BIN_SECONDS)


def edge_column(prefix: str, name: str) -> int:
    return EDGE_FEATURES.index(f"{prefix}_{name}")


def _ratio(num, den):
    return num / den if den else 0.0


class FeatureExtractor:
    """Computes user features for one (log, topic) pair.

    Per-user aggregates are computed once; temporal features are
    materialized per bin, and ``active_interaction`` per (user, partner).
    """

    def __init__(
        self,
        graph: SocialGraph,
        log: EventLog,
        profiles: Mapping[int, UserProfile],
        topic: Topic,
        lexicon: Mapping[str, float] | None = None,
    ):
        self.graph = graph
        self.log = log
        self.profiles = profiles
        self.topic = topic
        self.lexicon = lexicon
        self.window_length = log.window_length if log.window_length > 0 else 1.0
        self._build()

    def _build(self):
        elog = self.log
        by_id = elog.by_id
        relevant = {r.event_id for r in elog.records if is_relevant(r, self.topic)}
        self.relevant_ids = relevant

        # who forwarded whose on-topic record: these pairs define the labels
        self.label_pairs: set[tuple[int, int]] = set()
        self.interactions: set[tuple[int, int]] = set()
        incoming_mentions: dict[int, int] = {}
        first_forward: dict[int, float] = {}
        favorites_received: dict[int, int] = {}
        for r in elog.records:
            for m in r.mentions:
                if m != r.user:
                    incoming_mentions[m] = incoming_mentions.get(m, 0) + 1
            if r.ref_event is None:
                continue
            defines_label = r.is_forward and r.ref_event in relevant and r.ref_event in by_id
            if defines_label:
                self.label_pairs.add((r.ref_author, r.user))
            else:
                if r.ref_author != r.user:
                    self.interactions.add((r.user, r.ref_author))
                for m in r.mentions:
                    self.interactions.add((r.user, m))
            if r.is_forward:
                if r.ref_event not in first_forward:
                    first_forward[r.ref_event] = r.ts
            elif r.kind == "favorite":
                favorites_received[r.ref_event] = favorites_received.get(r.ref_event, 0) + 1
        for r in elog.records:
            if r.ref_event is None:
                for m in r.mentions:
                    self.interactions.add((r.user, m))

        # absent profile fields were read as 0 / False
        self.missing_profile_fields = sum(len(p.missing_fields) for p in self.profiles.values())
        self._static: dict[int, np.ndarray] = {}
        self._temporal: dict[int, np.ndarray] = {}
        window_end = elog.window[1]
        L = self.window_length
        for user in set(elog.by_user) | set(self.profiles):
            recs = elog.user_records(user)
            v = np.zeros(N_USER_FEATURES)
            t = np.zeros((N_BINS, len(TEMPORAL_FEATURES)))
            prof = self.profiles.get(user)
            if prof is not None:
                v[_COL["followers_count"]] = prof.followers_count
                v[_COL["friends_count"]] = prof.friends_count
                v[_COL["follower_friend_ratio"]] = prof.followers_count / (prof.friends_count + 1)
                v[_COL["has_description"]] = float(prof.has_description)
                age_days = max((window_end - prof.account_created) / SECONDS_PER_DAY, 1.0)
            else:
                age_days = max(L / SECONDS_PER_DAY, 1.0)

            originals = [r for r in recs if r.kind == "tweet"]
            forwards = [r for r in recs if r.is_forward]
            reactions = [r for r in recs if r.is_reaction]
            posts = [r for r in recs if r.is_post]
            non_retweet = [r for r in posts if r.kind != "retweet"]
            n_o, n_f, n_p = len(originals), len(forwards), len(posts)

            forwarded = [o.event_id in first_forward for o in originals]
            v[_COL["tweet_volume_lifetime"]] = n_o / age_days
            v[_COL["directed_tweet_ratio"]] = _ratio(
                sum(1 for o in originals if o.tokens and o.tokens[0].startswith("@")), n_o
            )
            v[_COL["mention_rate"]] = incoming_mentions.get(user, 0) / self.log.window_days
            v[_COL["retweeted_tweet_ratio"]] = _ratio(sum(forwarded), n_o)
            v[_COL["tweets_with_hashtags_ratio"]] = _ratio(sum(1 for o in originals if o.hashtags), n_o)
            v[_COL["retweets_with_hashtags_ratio"]] = _ratio(sum(1 for f in forwards if f.hashtags), n_f)
            v[_COL["retweet_volume_lifetime"]] = n_f / age_days
            v[_COL["avg_tweets_per_day"]] = n_p / self.log.window_days
            v[_COL["avg_mentions_excl_retweets"]] = _ratio(sum(len(r.mentions) for r in non_retweet), len(non_retweet))
            v[_COL["mentions_to_tweet_ratio"]] = _ratio(sum(1 for r in posts if r.mentions), n_p)
            v[_COL["tweets_with_url_ratio"]] = _ratio(sum(1 for o in originals if o.urls), n_o)
            v[_COL["retweets_with_url_ratio"]] = _ratio(sum(1 for f in forwards if f.urls), n_f)
            v[_COL["tweets_with_media_ratio"]] = _ratio(sum(1 for o in originals if o.media), n_o)
            v[_COL["retweets_with_media_ratio"]] = _ratio(sum(1 for f in forwards if f.media), n_f)
            fav = sum(favorites_received.get(o.event_id, 0) for o in originals)
            v[_COL["favorited_to_tweet_ratio"]] = min(fav / max(1, n_o), 1.0)
            v[_COL["has_topic_keywords"]] = float(any(o.event_id in relevant for o in originals))
            scores = [record_sentiment(o, self.lexicon) for o in originals]
            v[_COL["positive_polarity"]] = _ratio(sum(1 for s in scores if s > 0), n_o)
            v[_COL["negative_polarity"]] = _ratio(sum(1 for s in scores if s < 0), n_o)

            post_bins = np.bincount([time_bin(r.ts) for r in posts], minlength=N_BINS)
            reaction_bins = np.bincount([time_bin(r.ts) for r in reactions], minlength=N_BINS)
            orig_bins = np.zeros(N_BINS)
            fwd_bins = np.zeros(N_BINS)
            delay_sum = np.zeros(N_BINS)
            for o, was_fwd in zip(originals, forwarded):
                b = time_bin(o.ts)
                orig_bins[b] += 1
                if was_fwd:
                    fwd_bins[b] += 1
                    delay_sum[b] += min(max(first_forward[o.event_id] - o.ts, 0.0), L) / L
                else:
                    delay_sum[b] += 1.0
            for b in range(N_BINS):
                t[b, 0] = _ratio(post_bins[b], n_p)
                t[b, 1] = _ratio(fwd_bins[b], orig_bins[b])
                t[b, 2] = _ratio(reaction_bins[b], len(reactions))
                t[b, 3] = delay_sum[b] / orig_bins[b] if orig_bins[b] else 1.0
            self._static[user] = v
            self._temporal[user] = t

    def _empty(self):
        v = np.zeros(N_USER_FEATURES)
        t = np.zeros((N_BINS, len(TEMPORAL_FEATURES)))
        t[:, 3] = 1.0
        return v, t

    def user_vector(self, user: int, partner: int | None, bin: int) -> np.ndarray:
        """The 27 features of ``user`` in time bin ``bin``, with
        ``active_interaction`` measured towards ``partner``."""
        if user in self._static:
            v, t = self._static[user], self._temporal[user]
        else:
            v, t = self._empty()
        out = v.copy()
        out[_TEMPORAL_COLS] = t[bin]
        if partner is not None:
            out[_ACTIVE] = float((user, partner) in self.interactions)
        return out

    def edge_vector(self, v: int, u: int, bin: int) -> np.ndarray:
        """The 55 features of edge ``(v, u)`` in time bin ``bin``."""
        return np.concatenate(
            [self.user_vector(v, u, bin), self.user_vector(u, v, bin), [self.graph.social_homogeneity(v, u)]]
        )

    def user_matrix(self, users: list[int], bin: int) -> np.ndarray:
        out = np.empty((len(users), N_USER_FEATURES))
        for k, u in enumerate(users):
            out[k] = self.user_vector(u, None, bin)
        return out

    def label(self, v: int, u: int) -> int:
        return int((v, u) in self.label_pairs)


def extract_user(
    user: int,
    partner: int | None,
    bin: int,
    log: EventLog,
    profile: UserProfile | None,
    graph: SocialGraph,
    topic: Topic,
    lexicon: Mapping[str, float] | None = None,
) -> np.ndarray:
    profiles = {user: profile} if profile is not None else {}
    return FeatureExtractor(graph, log, profiles, topic, lexicon).user_vector(user, partner, bin)


def label_edge(v: int, u: int, log: EventLog, topic: Topic) -> int:
    """1 iff ``u`` forwarded (retweet or quote) an on-topic record authored by ``v``."""
    for r in log.user_records(u):
        if r.is_forward and r.ref_author == v:
            ref = log.by_id.get(r.ref_event)
            if ref is not None and is_relevant(ref, topic):
                return 1
    return 0


@dataclass
class Dataset:
    """Edge samples for one topic and time bin, sorted by (src, dst)."""

    src: np.ndarray
    dst: np.ndarray
    bin: int
    X: np.ndarray
    y: np.ndarray
    feature_names: list[str] = field(default_factory=lambda: list(EDGE_FEATURES))
    skipped: int = 0

    def __len__(self) -> int:
        return len(self.y)

    def columns(self, names: list[str]) -> np.ndarray:
        idx = [self.feature_names.index(n) for n in names]
        return self.X[:, idx]

    def select(self, indexes) -> "Dataset":
        """Keep only the given feature columns, in their original order."""
        idx = sorted(int(i) for i in indexes)
        return Dataset(self.src, self.dst, self.bin, self.X[:, idx], self.y, [self.feature_names[i] for i in idx], self.skipped)

    def to_csv(self, path) -> None:
        header = ",".join(["src", "dst", "bin", *self.feature_names, "label"])
        n = len(self.y)
        with open(path, "w", newline="") as fh:
            fh.write(header + "\n")
            if n:
                fmt = ["%d"] * 3 + ["%.9g"] * self.X.shape[1] + ["%d"]
                block = np.column_stack([self.src, self.dst, np.full(n, self.bin), self.X, self.y]).astype(np.float64)
                np.savetxt(fh, block, fmt=fmt, delimiter=",")

    @classmethod
    def from_csv(cls, path) -> "Dataset":
        with open(path, newline="") as fh:
            header = next(csv.reader(fh), None)
            if not header or header[:3] != ["src", "dst", "bin"] or header[-1] != "label":
                raise ValueError(f"{path}: unexpected header")
            names = header[3:-1]
            body = np.loadtxt(fh, delimiter=",", dtype=np.float64, ndmin=2)
        if body.size and body.shape[1] != len(header):
            raise ValueError(f"{path}: expected {len(header)} columns, got {body.shape[1]}")
        body = body.reshape(-1, len(header))
        bins = set(body[:, 2].astype(np.int64).tolist())
        if len(bins) > 1:
            raise ValueError(f"{path}: rows from several bins")
        src = body[:, 0].astype(np.int64)
        dst = body[:, 1].astype(np.int64)
        y = body[:, -1].astype(np.int64)
        return cls(src, dst, bins.pop() if bins else 0, body[:, 3:-1].copy(), y, names)


def _homogeneity_column(graph: SocialGraph, src, dst) -> np.ndarray:
    return np.array([graph.social_homogeneity(int(v), int(u)) for v, u in zip(src, dst)])


def build_datasets(
    graph: SocialGraph,
    log: EventLog,
    profiles: Mapping[int, UserProfile],
    topic: Topic,
    bins=range(N_BINS),
    lexicon: Mapping[str, float] | None = None,
    extractor: FeatureExtractor | None = None,
) -> list[Dataset]:
    """One dataset per requested bin over every edge whose endpoints have profiles."""
    fx = extractor or FeatureExtractor(graph, log, profiles, topic, lexicon)
    edges = [(v, u) for v, u in graph.edges() if v in profiles and u in profiles]
    skipped = graph.edge_count - len(edges)
    if skipped:
        logger.info("%d edge(s) skipped: endpoint without a profile", skipped)
    src = np.array([e[0] for e in edges], dtype=np.int64)
    dst = np.array([e[1] for e in edges], dtype=np.int64)
    y = np.array([fx.label(v, u) for v, u in edges], dtype=np.int64)
    homog = _homogeneity_column(graph, src, dst)
    active_src = np.array([float((v, u) in fx.interactions) for v, u in edges])
    active_dst = np.array([float((u, v) in fx.interactions) for v, u in edges])
    users = sorted(set(src.tolist()) | set(dst.tolist()))
    pos = {u: k for k, u in enumerate(users)}
    si = np.array([pos[v] for v in src.tolist()], dtype=np.int64)
    di = np.array([pos[u] for u in dst.tolist()], dtype=np.int64)
    out = []
    for b in bins:
        U = fx.user_matrix(users, b)
        X = np.empty((len(edges), N_EDGE_FEATURES))
        X[:, :N_USER_FEATURES] = U[si]
        X[:, N_USER_FEATURES : 2 * N_USER_FEATURES] = U[di]
        X[:, _ACTIVE] = active_src
        X[:, N_USER_FEATURES + _ACTIVE] = active_dst
        X[:, -1] = homog
        out.append(Dataset(src.copy(), dst.copy(), int(b), X, y.copy(), list(EDGE_FEATURES), skipped))
    return out


def build_dataset(graph, log, profiles, topic, bin: int, lexicon=None) -> Dataset:
    return build_datasets(graph, log, profiles, topic, bins=[bin], lexicon=lexicon)[0]


def pool(datasets: list[Dataset]) -> Dataset:
    """Stack per-bin datasets into one (the ``bin`` field becomes -1)."""
    if not datasets:
        raise ValueError("nothing to pool")
    names = datasets[0].feature_names
    for d in datasets:
        if d.feature_names != names:
            raise ValueError("datasets have different columns")
    return Dataset(
        np.concatenate([d.src for d in datasets]),
        np.concatenate([d.dst for d in datasets]),
        -1,
        np.vstack([d.X for d in datasets]),
        np.concatenate([d.y for d in datasets]),
        list(names),
        sum(d.skipped for d in datasets),
    )
