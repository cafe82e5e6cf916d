"""Synthetic social networks, posting behavior and asynchronous independent
cascades (AsIC) with exponential per-edge delays.

The synthetic dataset plants a known logistic relationship between edge
features and per-edge transmission probability so that the learning stages
can be checked against ground truth.
"""

from __future__ import annotations

import heapq
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numba
import numpy as np

from .eventlog import DEFAULT_LEXICON, EventLog, EventRecord, Topic, UserProfile
from .features import EDGE_FEATURES, N_BINS, N_USER_FEATURES, TEMPORAL_FEATURES, FeatureExtractor, build_datasets
from .graph import SocialGraph

log = logging.getLogger(__name__)

DAY = 86400.0
# 2018-10-01T00:00:00Z, so simulated days line up with UTC bins
DEFAULT_START = 1538352000.0

DEFAULT_TOPICS = [
    ("health benefits of coffee", ["coffee", "caffeine", "espresso", "latte", "brew", "antioxidant", "cup"]),
    ("mental health", ["anxiety", "depression", "therapy", "mindfulness", "wellbeing", "selfcare", "stress"]),
    ("kansas elections", ["election", "ballot", "vote", "governor", "candidate", "polls", "kansas"]),
    ("government shutdown", ["shutdown", "congress", "furlough", "budget", "senate", "wall", "federal"]),
]
FILLER = (
    "the a today news time people day week life world city morning night story "
    "read watch think post share new more work home friend team game music photo"
).split()
POSITIVE_WORDS = sorted(w for w, s in DEFAULT_LEXICON.items() if s > 0)
NEGATIVE_WORDS = sorted(w for w, s in DEFAULT_LEXICON.items() if s < 0)


# ----------------------------------------------------------------- AsIC


@dataclass
class AsicParams:
    """``edge_probability`` is a constant, a ``{(v, u): p}`` table or a callable
    ``p(v, u)``; ``delay_scale`` is the mean of the exponential delay (seconds)."""

    edge_probability: float | Mapping[tuple[int, int], float] | Callable[[int, int], float]
    delay_scale: float = 3600.0
    horizon: float = 30 * DAY

    def __post_init__(self):
        if not self.delay_scale > 0:
            raise ValueError("delay_scale must be positive")
        if isinstance(self.edge_probability, (int, float)) and not 0 <= self.edge_probability <= 1:
            raise ValueError("edge probability must lie in [0, 1]")


@dataclass
class Cascade:
    activations: list[tuple[int, float, int | None]]
    topic: Topic | None = None
    attempts: Counter = field(default_factory=Counter, repr=False)

    @property
    def nodes(self) -> list[int]:
        return [a[0] for a in self.activations]

    def activator_of(self) -> dict[int, int | None]:
        return {n: a for n, _, a in self.activations}


class _Adjacency:
    """Follower lists in CSR form; edge ``k`` is ``(v, indices[k])`` for
    ``indptr[v] <= k < indptr[v + 1]``, in sorted order."""

    def __init__(self, graph: SocialGraph, prob):
        n = max(graph.nodes) + 1 if graph.node_count else 0
        self.edges = list(graph.edges())
        src = np.array([e[0] for e in self.edges], dtype=np.int64)
        self.indices = np.array([e[1] for e in self.edges], dtype=np.int64)
        self.indptr = np.zeros(n + 1, np.int64)
        np.add.at(self.indptr, src + 1, 1)
        self.indptr = np.cumsum(self.indptr)
        self.n = n
        self.set_probability(prob)

    def set_probability(self, prob):
        if isinstance(prob, (int, float)):
            p = np.full(len(self.edges), float(prob))
        elif isinstance(prob, np.ndarray):
            p = np.asarray(prob, dtype=np.float64)
        elif isinstance(prob, Mapping):
            p = np.array([prob.get(e, 0.0) for e in self.edges], dtype=np.float64)
        else:
            p = np.array([prob(v, u) for v, u in self.edges], dtype=np.float64)
        if p.shape != (len(self.edges),):
            raise ValueError("one probability per edge expected")
        if ((p < 0) | (p > 1)).any():
            raise ValueError("edge probabilities must lie in [0, 1]")
        self.prob = p


@numba.njit(cache=True)
def _asic_kernel(indptr, indices, prob, seed_node, seed_time, cascade_of_seed, rng_seeds, delay_scale, end):
    """Run one cascade per entry of ``rng_seeds``.

    Seeds of cascade m are the entries with ``cascade_of_seed == m``.  Returns
    the activations (cascade, node, time, activator edge or -1), attempt counts
    per edge and the number of repeated attempts on an edge within a cascade.
    """
    n = indptr.shape[0] - 1
    n_edges = indices.shape[0]
    active = np.zeros(n, np.bool_)
    best = np.full(n, np.inf)
    touched = np.empty(n, np.int64)
    attempts = np.zeros(n_edges, np.int64)
    last_attempt = np.full(n_edges, -1, np.int64)
    repeated = 0
    out_c = []
    out_node = []
    out_time = []
    out_edge = []
    for m in range(rng_seeds.shape[0]):
        np.random.seed(rng_seeds[m])
        heap = [(0.0, 0, 0, 0)]
        heap.pop()
        n_touched = 0
        seq = 0
        for k in range(seed_node.shape[0]):
            if cascade_of_seed[k] == m:
                v = seed_node[k]
                if best[v] == np.inf:
                    touched[n_touched] = v
                    n_touched += 1
                if seed_time[k] < best[v]:
                    best[v] = seed_time[k]
                heapq.heappush(heap, (seed_time[k], seq, v, -1))
                seq += 1
        while len(heap) > 0:
            t, _, node, via = heapq.heappop(heap)
            if t > end:
                break
            if active[node]:
                continue
            active[node] = True
            out_c.append(m)
            out_node.append(node)
            out_time.append(t)
            out_edge.append(via)
            for e in range(indptr[node], indptr[node + 1]):
                u = indices[e]
                hit = np.random.random() < prob[e]
                delay = np.random.exponential(delay_scale)
                if active[u]:
                    continue
                attempts[e] += 1
                if last_attempt[e] == m:
                    repeated += 1
                last_attempt[e] = m
                if not hit:
                    continue
                if delay <= 0.0:
                    delay = 1e-9
                tu = t + delay
                # a later-arriving attempt loses the competition for u
                if tu < best[u]:
                    if best[u] == np.inf:
                        touched[n_touched] = u
                        n_touched += 1
                    best[u] = tu
                    heapq.heappush(heap, (tu, seq, u, e))
                    seq += 1
        for k in range(n_touched):
            active[touched[k]] = False
            best[touched[k]] = np.inf
    return (np.array(out_c, np.int64), np.array(out_node, np.int64), np.array(out_time, np.float64),
            np.array(out_edge, np.int64), attempts, repeated)


@dataclass
class _Batch:
    adj: _Adjacency
    n_cascades: int
    order: tuple  # (cascade, node, time, edge) arrays in activation order
    attempts: np.ndarray  # per edge, summed over cascades
    repeated: int

    @property
    def activator_edges(self) -> np.ndarray:
        edge = self.order[3]
        return edge[edge >= 0]

    @property
    def cascades(self) -> list[Cascade]:
        out = [Cascade([]) for _ in range(self.n_cascades)]
        edges = self.adj.edges
        for m, v, t, e in zip(*(a.tolist() for a in self.order)):
            out[m].activations.append((v, t, None if e < 0 else edges[e][0]))
        return out


def _run_batch(adj: _Adjacency, seeds: list[list[tuple[int, float]]], rng_seeds, delay_scale, end) -> _Batch:
    seed_node = np.array([s for group in seeds for s, _ in group], dtype=np.int64)
    seed_time = np.array([t for group in seeds for _, t in group], dtype=np.float64)
    owner = np.array([m for m, group in enumerate(seeds) for _ in group], dtype=np.int64)
    c, node, time, edge, attempts, repeated = _asic_kernel(
        adj.indptr, adj.indices, adj.prob, seed_node, seed_time, owner,
        np.asarray(rng_seeds, dtype=np.int64), float(delay_scale), float(end),
    )
    return _Batch(adj, len(seeds), (c, node, time, edge), attempts, int(repeated))


def run_asic(graph: SocialGraph, seeds, params: AsicParams, rng_seed: int, start: float = 0.0, topic=None,
             instrument: bool = False) -> Cascade:
    """Simulate one cascade from ``seeds`` (all activated at ``start``).

    Each newly active node makes one attempt on every follower that is still
    inactive; a successful attempt arrives after an exponential delay and the
    earliest arrival activates the follower.  Nothing happens after
    ``start + params.horizon``.  With ``instrument`` the per-edge attempt
    counts are attached to the cascade.
    """
    seeds = sorted(set(int(s) for s in seeds))
    for s in seeds:
        if s not in graph:
            raise ValueError(f"seed {s} is not in the graph")
    if not seeds:
        return Cascade([], topic=topic)
    adj = _Adjacency(graph, params.edge_probability)
    seed32 = int(np.random.SeedSequence(rng_seed).generate_state(1)[0])
    batch = _run_batch(adj, [[(s, start) for s in seeds]], [seed32], params.delay_scale, start + params.horizon)
    c = batch.cascades[0]
    c.topic = topic
    if instrument:
        c.attempts = Counter({adj.edges[e]: int(a) for e, a in enumerate(batch.attempts) if a})
    return c


# ----------------------------------------------------------------- graph + behavior


def generate_graph(n_users: int, edges_per_node: int, rng_seed: int, reciprocity: float = 0.2) -> SocialGraph:
    """Directed preferential attachment.

    Each arriving user follows ``edges_per_node`` earlier users picked with
    probability proportional to (followers + 1); a followed user follows back
    with probability ``reciprocity``.
    """
    if n_users < 2:
        raise ValueError("need at least 2 users")
    rng = np.random.default_rng(rng_seed)
    g = SocialGraph(nodes=range(n_users))
    pool = [0]  # node repeated once per follower, plus once for itself
    for u in range(1, n_users):
        m = min(edges_per_node, u)
        chosen: set[int] = set()
        while len(chosen) < m:
            chosen.add(pool[int(rng.integers(len(pool)))])
        for v in sorted(chosen):
            g.add_edge(v, u)
            pool.append(v)
            if rng.random() < reciprocity:
                g.add_edge(u, v)
                pool.append(u)
        pool.append(u)
    return g


@dataclass
class BehaviorProfile:
    """Per-user synthetic posting behavior (arrays indexed by user id)."""

    post_rate: np.ndarray  # (n, 4) originals per hour within each bin
    reaction_rate: np.ndarray  # reactions per day
    hashtag_p: np.ndarray
    url_p: np.ndarray
    media_p: np.ndarray
    sentiment: np.ndarray  # tendency in [-1, 1]
    reply_p: np.ndarray
    directed_p: np.ndarray
    description_p: np.ndarray

    def __post_init__(self):
        if (self.post_rate < 0).any() or (self.reaction_rate < 0).any():
            raise ValueError("rates must be non-negative")
        for name in ("hashtag_p", "url_p", "media_p", "reply_p", "directed_p", "description_p"):
            a = getattr(self, name)
            if ((a < 0) | (a > 1)).any():
                raise ValueError(f"{name} must lie in [0, 1]")
        if (np.abs(self.sentiment) > 1).any():
            raise ValueError("sentiment tendency must lie in [-1, 1]")

    @property
    def n_users(self) -> int:
        return len(self.reaction_rate)


def default_behaviors(
    n_users: int,
    rng_seed: int,
    posts_per_day: float = 0.2,
    reactions_per_day: float = 0.1,
    bin_weights=(0.25, 0.25, 0.25, 0.25),
) -> BehaviorProfile:
    """Heterogeneous users; ``bin_weights`` sets the share of posting per bin."""
    rng = np.random.default_rng(rng_seed)
    w = np.asarray(bin_weights, dtype=np.float64)
    if w.shape != (N_BINS,) or (w < 0).any() or w.sum() <= 0:
        raise ValueError("bin_weights needs 4 non-negative entries")
    w = w / w.sum()
    activity = rng.lognormal(0.0, 0.6, n_users)
    activity /= activity.mean()
    # originals/hour inside bin b so that the daily total is posts_per_day * activity
    post_rate = (posts_per_day * activity)[:, None] * w[None, :] / 6.0
    return BehaviorProfile(
        post_rate=post_rate,
        reaction_rate=reactions_per_day * rng.lognormal(0.0, 0.6, n_users),
        hashtag_p=rng.beta(2, 4, n_users),
        url_p=rng.beta(2, 3, n_users),
        media_p=rng.beta(1.5, 5, n_users),
        sentiment=np.clip(rng.normal(0.1, 0.4, n_users), -1, 1),
        reply_p=rng.beta(2, 5, n_users),
        directed_p=rng.beta(1, 6, n_users),
        description_p=rng.beta(5, 2, n_users),
    )


# ----------------------------------------------------------------- dataset synthesis


DEFAULT_PLANTED_WEIGHTS = {
    "src_followers_count": 1.5,
    "src_tweets_with_url_ratio": 2.0,
    "dst_tweets_with_media_ratio": -2.0,
    "dst_has_description": 2.0,
    "social_homogeneity": 2.0,
    "dst_tweets_with_hashtags_ratio": -1.5,
}


@dataclass
class SimulationConfig:
    """Knobs of :func:`synthesize_dataset`.

    ``topic_authors`` is the share of users with followers who post one
    message per topic; ``posts_per_day`` and ``reactions_per_day`` are mean
    background rates per user.  The defaults give roughly 20 events per user
    over the 30-day horizon.
    """

    users: int = 2000
    edges_per_node: int = 4
    reciprocity: float = 0.2
    delay_mean_s: float = 3600.0
    horizon_s: float = 30 * DAY
    topics: int = 1
    planted_weights: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_PLANTED_WEIGHTS))
    class_balance: float | None = 0.4
    posts_per_day: float = 0.2
    reactions_per_day: float = 0.1
    bin_weights: tuple = (0.25, 0.25, 0.25, 0.25)
    topic_authors: float = 0.05
    rng_seed: int = 0
    start: float = DEFAULT_START

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["bin_weights"] = list(self.bin_weights)
        d["planted_weights"] = dict(self.planted_weights)
        return d


@dataclass
class SyntheticDataset:
    graph: SocialGraph
    log: EventLog
    profiles: dict[int, UserProfile]
    topics: list[Topic]
    behaviors: BehaviorProfile
    edge_probability: list[dict[tuple[int, int], float]]
    labels: list[dict[tuple[int, int], int]]
    intercepts: list[float]
    cascades: list[list[Cascade]]
    config: SimulationConfig


def make_topics(n: int) -> list[Topic]:
    out = []
    for k in range(n):
        if k < len(DEFAULT_TOPICS):
            name, words = DEFAULT_TOPICS[k]
        else:
            name, words = f"topic {k}", [f"topic{k}kw{j}" for j in range(7)]
        out.append(Topic(name, frozenset(words)))
    return out


class _EventFactory:
    def __init__(self, behaviors: BehaviorProfile, graph: SocialGraph, rng):
        self.b = behaviors
        self.graph = graph
        self.rng = rng
        self.next_id = 0
        self.records: list[EventRecord] = []
        self.friend_arrays = {u: np.array(sorted(graph.friends(u)), dtype=np.int64) for u in graph.nodes}

    def _new_id(self):
        self.next_id += 1
        return self.next_id - 1

    def original(self, user, ts, extra_tokens=()):
        rng, b = self.rng, self.b
        tokens = []
        mentions = []
        friends = self.friend_arrays.get(user)
        if friends is not None and len(friends) and rng.random() < b.directed_p[user]:
            target = int(friends[rng.integers(len(friends))])
            tokens.append(f"@{target}")
            mentions.append(target)
        tokens.extend(FILLER[i] for i in rng.integers(len(FILLER), size=3))
        tokens.extend(extra_tokens)
        tendency = b.sentiment[user]
        if rng.random() < abs(tendency) + 0.1:
            positive = rng.random() < (1 + tendency) / 2
            pool = POSITIVE_WORDS if positive else NEGATIVE_WORDS
            tokens.append(pool[rng.integers(len(pool))])
        rec = EventRecord(
            event_id=self._new_id(),
            user=int(user),
            ts=float(ts),
            kind="tweet",
            tokens=tuple(tokens),
            hashtags=int(rng.random() < b.hashtag_p[user]) * int(rng.integers(1, 3)),
            urls=int(rng.random() < b.url_p[user]),
            media=int(rng.random() < b.media_p[user]),
            mentions=tuple(mentions),
        )
        self.records.append(rec)
        return rec

    def reaction(self, user, ts, kind, ref: EventRecord):
        rng = self.rng
        if kind in ("retweet", "quote"):
            tokens = ref.tokens if kind == "retweet" else ref.tokens + tuple(FILLER[i] for i in rng.integers(len(FILLER), size=2))
            hashtags, urls, media = ref.hashtags, ref.urls, ref.media
        elif kind == "reply":
            tokens = (f"@{ref.user}",) + tuple(FILLER[i] for i in rng.integers(len(FILLER), size=3))
            hashtags = urls = media = 0
        else:
            tokens = ()
            hashtags = urls = media = 0
        mentions = (ref.user,) if kind in ("reply", "quote") else ()
        rec = EventRecord(
            event_id=self._new_id(),
            user=int(user),
            ts=float(ts),
            kind=kind,
            ref_event=ref.event_id,
            ref_author=ref.user,
            tokens=tuple(tokens),
            hashtags=hashtags,
            urls=urls,
            media=media,
            mentions=mentions,
        )
        self.records.append(rec)
        return rec


def _background(factory: _EventFactory, behaviors: BehaviorProfile, start: float, horizon: float, rng):
    n_days = horizon / DAY
    end = start + horizon
    originals_by_user: dict[int, list[EventRecord]] = {}
    n = behaviors.n_users
    bin_len = DAY / N_BINS
    for u in range(n):
        counts = rng.poisson(behaviors.post_rate[u] * (bin_len / 3600.0) * n_days)
        times = []
        for b, c in enumerate(counts):
            if not c:
                continue
            day = rng.integers(0, int(math.ceil(n_days)), size=c)
            t = start + day * DAY + b * bin_len + rng.random(c) * bin_len
            times.extend(t[t < end].tolist())
        times.sort()
        originals_by_user[u] = [factory.original(u, t) for t in times]
    # reactions to friends' background posts
    kinds = np.array(["retweet", "quote", "favorite"])
    kind_p = np.array([0.45, 0.15, 0.40])
    for u in range(n):
        friends = factory.friend_arrays.get(u)
        if friends is None or not len(friends):
            continue
        c = rng.poisson(behaviors.reaction_rate[u] * n_days)
        for _ in range(c):
            w = int(friends[rng.integers(len(friends))])
            posts = originals_by_user.get(w)
            if not posts:
                continue
            ref = posts[int(rng.integers(len(posts)))]
            ts = ref.ts + rng.exponential(6 * 3600.0)
            if ts >= end:
                continue
            kind = "reply" if rng.random() < behaviors.reply_p[u] else str(kinds[rng.choice(3, p=kind_p)])
            factory.reaction(u, ts, kind, ref)


def _profiles(graph: SocialGraph, behaviors: BehaviorProfile, start: float, rng) -> dict[int, UserProfile]:
    out = {}
    for u in graph.nodes:
        out[u] = UserProfile(
            user=u,
            account_created=float(start - rng.uniform(30, 3000) * DAY),
            has_description=bool(rng.random() < behaviors.description_p[u]),
            followers_count=graph.follower_count(u),
            friends_count=graph.friend_count(u),
        )
    return out


def _planted_scores(graph, background: EventLog, profiles, topic, weights: Mapping[str, float]):
    """Linear predictor sum_j w_j * z_j per edge, z = standardized true feature."""
    edges = list(graph.edges())
    eta = np.zeros(len(edges))
    if not weights:
        return edges, eta
    fx = FeatureExtractor(graph, background, profiles, topic)
    per_bin = build_datasets(graph, background, profiles, topic, extractor=fx)
    X = np.mean([d.X for d in per_bin], axis=0)
    assert [(int(a), int(b)) for a, b in zip(per_bin[0].src, per_bin[0].dst)] == edges
    for name, w in weights.items():
        col = X[:, EDGE_FEATURES.index(name)]
        sd = col.std()
        if sd > 0:
            eta += w * (col - col.mean()) / sd
    return edges, eta


def _logistic(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _run_topic_cascades(adj: _Adjacency, probs, messages, delay_scale, end, seed) -> _Batch:
    adj.set_probability(probs)
    rng_seeds = np.random.SeedSequence(seed).generate_state(len(messages))
    return _run_batch(adj, [[(author, t0)] for author, t0 in messages], rng_seeds, delay_scale, end)


def _realized(n_edges: int, batch: _Batch) -> np.ndarray:
    labels = np.zeros(n_edges, np.int64)
    labels[batch.activator_edges] = 1
    return labels


def _calibrate(run, b0: float, target: float, tol: float = 0.004, max_rounds: int = 40):
    """Find an intercept whose realized diffused share is within ``tol`` of
    ``target``.

    The share jumps sharply near the critical point of the cascade process, so
    a model-based update overshoots; instead the realized share itself is
    bracketed and bisected (secant steps on its log-odds when they stay inside
    the bracket).  Every call of ``run`` reuses the same random streams.
    """
    def logit(x):
        x = min(max(x, 1e-6), 1 - 1e-6)
        return math.log(x / (1 - x))

    cache = {}

    def f(b):
        if b not in cache:
            batch = run(b)
            cache[b] = (float(_realized(len(batch.attempts), batch).mean()), batch)
        return cache[b][0]

    b = b0
    lo = hi = None
    step = 1.0
    for _ in range(max_rounds):
        share = f(b)
        if abs(share - target) < tol:
            return b, cache[b][1]
        if share < target:
            lo = b
        else:
            hi = b
        # supercritical runs are expensive, so the bracket grows slowly upward
        if lo is None:
            b = hi - step
            step *= 2
        elif hi is None:
            b = lo + 1.0
        else:
            flo, fhi = logit(f(lo)) - logit(target), logit(f(hi)) - logit(target)
            mid = (lo + hi) / 2
            cand = lo - flo * (hi - lo) / (fhi - flo) if fhi != flo else mid
            # fall back to bisection when the secant hugs an end of the bracket
            margin = 0.1 * (hi - lo)
            b = cand if lo + margin < cand < hi - margin else mid
    best = min(cache, key=lambda k: abs(cache[k][0] - target))
    log.warning("class balance calibration stopped at %.4f (target %.4f)", cache[best][0], target)
    return best, cache[best][1]


def _world(config: SimulationConfig, graph, behaviors, streams):
    """Graph, behaviors, background records and profiles.

    ``streams`` are the six per-stage seed sequences spawned from the root
    seed: graph, behavior, background, profiles, messages, cascades.
    """
    s_graph, s_behavior, s_background, s_profiles = streams[:4]
    if graph is None:
        graph = generate_graph(config.users, config.edges_per_node, int(s_graph.generate_state(1)[0]), config.reciprocity)
    n = max(graph.nodes) + 1
    if behaviors is None:
        behaviors = default_behaviors(
            n, int(s_behavior.generate_state(1)[0]), config.posts_per_day, config.reactions_per_day, config.bin_weights
        )
    rng_bg = np.random.default_rng(s_background)
    factory = _EventFactory(behaviors, graph, rng_bg)
    _background(factory, behaviors, config.start, config.horizon_s, rng_bg)
    profiles = _profiles(graph, behaviors, config.start, np.random.default_rng(s_profiles))
    return graph, behaviors, factory, profiles


def simulate_background(config: SimulationConfig, graph: SocialGraph | None = None,
                        behaviors: BehaviorProfile | None = None):
    """Graph, behaviors, background log and profiles, without topic cascades.

    Uses the same seed derivation as :func:`synthesize_dataset`, so its
    output equals that function's background activity.
    """
    streams = np.random.SeedSequence(config.rng_seed).spawn(6)
    graph, behaviors, factory, profiles = _world(config, graph, behaviors, streams)
    log = EventLog(factory.records, window=(config.start, config.start + config.horizon_s))
    return graph, behaviors, log, profiles


def synthesize_dataset(config: SimulationConfig, graph: SocialGraph | None = None,
                       behaviors: BehaviorProfile | None = None) -> SyntheticDataset:
    """Background activity, planted edge probabilities and topic cascades.

    Steps: (1) background originals per user from per-bin Poisson processes plus
    reactions to friends' posts; (2) per-edge probability
    ``logistic(intercept + sum_j w_j z_j)`` where ``z_j`` are standardized
    feature values measured on the background log; (3) for every topic a
    ``topic_authors`` share of users post one on-topic message each, whose
    AsIC cascade is realized with those probabilities; (4) activations become
    retweets/quotes in the log.

    With ``class_balance`` set, the intercept is tuned so that the realized
    share of diffused edges matches it.
    """
    unknown = sorted(set(config.planted_weights) - set(EDGE_FEATURES))
    if unknown:
        raise ValueError(f"unknown planted feature(s): {unknown}")
    if config.class_balance is not None and not 0 < config.class_balance < 1:
        raise ValueError("class_balance must be in (0, 1)")
    if not config.delay_mean_s > 0:
        raise ValueError("delay_mean_s must be positive")
    streams = np.random.SeedSequence(config.rng_seed).spawn(6)
    graph, behaviors, factory, profiles = _world(config, graph, behaviors, streams)
    s_messages, s_cascades = streams[4], streams[5]
    start, horizon = config.start, config.horizon_s
    window = (start, start + horizon)
    background = EventLog(list(factory.records), window=window)

    topics = make_topics(config.topics)
    rng_msg = np.random.default_rng(s_messages)
    all_probs, all_labels, intercepts, all_cascades = [], [], [], []
    for k, topic in enumerate(topics):
        edges, eta = _planted_scores(graph, background, profiles, topic, config.planted_weights)
        authors = [u for u in graph.nodes if graph.follower_count(u) > 0 and rng_msg.random() < config.topic_authors]
        messages = []
        for u in authors:
            rates = behaviors.post_rate[u]
            b = int(rng_msg.choice(N_BINS, p=rates / rates.sum())) if rates.sum() > 0 else int(rng_msg.integers(N_BINS))
            day = int(rng_msg.integers(0, max(1, int(horizon // DAY))))
            messages.append((u, start + day * DAY + b * (DAY / N_BINS) + rng_msg.random() * DAY / N_BINS))
        cascade_seed = int(s_cascades.generate_state(config.topics)[k])

        adj = _Adjacency(graph, 0.0)
        assert adj.edges == edges

        def run(b):
            return _run_topic_cascades(adj, _logistic(eta + b), messages, config.delay_mean_s, start + horizon, cascade_seed)

        if config.class_balance is None:
            b = 0.0
            batch = run(b)
        else:
            target = config.class_balance
            b, batch = _calibrate(run, math.log(target / (1 - target)) - float(eta.mean()) - 3.0, target)
        labels = _realized(len(edges), batch)
        cascades = batch.cascades
        for c in cascades:
            c.topic = topic
        _emit_cascades(factory, cascades, messages, topic)
        all_probs.append(dict(zip(edges, _logistic(eta + b).tolist())))
        all_labels.append(dict(zip(edges, labels.tolist())))
        intercepts.append(b)
        all_cascades.append(cascades)
        log.info("topic %r: intercept %.3f, diffused share %.3f", topic.name, b, labels.mean() if len(labels) else 0)

    full = EventLog(factory.records, window=window)
    return SyntheticDataset(graph, full, profiles, topics, behaviors, all_probs, all_labels, intercepts, all_cascades, config)


def _emit_cascades(factory: _EventFactory, cascades, messages, topic: Topic):
    rng = factory.rng
    keywords = sorted(topic.keywords)
    for c, (author, t0) in zip(cascades, messages):
        record_of: dict[int, EventRecord] = {}
        for node, t, activator in c.activations:
            if activator is None:
                kw = [keywords[i] for i in rng.choice(len(keywords), size=2, replace=False)]
                record_of[node] = factory.original(node, t, extra_tokens=kw)
            else:
                kind = "quote" if rng.random() < 0.2 else "retweet"
                record_of[node] = factory.reaction(node, t, kind, record_of[activator])
