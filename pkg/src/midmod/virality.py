"""Crowdsourced virality: classify each interaction with a message as
trending or informative from user features alone, then let the
interactions vote on the message.

A message's interactions are the (poster, reactor) pairs of the users who
reacted to it, described by the same 55 edge features as the diffusion
samples.  Nothing about the message itself (its text, its reaction count)
enters the classifier.
"""

from __future__ import annotations

import csv
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import blr
from .evaluation import EvalReport, FoldResult, auc_roc, confusion, metrics, undefined_metrics
from .features import EDGE_FEATURES, N_BINS, FeatureExtractor
from .simulator import DAY, SimulationConfig, default_behaviors, simulate_background

TRENDING = "trending"
INFORMATIVE = "informative"
EVENT_TYPES = (INFORMATIVE, TRENDING)


@dataclass(frozen=True)
class InteractionSample:
    message_id: int
    x: np.ndarray
    event_type: str
    poster: int = -1
    reactor: int = -1

    def __post_init__(self):
        if self.event_type not in EVENT_TYPES:
            raise ValueError(f"event_type must be one of {EVENT_TYPES}, got {self.event_type!r}")
        x = np.asarray(self.x, dtype=np.float64)
        if x.shape != (len(EDGE_FEATURES),):
            raise ValueError(f"interaction vector needs {len(EDGE_FEATURES)} features, got shape {x.shape}")
        object.__setattr__(self, "x", x)

    @property
    def label(self) -> int:
        return int(self.event_type == TRENDING)


@dataclass(frozen=True)
class ViralityVerdict:
    message_id: int
    n_interactions: int
    votes_trending: int
    votes_informative: int
    verdict: str

    @property
    def trending(self) -> bool:
        return self.verdict == TRENDING


def group_by_message(samples: Iterable[InteractionSample]) -> dict[int, list[InteractionSample]]:
    out: dict[int, list[InteractionSample]] = defaultdict(list)
    for s in samples:
        out[s.message_id].append(s)
    return dict(sorted(out.items()))


def message_truth(samples: Iterable[InteractionSample]) -> dict[int, str]:
    truth: dict[int, str] = {}
    for s in samples:
        if truth.setdefault(s.message_id, s.event_type) != s.event_type:
            raise ValueError(f"message {s.message_id} carries both event types")
    return dict(sorted(truth.items()))


def _design(samples: Sequence[InteractionSample]):
    X = np.array([s.x for s in samples], dtype=np.float64).reshape(len(samples), len(EDGE_FEATURES))
    y = np.array([s.label for s in samples], dtype=np.int64)
    return X, y


def train_virality(samples: Sequence[InteractionSample], prior_variance: float = 10.0, tol: float = 1e-8,
                   max_iter: int = 100) -> blr.BlrModel:
    """BLR on interaction vectors with the message's event type as label."""
    X, y = _design(samples)
    return blr.fit(X, y, prior_variance, tol, max_iter, feature_names=list(EDGE_FEATURES))


def vote(votes_trending: int, n: int, tie: str = TRENDING) -> str:
    """Majority of ``n`` votes; an exact split goes to ``tie``."""
    if n < 1:
        raise ValueError("a verdict needs at least one interaction")
    if not 0 <= votes_trending <= n:
        raise ValueError("votes_trending must lie in [0, n]")
    if tie not in EVENT_TYPES:
        raise ValueError(f"tie must be one of {EVENT_TYPES}")
    if 2 * votes_trending > n:
        return TRENDING
    if 2 * votes_trending < n:
        return INFORMATIVE
    return tie


def predict_virality(model: blr.BlrModel, interactions: Sequence[InteractionSample], threshold: float = 0.5,
                     tie: str = TRENDING) -> ViralityVerdict:
    """Verdict for one message from its interactions.

    Each interaction votes trending when its predicted probability reaches
    ``threshold``; a split vote is resolved by ``tie`` (trending by default,
    which favors recall).
    """
    if not interactions:
        raise ValueError("a verdict needs at least one interaction")
    ids = {s.message_id for s in interactions}
    if len(ids) != 1:
        raise ValueError("interactions belong to several messages")
    X, _ = _design(interactions)
    votes = int(model.predict(X, threshold).sum())
    n = len(interactions)
    return ViralityVerdict(ids.pop(), n, votes, n - votes, vote(votes, n, tie))


def predict_messages(model, samples: Iterable[InteractionSample], threshold: float = 0.5,
                     tie: str = TRENDING) -> list[ViralityVerdict]:
    return [predict_virality(model, group, threshold, tie) for group in group_by_message(samples).values()]


def evaluate_virality(model, samples: Sequence[InteractionSample], threshold: float = 0.5,
                      tie: str = TRENDING) -> EvalReport:
    """Message-level precision, recall and F1 with trending as the positive
    class.  The AUC column ranks messages by their share of trending votes."""
    truth = message_truth(samples)
    if set(truth.values()) != set(EVENT_TYPES):
        raise ValueError("need at least one message of each event type")
    verdicts = predict_messages(model, samples, threshold, tie)
    y = np.array([int(truth[v.message_id] == TRENDING) for v in verdicts])
    pred = np.array([int(v.trending) for v in verdicts])
    share = np.array([v.votes_trending / v.n_interactions for v in verdicts])
    c = confusion(y, pred)
    prf = metrics(y, pred)
    fold = FoldResult(0, 0, len(y), prf.precision, prf.recall, prf.f1, auc_roc(y, share), *c,
                      undefined=undefined_metrics(c))
    return EvalReport([fold], {"procedure": "virality", "threshold": threshold, "tie": tie, "messages": len(y)})


def write_verdicts(verdicts: Sequence[ViralityVerdict], truth: dict[int, str] | None, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["message_id", "n", "votes_trending", "verdict", "truth"])
        for v in verdicts:
            w.writerow([v.message_id, v.n_interactions, v.votes_trending, v.verdict, (truth or {}).get(v.message_id, "")])


def write_interactions(samples: Sequence[InteractionSample], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["message_id", "poster", "reactor", "event_type", *EDGE_FEATURES])
        for s in samples:
            w.writerow([s.message_id, s.poster, s.reactor, s.event_type, *(f"{x:.9g}" for x in s.x)])


def read_interactions(path) -> list[InteractionSample]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:4] != ["message_id", "poster", "reactor", "event_type"] or header[4:] != EDGE_FEATURES:
            raise ValueError(f"{path}: unexpected header")
        return [
            InteractionSample(int(r[0]), np.array(r[4:], dtype=np.float64), r[3], int(r[1]), int(r[2]))
            for r in reader
        ]


def split_messages(samples: Sequence[InteractionSample], train_fraction: float, rng_seed: int):
    """Stratified split by message, so no message contributes to both sides."""
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must be in (0, 1)")
    truth = message_truth(samples)
    rng = np.random.default_rng(rng_seed)
    train_ids = set()
    for kind in EVENT_TYPES:
        ids = np.array([m for m, t in truth.items() if t == kind], dtype=np.int64)
        ids = ids[rng.permutation(len(ids))]
        train_ids.update(ids[: int(round(train_fraction * len(ids)))].tolist())
    train = [s for s in samples if s.message_id in train_ids]
    test = [s for s in samples if s.message_id not in train_ids]
    return train, test


# ---------------------------------------------------------------- synthetic corpus


@dataclass
class ViralityConfig:
    """Planted trend-only-reactor regime.

    A ``trend_reactor_share`` of users only ever react to trending messages
    and behave differently in the background (few originals, many reactions,
    hashtag-heavy).  Each reactor of a trending message is drawn from them
    with probability ``trend_pull``; informative messages only reach regular
    users.  Posters of trending messages are drawn in proportion to their
    follower count, posters of informative messages uniformly.
    """

    users: int = 2000
    messages: int = 1000
    trending_share: float = 0.5
    trend_reactor_share: float = 0.3
    trend_pull: float = 0.6
    min_interactions: int = 3
    max_interactions: int = 9
    rng_seed: int = 0

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def synthesize_virality_corpus(config: ViralityConfig) -> list[InteractionSample]:
    if not 0 < config.trending_share < 1:
        raise ValueError("trending_share must be in (0, 1)")
    if not 1 <= config.min_interactions <= config.max_interactions:
        raise ValueError("need 1 <= min_interactions <= max_interactions")
    s_world, s_roles, s_messages = np.random.SeedSequence(config.rng_seed).spawn(3)
    sim = SimulationConfig(users=config.users, rng_seed=int(s_world.generate_state(1)[0]), planted_weights={})
    rng = np.random.default_rng(s_roles)
    behaviors = default_behaviors(config.users, int(rng.integers(2**31)), sim.posts_per_day, sim.reactions_per_day)
    trend_only = rng.random(config.users) < config.trend_reactor_share
    behaviors.post_rate[trend_only] *= 0.3
    behaviors.reaction_rate[trend_only] *= 3.0
    behaviors.hashtag_p[trend_only] = rng.beta(5, 2, int(trend_only.sum()))
    graph, behaviors, log, profiles = simulate_background(sim, behaviors=behaviors)
    fx = FeatureExtractor(graph, log, profiles, _NO_TOPIC)

    rng = np.random.default_rng(s_messages)
    posters = np.array([u for u in graph.nodes if graph.follower_count(u) >= config.min_interactions], dtype=np.int64)
    weights = np.array([graph.follower_count(int(u)) for u in posters], dtype=np.float64)
    n_trending = int(round(config.trending_share * config.messages))
    kinds = [TRENDING] * n_trending + [INFORMATIVE] * (config.messages - n_trending)
    kinds = [kinds[k] for k in rng.permutation(len(kinds))]
    samples = []
    for m, kind in enumerate(kinds):
        while True:
            if kind == TRENDING:
                poster = int(rng.choice(posters, p=weights / weights.sum()))
            else:
                poster = int(posters[rng.integers(len(posters))])
            followers = sorted(graph.followers(poster))
            special = [u for u in followers if trend_only[u]]
            regular = [u for u in followers if not trend_only[u]]
            n = int(rng.integers(config.min_interactions, config.max_interactions + 1))
            reactors = _draw_reactors(rng, kind, special, regular, n, config.trend_pull)
            if reactors is not None:
                break
        ts = sim.start + rng.random() * sim.horizon_s
        b = int((ts % DAY) // (DAY / N_BINS))
        for u in reactors:
            samples.append(InteractionSample(m, fx.edge_vector(poster, u, b), kind, poster, u))
    return samples


def _draw_reactors(rng, kind, special, regular, n, pull):
    """``n`` distinct followers, or None when the poster cannot supply them."""
    if kind == INFORMATIVE:
        if len(regular) < n:
            return None
        return [regular[k] for k in rng.choice(len(regular), size=n, replace=False)]
    n_special = int(rng.binomial(n, pull))
    n_special = min(n_special, len(special))
    if len(regular) < n - n_special:
        return None
    out = [special[k] for k in rng.choice(len(special), size=n_special, replace=False)] if n_special else []
    out += [regular[k] for k in rng.choice(len(regular), size=n - n_special, replace=False)] if n > n_special else []
    return out


class _NoTopic:
    """Stand-in topic: virality features do not depend on topic keywords."""

    name = ""
    keywords = frozenset()


_NO_TOPIC = _NoTopic()
