"""Classification metrics, cross-validation, hold-out, cross-testing and the
time-to-tweet report."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from typing import NamedTuple, Protocol, Sequence

import numpy as np


class SchemaError(ValueError):
    """Model and dataset disagree on feature columns."""


class PRF(NamedTuple):
    precision: float
    recall: float
    f1: float


class Confusion(NamedTuple):
    tp: int
    fp: int
    tn: int
    fn: int


def f1_score(precision: float, recall: float) -> float:
    """Harmonic mean of precision and recall, 0 when both are 0."""
    if precision + recall <= 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def confusion(labels, predictions) -> Confusion:
    y = np.asarray(labels).astype(int)
    p = np.asarray(predictions).astype(int)
    if y.shape != p.shape:
        raise ValueError(f"length mismatch: {y.shape} labels vs {p.shape} predictions")
    if y.size == 0:
        raise ValueError("empty input")
    tp = int(np.sum((y == 1) & (p == 1)))
    fp = int(np.sum((y == 0) & (p == 1)))
    tn = int(np.sum((y == 0) & (p == 0)))
    fn = int(np.sum((y == 1) & (p == 0)))
    return Confusion(tp, fp, tn, fn)


def metrics(labels, predictions) -> PRF:
    """Precision, recall and F1 of the positive class.

    A zero denominator yields 0; :func:`undefined_metrics` tells the cases apart.
    """
    c = confusion(labels, predictions)
    precision = c.tp / (c.tp + c.fp) if c.tp + c.fp else 0.0
    recall = c.tp / (c.tp + c.fn) if c.tp + c.fn else 0.0
    return PRF(precision, recall, f1_score(precision, recall))


def undefined_metrics(c: Confusion) -> list[str]:
    out = []
    if c.tp + c.fp == 0:
        out.append("precision")
    if c.tp + c.fn == 0:
        out.append("recall")
    return out


def _auc_rank(y, s):
    # Mann-Whitney U with midranks
    order = np.argsort(s, kind="mergesort")
    ranks = np.empty(len(s))
    sorted_s = s[order]
    i = 0
    n = len(s)
    while i < n:
        j = i
        while j + 1 < n and sorted_s[j + 1] == sorted_s[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    n1 = int(y.sum())
    n0 = n - n1
    u = ranks[y == 1].sum() - n1 * (n1 + 1) / 2.0
    return u / (n1 * n0)


def _auc_trapezoid(y, s):
    # ROC swept from the highest score down; tied scores form one diagonal step
    order = np.argsort(-s, kind="mergesort")
    ys = y[order]
    ss = s[order]
    n1 = int(y.sum())
    n0 = len(y) - n1
    tp = fp = 0
    twice_area = 0
    i = 0
    while i < len(ss):
        j = i
        dtp = dfp = 0
        while j < len(ss) and ss[j] == ss[i]:
            if ys[j]:
                dtp += 1
            else:
                dfp += 1
            j += 1
        twice_area += dfp * (2 * tp + dtp)
        tp += dtp
        fp += dfp
        i = j
    return twice_area / (2.0 * n1 * n0)


def auc_roc(labels, scores) -> float:
    """Area under the ROC curve.

    Computed both as a rank statistic and by the trapezoid rule; the two must
    agree, and the rank value is returned.
    """
    y = np.asarray(labels).astype(int)
    s = np.asarray(scores, dtype=np.float64)
    if y.shape != s.shape or y.ndim != 1:
        raise ValueError("labels and scores must be 1-D and equally long")
    if y.min(initial=1) == y.max(initial=0) or not np.isin(y, (0, 1)).all():
        raise ValueError("AUC needs both classes present")
    if not np.isfinite(s).all():
        raise ValueError("scores must be finite")
    rank = _auc_rank(y, s)
    trap = _auc_trapezoid(y, s)
    if abs(rank - trap) > 1e-12:
        raise AssertionError(f"AUC routes disagree: rank {rank!r} vs trapezoid {trap!r}")
    return float(rank)


# ---------------------------------------------------------------- learners


class Scorer(Protocol):
    def predict_proba(self, X) -> np.ndarray: ...


class Learner(Protocol):
    def fit(self, X, y) -> Scorer: ...


@dataclass
class ConstantScorer:
    value: float = 0.5

    def predict_proba(self, X):
        return np.full(len(X), self.value)


@dataclass
class ConstantLearner:
    """Uninformative baseline: scores every sample with the same value."""

    value: float = 0.5

    def fit(self, X, y):
        return ConstantScorer(self.value)


# ---------------------------------------------------------------- reports


@dataclass
class FoldResult:
    fold: int
    n_train: int
    n_test: int
    precision: float
    recall: float
    f1: float
    auc: float
    tp: int
    fp: int
    tn: int
    fn: int
    undefined: list[str] = field(default_factory=list)


@dataclass
class EvalReport:
    folds: list[FoldResult]
    config: dict
    per_bin: dict | None = None

    def _values(self, name):
        return np.array([getattr(f, name) for f in self.folds], dtype=float)

    def mean(self, name: str) -> float:
        return float(np.mean(self._values(name)))

    def std(self, name: str) -> float:
        return float(np.std(self._values(name)))

    @property
    def summary(self) -> dict:
        return {m: {"mean": self.mean(m), "stddev": self.std(m)} for m in ("precision", "recall", "f1", "auc")}

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "folds": [asdict(f) for f in self.folds],
            "summary": self.summary,
            "per_bin": self.per_bin,
        }

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)

    def write_summary_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["metric", "mean", "stddev"])
            for m, s in self.summary.items():
                w.writerow([m, f"{s['mean']:.9g}", f"{s['stddev']:.9g}"])


def score_predictions(y, proba, threshold=0.5, fold=0, n_train=0) -> FoldResult:
    y = np.asarray(y).astype(int)
    pred = (np.asarray(proba) >= threshold).astype(int)
    c = confusion(y, pred)
    prf = metrics(y, pred)
    if 0 < y.sum() < len(y):
        auc = auc_roc(y, proba)
    else:
        auc = float("nan")
    return FoldResult(fold, n_train, len(y), prf.precision, prf.recall, prf.f1, auc, *c, undefined=undefined_metrics(c))


def stratified_folds(y, k: int, rng_seed: int) -> np.ndarray:
    """Fold id per sample; every class is dealt round-robin after shuffling."""
    y = np.asarray(y).astype(int)
    counts = np.bincount(y, minlength=2)
    if k < 2:
        raise ValueError("k must be at least 2")
    if counts.min() < k:
        raise ValueError(f"need at least {k} samples per class, got {counts.tolist()}")
    rng = np.random.default_rng(rng_seed)
    folds = np.empty(len(y), np.int64)
    offset = 0
    for cls in (0, 1):
        idx = np.flatnonzero(y == cls)
        idx = idx[rng.permutation(len(idx))]
        folds[idx] = (np.arange(len(idx)) + offset) % k
        offset += len(idx)
    return folds


def cross_validate(X, y, learner: Learner, k: int = 10, rng_seed: int = 0, threshold: float = 0.5) -> EvalReport:
    """Stratified k-fold CV. The learner only ever sees the training slice."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y).astype(int)
    folds = stratified_folds(y, k, rng_seed)
    results = []
    for f in range(k):
        test = folds == f
        model = learner.fit(X[~test], y[~test])
        proba = model.predict_proba(X[test])
        results.append(score_predictions(y[test], proba, threshold, fold=f, n_train=int((~test).sum())))
    return EvalReport(results, {"procedure": "k-fold", "k": k, "rng_seed": rng_seed, "threshold": threshold})


def holdout_split(y, train_fraction: float, rng) -> tuple[np.ndarray, np.ndarray]:
    y = np.asarray(y).astype(int)
    train = []
    for cls in (0, 1):
        idx = np.flatnonzero(y == cls)
        idx = idx[rng.permutation(len(idx))]
        train.append(idx[: int(round(train_fraction * len(idx)))])
    train_idx = np.sort(np.concatenate(train))
    test_idx = np.setdiff1d(np.arange(len(y)), train_idx)
    return train_idx, test_idx


def holdout(
    X, y, learner: Learner, train_fraction: float = 0.8, repeats: int = 10, rng_seed: int = 0, threshold: float = 0.5
) -> EvalReport:
    """Repeated stratified train/test split; one row per repeat."""
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must be in (0, 1)")
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y).astype(int)
    if np.bincount(y, minlength=2).min() < 2:
        raise ValueError("need at least 2 samples per class")
    results = []
    for r in range(repeats):
        tr, te = holdout_split(y, train_fraction, np.random.default_rng([rng_seed, r]))
        model = learner.fit(X[tr], y[tr])
        results.append(score_predictions(y[te], model.predict_proba(X[te]), threshold, fold=r, n_train=len(tr)))
    return EvalReport(
        results,
        {"procedure": "holdout", "train_fraction": train_fraction, "repeats": repeats, "rng_seed": rng_seed, "threshold": threshold},
    )


def cross_test(model, dataset, threshold: float = 0.5) -> EvalReport:
    """Score ``model`` (trained elsewhere) on another dataset with the same columns."""
    if list(model.feature_names) != list(dataset.feature_names):
        raise SchemaError("model and dataset feature columns differ")
    result = score_predictions(dataset.y, model.predict_proba(dataset.X), threshold, n_train=0)
    return EvalReport([result], {"procedure": "cross-test", "threshold": threshold, "n_test": len(dataset.y)})


# ---------------------------------------------------------------- time to tweet


@dataclass
class TimeReportRow:
    bin: int
    post_share: float
    diffused_share: float
    mean_pred: float
    best: bool = False


def time_to_tweet_report(log, topic, datasets, models) -> list[TimeReportRow]:
    """Per time bin: share of topic posts, share of topic diffusions (forwards
    of on-topic records) and the bin model's mean predicted diffusion
    probability.

    The bin holding the largest diffusion share is flagged as the best time to
    post (lowest bin wins ties).
    """
    from .eventlog import is_relevant
    from .features import N_BINS, time_bin

    if len(datasets) != N_BINS or len(models) != N_BINS:
        raise ValueError(f"need {N_BINS} datasets and {N_BINS} models")
    posts = np.zeros(N_BINS)
    forwards = np.zeros(N_BINS)
    on_topic = {r.event_id for r in log.records if is_relevant(r, topic)}
    for r in log.records:
        # a forward of an on-topic record is on topic even without keywords of its own
        if not r.is_post or not (r.event_id in on_topic or (r.is_forward and r.ref_event in on_topic)):
            continue
        b = time_bin(r.ts)
        posts[b] += 1
        if r.is_forward:
            forwards[b] += 1
    post_share = posts / posts.sum() if posts.sum() else posts
    diffused_share = forwards / forwards.sum() if forwards.sum() else forwards
    rows = []
    for b in range(N_BINS):
        ds = datasets[b]
        mean_pred = float(np.mean(models[b].predict_proba(ds.X))) if len(ds.y) else 0.0
        rows.append(TimeReportRow(b, float(post_share[b]), float(diffused_share[b]), mean_pred))
    if forwards.sum():
        rows[int(np.argmax(diffused_share))].best = True
    return rows


def write_time_report(rows: Sequence[TimeReportRow], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["bin", "post_share", "diffused_share", "mean_pred"])
        for r in rows:
            w.writerow([r.bin, f"{r.post_share:.9g}", f"{r.diffused_share:.9g}", f"{r.mean_pred:.9g}"])


def nanmean(values) -> float:
    v = [x for x in values if not math.isnan(x)]
    return float(np.mean(v)) if v else float("nan")
