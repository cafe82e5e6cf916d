"""Random forest (bootstrap Gini trees) used as a feature-selection filter.

Trees are grown depth-first by a numba kernel.  Every split is exact: feature
values are rank-coded once per forest, and a node scans either a histogram of
codes or a sort of its own codes, whichever is cheaper.  Both paths see the
same candidate thresholds (midpoints between adjacent distinct values present
in the node), so the choice only affects speed.

Randomness per tree comes from ``SeedSequence(rng_seed).generate_state``
indexed by tree number, so results do not depend on training order.
"""

from __future__ import annotations

import hashlib
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple

import numba
import numpy as np

from . import blr, evaluation

# Node table columns
_FEATURE, _LEFT, _RIGHT = 0, 1, 2
_GAIN_EPS = 1e-10


@numba.njit(cache=True, nogil=True)
def _bootstrap_counts(n, seed):
    np.random.seed(seed)
    counts = np.zeros(n, np.int64)
    for _ in range(n):
        counts[np.random.randint(0, n)] += 1
    return counts


@numba.njit(cache=True, nogil=True)
def _gini_mass(w, w1):
    # W * gini(node) == 2 * W1 * W0 / W
    if w <= 0.0:
        return 0.0
    return 2.0 * w1 * (w - w1) / w


@numba.njit(cache=True, nogil=True)
def _grow_tree(codes, n_unique, values, y, seed, max_depth, min_leaf, mtry, sort_factor):
    """Grow one tree.

    codes[f, i] is the rank of sample i among the distinct values of feature
    f; values[f] holds those distinct values (padded with +inf).
    """
    n_features, n = codes.shape
    counts = _bootstrap_counts(n, seed)
    cw = counts.astype(np.float64)
    cw1 = cw * y
    n_inbag = 0
    for i in range(n):
        if counts[i] > 0:
            n_inbag += 1
    idx = np.empty(n_inbag, np.int64)
    j = 0
    for i in range(n):
        if counts[i] > 0:
            idx[j] = i
            j += 1
    max_unique = n_unique.max()

    cap = 2 * n_inbag + 1
    if max_depth < 30:
        # a binary tree of this depth cannot hold more nodes
        cap = min(cap, (1 << (max_depth + 1)) - 1)
    links = np.full((cap, 3), -1, np.int64)
    thresholds = np.zeros(cap)
    weight = np.zeros(cap)
    weight1 = np.zeros(cap)
    gains = np.zeros(cap)
    importance = np.zeros(n_features)

    hist_w = np.zeros(max_unique)
    hist_w1 = np.zeros(max_unique)
    perm = np.arange(n_features)
    cand = np.empty(mtry, np.int64)
    tmp_codes = np.empty(n_inbag, np.int64)
    buf = np.empty(n_inbag, np.int64)
    shift = 1
    while (1 << shift) < n_inbag:
        shift += 1
    mask = (1 << shift) - 1

    # stack of (node, start, end, depth)
    stack = np.empty((cap, 4), np.int64)
    w_root = 0.0
    w1_root = 0.0
    for k in range(n_inbag):
        c = counts[idx[k]]
        w_root += c
        w1_root += c * y[idx[k]]
    weight[0] = w_root
    weight1[0] = w1_root
    n_nodes = 1
    top = 0
    stack[0, 0] = 0
    stack[0, 1] = 0
    stack[0, 2] = n_inbag
    stack[0, 3] = 0
    top = 1
    while top > 0:
        top -= 1
        node = stack[top, 0]
        start = stack[top, 1]
        end = stack[top, 2]
        depth = stack[top, 3]
        W = weight[node]
        W1 = weight1[node]
        if depth >= max_depth or W < 2 * min_leaf or W1 <= 0.0 or W1 >= W:
            continue
        parent_mass = _gini_mass(W, W1)
        # candidate features, sampled without replacement, scanned in index order
        for a in range(mtry):
            b = a + np.random.randint(0, n_features - a)
            t = perm[a]
            perm[a] = perm[b]
            perm[b] = t
        for a in range(mtry):
            cand[a] = perm[a]
        cand.sort()
        best_gain = _GAIN_EPS * W
        best_f = -1
        best_lo = 0
        best_hi = 0
        m = end - start
        for a in range(mtry):
            f = cand[a]
            u = n_unique[f]
            if u < 2:
                continue
            lw = 0.0
            l1 = 0.0
            prev = -1
            if u <= sort_factor * m:
                for k in range(start, end):
                    i = idx[k]
                    cd = codes[f, i]
                    hist_w[cd] += cw[i]
                    hist_w1[cd] += cw1[i]
                for cd in range(u):
                    hw = hist_w[cd]
                    if hw == 0.0:
                        continue
                    if prev >= 0 and lw >= min_leaf and W - lw >= min_leaf:
                        g = parent_mass - _gini_mass(lw, l1) - _gini_mass(W - lw, W1 - l1)
                        if g > best_gain:
                            best_gain = g
                            best_f = f
                            best_lo = prev
                            best_hi = cd
                    lw += hw
                    l1 += hist_w1[cd]
                    prev = cd
                    hist_w[cd] = 0.0
                    hist_w1[cd] = 0.0
            else:
                # sort packed (code, position) keys; plain integer sorting is
                # much faster than an argsort in the kernel
                for k in range(m):
                    tmp_codes[k] = (np.int64(codes[f, idx[start + k]]) << shift) | k
                keys = tmp_codes[:m]
                keys.sort()
                k = 0
                while k < m:
                    cd = np.int64(keys[k] >> shift)
                    hw = 0.0
                    hw1 = 0.0
                    while k < m and (keys[k] >> shift) == cd:
                        i = idx[start + (keys[k] & mask)]
                        hw += cw[i]
                        hw1 += cw1[i]
                        k += 1
                    if prev >= 0 and lw >= min_leaf and W - lw >= min_leaf:
                        g = parent_mass - _gini_mass(lw, l1) - _gini_mass(W - lw, W1 - l1)
                        if g > best_gain:
                            best_gain = g
                            best_f = f
                            best_lo = prev
                            best_hi = cd
                    lw += hw
                    l1 += hw1
                    prev = cd
        if best_f < 0:
            continue
        lo = values[best_f, best_lo]
        hi = values[best_f, best_hi]
        thr = lo + (hi - lo) / 2.0
        if thr >= hi:
            thr = lo
        # stable partition of idx[start:end]; left keeps codes <= best_lo
        nl = 0
        nr = 0
        lw = 0.0
        l1 = 0.0
        for k in range(start, end):
            i = idx[k]
            if codes[best_f, i] <= best_lo:
                idx[start + nl] = i
                nl += 1
                lw += cw[i]
                l1 += cw1[i]
            else:
                buf[nr] = i
                nr += 1
        for k in range(nr):
            idx[start + nl + k] = buf[k]
        left = n_nodes
        right = n_nodes + 1
        n_nodes += 2
        links[node, 0] = best_f
        links[node, 1] = left
        links[node, 2] = right
        thresholds[node] = thr
        gains[node] = best_gain
        importance[best_f] += best_gain
        weight[left] = lw
        weight1[left] = l1
        weight[right] = W - lw
        weight1[right] = W1 - l1
        # push right first so the left subtree is expanded first
        stack[top, 0] = right
        stack[top, 1] = start + nl
        stack[top, 2] = end
        stack[top, 3] = depth + 1
        top += 1
        stack[top, 0] = left
        stack[top, 1] = start
        stack[top, 2] = start + nl
        stack[top, 3] = depth + 1
        top += 1
    return (links[:n_nodes].copy(), thresholds[:n_nodes].copy(), weight[:n_nodes].copy(),
            weight1[:n_nodes].copy(), gains[:n_nodes].copy(), importance)


@numba.njit(cache=True, nogil=True)
def _predict_forest(X, links, thresholds, proba, offsets):
    n = X.shape[0]
    n_trees = offsets.shape[0] - 1
    out = np.zeros(n)
    for t in range(n_trees):
        base = offsets[t]
        for i in range(n):
            node = 0
            while links[base + node, 0] >= 0:
                if X[i, links[base + node, 0]] <= thresholds[base + node]:
                    node = links[base + node, 1]
                else:
                    node = links[base + node, 2]
            out[i] += proba[base + node]
    return out / n_trees


def _rank_code(X):
    """Per-feature dense ranks and the sorted distinct values (padded with inf)."""
    n, p = X.shape
    uniques = [np.unique(X[:, f]) for f in range(p)]
    width = max(len(u) for u in uniques)
    # narrow codes keep the working set in cache
    codes = np.empty((p, n), np.uint16 if width <= np.iinfo(np.uint16).max else np.int32)
    values = np.full((p, width), np.inf)
    for f, u in enumerate(uniques):
        codes[f] = np.searchsorted(u, X[:, f])
        values[f, : len(u)] = u
    return codes, values


@dataclass
class Tree:
    links: np.ndarray  # (nodes, 3): feature, left, right; feature -1 marks a leaf
    thresholds: np.ndarray
    weight: np.ndarray  # bootstrap-weighted sample count reaching the node
    weight1: np.ndarray  # ... of which positive

    @property
    def n_nodes(self) -> int:
        return len(self.thresholds)

    @property
    def is_leaf(self) -> np.ndarray:
        return self.links[:, _FEATURE] < 0

    def leaf_proba(self) -> np.ndarray:
        """Per-node (P(y=0), P(y=1)) pairs."""
        p1 = np.divide(self.weight1, self.weight, out=np.zeros_like(self.weight), where=self.weight > 0)
        return np.column_stack([1.0 - p1, p1])

    def gini(self) -> np.ndarray:
        p1 = self.leaf_proba()[:, 1]
        return 1.0 - p1**2 - (1.0 - p1) ** 2


@dataclass
class ForestModel:
    trees: list[Tree]
    n_trees: int
    max_depth: int
    min_leaf: int
    features_per_split: int
    rng_seed: int
    importances: np.ndarray
    feature_names: list[str]
    tree_seeds: np.ndarray = field(repr=False)
    n_train: int = 0

    def __post_init__(self):
        offsets = np.zeros(len(self.trees) + 1, np.int64)
        offsets[1:] = np.cumsum([t.n_nodes for t in self.trees])
        self._offsets = offsets
        self._links = np.concatenate([t.links for t in self.trees])
        self._thresholds = np.concatenate([t.thresholds for t in self.trees])
        self._proba = np.concatenate([t.leaf_proba()[:, 1] for t in self.trees])

    def predict_proba(self, X) -> np.ndarray:
        """Mean leaf probability of the positive class over all trees."""
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != len(self.feature_names):
            raise ValueError(f"expected {len(self.feature_names)} columns, got shape {X.shape}")
        return _predict_forest(X, self._links, self._thresholds, self._proba, self._offsets)

    def oob_indices(self, tree_index: int) -> np.ndarray:
        counts = _bootstrap_counts(self.n_train, self.tree_seeds[tree_index])
        return np.flatnonzero(counts == 0)

    def inbag_indices(self, tree_index: int) -> np.ndarray:
        counts = _bootstrap_counts(self.n_train, self.tree_seeds[tree_index])
        return np.flatnonzero(counts > 0)


def available_cores() -> int:
    if hasattr(os, "sched_getaffinity"):
        return len(os.sched_getaffinity(0))
    return os.cpu_count() or 1


def default_features_per_split(n_features: int) -> int:
    return math.ceil(math.sqrt(n_features))


def _check_training_data(X, y):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.ndim != 2 or len(X) != len(y):
        raise ValueError("X must be 2-D with one row per label")
    if len(y) < 2:
        raise ValueError("need at least 2 samples")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be 0/1")
    if y.min() == y.max():
        raise ValueError("both classes must be present")
    bad = ~np.isfinite(X).all(axis=0)
    if bad.any():
        raise ValueError(f"non-finite values in column {int(np.flatnonzero(bad)[0])}")
    return X, y.astype(np.float64)


def fit_forest(
    X,
    y,
    n_trees: int = 200,
    max_depth: int = 12,
    min_leaf: int = 5,
    features_per_split: int | None = None,
    rng_seed: int = 0,
    feature_names: list[str] | None = None,
    n_jobs: int | None = None,
) -> ForestModel:
    """Bootstrap forest of Gini trees.

    Trees are grown on ``n_jobs`` threads (default: all available cores); the
    result does not depend on the thread count.
    """
    X, y = _check_training_data(X, y)
    n, p = X.shape
    mtry = default_features_per_split(p) if features_per_split is None else features_per_split
    if not 1 <= mtry <= p:
        raise ValueError(f"features_per_split must be in [1, {p}]")
    codes, values = _rank_code(X)
    n_unique = (values < np.inf).sum(axis=1)
    seeds = np.random.SeedSequence(rng_seed).generate_state(n_trees).astype(np.int64)
    if max_depth < 0 or min_leaf < 1 or n_trees < 1:
        raise ValueError("need n_trees >= 1, max_depth >= 0 and min_leaf >= 1")

    def grow(seed):
        return _grow_tree(codes, n_unique, values, y, seed, max_depth, min_leaf, mtry, 16)

    workers = n_jobs if n_jobs else available_cores()
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            grown = list(pool.map(grow, seeds))
    else:
        grown = [grow(s) for s in seeds]
    trees = []
    importances = np.zeros(p)
    for links, thr, w, w1, _, imp in grown:
        trees.append(Tree(links, thr, w, w1))
        total = imp.sum()
        if total > 0:
            importances += imp / total
    if importances.sum() > 0:
        importances /= importances.sum()
    names = list(feature_names) if feature_names is not None else [f"x{j}" for j in range(p)]
    return ForestModel(
        trees=trees,
        n_trees=n_trees,
        max_depth=max_depth,
        min_leaf=min_leaf,
        features_per_split=mtry,
        rng_seed=rng_seed,
        importances=importances,
        feature_names=names,
        tree_seeds=seeds,
        n_train=n,
    )


class RankedFeature(NamedTuple):
    name: str
    importance: float
    index: int


def importance_ranking(model: ForestModel) -> list[RankedFeature]:
    """Features by decreasing mean decrease in impurity; ties keep index order."""
    order = np.argsort(-model.importances, kind="stable")
    return [RankedFeature(model.feature_names[j], float(model.importances[j]), int(j)) for j in order]


def select_top_k(ranking: list[RankedFeature], k: int) -> list[int]:
    """Column indexes of the ``k`` best-ranked features, in original column order."""
    if not 1 <= k <= len(ranking):
        raise ValueError(f"k must be between 1 and {len(ranking)}, got {k}")
    return sorted(entry.index for entry in ranking[:k])


def forest_auc(model: ForestModel, X, y) -> float:
    return evaluation.auc_roc(y, model.predict_proba(X))


def write_ranking(ranking: list[RankedFeature], path) -> None:
    with open(path, "w") as fh:
        fh.write("rank,feature_name,importance\n")
        for r, entry in enumerate(ranking, 1):
            fh.write(f"{r},{entry.name},{entry.importance:.9g}\n")


def read_ranking(path, feature_names: list[str]) -> list[RankedFeature]:
    """Load a ranking CSV; column indexes are resolved against ``feature_names``."""
    position = {name: j for j, name in enumerate(feature_names)}
    rows = []
    with open(path) as fh:
        next(fh)
        for line in fh:
            _, name, score = line.strip().split(",")
            if name not in position:
                raise ValueError(f"ranking names unknown feature {name!r}")
            rows.append(RankedFeature(name, float(score), position[name]))
    return rows


@dataclass
class TopKLearner:
    """Forest ranking followed by a BLR refit on the ``k`` best columns.

    Both steps only ever see the data handed to :meth:`fit`, so inside
    cross-validation the selection never looks at a test fold.  Rankings are
    memoized per training slice, which lets several ``k`` share one forest.
    """

    k: int
    forest_params: dict = field(default_factory=dict)
    prior_variance: float = 10.0
    tol: float = 1e-8
    max_iter: int = 100
    feature_names: list[str] | None = None
    cache: dict = field(default_factory=dict, repr=False)

    def ranking(self, X, y) -> list[RankedFeature]:
        key = hashlib.sha256(np.ascontiguousarray(X).tobytes() + np.asarray(y, np.int64).tobytes()).hexdigest()
        if key not in self.cache:
            model = fit_forest(X, y, feature_names=self.feature_names, **self.forest_params)
            self.cache[key] = importance_ranking(model)
        return self.cache[key]

    def fit(self, X, y):
        columns = select_top_k(self.ranking(X, y), self.k)
        return blr.fit(X, y, self.prior_variance, self.tol, self.max_iter, self.feature_names, columns)
