"""Acceptance suite: one PASS/FAIL line per criterion.

Under pytest the lines are collected into an "acceptance criteria" section of
the terminal summary.  Run the file directly to print them as each check ends:

    python3 tests/test_acceptance.py [criterion numbers...]

Every check is a plain function returning ``(ok, detail)``; the tests assert
on ``ok`` so a failing criterion also fails the run.
"""

from __future__ import annotations

import contextlib
import functools
import gc
import io
import itertools
import json
import shutil
import sys
import tempfile
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from midmod import blr, evaluation, features, forest, simulator, virality
from midmod.cli import main as cli_main
from midmod.graph import SocialGraph
from midmod.simulator import AsicParams, run_asic
from midmod.virality import INFORMATIVE, TRENDING, InteractionSample, ViralityConfig

PLANTED = list(simulator.DEFAULT_PLANTED_WEIGHTS)
SEEDS = range(10)


# ----------------------------------------------------------------- helpers


@functools.lru_cache(maxsize=None)
def planted_world(seed: int):
    """Bin-0 and pooled datasets of one 2,000-user planted simulation."""
    cfg = simulator.SimulationConfig(users=2000, rng_seed=seed)
    world = simulator.synthesize_dataset(cfg)
    datasets = features.build_datasets(world.graph, world.log, world.profiles, world.topics[0])
    return datasets[0], features.pool(datasets)


def pairwise_auc(y, s) -> float:
    """Exhaustive count over positive/negative pairs, ties worth one half."""
    pos = s[y == 1]
    neg = s[y == 0]
    wins = 2 * int((pos[:, None] > neg[None, :]).sum()) + int((pos[:, None] == neg[None, :]).sum())
    return wins / (2.0 * len(pos) * len(neg))


def grid_map(x, y, prior_variance, lo=(-3.0, -3.0), hi=(10.0, 3.0), points=81, tol=1e-9):
    """Posterior mode of (weight, intercept) found by zooming a grid.

    The log posterior is concave, so the best cell of each grid always holds
    the maximum and refinement can stop at any resolution.
    """

    def logpost(w, b):
        eta = b[..., None] + w[..., None] * x
        return np.sum(y * eta - np.logaddexp(0.0, eta), axis=-1) - w**2 / (2 * prior_variance)

    (w_lo, b_lo), (w_hi, b_hi) = lo, hi
    while True:
        ws = np.linspace(w_lo, w_hi, points)
        bs = np.linspace(b_lo, b_hi, points)
        vals = logpost(*np.meshgrid(ws, bs, indexing="ij"))
        i, j = np.unravel_index(np.argmax(vals), vals.shape)
        dw, db = ws[1] - ws[0], bs[1] - bs[0]
        if max(dw, db) < tol:
            return ws[i], bs[j]
        w_lo, w_hi = ws[i] - 2 * dw, ws[i] + 2 * dw
        b_lo, b_hi = bs[j] - 2 * db, bs[j] + 2 * db


def cascade_violations(graph, cascade, seeds, start) -> dict:
    when = {}
    bad = {"double": 0, "second_attempt": 0, "order": 0}
    for node, t, parent in cascade.activations:
        if node in when:
            bad["double"] += 1
            continue
        when[node] = t
        if parent is None:
            bad["order"] += node not in seeds or t != start
        elif parent not in when or not when[parent] < t or not graph.has_edge(parent, node):
            bad["order"] += 1
    bad["second_attempt"] = sum(c > 1 for c in cascade.attempts.values())
    bad["order"] += sum(v not in when for v, _ in cascade.attempts)
    return bad


def sign_model():
    """Votes trending exactly when feature 0 is positive."""
    p = len(features.EDGE_FEATURES)
    w = np.zeros(p)
    w[0] = 50.0
    return blr.BlrModel(w, 0.0, 10.0, np.zeros(p), np.ones(p), list(features.EDGE_FEATURES), True, 0)


def run_cli(out, *args) -> int:
    with contextlib.redirect_stdout(io.StringIO()):
        return cli_main(["--output-dir", str(out), *args])


def run_pipeline(out, stages) -> list[int]:
    return [run_cli(out, *stage) for stage in stages]


# ----------------------------------------------------------------- criteria


def criterion_1():
    f_blr = evaluation.f1_score(0.91, 0.96)
    f_vir = evaluation.f1_score(0.65, 0.78)
    ok = abs(f_blr - 0.934) <= 0.0005 and abs(f_vir - 0.709) <= 0.0005
    return ok, f"F1(0.91, 0.96) = {f_blr:.4f}, F1(0.65, 0.78) = {f_vir:.4f}"


def criterion_2():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    exact = close = 0
    for k in range(500):
        n = int(rng.integers(2, 201))
        y = rng.integers(0, 2, n)
        y[rng.choice(n, 2, replace=False)] = [0, 1]
        # a coarse score grid on most sets forces plenty of ties
        levels = int(rng.integers(2, 12)) if k % 5 else n
        s = rng.integers(0, levels, n) / levels
        oracle = pairwise_auc(y, s)
        exact += evaluation._auc_rank(y, s) == oracle
        close += abs(evaluation._auc_trapezoid(y, s) - oracle) <= 1e-12
        evaluation.auc_roc(y, s)
    elapsed = time.perf_counter() - t0
    ok = exact == 500 and close == 500 and elapsed < 10
    return ok, f"rank exact {exact}/500, trapezoid within 1e-12 {close}/500, {elapsed:.1f}s"


def criterion_3():
    t0 = time.perf_counter()
    x = np.r_[np.full(50, -1.0), np.full(50, 1.0)]
    y = np.r_[np.zeros(50), np.ones(50)]
    model = blr.fit(x[:, None], y, prior_variance=1.0)
    w = float(model.weights[0] / model.stds[0])
    b = model.intercept - w * float(model.means[0])
    w_grid, b_grid = grid_map(x, y, 1.0)
    map_err = max(abs(w - w_grid), abs(b - b_grid))

    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(50):
        n, p = int(rng.integers(5, 30)), int(rng.integers(1, 6))
        A = np.column_stack([np.ones(n), rng.normal(size=(n, p))])
        yy = rng.integers(0, 2, n).astype(float)
        beta = rng.normal(size=p + 1)
        s2 = float(rng.uniform(0.5, 20))
        g = blr.penalized_gradient(beta, A, yy, s2)
        for j in range(p + 1):
            e = np.zeros(p + 1)
            e[j] = 1e-5
            fd = (blr.penalized_loglik(beta + e, A, yy, s2) - blr.penalized_loglik(beta - e, A, yy, s2)) / 2e-5
            worst = max(worst, abs(fd - g[j]) / max(1.0, abs(g[j])))
    elapsed = time.perf_counter() - t0
    ok = model.converged and map_err < 1e-4 and worst < 1e-6 and elapsed < 30
    return ok, (f"w={w:.6f} b={b:.2e} vs grid w={w_grid:.6f} b={b_grid:.2e} (max err {map_err:.1e}); "
                f"worst relative gradient error {worst:.1e}; {elapsed:.1f}s")


def criterion_4():
    t0 = time.perf_counter()
    aucs, hits = [], []
    for seed in SEEDS:
        d0, pooled = planted_world(seed)
        aucs.append(evaluation.cross_validate(d0.X, d0.y, blr.BlrLearner(feature_names=d0.feature_names),
                                              k=10, rng_seed=seed).mean("auc"))
        model = forest.fit_forest(pooled.X, pooled.y, rng_seed=seed, feature_names=pooled.feature_names)
        top = {r.name for r in forest.importance_ranking(model)[:15]}
        hits.append(sum(name in top for name in PLANTED))
    elapsed = time.perf_counter() - t0
    good = sum(h >= 5 for h in hits)
    ok = min(aucs) >= 0.90 and good >= 9 and elapsed < 300
    return ok, (f"10-fold AUC min {min(aucs):.3f} mean {np.mean(aucs):.3f}; planted in top 15 per seed "
                f"{hits} ({good}/10 with >= 5); {elapsed:.0f}s")


def criterion_5():
    t0 = time.perf_counter()
    scores = []
    for seed in SEEDS:
        d0, _ = planted_world(seed)
        cache = {}
        f1 = {}
        for k in (10, 15):
            learner = forest.TopKLearner(k, {"rng_seed": seed}, feature_names=d0.feature_names, cache=cache)
            f1[k] = evaluation.cross_validate(d0.X, d0.y, learner, k=10, rng_seed=seed).mean("f1")
        scores.append((f1[15], f1[10]))
    elapsed = time.perf_counter() - t0
    held = sum(a >= b for a, b in scores)
    ok = held >= 8 and elapsed < 300
    pairs = " ".join(f"{a:.3f}/{b:.3f}" for a, b in scores)
    return ok, f"F1 top15/top10 per seed {pairs}; ordering held {held}/10; {elapsed:.0f}s"


def criterion_6():
    t0 = time.perf_counter()
    graph = simulator.generate_graph(1000, 4, rng_seed=6)
    nodes = sorted(graph.nodes)
    rng = np.random.default_rng(6)
    totals = {"double": 0, "second_attempt": 0, "order": 0}
    activations = 0
    for k in range(10_000):
        seeds = set(rng.choice(nodes, int(rng.integers(1, 4)), replace=False).tolist())
        params = AsicParams(float(rng.choice([0.02, 0.05, 0.1, 0.3])), delay_scale=600.0, horizon=float(rng.choice([3600, 86400])))
        cascade = run_asic(graph, seeds, params, rng_seed=k, start=1000.0, instrument=True)
        activations += len(cascade.activations)
        for key, v in cascade_violations(graph, cascade, seeds, 1000.0).items():
            totals[key] += v

    star = SocialGraph([(0, leaf) for leaf in range(1, 11)])
    hit = sum(len(run_asic(star, [0], AsicParams(0.5), rng_seed=s).nodes) - 1 for s in range(10_000))
    fraction = hit / 100_000
    elapsed = time.perf_counter() - t0
    ok = not any(totals.values()) and abs(fraction - 0.5) <= 0.02 and elapsed < 60
    return ok, (f"10000 cascades, {activations} activations, violations {totals}; "
                f"star fraction {fraction:.4f}; {elapsed:.1f}s")


def criterion_7():
    t0 = time.perf_counter()
    model = sign_model()
    p = len(features.EDGE_FEATURES)
    wrong = checked = 0
    for tie in (TRENDING, INFORMATIVE):
        for n in range(1, 8):
            for votes in itertools.product([0, 1], repeat=n):
                samples = [InteractionSample(0, np.eye(p)[0] * (1 if v else -1), TRENDING) for v in votes]
                got = virality.predict_virality(model, samples, tie=tie).verdict
                yes = Fraction(sum(votes), n)
                want = TRENDING if yes > Fraction(1, 2) else INFORMATIVE if yes < Fraction(1, 2) else tie
                wrong += got != want
                checked += 1

    corpus = virality.synthesize_virality_corpus(ViralityConfig(messages=1000, rng_seed=7))
    truth = virality.message_truth(corpus)
    n_trending = sum(v == TRENDING for v in truth.values())
    train, test = virality.split_messages(corpus, 0.5, 7)
    fitted = virality.train_virality(train)
    f1 = virality.evaluate_virality(fitted, test).folds[0].f1
    elapsed = time.perf_counter() - t0
    ok = wrong == 0 and len(truth) == 1000 and n_trending == 500 and f1 >= 0.65 and elapsed < 120
    return ok, (f"{checked} vote patterns, {wrong} wrong; corpus {n_trending}/{len(truth) - n_trending} "
                f"trending/informative, message F1 on {len(virality.message_truth(test))} held-out messages "
                f"{f1:.3f}; {elapsed:.1f}s")


PIPELINE = [
    ["--rng-seed", "8", "simulate"],
    ["ingest"],
    ["extract"],
    ["train"],
    ["--rng-seed", "8", "rank"],
    ["retrain-topk"],
    ["--rng-seed", "8", "evaluate"],
    ["cross-test"],
    ["time-report"],
    ["--rng-seed", "8", "predict-virality"],
]


def criterion_8():
    t0 = time.perf_counter()
    with tempfile.TemporaryDirectory() as tmp:
        out = Path(tmp) / "run"
        first = Path(tmp) / "first"
        codes = run_pipeline(out, PIPELINE)
        out.rename(first)
        codes += run_pipeline(out, PIPELINE)
        names = sorted(p.name for p in out.iterdir())
        same_names = names == sorted(p.name for p in first.iterdir())
        differ = [n for n in names if (out / n).read_bytes() != (first / n).read_bytes()]
    elapsed = time.perf_counter() - t0
    ok = set(codes) == {0} and same_names and not differ and elapsed < 600
    return ok, f"{len(names)} artifacts per run, {len(differ)} differ {differ[:3]}; exit codes {set(codes)}; {elapsed:.0f}s"


def criterion_9():
    stages = [
        ["--rng-seed", "0", "simulate", "--users", "5000"],
        ["extract"],
        ["train"],
        ["--rng-seed", "0", "rank"],
        ["retrain-topk"],
        ["--rng-seed", "0", "evaluate"],
    ]
    # the planted worlds cached for criteria 4 and 5 are not part of this run
    planted_world.cache_clear()
    gc.collect()
    with tempfile.TemporaryDirectory() as tmp:
        # compile the numba kernels outside the timed region
        run_pipeline(Path(tmp) / "warm", [["--rng-seed", "0", "simulate", "--users", "300"], ["extract"],
                                          ["--rng-seed", "0", "rank", "--n-trees", "2"]])
        shutil.rmtree(Path(tmp) / "warm")
        out = Path(tmp) / "run"
        laps = []
        codes = []
        t0 = time.perf_counter()
        for stage in stages:
            t = time.perf_counter()
            codes.append(run_cli(out, *stage))
            laps.append(f"{stage[-1] if stage[0] != '--rng-seed' else stage[2]} {time.perf_counter() - t:.1f}s")
        elapsed = time.perf_counter() - t0
        sim = json.loads((out / "simulation.json").read_text())
    ok = set(codes) == {0} and elapsed < 60
    return ok, (f"{sim['events']} events on {sim['edges']} edges, total {elapsed:.1f}s "
                f"({', '.join(laps)}) on {forest.available_cores()} core(s)")


CRITERIA = {n: globals()[f"criterion_{n}"] for n in range(1, 10)}


# ----------------------------------------------------------------- pytest


def _check(number, acceptance):
    ok, detail = CRITERIA[number]()
    acceptance(number, ok, detail)
    assert ok, detail


def test_criterion_1_metric_identities(acceptance):
    _check(1, acceptance)


def test_criterion_2_auc_oracle(acceptance):
    _check(2, acceptance)


def test_criterion_3_blr_oracle(acceptance):
    _check(3, acceptance)


@pytest.mark.slow
def test_criterion_4_planted_recovery(acceptance):
    _check(4, acceptance)


@pytest.mark.slow
def test_criterion_5_topk_ordering(acceptance):
    _check(5, acceptance)


def test_criterion_6_asic_invariants(acceptance):
    _check(6, acceptance)


def test_criterion_7_virality_vote(acceptance):
    _check(7, acceptance)


@pytest.mark.slow
def test_criterion_8_determinism(acceptance):
    _check(8, acceptance)


@pytest.mark.slow
def test_criterion_9_desk_scale(acceptance):
    _check(9, acceptance)


if __name__ == "__main__":
    wanted = [int(a) for a in sys.argv[1:]] or list(CRITERIA)
    failed = 0
    for n in wanted:
        ok, detail = CRITERIA[n]()
        failed += not ok
        print(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}", flush=True)
    sys.exit(1 if failed else 0)
