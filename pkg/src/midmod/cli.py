"""Command line pipeline.

Every subcommand reads an optional JSON config (``--config``), applies flag
overrides on top (flags win), writes its artifacts under ``--output-dir`` and
finishes with ``manifest-<subcommand>.json`` holding the resolved config, the
root seed and the SHA-256 of every file it wrote.

Randomness comes from the single ``rng_seed``.  Stages that need their own
stream derive it as ``SeedSequence([rng_seed, crc32(stage), *extra])`` (see
:func:`stage_seed`), so any stage can be re-run alone with the same result.

Exit codes: 0 success, 1 usage or config error, 2 data validation error,
3 learner failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__, blr, evaluation, eventlog, features, forest, graph as graph_mod, simulator, virality

log = logging.getLogger("midmod")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_LEARNER = 0, 1, 2, 3


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class LearnerError(Exception):
    pass


# ---------------------------------------------------------------- config


@dataclass(frozen=True)
class Key:
    name: str
    type: type
    default: object
    help: str


def _weights(value):
    if not isinstance(value, dict) or not all(isinstance(v, (int, float)) for v in value.values()):
        raise ValueError("expected an object of feature: weight")
    return {str(k): float(v) for k, v in value.items()}


def _window(value):
    if isinstance(value, str):
        value = json.loads(value)
    if (not isinstance(value, (list, tuple)) or len(value) != 2
            or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value)):
        raise ValueError("expected [start, end]")
    if value[1] < value[0]:
        raise ValueError("window end precedes start")
    return [float(value[0]), float(value[1])]


def _bin_weights(value):
    if (not isinstance(value, (list, tuple)) or len(value) != features.N_BINS
            or not all(isinstance(v, (int, float)) and not isinstance(v, bool) and v >= 0 for v in value)
            or sum(value) <= 0):
        raise ValueError(f"expected {features.N_BINS} non-negative numbers with a positive sum")
    return [float(v) for v in value]


KEYS = [
    # paths
    Key("graph", str, None, "edge list ('v u' per line, u follows v); default <output-dir>/graph.txt"),
    Key("events", str, None, "event log (JSONL); default <output-dir>/events.jsonl"),
    Key("profiles", str, None, "user profiles (JSONL); default <output-dir>/profiles.jsonl"),
    Key("topic", str, None, "topic file (JSON); default <output-dir>/topic.json"),
    Key("lexicon", str, None, "sentiment lexicon (one 'word weight' pair per line)"),
    Key("datasets", str, None, "directory holding dataset_bin<b>.csv; default <output-dir>"),
    Key("models", str, None, "directory holding model_bin<b>.json; default <output-dir>"),
    Key("model", str, None, "model file for cross-test"),
    Key("dataset", str, None, "dataset CSV for cross-test"),
    Key("interactions", str, None, "interaction CSV for predict-virality (synthesized when absent)"),
    Key("window", _window, None, "observation window [start, end] in epoch seconds; default read from"
        " simulation.json beside the events file, else the record span"),
    # simulator
    Key("users", int, 2000, "number of simulated users"),
    Key("edges_per_node", int, 4, "follow links added per new user"),
    Key("reciprocity", float, 0.2, "probability that a follow link is returned"),
    Key("delay_mean_s", float, 3600.0, "mean transmission delay in seconds"),
    Key("horizon_s", float, 30 * 86400.0, "simulated time span in seconds"),
    Key("topics", int, 1, "number of simulated topics"),
    Key("planted_weights", _weights, None, "feature: weight map for the planted diffusion probability"),
    Key("class_balance", float, 0.4, "target share of diffused edges"),
    Key("posts_per_day", float, 0.2, "mean background originals per user and day"),
    Key("reactions_per_day", float, 0.1, "mean background reactions per user and day"),
    Key("topic_authors", float, 0.05, "share of users posting one message per topic"),
    Key("bin_weights", _bin_weights, None, "relative posting activity of the four 6-hour UTC bins"),
    # learners
    Key("prior_variance", float, 10.0, "BLR prior variance"),
    Key("tol", float, 1e-8, "BLR gradient tolerance"),
    Key("max_iter", int, 100, "BLR iteration cap"),
    Key("n_trees", int, 200, "forest size"),
    Key("max_depth", int, 12, "tree depth cap"),
    Key("min_leaf", int, 5, "minimum bootstrap weight per leaf"),
    Key("features_per_split", int, None, "features tried per split (default ceil(sqrt(p)))"),
    Key("k", int, 15, "number of top-ranked features kept by retrain-topk"),
    Key("ranking", str, "bin", "ranking used by retrain-topk: 'bin' (per-bin) or 'pooled'"),
    # evaluation
    Key("k_folds", int, 10, "cross-validation folds"),
    Key("train_fraction", float, 0.8, "training share of the holdout split"),
    Key("repeats", int, 10, "holdout repetitions"),
    Key("threshold", float, 0.5, "decision threshold"),
    Key("select_k", int, None, "evaluate also rank-then-refit with this many features, selected inside folds"),
    # virality
    Key("messages", int, 1000, "synthetic virality messages"),
    Key("trend_reactor_share", float, 0.3, "share of trend-only reactors"),
    Key("trend_pull", float, 0.6, "chance that a reactor of a trending message is trend-only"),
    Key("tie", str, "trending", "verdict on a split vote"),
    Key("rng_seed", int, None, "root seed (required by simulate, rank, evaluate and predict-virality)"),
]
KEY_BY_NAME = {k.name: k for k in KEYS}
CHOICES = {"ranking": ("bin", "pooled"), "tie": virality.EVENT_TYPES}


def _coerce(key: Key, value):
    if value is None:
        return None
    if key.type is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValueError("expected a number")
        return float(value)
    if key.type is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ValueError("expected an integer")
        return value
    if key.type is str:
        if not isinstance(value, str):
            raise ValueError("expected a string")
        return value
    return key.type(value)


def _check_ranges(cfg: dict) -> list[str]:
    bad = []

    def need(name, ok, what):
        if cfg.get(name) is not None and not ok(cfg[name]):
            bad.append(f"{name}: {what}, got {cfg[name]!r}")

    for name in ("users", "topics", "n_trees", "min_leaf", "repeats", "messages", "max_iter", "k"):
        need(name, lambda v: v >= 1, "must be >= 1")
    need("edges_per_node", lambda v: v >= 1, "must be >= 1")
    need("max_depth", lambda v: v >= 0, "must be >= 0")
    need("k_folds", lambda v: v >= 2, "must be >= 2")
    for name in ("delay_mean_s", "horizon_s", "prior_variance", "tol"):
        need(name, lambda v: v > 0, "must be positive")
    for name in ("class_balance", "train_fraction", "threshold"):
        need(name, lambda v: 0 < v < 1, "must lie in (0, 1)")
    for name in ("reciprocity", "topic_authors", "trend_reactor_share", "trend_pull"):
        need(name, lambda v: 0 <= v <= 1, "must lie in [0, 1]")
    for name in ("posts_per_day", "reactions_per_day"):
        need(name, lambda v: v >= 0, "must be >= 0")
    need("k", lambda v: v <= features.N_EDGE_FEATURES, f"must be <= {features.N_EDGE_FEATURES}")
    need("select_k", lambda v: 1 <= v <= features.N_EDGE_FEATURES, f"must lie in [1, {features.N_EDGE_FEATURES}]")
    need("features_per_split", lambda v: 1 <= v <= features.N_EDGE_FEATURES, "must lie in [1, 55]")
    for name, allowed in CHOICES.items():
        need(name, lambda v, allowed=allowed: v in allowed, f"must be one of {list(allowed)}")
    if cfg.get("planted_weights"):
        unknown = sorted(set(cfg["planted_weights"]) - set(features.EDGE_FEATURES))
        if unknown:
            bad.append(f"planted_weights: unknown feature(s) {unknown}")
    return bad


def resolve_config(config_path: str | None, overrides: dict, command: str | None = None) -> dict:
    """Defaults, then the JSON file, then flags.  Every offending key is
    reported at once."""
    cfg = {k.name: k.default for k in KEYS}
    errors = []
    if config_path:
        try:
            with open(config_path) as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {config_path}: {exc}") from exc
        if not isinstance(raw, dict):
            raise UsageError("config must be a JSON object")
        for name, value in raw.items():
            key = KEY_BY_NAME.get(name)
            if key is None:
                errors.append(f"{name}: unknown key")
                continue
            try:
                cfg[name] = _coerce(key, value)
            except ValueError as exc:
                errors.append(f"{name}: {exc}")
    for name, value in overrides.items():
        if value is not None:
            cfg[name] = value
    if cfg["planted_weights"] is None:
        cfg["planted_weights"] = dict(simulator.DEFAULT_PLANTED_WEIGHTS)
    errors += _check_ranges(cfg)
    if command in STOCHASTIC and cfg["rng_seed"] is None:
        errors.append(f"rng_seed: required by '{command}'")
    elif cfg["rng_seed"] is not None and not 0 <= cfg["rng_seed"] < 2**63:
        errors.append(f"rng_seed: must lie in [0, 2**63), got {cfg['rng_seed']}")
    if errors:
        raise UsageError("invalid configuration:\n  " + "\n  ".join(errors))
    return cfg


def stage_seed(root: int, stage: str, *extra: int) -> int:
    """Seed of one pipeline stage, derived from the root seed."""
    return int(np.random.SeedSequence([root, zlib.crc32(stage.encode()), *extra]).generate_state(1)[0])


# ---------------------------------------------------------------- artifacts


class Run:
    """Tracks the files a subcommand writes and produces its manifest."""

    def __init__(self, command: str, cfg: dict, out: Path):
        self.command = command
        self.cfg = cfg
        self.out = out
        self.outputs: list[Path] = []
        self.notes: dict = {}
        out.mkdir(parents=True, exist_ok=True)

    def path(self, name: str) -> Path:
        p = self.out / name
        self.outputs.append(p)
        return p

    def input(self, key: str, default_name: str) -> Path:
        p = Path(self.cfg[key]) if self.cfg.get(key) else self.out / default_name
        if not p.exists():
            raise UsageError(f"{key}: {p} does not exist")
        return p

    def write_json(self, name: str, obj) -> Path:
        p = self.path(name)
        with open(p, "w") as fh:
            json.dump(obj, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return p

    def finish(self) -> Path:
        manifest = {
            "command": self.command,
            "version": __version__,
            "rng_seed": self.cfg["rng_seed"],
            "config": self.cfg,
            "outputs": {str(p.relative_to(self.out)) if p.is_relative_to(self.out) else str(p): sha256(p)
                        for p in sorted(set(self.outputs))},
            "notes": self.notes,
        }
        p = self.out / f"manifest-{self.command}.json"
        with open(p, "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return p


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _load_datasets(run: Run) -> list[features.Dataset]:
    where = Path(run.cfg["datasets"]) if run.cfg.get("datasets") else run.out
    out = []
    for b in range(features.N_BINS):
        p = where / f"dataset_bin{b}.csv"
        if not p.exists():
            raise UsageError(f"datasets: {p} does not exist (run 'extract' first)")
        try:
            out.append(features.Dataset.from_csv(p))
        except (ValueError, IndexError) as exc:
            raise DataError(f"{p}: {exc}") from exc
    return out


def _load_models(run: Run, pattern: str = "model_bin{b}.json") -> list[blr.BlrModel]:
    where = Path(run.cfg["models"]) if run.cfg.get("models") else run.out
    out = []
    for b in range(features.N_BINS):
        p = where / pattern.format(b=b)
        if not p.exists():
            raise UsageError(f"models: {p} does not exist (run 'train' first)")
        out.append(blr.BlrModel.load(p))
    return out


def _forest_params(cfg: dict, seed: int) -> dict:
    return {
        "n_trees": cfg["n_trees"],
        "max_depth": cfg["max_depth"],
        "min_leaf": cfg["min_leaf"],
        "features_per_split": cfg["features_per_split"],
        "rng_seed": seed,
    }


def _fit(X, y, cfg, names, columns=None) -> blr.BlrModel:
    try:
        return blr.fit(X, y, cfg["prior_variance"], cfg["tol"], cfg["max_iter"], names, columns)
    except blr.FitError as exc:
        raise LearnerError(str(exc)) from exc


# ---------------------------------------------------------------- subcommands


def cmd_simulate(run: Run):
    cfg = run.cfg
    sim_cfg = simulator.SimulationConfig(
        users=cfg["users"],
        edges_per_node=cfg["edges_per_node"],
        reciprocity=cfg["reciprocity"],
        delay_mean_s=cfg["delay_mean_s"],
        horizon_s=cfg["horizon_s"],
        topics=cfg["topics"],
        planted_weights=cfg["planted_weights"],
        class_balance=cfg["class_balance"],
        posts_per_day=cfg["posts_per_day"],
        reactions_per_day=cfg["reactions_per_day"],
        topic_authors=cfg["topic_authors"],
        bin_weights=tuple(cfg["bin_weights"] or simulator.SimulationConfig.bin_weights),
        rng_seed=cfg["rng_seed"],
    )
    try:
        data = simulator.synthesize_dataset(sim_cfg)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    graph_mod.write_edge_list(data.graph, run.path("graph.txt"))
    eventlog.write_events(data.log.records, run.path("events.jsonl"))
    eventlog.write_profiles(data.profiles.values(), run.path("profiles.jsonl"))
    summary = {"window": list(data.log.window), "events": len(data.log), "edges": data.graph.edge_count, "topics": []}
    for k, topic in enumerate(data.topics):
        suffix = "" if k == 0 else f"_{k}"
        eventlog.write_topic(topic, run.path(f"topic{suffix}.json"))
        with open(run.path(f"ground_truth{suffix}.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["src", "dst", "probability", "label"])
            for (v, u), p in data.edge_probability[k].items():
                w.writerow([v, u, f"{p:.9g}", data.labels[k][(v, u)]])
        labels = list(data.labels[k].values())
        summary["topics"].append({
            "name": topic.name,
            "intercept": data.intercepts[k],
            "diffused_share": float(np.mean(labels)) if labels else 0.0,
            "cascades": len(data.cascades[k]),
        })
    run.write_json("simulation.json", summary)
    run.notes.update(summary)
    print(f"simulated {len(data.log)} events on {data.graph.edge_count} edges"
          f" (diffused share {summary['topics'][0]['diffused_share']:.3f})")


def cmd_ingest(run: Run):
    events = run.input("events", "events.jsonl")
    profiles = Path(run.cfg["profiles"]) if run.cfg.get("profiles") else None
    if profiles is not None and not profiles.exists():
        raise UsageError(f"profiles: {profiles} does not exist")
    try:
        report = eventlog.ingest(events, profiles, _window_for(run, events))
    except (OSError, eventlog.IngestError) as exc:
        raise DataError(str(exc)) from exc
    summary = report.summary()
    run.write_json("ingest_report.json", summary)
    run.notes.update({k: summary[k] for k in ("records", "malformed", "profiles", "malformed_profiles")})
    print(f"{summary['records']} records, {summary['malformed']} malformed, "
          f"{len(summary['dangling_references'])} dangling reference(s)")
    if not len(report.log):
        raise DataError(f"{events}: no valid records")


def _window_for(run: Run, events: Path):
    if run.cfg.get("window"):
        return tuple(run.cfg["window"])
    sidecar = events.parent / "simulation.json"
    if sidecar.exists():
        with open(sidecar) as fh:
            return tuple(json.load(fh)["window"])
    return None


def _read_inputs(run: Run):
    try:
        g = graph_mod.read_edge_list(run.input("graph", "graph.txt"))
        events = run.input("events", "events.jsonl")
        window = _window_for(run, events)
        report = eventlog.ingest(events, run.input("profiles", "profiles.jsonl"), window)
        topic = eventlog.load_topic(run.input("topic", "topic.json"))
        lexicon = eventlog.load_lexicon(run.cfg["lexicon"]) if run.cfg.get("lexicon") else None
    except (ValueError, KeyError, eventlog.IngestError, json.JSONDecodeError) as exc:
        raise DataError(str(exc)) from exc
    if report.malformed:
        raise DataError(f"event log has {report.malformed_count} malformed line(s); run 'ingest' for details")
    return g, report, topic, lexicon


def cmd_extract(run: Run):
    g, report, topic, lexicon = _read_inputs(run)
    fx = features.FeatureExtractor(g, report.log, report.profiles, topic, lexicon)
    datasets = features.build_datasets(g, report.log, report.profiles, topic, lexicon=lexicon, extractor=fx)
    for d in datasets:
        d.to_csv(run.path(f"dataset_bin{d.bin}.csv"))
    d0 = datasets[0]
    run.notes.update({
        "samples_per_bin": len(d0),
        "positive_share": float(d0.y.mean()) if len(d0) else 0.0,
        "skipped_edges": d0.skipped,
        "missing_profile_fields": fx.missing_profile_fields,
    })
    print(f"{len(d0)} edge samples per bin, positive share {run.notes['positive_share']:.3f},"
          f" {d0.skipped} edge(s) skipped")


def cmd_train(run: Run):
    for d in _load_datasets(run):
        model = _fit(d.X, d.y, run.cfg, d.feature_names)
        model.save(run.path(f"model_bin{d.bin}.json"))
        run.notes[f"bin{d.bin}"] = {"converged": model.converged, "iterations": model.iterations}
        print(f"bin {d.bin}: {'converged' if model.converged else 'NOT converged'} after {model.iterations} iterations")


def _rank(X, y, names, params) -> list[forest.RankedFeature]:
    try:
        return forest.importance_ranking(forest.fit_forest(X, y, feature_names=names, **params))
    except ValueError as exc:
        raise LearnerError(str(exc)) from exc


def cmd_rank(run: Run):
    datasets = _load_datasets(run)
    root = run.cfg["rng_seed"]
    for d in datasets:
        ranking = _rank(d.X, d.y, d.feature_names, _forest_params(run.cfg, stage_seed(root, "rank", d.bin)))
        forest.write_ranking(ranking, run.path(f"ranking_bin{d.bin}.csv"))
        run.notes[f"bin{d.bin}_top5"] = [r.name for r in ranking[:5]]
    pooled = features.pool(datasets)
    ranking = _rank(pooled.X, pooled.y, pooled.feature_names, _forest_params(run.cfg, stage_seed(root, "rank-pooled")))
    forest.write_ranking(ranking, run.path("ranking_pooled.csv"))
    run.notes["pooled_top5"] = [r.name for r in ranking[:5]]
    print("pooled top 5: " + ", ".join(run.notes["pooled_top5"]))


def cmd_retrain_topk(run: Run):
    k = run.cfg["k"]
    datasets = _load_datasets(run)
    for d in datasets:
        name = f"ranking_bin{d.bin}.csv" if run.cfg["ranking"] == "bin" else "ranking_pooled.csv"
        path = run.out / name
        if not path.exists():
            raise UsageError(f"{path} does not exist (run 'rank' first)")
        try:
            ranking = forest.read_ranking(path, d.feature_names)
        except ValueError as exc:
            raise DataError(f"{path}: {exc}") from exc
        columns = forest.select_top_k(ranking, k)
        model = _fit(d.X, d.y, run.cfg, d.feature_names, columns)
        model.save(run.path(f"model_top{k}_bin{d.bin}.json"))
        run.notes[f"bin{d.bin}"] = {"free_weights": model.n_free, "converged": model.converged}
    print(f"refitted {len(datasets)} models on the top {k} features")


def cmd_evaluate(run: Run):
    cfg = run.cfg
    root = cfg["rng_seed"]
    rows = []
    for d in _load_datasets(run):
        learners = {"full": blr.BlrLearner(cfg["prior_variance"], cfg["tol"], cfg["max_iter"], d.feature_names)}
        if cfg["select_k"]:
            params = _forest_params(cfg, stage_seed(root, "evaluate-forest", d.bin))
            learners[f"top{cfg['select_k']}"] = forest.TopKLearner(
                cfg["select_k"], params, cfg["prior_variance"], cfg["tol"], cfg["max_iter"], d.feature_names
            )
        for tag, learner in learners.items():
            try:
                reports = {
                    "cv": evaluation.cross_validate(d.X, d.y, learner, cfg["k_folds"], stage_seed(root, "cv", d.bin),
                                                    cfg["threshold"]),
                    "holdout": evaluation.holdout(d.X, d.y, learner, cfg["train_fraction"], cfg["repeats"],
                                                  stage_seed(root, "holdout", d.bin), cfg["threshold"]),
                }
            except blr.FitError as exc:
                raise LearnerError(f"bin {d.bin}: {exc}") from exc
            except ValueError as exc:
                raise DataError(f"bin {d.bin}: {exc}") from exc
            for proc, rep in reports.items():
                stem = f"eval_{tag}_{proc}_bin{d.bin}"
                rep.config["bin"] = d.bin
                rep.write_json(run.path(stem + ".json"))
                rep.write_summary_csv(run.path(stem + ".csv"))
                rows.append((d.bin, tag, proc, rep.summary))
    with open(run.path("eval_summary.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["bin", "model", "procedure", "metric", "mean", "stddev"])
        for b, tag, proc, summary in rows:
            for metric, s in summary.items():
                w.writerow([b, tag, proc, metric, f"{s['mean']:.9g}", f"{s['stddev']:.9g}"])
        # one more row per metric: mean and spread of the per-bin means
        groups = {}
        for _, tag, proc, summary in rows:
            groups.setdefault((tag, proc), []).append(summary)
        for (tag, proc), summaries in groups.items():
            for metric in summaries[0]:
                means = [s[metric]["mean"] for s in summaries if not np.isnan(s[metric]["mean"])]
                mean, spread = (np.mean(means), np.std(means)) if means else (float("nan"), float("nan"))
                w.writerow(["mean", tag, proc, metric, f"{mean:.9g}", f"{spread:.9g}"])
    for b, tag, proc, summary in rows:
        print(f"bin {b} {tag:>5} {proc:>7}: F1 {summary['f1']['mean']:.3f}  AUC {summary['auc']['mean']:.3f}")


def cmd_cross_test(run: Run):
    model_path = run.input("model", "model_bin0.json")
    dataset_path = run.input("dataset", "dataset_bin0.csv")
    model = blr.BlrModel.load(model_path)
    try:
        dataset = features.Dataset.from_csv(dataset_path)
        report = evaluation.cross_test(model, dataset, run.cfg["threshold"])
    except (evaluation.SchemaError, ValueError) as exc:
        raise DataError(str(exc)) from exc
    report.config.update({"model": str(model_path), "dataset": str(dataset_path)})
    report.write_json(run.path("cross_test.json"))
    report.write_summary_csv(run.path("cross_test.csv"))
    f = report.folds[0]
    print(f"cross-test: P {f.precision:.3f}  R {f.recall:.3f}  F1 {f.f1:.3f}  AUC {f.auc:.3f}")


def cmd_time_report(run: Run):
    _, report, topic, _ = _read_inputs(run)
    datasets = _load_datasets(run)
    models = _load_models(run)
    try:
        rows = evaluation.time_to_tweet_report(report.log, topic, datasets, models)
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    evaluation.write_time_report(rows, run.path("time_report.csv"))
    best = [r.bin for r in rows if r.best]
    run.write_json("time_report.json", {"rows": [r.__dict__ for r in rows], "best_bin": best[0] if best else None})
    for r in rows:
        print(f"bin {r.bin}: posts {r.post_share:.3f}  diffused {r.diffused_share:.3f}  mean_pred {r.mean_pred:.3f}"
              + ("  <- best time to post" if r.best else ""))


def cmd_predict_virality(run: Run):
    cfg = run.cfg
    if cfg.get("interactions"):
        path = run.input("interactions", "")
        try:
            samples = virality.read_interactions(path)
        except (ValueError, IndexError) as exc:
            raise DataError(f"{path}: {exc}") from exc
    else:
        vcfg = virality.ViralityConfig(
            users=cfg["users"], messages=cfg["messages"], trend_reactor_share=cfg["trend_reactor_share"],
            trend_pull=cfg["trend_pull"], rng_seed=stage_seed(cfg["rng_seed"], "virality-corpus"),
        )
        samples = virality.synthesize_virality_corpus(vcfg)
        virality.write_interactions(samples, run.path("interactions.csv"))
    try:
        train, test = virality.split_messages(samples, cfg["train_fraction"], stage_seed(cfg["rng_seed"], "virality-split"))
        model = virality.train_virality(train, cfg["prior_variance"], cfg["tol"], cfg["max_iter"])
    except blr.FitError as exc:
        raise LearnerError(str(exc)) from exc
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    model.save(run.path("virality_model.json"))
    verdicts = virality.predict_messages(model, test, cfg["threshold"], cfg["tie"])
    virality.write_verdicts(verdicts, virality.message_truth(test), run.path("verdicts.csv"))
    report = virality.evaluate_virality(model, test, cfg["threshold"], cfg["tie"])
    report.write_json(run.path("virality_report.json"))
    report.write_summary_csv(run.path("virality_summary.csv"))
    f = report.folds[0]
    print(f"{len(verdicts)} test messages: P {f.precision:.3f}  R {f.recall:.3f}  F1 {f.f1:.3f}")


STOCHASTIC = frozenset({"simulate", "rank", "evaluate", "predict-virality"})

COMMANDS = {
    "simulate": (cmd_simulate, "synthesize graph, profiles, events and planted ground truth"),
    "ingest": (cmd_ingest, "validate an event log (and profiles) and write a report"),
    "extract": (cmd_extract, "build the 55-feature edge datasets, one per time bin"),
    "train": (cmd_train, "fit one BLR model per time bin"),
    "rank": (cmd_rank, "random-forest feature rankings per bin and pooled"),
    "retrain-topk": (cmd_retrain_topk, "refit BLR on the top-k ranked features"),
    "evaluate": (cmd_evaluate, "k-fold cross-validation and repeated holdout per bin"),
    "cross-test": (cmd_cross_test, "score a trained model on another dataset"),
    "time-report": (cmd_time_report, "per-bin post share, diffusion share and predicted rate"),
    "predict-virality": (cmd_predict_virality, "interaction classifier and majority-vote verdicts"),
}


# ---------------------------------------------------------------- argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _flag_type(key: Key):
    if key.type in (_weights, _window, _bin_weights):
        def parse(text):
            try:
                return key.type(json.loads(text))
            except (ValueError, json.JSONDecodeError) as exc:
                raise argparse.ArgumentTypeError(f"{key.name}: {exc}") from exc
        return parse
    return key.type


def _add_common(parser: argparse.ArgumentParser, suppress: bool) -> None:
    """Shared options.  They are accepted before and after the subcommand;
    at subcommand level defaults are suppressed so an option given before it
    is not reset."""

    def default(value):
        return argparse.SUPPRESS if suppress else value

    parser.add_argument("--config", default=default(None), help="JSON config file; flags override its values")
    parser.add_argument("--output-dir", default=default("."), help="directory for every artifact (default: .)")
    parser.add_argument("-v", "--verbose", action="store_true", default=default(False), help="log progress")
    group = parser.add_argument_group("config keys")
    for key in KEYS:
        default_text = "" if key.default is None else f" (default: {key.default})"
        group.add_argument(f"--{key.name.replace('_', '-')}", dest=key.name, type=_flag_type(key),
                           default=default(None), help=key.help + default_text)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="midmod", usage="%(prog)s [options] <subcommand> [options]",
                     description="Edge-level diffusion modeling pipeline.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _add_common(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", metavar="subcommand", parser_class=_Parser)
    for name, (_, help_text) in COMMANDS.items():
        _add_common(sub.add_parser(name, help=help_text, description=help_text), suppress=True)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    overrides = {k.name: getattr(args, k.name) for k in KEYS}
    try:
        cfg = resolve_config(args.config, overrides, args.command)
        run = Run(args.command, cfg, Path(args.output_dir))
        COMMANDS[args.command][0](run)
        run.finish()
    except UsageError as exc:
        print(f"midmod {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"midmod {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except LearnerError as exc:
        print(f"midmod {args.command}: learner failure: {exc}", file=sys.stderr)
        return EXIT_LEARNER
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
