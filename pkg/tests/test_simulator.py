import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from midmod import features, simulator
from midmod.graph import SocialGraph
from midmod.simulator import AsicParams, SimulationConfig, run_asic


def check_cascade(graph, cascade, seeds, start, horizon):
    """Structural invariants of one cascade; returns nothing, asserts everything."""
    nodes = cascade.nodes
    assert len(nodes) == len(set(nodes)), "a node activated twice"
    times = [t for _, t, _ in cascade.activations]
    assert times == sorted(times)
    when = {n: t for n, t, _ in cascade.activations}
    for node, t, parent in cascade.activations:
        if parent is None:
            assert node in seeds and t == start
            continue
        assert graph.has_edge(parent, node)
        assert when[parent] < t <= start + horizon
    assert all(c <= 1 for c in cascade.attempts.values()), "an edge was tried twice"
    for (v, u) in cascade.attempts:
        assert v in when and graph.has_edge(v, u)


def test_certain_transmission_along_a_chain():
    g = SocialGraph([(1, 2), (2, 3)])
    c = run_asic(g, [1], AsicParams(1.0, delay_scale=60.0), rng_seed=0)
    assert c.nodes == [1, 2, 3]
    t = [a[1] for a in c.activations]
    assert t[0] < t[1] < t[2]
    assert [a[2] for a in c.activations] == [None, 1, 2]


def test_zero_probability_activates_only_seeds():
    g = simulator.generate_graph(50, 3, 0)
    c = run_asic(g, [0, 5], AsicParams(0.0), rng_seed=1)
    assert sorted(c.nodes) == [0, 5]


def test_star_graph_binomial():
    g = SocialGraph([(0, k) for k in range(1, 11)])
    params = AsicParams(0.5)
    hits = sum(len(run_asic(g, [0], params, rng_seed=s).nodes) - 1 for s in range(2000))
    # 20,000 Bernoulli(0.5) leaves: sd of the fraction is 0.0035
    assert abs(hits / 20000 - 0.5) < 0.015


def test_line_graph_reach_is_geometric():
    # node k on a line is reached with probability p**k; arrival is Gamma(k, delay)
    g = SocialGraph([(k, k + 1) for k in range(5)])
    p, n, delay = 0.7, 4000, 100.0
    reach = np.zeros(6)
    arrival3 = []
    for s in range(n):
        c = run_asic(g, [0], AsicParams(p, delay_scale=delay), rng_seed=s)
        reach[len(c.nodes) - 1] += 1
        if len(c.nodes) > 3:
            arrival3.append(c.activations[3][1])
    reached_k = reach[::-1].cumsum()[::-1] / n
    for k in range(6):
        sd = math.sqrt(p**k * (1 - p**k) / n)
        assert abs(reached_k[k] - p**k) < 4 * sd + 1e-12
    assert abs(np.mean(arrival3) - 3 * delay) < 4 * math.sqrt(3) * delay / math.sqrt(len(arrival3))


def test_horizon_cuts_the_cascade():
    g = SocialGraph([(k, k + 1) for k in range(30)])
    c = run_asic(g, [0], AsicParams(1.0, delay_scale=100.0, horizon=500.0), rng_seed=0, start=1000.0)
    assert 1 < len(c.nodes) < 31
    assert max(t for _, t, _ in c.activations) <= 1500.0


def test_same_seed_same_cascade():
    g = simulator.generate_graph(200, 3, 1)
    a = run_asic(g, [0], AsicParams(0.4), rng_seed=9)
    b = run_asic(g, [0], AsicParams(0.4), rng_seed=9)
    assert a.activations == b.activations


def test_edge_probability_forms():
    g = SocialGraph([(0, 1), (0, 2)])
    table = run_asic(g, [0], AsicParams({(0, 1): 1.0}), rng_seed=0)
    func = run_asic(g, [0], AsicParams(lambda v, u: float(u == 2)), rng_seed=0)
    assert table.nodes == [0, 1]
    assert func.nodes == [0, 2]
    with pytest.raises(ValueError):
        run_asic(g, [0], AsicParams({(0, 1): 1.5}), rng_seed=0)
    with pytest.raises(ValueError):
        run_asic(g, [7], AsicParams(0.5), rng_seed=0)
    with pytest.raises(ValueError):
        AsicParams(0.5, delay_scale=0)


@settings(max_examples=40, deadline=None)
@given(st.integers(5, 60), st.integers(1, 4), st.floats(0, 1), st.integers(0, 2**31), st.integers(1, 3))
def test_cascade_invariants(n, m, p, seed, n_seeds):
    g = simulator.generate_graph(n, m, seed % 1000, reciprocity=0.5)
    seeds = list(range(n_seeds))
    c = run_asic(g, seeds, AsicParams(p, delay_scale=10.0, horizon=200.0), rng_seed=seed, instrument=True)
    check_cascade(g, c, seeds, 0.0, 200.0)


def test_generated_graph_shape():
    g = simulator.generate_graph(300, 4, 0, reciprocity=0.0)
    assert g.node_count == 300
    # users 1..3 can only follow the users before them
    assert g.edge_count == 1 + 2 + 3 + 4 * 296
    assert all(v != u for v, u in g.edges())


def test_zero_weights_give_even_odds():
    d = simulator.synthesize_dataset(SimulationConfig(users=150, planted_weights={}, class_balance=None, rng_seed=0))
    assert set(d.edge_probability[0].values()) == {0.5}
    assert d.intercepts == [0.0]


def test_huge_weight_thresholds_the_feature():
    d = simulator.synthesize_dataset(
        SimulationConfig(users=400, planted_weights={"src_followers_count": 50.0}, class_balance=None, rng_seed=2)
    )
    edges = list(d.edge_probability[0])
    prob = np.array([d.edge_probability[0][e] for e in edges])
    x = np.array([d.profiles[v].followers_count for v, _ in edges], dtype=float)
    order = np.argsort(x, kind="stable")
    # monotone in the feature, and essentially a step at its mean
    assert (np.diff(prob[order]) >= 0).all()
    agree = np.mean((prob > 0.5) == (x > x.mean()))
    assert agree >= 0.99
    labels = np.array([d.labels[0][e] for e in edges])
    assert labels.sum() > 0
    assert np.mean(prob[labels == 1] > 0.5) >= 0.99


def test_calibrated_balance(small_world):
    labels = np.array(list(small_world.labels[0].values()))
    assert abs(labels.mean() - 0.40) <= 0.01


def test_log_labels_match_ground_truth(small_world, small_datasets):
    d = small_datasets[0]
    truth = small_world.labels[0]
    assert [truth[(int(v), int(u))] for v, u in zip(d.src, d.dst)] == d.y.tolist()
    assert abs(d.y.mean() - 0.40) <= 0.03


def test_emitted_cascades_are_valid(small_world):
    w = small_world
    for c in w.cascades[0]:
        seeds = [n for n, _, a in c.activations if a is None]
        assert len(seeds) == 1
        check_cascade(w.graph, c, seeds, c.activations[0][1], w.config.horizon_s)


def test_synthesis_is_deterministic():
    cfg = SimulationConfig(users=150, rng_seed=5)
    a, b = simulator.synthesize_dataset(cfg), simulator.synthesize_dataset(cfg)
    assert a.log.records == b.log.records
    assert a.labels == b.labels and a.intercepts == b.intercepts


def test_unknown_planted_feature():
    with pytest.raises(ValueError, match="unknown planted"):
        simulator.synthesize_dataset(SimulationConfig(users=50, planted_weights={"shoe_size": 1.0}))


def test_bin_weights_shape_background_posting():
    cfg = SimulationConfig(users=400, bin_weights=(0.0, 0.5, 0.0, 0.5), planted_weights={}, rng_seed=1)
    _, _, elog, _ = simulator.simulate_background(cfg)
    bins = np.bincount([features.time_bin(r.ts) for r in elog.records if r.is_original], minlength=4)
    assert bins[0] == bins[2] == 0 and bins[1] > 0 and bins[3] > 0
