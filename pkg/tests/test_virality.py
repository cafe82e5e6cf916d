import itertools

import numpy as np
import pytest

from midmod import blr, evaluation, virality
from midmod.features import EDGE_FEATURES
from midmod.virality import INFORMATIVE, TRENDING, InteractionSample, ViralityConfig

P = len(EDGE_FEATURES)


def sign_model():
    """Votes trending exactly when feature 0 is positive."""
    w = np.zeros(P)
    w[0] = 50.0
    return blr.BlrModel(w, 0.0, 10.0, np.zeros(P), np.ones(P), list(EDGE_FEATURES), True, 0)


def interaction(message_id, vote_trending, kind=TRENDING):
    x = np.zeros(P)
    x[0] = 1.0 if vote_trending else -1.0
    return InteractionSample(message_id, x, kind)


def majority_oracle(votes, tie):
    yes = sum(votes)
    no = len(votes) - yes
    return TRENDING if yes > no else INFORMATIVE if no > yes else tie


@pytest.mark.parametrize("tie", [TRENDING, INFORMATIVE])
def test_every_vote_pattern_up_to_seven(tie):
    model = sign_model()
    checked = 0
    for n in range(1, 8):
        for votes in itertools.product([0, 1], repeat=n):
            verdict = virality.predict_virality(model, [interaction(0, v) for v in votes], tie=tie)
            assert verdict.verdict == majority_oracle(votes, tie)
            assert verdict.votes_trending == sum(votes) and verdict.n_interactions == n
            checked += 1
    assert checked == 2**8 - 2


@pytest.mark.parametrize("votes,n,expected", [(3, 5, TRENDING), (0, 4, INFORMATIVE), (2, 4, TRENDING)])
def test_documented_examples(votes, n, expected):
    assert virality.vote(votes, n) == expected


def test_vote_argument_checks():
    for args in [(0, 0), (5, 4), (-1, 3)]:
        with pytest.raises(ValueError):
            virality.vote(*args)
    with pytest.raises(ValueError):
        virality.vote(1, 2, tie="maybe")


def test_verdict_needs_one_message():
    with pytest.raises(ValueError):
        virality.predict_virality(sign_model(), [])
    with pytest.raises(ValueError):
        virality.predict_virality(sign_model(), [interaction(0, 1), interaction(1, 1)])


def test_sample_validation():
    with pytest.raises(ValueError):
        InteractionSample(0, np.zeros(P), "viral")
    with pytest.raises(ValueError):
        InteractionSample(0, np.zeros(3), TRENDING)


def test_perfect_verdicts_score_one():
    samples = [interaction(m, m % 2 == 0, TRENDING if m % 2 == 0 else INFORMATIVE) for m in range(10) for _ in range(3)]
    f = virality.evaluate_virality(sign_model(), samples).folds[0]
    assert (f.precision, f.recall, f.f1, f.auc) == (1.0, 1.0, 1.0, 1.0)


def test_published_virality_f1():
    assert abs(evaluation.f1_score(0.65, 0.78) - 0.709) <= 0.0005


@pytest.fixture(scope="module")
def corpus():
    return virality.synthesize_virality_corpus(ViralityConfig(messages=400, rng_seed=1))


def test_corpus_shape(corpus):
    truth = virality.message_truth(corpus)
    assert len(truth) == 400 and list(truth.values()).count(TRENDING) == 200
    sizes = [len(g) for g in virality.group_by_message(corpus).values()]
    assert min(sizes) >= 3 and max(sizes) <= 9
    # reactors of one message are distinct
    for group in virality.group_by_message(corpus).values():
        assert len({s.reactor for s in group}) == len(group)


def test_planted_regime_is_learnable(corpus):
    train, test = virality.split_messages(corpus, 0.5, 0)
    model = virality.train_virality(train)
    X = np.array([s.x for s in test])
    y = np.array([s.label for s in test])
    assert evaluation.auc_roc(y, model.predict_proba(X)) > 0.7
    # 200 held-out messages
    assert virality.evaluate_virality(model, test).folds[0].f1 >= 0.65


def test_shuffled_labels_carry_no_signal(corpus):
    # interactions of one message are correlated, so a single shuffle is noisy;
    # the mean over several shuffles should sit at chance
    rng = np.random.default_rng(0)
    truth = virality.message_truth(corpus)
    ids = list(truth)
    aucs = []
    for r in range(5):
        shuffled = dict(zip(ids, rng.permutation([truth[m] for m in ids])))
        noise = [InteractionSample(s.message_id, s.x, shuffled[s.message_id], s.poster, s.reactor) for s in corpus]
        train, test = virality.split_messages(noise, 0.5, r)
        model = virality.train_virality(train)
        y = np.array([s.label for s in test])
        aucs.append(evaluation.auc_roc(y, model.predict_proba(np.array([s.x for s in test]))))
    assert abs(np.mean(aucs) - 0.5) < 0.05


def test_split_keeps_messages_whole(corpus):
    train, test = virality.split_messages(corpus, 0.5, 3)
    a, b = {s.message_id for s in train}, {s.message_id for s in test}
    assert not a & b and len(a | b) == 400
    assert list(virality.message_truth(train).values()).count(TRENDING) == 100


def test_interaction_csv_round_trip(tmp_path, corpus):
    virality.write_interactions(corpus[:40], tmp_path / "i.csv")
    back = virality.read_interactions(tmp_path / "i.csv")
    assert [(s.message_id, s.poster, s.reactor, s.event_type) for s in back] == \
        [(s.message_id, s.poster, s.reactor, s.event_type) for s in corpus[:40]]
    np.testing.assert_allclose([s.x for s in back], [s.x for s in corpus[:40]], rtol=1e-8)


def test_verdict_csv(tmp_path):
    samples = [interaction(0, 1), interaction(0, 0), interaction(1, 0, INFORMATIVE)]
    verdicts = virality.predict_messages(sign_model(), samples, tie=INFORMATIVE)
    virality.write_verdicts(verdicts, virality.message_truth(samples), tmp_path / "v.csv")
    assert (tmp_path / "v.csv").read_text().splitlines() == [
        "message_id,n,votes_trending,verdict,truth",
        "0,2,1,informative,trending",
        "1,1,0,informative,informative",
    ]


def test_mixed_truth_is_an_error():
    with pytest.raises(ValueError):
        virality.message_truth([interaction(0, 1, TRENDING), interaction(0, 1, INFORMATIVE)])
