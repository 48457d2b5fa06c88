import numpy as np
import pytest

from strokeauth import (
    DtwScorer,
    InvalidInputError,
    SwDtwScorer,
    SynthConfig,
    generate_synthetic,
    get_scorer,
    prepare_sample,
)
from strokeauth.rnn.model import ModelConfig, SiameseModel
from strokeauth.scorers import (
    SCORER_NAMES,
    enumerate_training_pairs,
    pad_to_match,
    pairs_to_examples,
)


@pytest.fixture(scope="module")
def corpus():
    cfg = SynthConfig(n_users=4, characters=("0", "1"), sessions=2,
                      samples_per_cell=2, inter_user_spread=0.2,
                      intra_user_noise=0.02, tempo_jitter=0.15,
                      points=32, seed=2)
    ds, _ = generate_synthetic(cfg)
    return ds


@pytest.fixture(scope="module")
def tiny_model():
    return SiameseModel(ModelConfig(branch_blocks=3, merge_blocks=4, top_blocks=5, seed=0))


class TestPadToMatch:
    def test_pads_shorter_with_zeros(self):
        a = np.ones((21, 9))
        b = np.ones((21, 5))
        pa, pb = pad_to_match(a, b)
        assert pa.shape == pb.shape == (21, 9)
        np.testing.assert_array_equal(pb[:, 5:], 0.0)
        np.testing.assert_array_equal(pb[:, :5], b)

    def test_equal_lengths_untouched(self):
        a, b = np.ones((3, 4)), np.zeros((3, 4))
        pa, pb = pad_to_match(a, b)
        assert pa is a and pb is b

    def test_channel_mismatch_rejected(self):
        with pytest.raises(InvalidInputError, match="channel mismatch"):
            pad_to_match(np.ones((3, 4)), np.ones((4, 4)))


class TestDistanceScorers:
    def test_self_score_is_zero(self, corpus):
        for scorer in (DtwScorer(), SwDtwScorer()):
            prep = scorer.prepare(corpus.samples[0])
            assert scorer.score(prep, prep) == 0.0

    def test_score_polarity(self, corpus):
        """Genuine comparisons must outscore impostor ones on average,
        for both distance scorers, without any model in play."""
        for scorer in (DtwScorer(), SwDtwScorer()):
            genuine, impostor = [], []
            for a, b, label in enumerate_training_pairs(corpus, seed=0)[:60]:
                s = scorer.score(scorer.prepare(a), scorer.prepare(b))
                (genuine if label else impostor).append(s)
            assert np.mean(genuine) > np.mean(impostor)

    def test_symmetry(self, corpus):
        scorer = DtwScorer()
        a = scorer.prepare(corpus.samples[0])
        b = scorer.prepare(corpus.samples[1])
        assert scorer.score(a, b) == pytest.approx(scorer.score(b, a), abs=1e-12)

    def test_no_training_examples(self, corpus):
        scorer = DtwScorer()
        prep = scorer.prepare(corpus.samples[0])
        with pytest.raises(InvalidInputError, match="does not train"):
            scorer.make_example(prep, prep, 1)

    def test_score_many_matches_loop(self, corpus):
        scorer = SwDtwScorer()
        preps = [scorer.prepare(s) for s in corpus.samples[:6]]
        pairs = [(preps[i], preps[j]) for i in range(6) for j in range(i + 1, 6)]
        batch = scorer.score_many(pairs)
        solo = [scorer.score(a, b) for a, b in pairs]
        np.testing.assert_allclose(batch, solo, atol=0)


class TestModelScorers:
    def test_factory_requires_model(self):
        for name in ("rnn", "ta_rnn"):
            with pytest.raises(InvalidInputError, match="needs a model"):
                get_scorer(name)

    def test_factory_unknown_name(self):
        with pytest.raises(InvalidInputError, match="unknown scorer"):
            get_scorer("cosine")

    def test_factory_covers_all_names(self, tiny_model):
        for name in SCORER_NAMES:
            scorer = get_scorer(name, model=tiny_model)
            assert scorer.name == name

    def test_rnn_examples_are_padded(self, corpus, tiny_model):
        scorer = get_scorer("rnn", model=tiny_model)
        a = scorer.prepare(corpus.samples[0])
        b = scorer.prepare(corpus.samples[2])
        ex = scorer.make_example(a, b, 1)
        assert ex.a.shape == ex.b.shape
        assert ex.a.shape[1] == max(a.shape[1], b.shape[1])

    def test_ta_rnn_examples_are_aligned(self, corpus, tiny_model):
        scorer = get_scorer("ta_rnn", model=tiny_model)
        a = scorer.prepare(corpus.samples[0])
        b = scorer.prepare(corpus.samples[2])
        ex = scorer.make_example(a, b, 0)
        assert ex.a.shape == ex.b.shape
        assert ex.a.shape[1] >= max(a.shape[1], b.shape[1])
        assert ex.label == 0
        # aligned self-comparison is the identity path
        same = scorer.make_example(a, a, 1)
        np.testing.assert_array_equal(same.a, same.b)

    def test_score_many_matches_loop(self, corpus, tiny_model):
        for name in ("rnn", "ta_rnn"):
            scorer = get_scorer(name, model=tiny_model)
            preps = [scorer.prepare(s) for s in corpus.samples[:5]]
            pairs = [(preps[i], preps[j]) for i in range(5) for j in range(i + 1, 5)]
            batch = scorer.score_many(pairs)
            solo = [scorer.score(a, b) for a, b in pairs]
            np.testing.assert_allclose(batch, solo, atol=1e-10)


class TestPrepare:
    def test_prepared_shape_and_normalization(self, corpus):
        prep = prepare_sample(corpus.samples[0])
        assert prep.shape[0] == 21
        np.testing.assert_allclose(prep.mean(axis=1), 0.0, atol=1e-9)
        stds = prep.std(axis=1)
        assert np.all((np.abs(stds - 1.0) < 1e-6) | (stds < 1e-6))

    def test_rate_changes_length(self, corpus):
        slow = prepare_sample(corpus.samples[0], rate_hz=50.0)
        fast = prepare_sample(corpus.samples[0], rate_hz=200.0)
        assert fast.shape[1] > slow.shape[1]


class TestTrainingPairs:
    def test_deterministic(self, corpus):
        a = enumerate_training_pairs(corpus, seed=3)
        b = enumerate_training_pairs(corpus, seed=3)
        assert [(x.key, y.key, l) for x, y, l in a] == [
            (x.key, y.key, l) for x, y, l in b
        ]

    def test_seed_sensitivity(self, corpus):
        a = enumerate_training_pairs(corpus, seed=3)
        b = enumerate_training_pairs(corpus, seed=4)
        assert [(x.key, y.key, l) for x, y, l in a] != [
            (x.key, y.key, l) for x, y, l in b
        ]

    def test_pair_semantics(self, corpus):
        for a, b, label in enumerate_training_pairs(corpus, seed=0):
            assert a.label == b.label
            if label == 1:
                assert a.user_id == b.user_id
                assert a.key != b.key
            else:
                assert a.user_id != b.user_id

    def test_genuine_cap(self, corpus):
        capped = enumerate_training_pairs(corpus, seed=0, max_genuine_per_cell=2)
        per_cell = {}
        for a, b, label in capped:
            if label == 1:
                per_cell.setdefault((a.user_id, a.label), 0)
                per_cell[(a.user_id, a.label)] += 1
        assert all(count <= 2 for count in per_cell.values())

    def test_impostor_ratio(self, corpus):
        triples = enumerate_training_pairs(corpus, seed=0, impostors_per_genuine=2.0)
        genuine = sum(1 for *_, label in triples if label == 1)
        impostor = sum(1 for *_, label in triples if label == 0)
        assert impostor == 2 * genuine

    def test_bad_ratio(self, corpus):
        with pytest.raises(InvalidInputError):
            enumerate_training_pairs(corpus, impostors_per_genuine=0.0)

    def test_pairs_to_examples_uses_cache(self, corpus, tiny_model):
        scorer = get_scorer("rnn", model=tiny_model)
        triples = enumerate_training_pairs(corpus, seed=0)[:10]
        cache = {}
        examples = pairs_to_examples(triples, scorer, cache)
        assert len(examples) == 10
        involved = {s.key for a, b, _ in triples for s in (a, b)}
        assert set(cache) == involved
