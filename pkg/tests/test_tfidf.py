import math
import random

import numpy as np
import pytest

from musicdr.tfidf import (
    NoTokensError,
    SparseVector,
    TfIdfEncoder,
    dot,
    fit,
    model_from_json,
    model_to_json,
    tokenize,
    transform,
)


class TestTokenize:
    def test_punctuation_stripped(self):
        assert tokenize("Acoustic Guitar!") == ["acoustic", "guitar"]

    def test_hyphen_separates(self):
        assert tokenize("k-pop") == ["k", "pop"]

    def test_ampersand_separates(self):
        assert tokenize("r&b") == ["r", "b"]

    def test_empty(self):
        assert tokenize("") == []

    def test_underscore_separates(self):
        assert tokenize("lo_fi beats") == ["lo", "fi", "beats"]


class TestFit:
    def test_idf_single_doc(self):
        model = fit(["pop"])
        # ln(2/2) + 1 at df = N = 1
        assert model.idf[model.vocabulary["pop"]] == 1.0

    def test_idf_smoothed_formula(self):
        model = fit(["pop song", "sad song", "jazz song"])
        expected = math.log((1 + 3) / (1 + 1)) + 1.0  # stated formula, df=1
        assert model.idf[model.vocabulary["pop"]] == pytest.approx(expected, abs=0)
        assert model.idf[model.vocabulary["pop"]] == pytest.approx(1.6931471805599454)

    def test_vocabulary_is_all_tokens_seen(self):
        model = fit(["pop song", "sad"])
        assert set(model.vocabulary) == {"pop", "song", "sad"}
        assert sorted(model.vocabulary.values()) == [0, 1, 2]

    def test_no_tokens(self):
        with pytest.raises(NoTokensError):
            fit(["!!!", "..."])

    def test_empty_docs_rejected(self):
        with pytest.raises(ValueError):
            fit([])

    def test_fit_deterministic(self):
        docs = ["pop song", "sad ballad", "jazz night"]
        a, b = fit(docs), fit(docs)
        assert a.vocabulary == b.vocabulary
        assert np.array_equal(a.idf, b.idf)


class TestTransform:
    def test_single_token_unit_weight(self):
        model = fit(["pop", "sad"])
        vec = transform(model, "pop")
        assert vec.nnz == 1
        assert vec.values[0] == 1.0

    def test_self_dot_is_one(self):
        model = fit(["pop sad ballad", "jazz night club"])
        vec = transform(model, "sad ballad jazz")
        assert dot(vec, vec) == pytest.approx(1.0, abs=1e-12)

    def test_disjoint_supports_dot_zero(self):
        model = fit(["pop sad", "jazz night"])
        a = transform(model, "pop sad")
        b = transform(model, "jazz night")
        assert dot(a, b) == 0.0

    def test_oov_dropped_to_empty(self):
        model = fit(["pop"])
        vec = transform(model, "completely unknown words")
        assert vec.nnz == 0
        assert dot(vec, transform(model, "pop")) == 0.0

    def test_transform_bit_exact(self):
        model = fit(["pop sad ballad", "jazz night"])
        a = transform(model, "sad pop pop jazz")
        b = transform(model, "sad pop pop jazz")
        assert np.array_equal(a.indices, b.indices)
        assert np.array_equal(a.values, b.values)


class TestDot:
    def test_empty_is_zero(self):
        model = fit(["pop"])
        vec = transform(model, "pop")
        empty = transform(model, "???")
        assert dot(vec, empty) == 0.0
        assert dot(empty, vec) == 0.0

    def test_hand_built_vectors(self):
        a = SparseVector(
            indices=np.array([0, 2], dtype=np.int64),
            values=np.array([0.75, 0.25], dtype=np.float64),
        )
        b = SparseVector(
            indices=np.array([1, 2], dtype=np.int64),
            values=np.array([0.5, 0.5], dtype=np.float64),
        )
        assert dot(a, b) == 0.125  # only index 2 matches: 0.25 * 0.5

    def test_symmetry_and_cauchy_schwarz(self):
        rng = random.Random(5)
        vocab = ["pop", "sad", "jazz", "guitar", "piano", "night", "club", "vocal"]
        model = fit([" ".join(rng.sample(vocab, 4)) for _ in range(6)])
        for _ in range(100):
            a = transform(model, " ".join(rng.sample(vocab, rng.randint(1, 5))))
            b = transform(model, " ".join(rng.sample(vocab, rng.randint(1, 5))))
            assert dot(a, b) == dot(b, a)
            assert abs(dot(a, b)) <= 1.0 + 1e-12


def test_exact_match_ranking_property():
    # token-disjoint keys; each request is exactly one key: tf-idf must put it first
    keys = [f"alpha{i} beta{i}, gamma{i}" for i in range(12)]
    encoder = TfIdfEncoder()
    index = encoder.make_index(tuple(sorted(keys)))
    for key in keys:
        scores = index.score_request(key)
        best = int(np.argmax(scores))
        assert index.keys[best] == key


def test_model_json_round_trip():
    model = fit(["pop sad", "jazz night"])
    restored = model_from_json(model_to_json(model))
    assert restored.vocabulary == model.vocabulary
    assert np.array_equal(restored.idf, model.idf)
    assert restored.n_docs == model.n_docs
