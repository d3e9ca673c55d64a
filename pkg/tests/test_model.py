"""
Tests del modelo n-grama de referencia y de la verificación greedy
"""

import numpy as np
import pytest

from services.draft_tree.trie import DraftTree
from services.engine.decoder import autoregressive_generate
from services.errors import EmptyCorpusError, MismatchedPredictionsError, ModelFormatError
from services.model import (
    Predictions,
    ReferenceNgramModel,
    TargetModel,
    predict_tree,
    train_ngram,
    verify,
)

A, B, C, D = 0, 1, 2, 3


class ShortModel(TargetModel):
    """Devuelve siempre una predicción de menos"""

    def forward(self, context_ids, tree):
        return Predictions(0, (0,) * max(len(tree) - 1, 0))


def test_bigram_argmax():
    model = train_ngram([[A, B, A, B]], order=2)
    assert model.next_token([A]) == B
    assert model.next_token([B]) == A


def test_order_one_is_global_argmax():
    model = train_ngram([[A, B, B, C]], order=1)
    for context in ([A], [C, A], [D, D, D]):
        assert model.next_token(context) == B


def test_unseen_context_uses_fallback():
    model = train_ngram([[A, B, A, B]], order=2)
    # unigrama empatado: gana el id más pequeño
    assert model.fallback == A
    assert model.next_token([D]) == A


def test_short_context_uses_fallback():
    model = train_ngram([[C, B, C, A, C]], order=3)
    assert model.next_token([A]) == C


def test_ties_break_on_smallest_id():
    model = train_ngram([[A, C, A, B]], order=2)
    assert model.next_token([A]) == B


def test_end_token_is_appended():
    model = train_ngram([[A, B], [A, B]], order=2, end_token=9)
    assert model.end_token == 9
    assert model.next_token([A, B]) == 9


def test_train_rejects_empty_corpus():
    with pytest.raises(EmptyCorpusError):
        train_ngram([[]], order=2)
    with pytest.raises(ValueError):
        train_ngram([[A]], order=0)


@pytest.mark.parametrize("order", [1, 2, 3])
def test_save_load_roundtrip(tmp_path, small_vocab, order):
    model = train_ngram([[A, B, C, A, B, D, A, B, C]], order=order, end_token=D, vocab=small_vocab)
    path = tmp_path / "model.fcng"
    model.save(path)
    loaded = ReferenceNgramModel.load(path)
    assert loaded.order == order
    assert loaded.counts == model.counts
    assert loaded.fallback == model.fallback
    assert loaded.end_token == D
    assert loaded.vocab.to_text() == small_vocab.to_text()
    for context in ([A], [A, B], [C, A], [D]):
        assert loaded.next_token(context) == model.next_token(context)


def test_save_without_vocab_or_end_token(tmp_path):
    model = train_ngram([[A, B, A]], order=2)
    path = tmp_path / "model.fcng"
    model.save(path)
    loaded = ReferenceNgramModel.load(path)
    assert loaded.vocab is None
    assert loaded.end_token is None


def test_load_rejects_bad_magic(tmp_path):
    path = tmp_path / "bad.fcng"
    path.write_bytes(b"XXXX" + bytes(40))
    with pytest.raises(ModelFormatError):
        ReferenceNgramModel.load(path)


def test_load_rejects_truncated_file(tmp_path):
    model = train_ngram([[A, B, C, A, B, D]], order=3)
    path = tmp_path / "model.fcng"
    model.save(path)
    path.write_bytes(path.read_bytes()[:-6])
    with pytest.raises(ModelFormatError):
        ReferenceNgramModel.load(path)
    path.write_bytes(b"FCNG")
    with pytest.raises(ModelFormatError):
        ReferenceNgramModel.load(path)


def test_load_missing_file(tmp_path):
    with pytest.raises(ModelFormatError):
        ReferenceNgramModel.load(tmp_path / "missing.fcng")


def test_tree_predictions_match_per_path_calls():
    rng = np.random.default_rng(21)
    corpus = [rng.integers(0, 6, size=400).tolist()]
    model = train_ngram(corpus, order=3)
    for _ in range(200):
        size = int(rng.integers(0, 65))
        parents = [-1 if i == 0 else int(rng.integers(-1, i)) for i in range(size)]
        tree = DraftTree.from_parents(rng.integers(0, 6, size=size).tolist(), parents)
        context = rng.integers(0, 6, size=int(rng.integers(1, 6))).tolist()
        preds = predict_tree(model, context, tree)
        assert preds.at_root == model.next_token(context)
        for i in range(size):
            assert preds.at_node[i] == model.next_token(context + list(tree.path(i)))


def test_sibling_predictions_are_isolated():
    model = train_ngram([[A, B, C, A, C, D]], order=3)
    tree = DraftTree.from_parents([A, B, C], [-1, 0, 0])
    preds = model.predict_tree([D], tree)
    assert preds.at_node[1] == model.next_token([D, A, B])
    assert preds.at_node[2] == model.next_token([D, A, C])


def test_empty_tree_prediction():
    model = train_ngram([[A, B]], order=2)
    preds = model.predict_tree([A], DraftTree.empty())
    assert preds == Predictions(B, ())


def test_forward_count():
    model = train_ngram([[A, B]], order=2)
    for _ in range(3):
        model.predict_tree([A], DraftTree.empty())
    assert model.forward_count == 3


def test_prediction_count_is_checked():
    tree = DraftTree.from_parents([A, B], [-1, 0])
    model = ShortModel()
    with pytest.raises(MismatchedPredictionsError):
        model.predict_tree([A], tree)
    assert model.forward_count == 0


def test_verify_accepts_first_node_only():
    tree = DraftTree.from_parents([A, B], [-1, 0])
    outcome = verify(tree, Predictions(A, (C, D)))
    assert outcome.accepted == (A,)
    assert outcome.bonus == C
    assert outcome.accepted_node_path == (0,)


def test_verify_rejects_whole_draft():
    tree = DraftTree.from_parents([A, B], [-1, 0])
    outcome = verify(tree, Predictions(D, (B, C)))
    assert outcome.accepted == ()
    assert outcome.emitted == (D,)


def test_verify_full_chain():
    tree = DraftTree.from_parents([A, B], [-1, 0])
    outcome = verify(tree, Predictions(A, (B, C)))
    assert outcome.accepted == (A, B)
    assert outcome.emitted == (A, B, C)


def test_verify_follows_matching_branch():
    tree = DraftTree.from_parents([A, B, C], [-1, 0, 0])
    outcome = verify(tree, Predictions(A, (C, D, D)))
    assert outcome.accepted == (A, C)
    assert outcome.accepted_node_path == (0, 2)
    assert outcome.bonus == D


def test_verify_rejects_mismatched_predictions():
    tree = DraftTree.from_parents([A, B], [-1, 0])
    with pytest.raises(MismatchedPredictionsError):
        verify(tree, Predictions(A, (B,)))


def test_autoregressive_alternates(small_vocab):
    model = train_ngram([[A, B, A, B]], order=2, vocab=small_vocab)
    output, metrics = autoregressive_generate(model, [A], max_new_tokens=5)
    assert output.tokens == (B, A, B, A, B)
    assert metrics.F == metrics.L == 5


def test_autoregressive_zero_tokens(small_vocab):
    model = train_ngram([[A, B]], order=2, vocab=small_vocab)
    output, metrics = autoregressive_generate(model, [A], max_new_tokens=0)
    assert len(output) == 0
    assert metrics.F == 0
