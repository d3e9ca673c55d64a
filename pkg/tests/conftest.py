"""
Fixtures compartidas de la suite de tests
"""

import sys
from pathlib import Path

import pytest

# Agregar path del proyecto
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from services.datastore.index import Datastore, DatastoreParams, SourceIndex
from services.model.ngram_model import train_ngram
from services.tokenization.tokenizer import Vocabulary, tokenize

# Código repetitivo: cada línea empieza por un identificador distinto
MODEL_LINES = ["alpha", "bravo", "charlie", "delta", "echo", "foxtrot"]
DATASTORE_LINES = ["xray", "yankee", "zulu", "whiskey", "victor", "uniform"]


def code_lines(names):
    return "".join(f"{name} = compute(a, b)\n" for name in names)


@pytest.fixture
def small_vocab():
    """Vocabulario pequeño con espacios, saltos de línea e identificadores"""
    return Vocabulary(["a", "b", "c", " ", "\n", "    ", "x", "y"])


@pytest.fixture
def code_corpus():
    """(vocabulario, texto del modelo, texto del datastore) con identificadores disjuntos al inicio de línea"""
    vocab = Vocabulary()
    model_text = code_lines(MODEL_LINES) * 3
    datastore_text = code_lines(DATASTORE_LINES) * 3
    tokenize(model_text, vocab)
    tokenize(datastore_text, vocab)
    return vocab, model_text, datastore_text


@pytest.fixture
def code_model(code_corpus):
    vocab, model_text, _ = code_corpus
    return train_ngram([tokenize(model_text, vocab)], order=3, vocab=vocab)


@pytest.fixture
def code_datastore(code_corpus):
    vocab, _, datastore_text = code_corpus
    params = DatastoreParams()
    common = SourceIndex.from_token_sequences([tokenize(datastore_text, vocab).tokens], params, "common")
    return Datastore(common=common, vocab=vocab, params=params)
