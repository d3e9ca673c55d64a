"""
Tests del datastore: construcción, recuperación por sufijo y serialización
"""

from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from services.datastore.builder import (
    ExcludedSpan,
    build_common,
    build_repo,
    cut_spans,
    read_exclusion_file,
)
from services.datastore.index import (
    SENTINEL,
    Datastore,
    DatastoreParams,
    SourceIndex,
    par_retrieve,
    suffix_retrieve,
)
from services.datastore.storage import load_datastore, save_datastore
from services.errors import DatastoreFormatError, DatastoreIOError, EmptyCorpusError
from services.tokenization.tokenizer import Vocabulary


def oracle_retrieve(documents, context, n_max, cont_len, cap):
    """Escaneo exhaustivo del sufijo más largo, en orden de corpus"""
    upper = min(n_max, len(context))
    for n in range(upper, 0, -1):
        suffix = tuple(context[-n:])
        continuations = []
        for doc in documents:
            for p in range(n, len(doc)):
                if tuple(doc[p - n:p]) == suffix:
                    continuations.append(tuple(doc[p:p + cont_len]))
        if continuations:
            counts = {}
            for cont in continuations[:cap]:
                counts[cont] = counts.get(cont, 0) + 1
            return n, list(counts.items())
    return 0, []


def test_build_common_indexes_grams():
    vocab = Vocabulary()
    index = build_common(["a b c"], vocab)
    b, c, space = vocab.lookup("b"), vocab.lookup("c"), vocab.lookup(" ")
    positions = index.grams[1][(b,)]
    assert len(positions) == 1
    assert index.continuation(positions[0], 10) == (space, c)


def test_build_common_rejects_empty_corpus():
    with pytest.raises(EmptyCorpusError):
        build_common([""], Vocabulary())
    with pytest.raises(EmptyCorpusError):
        build_common([], Vocabulary())


def test_position_lists_are_capped():
    vocab = Vocabulary()
    index = build_common([" ".join(["x"] * 300)], vocab, DatastoreParams(cap_positions=256))
    assert len(index.grams[1][(vocab.lookup("x"),)]) == 256


def test_indexed_positions_match_their_key():
    vocab = Vocabulary()
    index = build_common(["def f(x):\n    return x\n", "x = f(1)\n"], vocab, DatastoreParams(n_max=4))
    corpus = index.corpus.tolist()
    for n in range(1, 5):
        for key, positions in index.grams[n].items():
            for p in positions:
                assert tuple(corpus[p - n:p]) == key
                assert SENTINEL not in key
                assert corpus[p] != SENTINEL


def test_build_repo_excludes_span(tmp_path):
    source = b"def f():\n    pass"
    (tmp_path / "mod.py").write_bytes(source)
    vocab = Vocabulary()
    start = source.index(b"    pass")
    index = build_repo(tmp_path, [ExcludedSpan("mod.py", start, len(source))], vocab)
    assert "pass" not in vocab
    assert index.documents() == [tuple(vocab.lookup(s) for s in ["def", " ", "f", "(", ")", ":", "\n"])]


def test_build_repo_warns_on_split_multibyte_character(tmp_path, caplog):
    source = "s = 'é'\nt = 1\n".encode("utf-8")
    (tmp_path / "acc.py").write_bytes(source)
    start = source.index("é".encode("utf-8")) + 1
    vocab = Vocabulary()
    with caplog.at_level("WARNING", logger="services.datastore.builder"):
        build_repo(tmp_path, [ExcludedSpan("acc.py", start, start + 1)], vocab)
    assert any("acc.py" in record.getMessage() for record in caplog.records)
    assert "�" in vocab


def test_build_repo_valid_utf8_does_not_warn(tmp_path, caplog):
    (tmp_path / "ok.py").write_text("s = 'é'\n", encoding="utf-8")
    with caplog.at_level("WARNING", logger="services.datastore.builder"):
        build_repo(tmp_path, [], Vocabulary())
    assert not caplog.records


def test_build_repo_fully_excluded_is_empty(tmp_path):
    (tmp_path / "only.py").write_text("x = 1\n", encoding="utf-8")
    with pytest.raises(EmptyCorpusError):
        build_repo(tmp_path, [ExcludedSpan("only.py", 0, 6)], Vocabulary())


def test_build_repo_missing_directory(tmp_path):
    with pytest.raises(DatastoreIOError):
        build_repo(tmp_path / "nope", [], Vocabulary())


def test_grams_never_cross_file_boundary(tmp_path):
    (tmp_path / "a.py").write_text("x y", encoding="utf-8")
    (tmp_path / "b.py").write_text("z w", encoding="utf-8")
    vocab = Vocabulary()
    index = build_repo(tmp_path, [], vocab)
    y, z = vocab.lookup("y"), vocab.lookup("z")
    for n in range(1, index.n_max + 1):
        for key in index.grams[n]:
            assert not (y in key and z in key)
    # "y" cierra su archivo: no tiene continuación y no se indexa
    assert (y,) not in index.grams[1]


def test_cut_spans_merges_overlaps():
    assert cut_spans(b"0123456789", [(2, 5), (4, 7)]) == [b"01", b"789"]
    assert cut_spans(b"abc", [(0, 10)]) == []
    assert cut_spans(b"abc", []) == [b"abc"]


def test_read_exclusion_file(tmp_path):
    path = tmp_path / "spans.tsv"
    path.write_text("# comentario\nsrc/a.py\t0\t10\n\nb.py\t5\t6\n", encoding="utf-8")
    assert read_exclusion_file(path) == [ExcludedSpan("src/a.py", 0, 10), ExcludedSpan("b.py", 5, 6)]


def test_read_exclusion_file_malformed(tmp_path):
    path = tmp_path / "spans.tsv"
    path.write_text("a.py\t10\n", encoding="utf-8")
    with pytest.raises(DatastoreIOError):
        read_exclusion_file(path)


def test_suffix_retrieve_longest_match():
    params = DatastoreParams(n_max=2)
    index = SourceIndex.from_token_sequences([[0, 1, 2, 0, 1, 3]], params, "common")
    result = suffix_retrieve(index, [5, 0, 1], n_max=2)
    assert result.match_length == 2
    assert [(c.tokens, c.count_repo, c.count_common) for c in result.continuations] == [
        ((2, 0, 1, 3), 0, 1),
        ((3,), 0, 1),
    ]


def test_suffix_retrieve_unseen_token_is_empty():
    index = SourceIndex.from_token_sequences([[0, 1, 2]], DatastoreParams(), "common")
    result = suffix_retrieve(index, [0, 9], n_max=16)
    assert not result
    assert result.match_length == 0


def test_suffix_retrieve_counts_duplicates():
    index = SourceIndex.from_token_sequences([[0, 1, 0, 1, 0, 1]], DatastoreParams(cont_len=1), "repo")
    result = suffix_retrieve(index, [0], n_max=4)
    assert [(c.tokens, c.count_repo, c.count_common) for c in result.continuations] == [((1,), 3, 0)]


def test_suffix_retrieve_requires_positive_n_max():
    index = SourceIndex.from_token_sequences([[0, 1]], DatastoreParams(), "common")
    with pytest.raises(ValueError):
        suffix_retrieve(index, [0], n_max=0)


def test_suffix_retrieve_matches_brute_force_oracle():
    rng = np.random.default_rng(1234)
    queries = 0
    for _ in range(20):
        n_max = int(rng.integers(1, 6))
        cont_len = int(rng.integers(1, 6))
        cap = int(rng.integers(1, 12))
        alphabet = int(rng.integers(2, 8))
        documents = [
            rng.integers(0, alphabet, size=int(rng.integers(0, 200))).tolist()
            for _ in range(int(rng.integers(1, 5)))
        ]
        if not any(documents):
            documents.append([0, 1])
        params = DatastoreParams(n_max=n_max, cont_len=cont_len, cap_positions=cap)
        index = SourceIndex.from_token_sequences(documents, params, "common")
        flat = [t for doc in documents for t in doc]
        for _ in range(50):
            if rng.random() < 0.5 and len(flat) > 1:
                end = int(rng.integers(1, len(flat)))
                context = flat[max(0, end - int(rng.integers(1, 10))):end]
            else:
                context = rng.integers(0, alphabet + 1, size=int(rng.integers(1, 10))).tolist()
            query_n = int(rng.integers(1, 8))
            expected_n, expected = oracle_retrieve(documents, context, min(query_n, n_max), cont_len, cap)
            result = suffix_retrieve(index, context, n_max=query_n)
            assert result.match_length == expected_n
            assert [(c.tokens, c.count_common) for c in result.continuations] == expected
            queries += 1
    assert queries == 1000


def test_par_retrieve_equals_sequential():
    params = DatastoreParams(n_max=3)
    common = SourceIndex.from_token_sequences([[0, 1, 2, 3, 0, 1, 4]], params, "common")
    repo = SourceIndex.from_token_sequences([[5, 0, 1, 2, 6]], params, "repo")
    ds = Datastore(common=common, vocab=Vocabulary([str(i) for i in range(7)]), params=params, repo=repo)
    sequential = par_retrieve(ds, [0, 1])
    with ThreadPoolExecutor(max_workers=2) as pool:
        parallel = par_retrieve(ds, [0, 1], executor=pool)
    assert parallel == sequential
    r_repo, r_common = sequential
    assert r_repo.continuations[0].count_repo == 1
    assert {c.tokens for c in r_common.continuations} == {(2, 3, 0, 1, 4), (4,)}


def test_par_retrieve_without_repo():
    params = DatastoreParams()
    common = SourceIndex.from_token_sequences([[0, 1, 2]], params, "common")
    ds = Datastore(common=common, vocab=Vocabulary(["a", "b", "c"]), params=params)
    r_repo, r_common = par_retrieve(ds, [0])
    assert not r_repo
    assert r_common.continuations[0].tokens == (1, 2)


def _sample_datastore():
    vocab = Vocabulary()
    params = DatastoreParams(n_max=4, cont_len=5, cap_positions=8)
    common = build_common(["def f(x):\n    return x\n", "y = f(2)\n"], vocab, params)
    repo = SourceIndex.from_token_sequences([[0, 1, 2, 0, 1]], params, "repo")
    return Datastore(common=common, vocab=vocab.freeze(), params=params, repo=repo)


def test_storage_roundtrip(tmp_path):
    ds = _sample_datastore()
    path = tmp_path / "ds.fcds"
    save_datastore(ds, path)
    loaded = load_datastore(path)
    assert loaded.params == ds.params
    assert loaded.vocab.to_text() == ds.vocab.to_text()
    assert loaded.common.grams == ds.common.grams
    assert loaded.repo.grams == ds.repo.grams
    assert np.array_equal(loaded.common.corpus, ds.common.corpus)
    assert suffix_retrieve(loaded.common, [0], 4) == suffix_retrieve(ds.common, [0], 4)


def test_storage_is_byte_identical(tmp_path):
    ds = _sample_datastore()
    save_datastore(ds, tmp_path / "a.fcds")
    save_datastore(load_datastore(tmp_path / "a.fcds"), tmp_path / "b.fcds")
    assert (tmp_path / "a.fcds").read_bytes() == (tmp_path / "b.fcds").read_bytes()


def test_storage_version_mismatch_rebuilds(tmp_path):
    ds = _sample_datastore()
    path = tmp_path / "ds.fcds"
    save_datastore(ds, path)
    data = bytearray(path.read_bytes())
    data[4:8] = (99).to_bytes(4, "little")
    path.write_bytes(bytes(data))
    loaded = load_datastore(path)
    assert loaded.common.grams == ds.common.grams


def test_storage_rejects_bad_magic(tmp_path):
    path = tmp_path / "bad.fcds"
    path.write_bytes(b"NOPE" + bytes(40))
    with pytest.raises(DatastoreFormatError):
        load_datastore(path)


def test_storage_rejects_truncated_file(tmp_path):
    ds = _sample_datastore()
    path = tmp_path / "ds.fcds"
    save_datastore(ds, path)
    path.write_bytes(path.read_bytes()[:-3])
    with pytest.raises(DatastoreFormatError):
        load_datastore(path)


def test_load_missing_file(tmp_path):
    with pytest.raises(DatastoreIOError):
        load_datastore(tmp_path / "missing.fcds")
