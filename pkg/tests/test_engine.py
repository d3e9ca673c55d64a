"""
Tests del motor de decodificación especulativa
"""

import json

import numpy as np
import pytest

from tests.conftest import MODEL_LINES, code_lines
from services.datastore.index import Datastore, DatastoreParams, SourceIndex
from services.engine import (
    EngineConfig,
    SpeculativeEngine,
    ablation_config,
    autoregressive_generate,
    generate,
    sample_seed,
)
from services.errors import UnknownTokenError
from services.metrics.heatmap import position_success_rates
from services.model.ngram_model import train_ngram
from services.tokenization.tokenizer import Vocabulary, tokenize


def random_datastore(rng, vocab_size, with_repo):
    params = DatastoreParams(
        n_max=int(rng.integers(1, 8)),
        cont_len=int(rng.integers(1, 12)),
        cap_positions=int(rng.integers(1, 64)),
    )
    docs = [rng.integers(0, vocab_size, size=int(rng.integers(1, 120))).tolist() for _ in range(3)]
    common = SourceIndex.from_token_sequences(docs, params, "common")
    repo = None
    if with_repo:
        repo = SourceIndex.from_token_sequences(
            [rng.integers(0, vocab_size, size=int(rng.integers(1, 80))).tolist()], params, "repo"
        )
    return Datastore(common=common, vocab=Vocabulary([str(i) for i in range(vocab_size)]), params=params, repo=repo)


def random_config(rng):
    return EngineConfig(
        l=int(rng.choice([0, 1, 3, 50])),
        p=float(rng.random()),
        alpha=float(rng.random() * 2),
        beta=float(rng.random() * 2),
        k=int(rng.integers(1, 12)),
        draft_budget=int(rng.integers(1, 70)),
        n_max=int(rng.integers(1, 17)),
        cont_len=int(rng.integers(1, 12)),
        chunk=int(rng.integers(1, 25)),
        max_new_tokens=int(rng.integers(0, 80)),
        rng_seed=int(rng.integers(0, 2**31)),
        max_cache_sequences=int(rng.integers(1, 40)),
        flush_on_finish=bool(rng.random() < 0.5),
        use_cache=bool(rng.random() < 0.7),
        use_strategy=bool(rng.random() < 0.7),
        use_repo_datastore=bool(rng.random() < 0.7),
        parallel_retrieval=bool(rng.random() < 0.5),
    )


def test_output_matches_autoregressive_for_random_triples(small_vocab):
    rng = np.random.default_rng(2024)
    size = len(small_vocab)
    for trial in range(100):
        corpus = [rng.integers(0, size, size=int(rng.integers(20, 300))).tolist()]
        end_token = int(rng.integers(0, size)) if rng.random() < 0.3 else None
        model = train_ngram(corpus, order=int(rng.integers(1, 5)), end_token=end_token, vocab=small_vocab)
        datastore = random_datastore(rng, size, with_repo=rng.random() < 0.5)
        cfg = random_config(rng)
        prompt = rng.integers(0, size, size=int(rng.integers(1, 12))).tolist()

        spec_output, spec_metrics = generate(model, datastore, cfg, prompt)
        ar_output, ar_metrics = autoregressive_generate(model, prompt, cfg.max_new_tokens)
        assert spec_output.tokens == ar_output.tokens, f"divergencia en el caso {trial}"
        assert spec_metrics.L == len(spec_output)
        assert spec_metrics.F <= ar_metrics.F


def test_empty_datastore_degenerates_to_autoregressive(code_model, code_corpus):
    vocab = code_corpus[0]
    prompt = tokenize(code_lines(["alpha"]), vocab)
    cfg = EngineConfig(max_new_tokens=60)
    output, metrics = generate(code_model, Datastore.empty(vocab), cfg, prompt)
    ar_output, _ = autoregressive_generate(code_model, prompt, 60)
    assert output.tokens == ar_output.tokens
    assert metrics.F == metrics.L == 60
    assert metrics.drafted_tokens == 0


def test_self_copy_reaches_high_acceptance(code_model, code_corpus):
    vocab = code_corpus[0]
    prompt = tokenize(code_lines(["alpha"]), vocab)
    ar_output, _ = autoregressive_generate(code_model, prompt, 200)
    params = DatastoreParams()
    common = SourceIndex.from_token_sequences([prompt.tokens + ar_output.tokens], params, "common")
    datastore = Datastore(common=common, vocab=vocab, params=params)

    output, metrics = generate(code_model, datastore, EngineConfig(max_new_tokens=200), prompt)
    assert output.tokens == ar_output.tokens
    assert metrics.L == 200
    assert metrics.acceptance_length >= 1.5


def test_skip_positions_are_harder_to_retrieve(code_model, code_datastore, code_corpus):
    vocab = code_corpus[0]
    prompt = tokenize(code_lines(MODEL_LINES[:2]), vocab)
    cfg = EngineConfig(p=1.0, use_cache=False, max_new_tokens=120)
    _, metrics = generate(code_model, code_datastore, cfg, prompt)
    at_skip, elsewhere = position_success_rates(metrics.token_from_draft, metrics.token_at_skip)
    assert at_skip == 0.0
    assert elsewhere > at_skip


def _cache_only_datastore(code_corpus):
    """Datastore sin ninguna coincidencia útil: solo la caché puede proponer borradores"""
    vocab = code_corpus[0]
    params = DatastoreParams()
    noise = tokenize("QQQ;ZZZ;" * 8, vocab).tokens
    return Datastore(common=SourceIndex.from_token_sequences([noise], params, "common"), vocab=vocab, params=params)


def test_cache_improves_acceptance_on_repetitive_output(code_model, code_corpus):
    vocab = code_corpus[0]
    datastore = _cache_only_datastore(code_corpus)
    prompt = tokenize(code_lines(["alpha"]), vocab)
    base = EngineConfig(l=2, max_new_tokens=200)

    _, without_cache = generate(code_model, datastore, base.model_copy(update={"use_cache": False}), prompt)
    _, with_cache = generate(code_model, datastore, base, prompt)
    assert without_cache.acceptance_length == 1.0
    assert with_cache.acceptance_length > 1.0
    assert with_cache.cache_hits > 0


def test_full_configuration_beats_baseline(code_model, code_corpus):
    vocab = code_corpus[0]
    datastore = _cache_only_datastore(code_corpus)
    prompt = tokenize(code_lines(["alpha"]), vocab)
    base = EngineConfig(l=2, max_new_tokens=200)

    _, baseline = generate(code_model, datastore, ablation_config(base, False, False, False), prompt)
    _, full = generate(code_model, datastore, ablation_config(base, True, True, True), prompt)
    assert full.acceptance_length >= baseline.acceptance_length


def test_generation_is_deterministic(code_model, code_datastore, code_corpus):
    vocab = code_corpus[0]
    prompt = tokenize(code_lines(["alpha"]), vocab)
    cfg = EngineConfig(rng_seed=7, max_new_tokens=100)
    first_output, first = generate(code_model, code_datastore, cfg, prompt)
    second_output, second = generate(code_model, code_datastore, cfg, prompt)
    assert first_output == second_output
    assert [t.to_dict() for t in first.traces] == [t.to_dict() for t in second.traces]


def test_zero_probability_skips_every_skip_position(code_model, code_datastore, code_corpus):
    vocab = code_corpus[0]
    prompt = tokenize(code_lines(["alpha"]), vocab)
    cfg = EngineConfig(p=0.0, use_cache=False, max_new_tokens=100)
    _, metrics = generate(code_model, code_datastore, cfg, prompt)
    skip_steps = [t for t in metrics.traces if t.skip_position]
    assert metrics.traces[0].skip_position
    assert all(t.retrieval_source == "skipped-probability" for t in skip_steps)
    assert metrics.skipped_probability == len(skip_steps)


def test_full_probability_retrieves_at_skip_position(code_model, code_datastore, code_corpus):
    vocab = code_corpus[0]
    prompt = tokenize(code_lines(["alpha"]), vocab)
    cfg = EngineConfig(p=1.0, use_cache=False, max_new_tokens=10)
    _, metrics = generate(code_model, code_datastore, cfg, prompt)
    assert metrics.traces[0].retrieval_source == "datastore"
    assert metrics.skipped_probability == 0


def test_strategy_off_never_skips(code_model, code_datastore, code_corpus):
    vocab = code_corpus[0]
    prompt = tokenize(code_lines(["alpha"]), vocab)
    cfg = EngineConfig(p=0.0, use_strategy=False, use_cache=False, max_new_tokens=80)
    _, metrics = generate(code_model, code_datastore, cfg, prompt)
    assert metrics.skipped_probability == 0
    assert metrics.skipped_missing == 0
    assert metrics.datastore_searches == metrics.F


def test_missing_table_skips_repeated_misses(code_model, code_datastore, code_corpus):
    vocab = code_corpus[0]
    prompt = tokenize(code_lines(["alpha"]), vocab)
    cfg = EngineConfig(p=1.0, use_cache=False, max_new_tokens=150)
    with SpeculativeEngine(code_model, code_datastore, cfg) as engine:
        _, metrics = engine.generate(prompt)
        assert len(engine.missing) > 0
    assert metrics.skipped_missing > 0


def test_zero_new_tokens(code_model, code_datastore, code_corpus):
    prompt = tokenize(code_lines(["alpha"]), code_corpus[0])
    output, metrics = generate(code_model, code_datastore, EngineConfig(max_new_tokens=0), prompt)
    assert len(output) == 0
    assert metrics.F == 0
    assert metrics.traces == []


def test_end_token_stops_generation(small_vocab):
    a, b, c, end = 0, 1, 2, 3
    model = train_ngram([[a, b, c]], order=2, end_token=end, vocab=small_vocab)
    params = DatastoreParams()
    common = SourceIndex.from_token_sequences([[a, b, c, end, a, b, c]], params, "common")
    datastore = Datastore(common=common, vocab=small_vocab, params=params)

    output, metrics = generate(model, datastore, EngineConfig(max_new_tokens=20), [a])
    assert output.tokens == (b, c, end)
    assert metrics.L == 3
    assert autoregressive_generate(model, [a], 20)[0].tokens == (b, c, end)


def test_max_new_tokens_truncates_accepted_draft(code_model, code_corpus):
    vocab = code_corpus[0]
    prompt = tokenize(code_lines(["alpha"]), vocab)
    ar_output, _ = autoregressive_generate(code_model, prompt, 200)
    params = DatastoreParams()
    common = SourceIndex.from_token_sequences([prompt.tokens + ar_output.tokens], params, "common")
    datastore = Datastore(common=common, vocab=vocab, params=params)

    output, metrics = generate(code_model, datastore, EngineConfig(max_new_tokens=7), prompt)
    assert output.tokens == ar_output.tokens[:7]
    assert metrics.L == 7


def test_step_accounting(code_model, code_datastore, code_corpus):
    vocab = code_corpus[0]
    prompt = tokenize(code_lines(["alpha"]), vocab)
    with SpeculativeEngine(code_model, code_datastore, EngineConfig(max_new_tokens=150), record_drafts=True) as engine:
        _, metrics = engine.generate(prompt)
        assert len(engine.drafts) == metrics.F
    assert len(metrics.traces) == metrics.F
    assert sum(t.emitted for t in metrics.traces) == metrics.L
    assert len(metrics.token_from_draft) == len(metrics.token_at_skip) == metrics.L
    for trace in metrics.traces:
        assert trace.accepted_len <= trace.draft_depth
        assert 1 <= trace.emitted <= trace.accepted_len + 1
    assert metrics.acceptance_length >= 1.0
    assert sum(metrics.source_counts().values()) == metrics.F


def test_session_state_resets_between_generations(code_model, code_datastore, code_corpus):
    vocab = code_corpus[0]
    prompt = tokenize(code_lines(["alpha"]), vocab)
    with SpeculativeEngine(code_model, code_datastore, EngineConfig(max_new_tokens=100)) as engine:
        engine.generate(prompt)
        first = len(engine.cache)
        engine.generate(prompt)
        assert len(engine.cache) == first


def test_session_state_persists_when_enabled(code_model, code_datastore, code_corpus):
    vocab = code_corpus[0]
    prompt = tokenize(code_lines(["alpha"]), vocab)
    cfg = EngineConfig(max_new_tokens=100, persist_session_state=True)
    with SpeculativeEngine(code_model, code_datastore, cfg) as engine:
        engine.generate(prompt)
        first = len(engine.cache)
        engine.generate(prompt)
        assert len(engine.cache) > first


def test_parallel_and_sequential_retrieval_agree(code_model, code_corpus):
    vocab, _, datastore_text = code_corpus
    params = DatastoreParams()
    tokens = tokenize(datastore_text, vocab).tokens
    datastore = Datastore(
        common=SourceIndex.from_token_sequences([tokens], params, "common"),
        vocab=vocab,
        params=params,
        repo=SourceIndex.from_token_sequences([tokenize(code_lines(MODEL_LINES[:3]), vocab).tokens], params, "repo"),
    )
    prompt = tokenize(code_lines(["alpha"]), vocab)
    runs = []
    for parallel in (True, False):
        cfg = EngineConfig(max_new_tokens=80, parallel_retrieval=parallel)
        output, metrics = generate(code_model, datastore, cfg, prompt)
        runs.append((output.tokens, [t.to_dict() for t in metrics.traces]))
    assert runs[0] == runs[1]


def test_dump_session(tmp_path, code_model, code_datastore, code_corpus):
    prompt = tokenize(code_lines(["alpha"]), code_corpus[0])
    path = tmp_path / "session.jsonl"
    with SpeculativeEngine(code_model, code_datastore, EngineConfig(max_new_tokens=60)) as engine:
        engine.generate(prompt)
        engine.dump_session(path)
    kinds = {json.loads(line)["kind"] for line in path.read_text(encoding="utf-8").splitlines()}
    assert kinds <= {"sequence", "missing"}
    assert "sequence" in kinds


def test_empty_prompt_rejected(code_model, code_datastore):
    with pytest.raises(ValueError):
        generate(code_model, code_datastore, EngineConfig(), [])


def test_unknown_token_id_rejected(code_model, code_datastore):
    with pytest.raises(UnknownTokenError):
        generate(code_model, code_datastore, EngineConfig(), [10_000])


def test_sample_seed_is_stable():
    assert sample_seed(0, 3) == sample_seed(0, 3)
    assert sample_seed(0, 3) != sample_seed(0, 4)
    assert 0 <= sample_seed(123, 0) < 2**32
