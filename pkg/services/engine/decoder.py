"""
Motor de decodificación especulativa basada en recuperación
Orden de control por paso: caché, missing table, compuerta de skip token,
búsqueda paralela en D_r y D_c; el borrador se verifica en un único paso forward
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np

from services.datastore.index import EMPTY_RESULT, Datastore, RetrievalResult, par_retrieve
from services.draft_cache.cache import MissingTable, RetrievalCache, dump_session
from services.draft_tree.trie import DraftTree, build_trie, select_top_k
from services.engine.config import EngineConfig
from services.errors import UnknownTokenError
from services.metrics.generation import GenerationMetrics, RetrievalSource, StepTrace
from services.model.target_model import TargetModel, verify
from services.tokenization.tokenizer import (
    TokenLike,
    TokenSequence,
    Vocabulary,
    as_ids,
    skip_position_from_flags,
)

logger = logging.getLogger(__name__)


def sample_seed(seed: int, index: int) -> int:
    """Semilla derivada por muestra a partir de la semilla del manifest"""
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def resolve_vocab(*candidates: Optional[Vocabulary]) -> Vocabulary:
    """El vocabulario más grande entre los disponibles (los demás son prefijos suyos)"""
    available = [v for v in candidates if v is not None]
    if not available:
        raise ValueError("Se necesita un vocabulario para calcular los metadatos de los tokens")
    return max(available, key=len)


@dataclass
class _Context:
    """Contexto creciente con metadatos de espacio en blanco por token"""

    vocab: Vocabulary
    ids: List[int] = field(default_factory=list)
    is_whitespace: List[bool] = field(default_factory=list)
    contains_newline: List[bool] = field(default_factory=list)

    def extend(self, tokens):
        for token in tokens:
            if not 0 <= token < len(self.vocab):
                raise UnknownTokenError(f"<id {token}>")
            blank, newline = self.vocab.flags(token)
            self.ids.append(token)
            self.is_whitespace.append(blank)
            self.contains_newline.append(newline)

    def at_skip_position(self) -> bool:
        return skip_position_from_flags(self.is_whitespace, self.contains_newline)

    def sequence(self, start: int = 0) -> TokenSequence:
        return TokenSequence(
            tuple(self.ids[start:]),
            tuple(self.is_whitespace[start:]),
            tuple(self.contains_newline[start:]),
        )


class SpeculativeEngine:
    """
    Sesión de decodificación especulativa

    La caché, la missing table y el RNG son estado mutable de la sesión; el
    datastore y el modelo se comparten sin modificarse. Con
    persist_session_state el estado sobrevive entre llamadas a generate.
    """

    def __init__(
        self,
        model: TargetModel,
        datastore: Datastore,
        cfg: Optional[EngineConfig] = None,
        vocab: Optional[Vocabulary] = None,
        record_drafts: bool = False,
    ):
        """
        Inicializa la sesión

        Args:
            model: Modelo objetivo greedy
            datastore: Datastore inmutable
            cfg: Configuración del motor
            vocab: Vocabulario para los metadatos de tokens (por defecto el del modelo o el del datastore)
            record_drafts: Guarda cada árbol de borradores en self.drafts
        """
        self.model = model
        self.datastore = datastore
        self.cfg = cfg or EngineConfig()
        self.vocab = resolve_vocab(vocab, getattr(model, "vocab", None), datastore.vocab)
        self.record_drafts = record_drafts
        self.drafts: List[dict] = []

        self.cache = RetrievalCache(
            activation_threshold=self.cfg.l,
            max_sequences=self.cfg.max_cache_sequences,
            n_max=self.cfg.n_max,
            cont_len=self.cfg.cont_len,
            cap_positions=datastore.cap_positions,
            count_side=self.cfg.cache_count_side,
        )
        self.missing = MissingTable(n_max=self.cfg.n_max)
        self._executor: Optional[ThreadPoolExecutor] = None
        if self.cfg.parallel_retrieval and datastore.repo is not None and self.cfg.use_repo_datastore:
            self._executor = ThreadPoolExecutor(max_workers=2, thread_name_prefix="retrieval")

    def close(self):
        if self._executor is not None:
            self._executor.shutdown(wait=True)
            self._executor = None

    def __enter__(self) -> "SpeculativeEngine":
        return self

    def __exit__(self, *exc):
        self.close()

    def reset_session(self):
        """Vacía la caché y la missing table"""
        self.cache = RetrievalCache(
            activation_threshold=self.cfg.l,
            max_sequences=self.cfg.max_cache_sequences,
            n_max=self.cfg.n_max,
            cont_len=self.cfg.cont_len,
            cap_positions=self.datastore.cap_positions,
            count_side=self.cfg.cache_count_side,
        )
        self.missing.clear()

    def _retrieve(
        self,
        context: Tuple[int, ...],
        skip: bool,
        rng: np.random.Generator,
        metrics: GenerationMetrics,
    ) -> Tuple[RetrievalSource, RetrievalResult, RetrievalResult]:
        cfg = self.cfg

        if cfg.use_cache and self.cache.accessible():
            start = time.perf_counter()
            result = self.cache.search(context)
            metrics.cache_ms += (time.perf_counter() - start) * 1000
            metrics.cache_searches += 1
            if result:
                metrics.cache_hits += 1
                if cfg.cache_count_side == "repo":
                    return "cache", result, EMPTY_RESULT
                return "cache", EMPTY_RESULT, result

        if cfg.use_strategy:
            if self.missing.contains(context):
                metrics.skipped_missing += 1
                return "skipped-missing", EMPTY_RESULT, EMPTY_RESULT
            if skip and rng.random() >= cfg.p:
                metrics.skipped_probability += 1
                return "skipped-probability", EMPTY_RESULT, EMPTY_RESULT

        start = time.perf_counter()
        r_repo, r_common = par_retrieve(
            self.datastore,
            context,
            executor=self._executor,
            n_max=cfg.n_max,
            cont_len=cfg.cont_len,
            use_repo=cfg.use_repo_datastore,
        )
        metrics.datastore_ms += (time.perf_counter() - start) * 1000
        metrics.datastore_searches += 1

        if not r_repo and not r_common:
            if cfg.use_strategy:
                self.missing.add(context)
            return "none", EMPTY_RESULT, EMPTY_RESULT
        metrics.datastore_hits += 1
        return "datastore", r_repo, r_common

    def generate(self, prompt: TokenLike, max_new_tokens: Optional[int] = None) -> Tuple[TokenSequence, GenerationMetrics]:
        """
        Genera hasta max_new_tokens tokens o hasta el token de fin (incluido)

        Args:
            prompt: Prompt no vacío
            max_new_tokens: Límite de tokens nuevos (por defecto el de la configuración)

        Returns:
            (salida sin el prompt, GenerationMetrics)
        """
        cfg = self.cfg
        prompt_ids = as_ids(prompt)
        if not prompt_ids:
            raise ValueError("El prompt no puede estar vacío")
        limit = cfg.max_new_tokens if max_new_tokens is None else max_new_tokens
        if limit < 0:
            raise ValueError(f"max_new_tokens debe ser >= 0: {limit}")

        if not cfg.persist_session_state:
            self.reset_session()
        self.cache.reset_output_tracking()
        self.drafts = []
        rng = np.random.Generator(np.random.PCG64(cfg.rng_seed))
        end_token = self.model.end_token

        context = _Context(self.vocab)
        context.extend(prompt_ids)
        start_index = len(context.ids)
        metrics = GenerationMetrics()
        started = time.perf_counter()
        finished = False

        while len(context.ids) - start_index < limit and not finished:
            ids = tuple(context.ids)
            skip = context.at_skip_position()
            source, r_repo, r_common = self._retrieve(ids, skip, rng, metrics)

            if r_repo or r_common:
                trie = build_trie(r_repo, r_common, cfg.alpha, cfg.beta)
                tree = select_top_k(trie, k=cfg.k, budget=cfg.draft_budget)
            else:
                tree = DraftTree.empty()
            if self.record_drafts:
                self.drafts.append(tree.to_dict())

            preds = self.model.predict_tree(ids, tree)
            metrics.F += 1
            result = verify(tree, preds)

            room = limit - (len(context.ids) - start_index)
            emitted = list(result.emitted[:room])
            if end_token is not None and end_token in emitted:
                emitted = emitted[:emitted.index(end_token) + 1]
                finished = True
            accepted = min(len(result.accepted), len(emitted))

            if cfg.use_cache and accepted:
                self.cache.insert_verified(ids, result.accepted[:accepted])

            for offset in range(len(emitted)):
                metrics.token_at_skip.append(context.at_skip_position())
                metrics.token_from_draft.append(offset < accepted)
                context.extend(emitted[offset:offset + 1])
            metrics.L += len(emitted)

            if cfg.use_cache:
                self.cache.insert_output(context.ids[start_index:], cfg.chunk)

            metrics.traces.append(StepTrace(
                step=metrics.F - 1,
                retrieval_source=source,
                draft_size=len(tree),
                draft_depth=tree.depth,
                accepted_len=accepted,
                emitted=len(emitted),
                skip_position=skip,
                match_length=max(r_repo.match_length, r_common.match_length),
            ))

        if cfg.use_cache and cfg.flush_on_finish:
            self.cache.flush_output(context.ids[start_index:], cfg.chunk)

        metrics.wall_ms = (time.perf_counter() - started) * 1000
        logger.debug(
            f"Generación terminada: L={metrics.L}, F={metrics.F}, "
            f"aceptación media {metrics.acceptance_length:.3f}"
        )
        return context.sequence(start_index), metrics

    def dump_session(self, path: Union[str, Path]):
        dump_session(path, self.cache, self.missing)


def generate(
    model: TargetModel,
    datastore: Datastore,
    cfg: EngineConfig,
    prompt: TokenLike,
    vocab: Optional[Vocabulary] = None,
) -> Tuple[TokenSequence, GenerationMetrics]:
    """
    Decodificación especulativa en una sesión nueva

    Args:
        model: Modelo objetivo
        datastore: Datastore compartido
        cfg: Configuración validada
        prompt: Prompt no vacío
        vocab: Vocabulario para los metadatos de tokens

    Returns:
        (salida, métricas); la salida es idéntica a la de autoregressive_generate
    """
    with SpeculativeEngine(model, datastore, cfg, vocab=vocab) as engine:
        return engine.generate(prompt)


def autoregressive_generate(
    model: TargetModel,
    prompt: TokenLike,
    max_new_tokens: int,
    vocab: Optional[Vocabulary] = None,
) -> Tuple[TokenSequence, GenerationMetrics]:
    """
    Decodificación autorregresiva: un paso forward con árbol vacío por token

    Args:
        model: Modelo objetivo
        prompt: Prompt
        max_new_tokens: Límite de tokens nuevos
        vocab: Vocabulario para los metadatos (por defecto el del modelo)

    Returns:
        (salida, métricas) con F == L
    """
    if max_new_tokens < 0:
        raise ValueError(f"max_new_tokens debe ser >= 0: {max_new_tokens}")
    context = _Context(resolve_vocab(vocab, getattr(model, "vocab", None)))
    context.extend(as_ids(prompt))
    start_index = len(context.ids)
    metrics = GenerationMetrics()
    empty = DraftTree.empty()
    started = time.perf_counter()

    while metrics.L < max_new_tokens:
        skip = context.at_skip_position()
        token = model.predict_tree(tuple(context.ids), empty).at_root
        metrics.F += 1
        metrics.L += 1
        metrics.token_at_skip.append(skip)
        metrics.token_from_draft.append(False)
        context.extend((token,))
        metrics.traces.append(StepTrace(
            step=metrics.F - 1,
            retrieval_source="none",
            draft_size=0,
            draft_depth=0,
            accepted_len=0,
            emitted=1,
            skip_position=skip,
        ))
        if model.end_token is not None and token == model.end_token:
            break

    metrics.wall_ms = (time.perf_counter() - started) * 1000
    return context.sequence(start_index), metrics
