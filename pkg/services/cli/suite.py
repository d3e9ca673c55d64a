"""
Suites de benchmark: carga de muestras y ejecución sobre un datastore compartido
"""

import hashlib
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Union

import numpy as np

from services.datastore.index import Datastore, SourceIndex
from services.engine.config import EngineConfig
from services.engine.decoder import SpeculativeEngine, autoregressive_generate, sample_seed
from services.errors import ModelFormatError, RetroDraftError, SuiteError
from services.metrics.generation import GenerationMetrics, first_divergence
from services.model.ngram_model import ReferenceNgramModel
from services.tokenization.tokenizer import TokenSequence, Vocabulary, tokenize

logger = logging.getLogger(__name__)

PROMPT_SUFFIX = ".prompt.txt"
CONTEXT_SUFFIX = ".context.txt"


@dataclass(frozen=True)
class SuiteSample:
    """Prompt y, opcionalmente, contexto de repositorio (D_r de la muestra)"""

    name: str
    prompt: str
    context: Optional[str] = None


@dataclass
class SampleRun:
    sample: str
    index: int
    seed: int
    output: Optional[TokenSequence]
    metrics: Optional[GenerationMetrics]
    vocab: Optional[Vocabulary]
    error: Optional[str] = None

    @property
    def failed(self) -> bool:
        return self.error is not None


def read_text(path: Union[str, Path]) -> str:
    with open(path, "r", encoding="utf-8", newline="") as f:
        return f.read()


def load_suite(suite_dir: Union[str, Path]) -> List[SuiteSample]:
    """
    Lee NOMBRE.prompt.txt y NOMBRE.context.txt opcional de un directorio

    Args:
        suite_dir: Directorio de la suite

    Returns:
        Muestras ordenadas por nombre
    """
    root = Path(suite_dir)
    if not root.is_dir():
        raise SuiteError(f"La suite no es un directorio: {root}")
    samples = []
    for prompt_path in sorted(root.glob(f"*{PROMPT_SUFFIX}")):
        name = prompt_path.name[:-len(PROMPT_SUFFIX)]
        context_path = root / f"{name}{CONTEXT_SUFFIX}"
        context = read_text(context_path) if context_path.exists() else None
        samples.append(SuiteSample(name=name, prompt=read_text(prompt_path), context=context))
    orphans = sorted(
        p.name for p in root.glob(f"*{CONTEXT_SUFFIX}")
        if not (root / (p.name[:-len(CONTEXT_SUFFIX)] + PROMPT_SUFFIX)).exists()
    )
    for orphan in orphans:
        logger.warning(f"Contexto sin prompt en la suite: {orphan}")
    if not samples:
        raise SuiteError(f"Suite vacía: {root}")
    logger.info(f"Suite {root}: {len(samples)} muestras")
    return samples


def generation_vocab(model: ReferenceNgramModel, datastore: Datastore) -> Vocabulary:
    """
    Vocabulario común a modelo y datastore

    El del modelo se usa si el del datastore es prefijo suyo (modelo entrenado
    después de construir el datastore) y viceversa.
    """
    if model.vocab is None:
        return datastore.vocab
    if datastore.vocab.is_prefix_of(model.vocab):
        return model.vocab
    if model.vocab.is_prefix_of(datastore.vocab):
        return datastore.vocab
    raise ModelFormatError("El vocabulario del modelo no es compatible con el del datastore")


def output_digest(output: TokenSequence) -> str:
    return hashlib.sha256(np.asarray(output.tokens, dtype="<u4").tobytes()).hexdigest()


def prepare_sample(sample: SuiteSample, datastore: Datastore, vocab: Vocabulary):
    """(prompt tokenizado, datastore de la muestra, vocabulario extendido)"""
    sample_vocab = vocab.copy()
    ds = datastore
    if sample.context:
        context = tokenize(sample.context, sample_vocab, allow_new=True)
        repo = SourceIndex.from_token_sequences([context.tokens], datastore.params, "repo")
        ds = datastore.with_repo(repo)
    prompt = tokenize(sample.prompt, sample_vocab, allow_new=True)
    if not len(prompt):
        raise SuiteError(f"Prompt vacío en la muestra {sample.name}")
    return prompt, ds, sample_vocab


def run_sample(
    index: int,
    sample: SuiteSample,
    model: ReferenceNgramModel,
    datastore: Datastore,
    cfg: EngineConfig,
    vocab: Vocabulary,
) -> SampleRun:
    seed = sample_seed(cfg.rng_seed, index)
    prompt, ds, sample_vocab = prepare_sample(sample, datastore, vocab)
    sample_cfg = cfg.model_copy(update={"rng_seed": seed})
    with SpeculativeEngine(model, ds, sample_cfg, vocab=sample_vocab) as engine:
        output, metrics = engine.generate(prompt)
    return SampleRun(sample.name, index, seed, output, metrics, sample_vocab)


def _failed_run(index: int, sample: SuiteSample, seed: int, error: RetroDraftError) -> SampleRun:
    logger.error(f"Muestra {sample.name} fallida: {error}")
    return SampleRun(sample.name, index, seed, None, None, None, error=str(error))


def _run_sample_or_fail(
    index: int,
    sample: SuiteSample,
    model: ReferenceNgramModel,
    datastore: Datastore,
    cfg: EngineConfig,
    vocab: Vocabulary,
) -> SampleRun:
    try:
        return run_sample(index, sample, model, datastore, cfg, vocab)
    except RetroDraftError as e:
        return _failed_run(index, sample, sample_seed(cfg.rng_seed, index), e)


def run_suite(
    samples: List[SuiteSample],
    model: ReferenceNgramModel,
    datastore: Datastore,
    cfg: EngineConfig,
    vocab: Vocabulary,
    workers: int = 1,
    keep_going: bool = False,
) -> List[SampleRun]:
    """
    Genera cada muestra en una sesión propia; el orden del resultado es el de la suite

    Args:
        samples: Muestras de la suite
        model: Modelo objetivo compartido
        datastore: Datastore compartido
        cfg: Configuración base; la semilla de cada muestra se deriva de cfg.rng_seed
        vocab: Vocabulario de generación
        workers: Sesiones concurrentes
        keep_going: Si es True, una muestra con error se devuelve como SampleRun fallido

    Returns:
        Lista de SampleRun
    """
    runner = _run_sample_or_fail if keep_going else run_sample
    if workers <= 1:
        return [runner(i, s, model, datastore, cfg, vocab) for i, s in enumerate(samples)]
    with ThreadPoolExecutor(max_workers=workers, thread_name_prefix="bench") as pool:
        futures = [pool.submit(runner, i, s, model, datastore, cfg, vocab) for i, s in enumerate(samples)]
        return [future.result() for future in futures]


def run_autoregressive(
    samples: List[SuiteSample],
    model: ReferenceNgramModel,
    datastore: Datastore,
    max_new_tokens: int,
    vocab: Vocabulary,
    keep_going: bool = False,
) -> List[SampleRun]:
    """Línea base autorregresiva por muestra (independiente de la configuración del motor)"""
    runs = []
    for index, sample in enumerate(samples):
        try:
            prompt, _, sample_vocab = prepare_sample(sample, datastore, vocab)
            output, metrics = autoregressive_generate(model, prompt, max_new_tokens, vocab=sample_vocab)
        except RetroDraftError as e:
            if not keep_going:
                raise
            runs.append(_failed_run(index, sample, 0, e))
            continue
        runs.append(SampleRun(sample.name, index, 0, output, metrics, sample_vocab))
    return runs


def outputs_match(a: TokenSequence, b: TokenSequence) -> bool:
    return first_divergence(a, b) < 0
