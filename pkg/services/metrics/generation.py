"""
Métricas de una generación: trazas por paso, velocidad de decodificación,
speedup y longitud media de aceptación
"""

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Literal, Tuple, Union

from services.errors import MismatchedOutputsError
from services.tokenization.tokenizer import TokenLike, as_ids

logger = logging.getLogger(__name__)

RetrievalSource = Literal["cache", "datastore", "skipped-missing", "skipped-probability", "none"]
RETRIEVAL_SOURCES: Tuple[str, ...] = ("cache", "datastore", "skipped-missing", "skipped-probability", "none")


@dataclass(frozen=True)
class StepTrace:
    """Un paso forward del bucle de decodificación"""

    step: int
    retrieval_source: RetrievalSource
    draft_size: int
    draft_depth: int
    accepted_len: int
    emitted: int
    skip_position: bool
    match_length: int = 0

    def to_dict(self) -> Dict:
        return asdict(self)


@dataclass
class GenerationMetrics:
    """
    Contabilidad de una generación

    L son los tokens emitidos y F los pasos forward del modelo; la longitud
    media de aceptación es L / F y la velocidad de decodificación wall_ms / L
    """

    L: int = 0
    F: int = 0
    wall_ms: float = 0.0
    traces: List[StepTrace] = field(default_factory=list)
    # procedencia por token emitido: True si salió de un borrador aceptado
    token_from_draft: List[bool] = field(default_factory=list)
    # True si el token se emitió en una posición de skip token
    token_at_skip: List[bool] = field(default_factory=list)

    cache_searches: int = 0
    cache_hits: int = 0
    datastore_searches: int = 0
    datastore_hits: int = 0
    skipped_missing: int = 0
    skipped_probability: int = 0
    cache_ms: float = 0.0
    datastore_ms: float = 0.0

    @property
    def decoding_speed(self) -> float:
        """Milisegundos por token (0 si no se emitió nada)"""
        return self.wall_ms / self.L if self.L else 0.0

    @property
    def acceptance_length(self) -> float:
        return self.L / self.F if self.F else 0.0

    @property
    def drafted_tokens(self) -> int:
        return sum(self.token_from_draft)

    def source_counts(self) -> Dict[str, int]:
        counts = {source: 0 for source in RETRIEVAL_SOURCES}
        for trace in self.traces:
            counts[trace.retrieval_source] += 1
        return counts

    def to_dict(self, include_traces: bool = False) -> Dict:
        data = {
            "L": self.L,
            "F": self.F,
            "wall_ms": self.wall_ms,
            "decoding_speed": self.decoding_speed,
            "acceptance_length": self.acceptance_length,
            "drafted_tokens": self.drafted_tokens,
            "sources": self.source_counts(),
            "retrieval": {
                "cache_searches": self.cache_searches,
                "cache_hits": self.cache_hits,
                "datastore_searches": self.datastore_searches,
                "datastore_hits": self.datastore_hits,
                "skipped_missing": self.skipped_missing,
                "skipped_probability": self.skipped_probability,
                "cache_ms": self.cache_ms,
                "datastore_ms": self.datastore_ms,
            },
        }
        if include_traces:
            data["traces"] = [trace.to_dict() for trace in self.traces]
        return data


def write_traces(metrics: GenerationMetrics, path: Union[str, Path]):
    """Exporta las trazas como JSON lines, un objeto por paso"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for trace in metrics.traces:
            f.write(json.dumps(trace.to_dict(), sort_keys=True) + "\n")
    logger.debug(f"{len(metrics.traces)} trazas escritas en {path}")


@dataclass(frozen=True)
class MetricsReport:
    spec_decoding_speed: float
    ar_decoding_speed: float
    speedup: float
    acceptance_length: float
    ar_acceptance_length: float

    def to_dict(self) -> Dict:
        return asdict(self)


def first_divergence(expected: TokenLike, actual: TokenLike) -> int:
    """Primera posición en la que difieren dos salidas, o -1 si son idénticas"""
    a, b = as_ids(expected), as_ids(actual)
    for i, (x, y) in enumerate(zip(a, b)):
        if x != y:
            return i
    return -1 if len(a) == len(b) else min(len(a), len(b))


def check_equivalence(ar_output: TokenLike, spec_output: TokenLike):
    """
    Lanza MismatchedOutputsError si las salidas no son idénticas token a token
    (-1 en expected/actual indica que una de las salidas terminó antes)
    """
    position = first_divergence(ar_output, spec_output)
    if position < 0:
        return
    a, b = as_ids(ar_output), as_ids(spec_output)
    expected = a[position] if position < len(a) else -1
    actual = b[position] if position < len(b) else -1
    raise MismatchedOutputsError(position, expected, actual)


def compute_metrics(
    spec_run: Tuple[TokenLike, GenerationMetrics],
    ar_run: Tuple[TokenLike, GenerationMetrics],
) -> MetricsReport:
    """
    Compara una ejecución especulativa con la autorregresiva

    Args:
        spec_run: (salida, métricas) de generate
        ar_run: (salida, métricas) de autoregressive_generate

    Returns:
        MetricsReport con ms/token de cada ejecución, speedup y L/F
    """
    spec_output, spec_metrics = spec_run
    ar_output, ar_metrics = ar_run
    check_equivalence(ar_output, spec_output)

    spec_speed = spec_metrics.decoding_speed
    ar_speed = ar_metrics.decoding_speed
    speedup = ar_speed / spec_speed if spec_speed > 0 else math.nan
    return MetricsReport(
        spec_decoding_speed=spec_speed,
        ar_decoding_speed=ar_speed,
        speedup=speedup,
        acceptance_length=spec_metrics.acceptance_length,
        ar_acceptance_length=ar_metrics.acceptance_length,
    )
