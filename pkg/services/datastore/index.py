"""
Índice de sufijos del datastore multi-fuente
Mapea n-gramas de contexto (n = 1..n_max) a posiciones del corpus; la continuación
de una coincidencia son los tokens que siguen a esa posición dentro del mismo archivo
"""

import logging
from concurrent.futures import Executor
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from services.errors import EmptyCorpusError
from services.tokenization.tokenizer import TokenLike, Vocabulary, as_ids

logger = logging.getLogger(__name__)

# Separador de archivos; nunca es un TokenId válido
SENTINEL = 0xFFFFFFFF

Source = Literal["repo", "common"]
GramTable = Dict[Tuple[int, ...], List[int]]


class DatastoreParams(BaseModel):
    """Parámetros de construcción y consulta del datastore"""

    model_config = ConfigDict(frozen=True)

    n_max: int = Field(16, ge=1)
    cont_len: int = Field(10, ge=1)
    cap_positions: int = Field(256, ge=1)


@dataclass(frozen=True)
class Continuation:
    tokens: Tuple[int, ...]
    count_repo: int = 0
    count_common: int = 0


@dataclass(frozen=True)
class RetrievalResult:
    """Continuaciones deduplicadas con conteos por fuente"""

    continuations: Tuple[Continuation, ...] = ()
    match_length: int = 0

    def __bool__(self) -> bool:
        return bool(self.continuations)

    def __len__(self) -> int:
        return len(self.continuations)

    @classmethod
    def empty(cls) -> "RetrievalResult":
        return EMPTY_RESULT

    @classmethod
    def from_sequences(cls, sequences: Iterable[Tuple[int, ...]], side: Source, match_length: int) -> "RetrievalResult":
        """
        Deduplica continuaciones conservando el orden de primera aparición

        Args:
            sequences: Continuaciones en orden de corpus
            side: Fuente a la que se atribuyen los conteos
            match_length: Longitud de sufijo que produjo las coincidencias
        """
        counts: Dict[Tuple[int, ...], int] = {}
        for seq in sequences:
            counts[seq] = counts.get(seq, 0) + 1
        if side == "repo":
            conts = tuple(Continuation(seq, count, 0) for seq, count in counts.items())
        else:
            conts = tuple(Continuation(seq, 0, count) for seq, count in counts.items())
        return cls(conts, match_length if conts else 0)


EMPTY_RESULT = RetrievalResult()


class SourceIndex:
    """Corpus concatenado con centinelas más tablas de n-gramas por longitud"""

    def __init__(self, corpus: np.ndarray, grams: List[GramTable], params: DatastoreParams, source: Source):
        if len(grams) != params.n_max + 1:
            raise ValueError("grams debe tener una tabla por longitud 0..n_max")
        self.corpus = np.asarray(corpus, dtype=np.uint32)
        self._tokens: List[int] = self.corpus.tolist()
        self.grams = grams
        self.params = params
        self.source = source

    @property
    def n_max(self) -> int:
        return self.params.n_max

    @property
    def token_count(self) -> int:
        """Tokens indexados, sin contar centinelas"""
        return int(np.count_nonzero(self.corpus != SENTINEL))

    @classmethod
    def from_token_sequences(
        cls,
        documents: Iterable[Sequence[int]],
        params: DatastoreParams,
        source: Source,
    ) -> "SourceIndex":
        """
        Construye el índice sobre documentos ya tokenizados

        Args:
            documents: Secuencias de TokenId, una por archivo o segmento
            params: Parámetros del datastore
            source: "repo" (D_r) o "common" (D_c)

        Returns:
            SourceIndex inmutable
        """
        corpus: List[int] = []
        grams: List[GramTable] = [dict() for _ in range(params.n_max + 1)]
        cap = params.cap_positions

        for doc in documents:
            doc = [int(t) for t in doc]
            if not doc:
                continue
            base = len(corpus)
            corpus.extend(doc)
            corpus.append(SENTINEL)
            # solo posiciones con al menos un token de continuación en el mismo documento
            for p in range(1, len(doc)):
                for n in range(1, min(params.n_max, p) + 1):
                    bucket = grams[n].setdefault(tuple(doc[p - n:p]), [])
                    if len(bucket) < cap:
                        bucket.append(base + p)

        if not corpus:
            raise EmptyCorpusError()

        index = cls(np.array(corpus, dtype=np.uint32), grams, params, source)
        logger.debug(f"Índice {source}: {index.token_count} tokens, {len(grams[1])} unigramas")
        return index

    @classmethod
    def from_corpus(cls, corpus: np.ndarray, params: DatastoreParams, source: Source) -> "SourceIndex":
        """Reconstruye las tablas a partir de un corpus con centinelas"""
        return cls.from_token_sequences(split_documents(corpus), params, source)

    @classmethod
    def empty(cls, params: DatastoreParams, source: Source) -> "SourceIndex":
        """Índice sin contenido: toda consulta devuelve un resultado vacío"""
        return cls(np.zeros(0, dtype=np.uint32), [dict() for _ in range(params.n_max + 1)], params, source)

    def documents(self) -> List[Tuple[int, ...]]:
        return split_documents(self.corpus)

    def continuation(self, position: int, cont_len: int) -> Tuple[int, ...]:
        segment = self._tokens[position:position + cont_len]
        if SENTINEL in segment:
            segment = segment[:segment.index(SENTINEL)]
        return tuple(segment)


def split_documents(corpus: Sequence[int]) -> List[Tuple[int, ...]]:
    documents, current = [], []
    for token in np.asarray(corpus, dtype=np.uint32).tolist():
        if token == SENTINEL:
            documents.append(tuple(current))
            current = []
        else:
            current.append(token)
    if current:
        documents.append(tuple(current))
    return documents


@dataclass
class Datastore:
    """D = (D_r, D_c); D_r puede omitirse en generación standalone"""

    common: SourceIndex
    vocab: Vocabulary
    params: DatastoreParams = field(default_factory=DatastoreParams)
    repo: Optional[SourceIndex] = None

    @property
    def n_max(self) -> int:
        return self.params.n_max

    @property
    def cont_len(self) -> int:
        return self.params.cont_len

    @property
    def cap_positions(self) -> int:
        return self.params.cap_positions

    def with_repo(self, repo: Optional[SourceIndex]) -> "Datastore":
        return Datastore(common=self.common, vocab=self.vocab, params=self.params, repo=repo)

    @classmethod
    def empty(cls, vocab: Vocabulary, params: Optional[DatastoreParams] = None) -> "Datastore":
        params = params or DatastoreParams()
        return cls(common=SourceIndex.empty(params, "common"), vocab=vocab, params=params)


def suffix_retrieve(
    index: SourceIndex,
    context: TokenLike,
    n_max: int,
    cont_len: Optional[int] = None,
) -> RetrievalResult:
    """
    Búsqueda del sufijo más largo con longitud decreciente

    Args:
        index: Índice de una fuente
        context: Contexto actual
        n_max: Longitud máxima de sufijo a probar
        cont_len: Tokens de continuación por coincidencia (por defecto el del índice)

    Returns:
        Continuaciones de todas las posiciones que coinciden con el mayor n posible,
        o un resultado vacío si ningún n >= 1 coincide
    """
    if n_max < 1:
        raise ValueError(f"n_max debe ser >= 1: {n_max}")
    cont_len = cont_len or index.params.cont_len
    ids = as_ids(context)
    upper = min(n_max, len(ids), index.n_max)

    for n in range(upper, 0, -1):
        positions = index.grams[n].get(ids[-n:])
        if positions:
            return RetrievalResult.from_sequences(
                (index.continuation(p, cont_len) for p in positions),
                side=index.source,
                match_length=n,
            )
    return EMPTY_RESULT


def par_retrieve(
    ds: Datastore,
    context: TokenLike,
    executor: Optional[Executor] = None,
    n_max: Optional[int] = None,
    cont_len: Optional[int] = None,
    use_repo: bool = True,
) -> Tuple[RetrievalResult, RetrievalResult]:
    """
    Búsqueda paralela en D_r y D_c

    Args:
        ds: Datastore
        context: Contexto actual
        executor: Pool donde lanzar la búsqueda en D_r; sin pool se ejecuta en secuencia
        n_max: Longitud máxima de sufijo (por defecto la del datastore)
        cont_len: Tokens de continuación por coincidencia
        use_repo: Consultar D_r si existe

    Returns:
        (R_r, R_c), idéntico a la ejecución secuencial
    """
    n_max = n_max or ds.n_max
    ids = as_ids(context)
    if ds.repo is None or not use_repo:
        return EMPTY_RESULT, suffix_retrieve(ds.common, ids, n_max, cont_len)

    if executor is None:
        return (
            suffix_retrieve(ds.repo, ids, n_max, cont_len),
            suffix_retrieve(ds.common, ids, n_max, cont_len),
        )

    repo_future = executor.submit(suffix_retrieve, ds.repo, ids, n_max, cont_len)
    common_result = suffix_retrieve(ds.common, ids, n_max, cont_len)
    return repo_future.result(), common_result
