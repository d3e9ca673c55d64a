"""
Modelo n-grama de referencia
Sustituto determinista del LLM objetivo: argmax de conteos con desempate por
el TokenId más pequeño y unigrama global como respaldo para contextos no vistos
"""

import io
import logging
import struct
from pathlib import Path
from typing import Dict, Iterable, Optional, Tuple, Union

import numpy as np

from services.draft_tree.trie import DraftTree
from services.errors import EmptyCorpusError, ModelFormatError
from services.model.target_model import Predictions, TargetModel
from services.tokenization.tokenizer import TokenLike, Vocabulary, as_ids

logger = logging.getLogger(__name__)

MAGIC = b"FCNG"
FORMAT_VERSION = 1
HEADER = struct.Struct("<4sIIqI")
U32 = struct.Struct("<I")
U64 = struct.Struct("<Q")
_DTYPE = np.dtype("<u4")

CountTable = Dict[Tuple[int, ...], Dict[int, int]]


def _argmax(counts: Dict[int, int]) -> int:
    return min(counts.items(), key=lambda item: (-item[1], item[0]))[0]


class ReferenceNgramModel(TargetModel):
    """Modelo n-grama greedy; inmutable tras el entrenamiento"""

    def __init__(
        self,
        order: int,
        counts: CountTable,
        fallback: int,
        end_token: Optional[int] = None,
        vocab: Optional[Vocabulary] = None,
    ):
        super().__init__()
        if order < 1:
            raise ValueError(f"order debe ser >= 1: {order}")
        self.order = order
        self.counts = counts
        self.fallback = fallback
        self.end_token = end_token
        self.vocab = vocab
        self._history = order - 1
        self._best = {context: _argmax(table) for context, table in counts.items() if table}

    def _lookup(self, tail: Tuple[int, ...]) -> int:
        if len(tail) < self._history:
            return self.fallback
        return self._best.get(tail, self.fallback)

    def _tail(self, ids: Tuple[int, ...]) -> Tuple[int, ...]:
        return ids[-self._history:] if self._history else ()

    def next_token(self, context: TokenLike) -> int:
        """Predicción greedy sin contar como paso forward"""
        return self._lookup(self._tail(as_ids(context)))

    def forward(self, context_ids: Tuple[int, ...], tree: DraftTree) -> Predictions:
        root_tail = self._tail(context_ids)
        tails, at_node = [], []
        for token, parent in zip(tree.tokens, tree.parents):
            base = root_tail if parent < 0 else tails[parent]
            tail = self._tail(base + (token,))
            tails.append(tail)
            at_node.append(self._lookup(tail))
        return Predictions(self._lookup(root_tail), tuple(at_node))

    def save(self, path: Union[str, Path]):
        """
        Serializa el modelo en formato FCNG

        Args:
            path: Ruta de destino
        """
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        vocab_bytes = self.vocab.to_text().encode("utf-8") if self.vocab is not None else b""
        contexts = list(self.counts)
        entries = [sorted(self.counts[c].items()) for c in contexts]

        buf = io.BytesIO()
        end = -1 if self.end_token is None else self.end_token
        buf.write(HEADER.pack(MAGIC, FORMAT_VERSION, self.order, end, self.fallback))
        buf.write(U64.pack(len(vocab_bytes)))
        buf.write(vocab_bytes)
        buf.write(U32.pack(len(contexts)))
        buf.write(np.array(contexts, dtype=_DTYPE).reshape(len(contexts), self._history).tobytes())
        buf.write(np.array([len(e) for e in entries], dtype=_DTYPE).tobytes())
        buf.write(np.array([t for e in entries for t, _ in e], dtype=_DTYPE).tobytes())
        buf.write(np.array([c for e in entries for _, c in e], dtype=_DTYPE).tobytes())
        path.write_bytes(buf.getvalue())
        logger.info(f"Modelo n-grama guardado en {path} ({len(contexts)} contextos)")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "ReferenceNgramModel":
        """
        Carga un modelo FCNG

        Args:
            path: Ruta del archivo

        Returns:
            ReferenceNgramModel
        """
        try:
            data = Path(path).read_bytes()
        except OSError as e:
            raise ModelFormatError(f"No se pudo leer el modelo {path}: {e}") from e
        try:
            magic, version, order, end, fallback = HEADER.unpack_from(data, 0)
            if magic != MAGIC:
                raise ModelFormatError(f"Magic inválido en {path}: {magic!r}")
            if version != FORMAT_VERSION:
                raise ModelFormatError(f"Versión de modelo no soportada: {version}")
            offset = HEADER.size
            (vocab_len,) = U64.unpack_from(data, offset)
            offset += U64.size
            vocab = Vocabulary.from_text(data[offset:offset + vocab_len].decode("utf-8")) if vocab_len else None
            offset += vocab_len
            (k,) = U32.unpack_from(data, offset)
            offset += U32.size
            history = order - 1

            def take(count: int) -> np.ndarray:
                nonlocal offset
                if count == 0:
                    return np.zeros(0, dtype=_DTYPE)
                array = np.frombuffer(data, dtype=_DTYPE, count=count, offset=offset)
                offset += count * _DTYPE.itemsize
                return array

            contexts = take(k * history).reshape(k, history).tolist()
            sizes = take(k)
            total = int(sizes.sum())
            tokens = take(total).tolist()
            counts_flat = take(total).tolist()
        except (struct.error, ValueError) as e:
            raise ModelFormatError(f"Archivo de modelo corrupto {path}: {e}") from e

        counts: CountTable = {}
        start = 0
        for context, size in zip(contexts, sizes.tolist()):
            counts[tuple(context)] = dict(zip(tokens[start:start + size], counts_flat[start:start + size]))
            start += size
        logger.info(f"Modelo n-grama cargado desde {path}: orden {order}, {k} contextos")
        return cls(order, counts, fallback, None if end < 0 else end, vocab)


def train_ngram(
    corpus: Iterable[TokenLike],
    order: int = 3,
    end_token: Optional[int] = None,
    vocab: Optional[Vocabulary] = None,
) -> ReferenceNgramModel:
    """
    Entrena el modelo n-grama de referencia

    Args:
        corpus: Documentos tokenizados
        order: Orden del modelo (contexto de order - 1 tokens)
        end_token: Token de fin; se añade al final de cada documento
        vocab: Vocabulario que viaja con el modelo serializado

    Returns:
        ReferenceNgramModel entrenado
    """
    if order < 1:
        raise ValueError(f"order debe ser >= 1: {order}")
    documents = [as_ids(doc) for doc in corpus]
    if not any(documents):
        raise EmptyCorpusError("corpus de entrenamiento vacío")
    if end_token is not None:
        documents = [doc + (end_token,) for doc in documents if doc]

    history = order - 1
    counts: CountTable = {}
    unigram: Dict[int, int] = {}
    for doc in documents:
        for i, token in enumerate(doc):
            unigram[token] = unigram.get(token, 0) + 1
            if i >= history:
                table = counts.setdefault(doc[i - history:i], {})
                table[token] = table.get(token, 0) + 1

    model = ReferenceNgramModel(order, counts, _argmax(unigram), end_token, vocab)
    logger.info(f"Modelo n-grama entrenado: orden {order}, {len(counts)} contextos")
    return model
