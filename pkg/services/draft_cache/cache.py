"""
Caché de recuperación consciente del contexto y de las preferencias del modelo,
y tabla de sufijos sin resultados (missing table)
"""

import hashlib
import json
import logging
from collections import deque
from pathlib import Path
from typing import Deque, Dict, List, Literal, Optional, Set, Tuple, Union

from services.datastore.index import EMPTY_RESULT, RetrievalResult
from services.tokenization.tokenizer import TokenLike, as_ids

logger = logging.getLogger(__name__)

Key = Tuple[int, ...]
Occurrence = Tuple[int, int]  # (id de secuencia, offset de continuación)


class RetrievalCache:
    """
    Secuencias verificadas indexadas por n-gramas, accesible a partir de l secuencias

    La expulsión es FIFO: las ocurrencias de la secuencia más antigua están
    siempre al principio de cada lista de posiciones. La búsqueda devuelve
    las cap_positions ocurrencias más recientes
    """

    def __init__(
        self,
        activation_threshold: int = 50,
        max_sequences: int = 1024,
        n_max: int = 16,
        cont_len: int = 10,
        cap_positions: int = 256,
        count_side: Literal["repo", "common"] = "repo",
    ):
        if activation_threshold < 0 or max_sequences < 1 or n_max < 1 or cont_len < 1 or cap_positions < 1:
            raise ValueError("Parámetros de caché fuera de rango")
        self.activation_threshold = activation_threshold
        self.max_sequences = max_sequences
        self.n_max = n_max
        self.cont_len = cont_len
        self.cap_positions = cap_positions
        self.count_side = count_side

        self._sequences: Dict[int, Key] = {}
        self._order: Deque[int] = deque()
        self._next_id = 0
        self._grams: List[Dict[Key, Deque[Occurrence]]] = [dict() for _ in range(n_max + 1)]
        self._output_chunks_inserted = 0

    def __len__(self) -> int:
        return len(self._order)

    @property
    def sequences(self) -> List[Key]:
        return [self._sequences[seq_id] for seq_id in self._order]

    def accessible(self) -> bool:
        return len(self._order) >= self.activation_threshold

    def add_sequence(self, tokens: TokenLike):
        """Añade una secuencia e indexa sus n-gramas; expulsa la más antigua si se supera el máximo"""
        seq = as_ids(tokens)
        seq_id = self._next_id
        self._next_id += 1
        self._sequences[seq_id] = seq
        self._order.append(seq_id)
        for p in range(1, len(seq)):
            for n in range(1, min(self.n_max, p) + 1):
                self._grams[n].setdefault(seq[p - n:p], deque()).append((seq_id, p))

        while len(self._order) > self.max_sequences:
            self._evict_oldest()

    def _evict_oldest(self):
        seq_id = self._order.popleft()
        seq = self._sequences.pop(seq_id)
        for p in range(1, len(seq)):
            for n in range(1, min(self.n_max, p) + 1):
                key = seq[p - n:p]
                bucket = self._grams[n].get(key)
                while bucket and bucket[0][0] == seq_id:
                    bucket.popleft()
                if bucket is not None and not bucket:
                    del self._grams[n][key]
        logger.debug(f"Secuencia {seq_id} expulsada de la caché")

    def insert_verified(self, context: TokenLike, accepted_draft: TokenLike):
        """
        Inserta (cola del contexto + borrador verificado) como una secuencia

        Args:
            context: Contexto con el que se recuperó el borrador
            accepted_draft: Prefijo aceptado del borrador
        """
        draft = as_ids(accepted_draft)
        if not draft:
            return
        tail = as_ids(context)[-self.n_max:]
        self.add_sequence(tail + draft)

    def insert_output(self, generated: TokenLike, chunk: int = 20):
        """
        Inserta cada bloque completo de `chunk` tokens de la salida una sola vez

        Args:
            generated: Salida generada hasta el momento (sin el prompt)
            chunk: Tamaño de bloque
        """
        ids = as_ids(generated)
        complete = len(ids) // chunk
        while self._output_chunks_inserted < complete:
            start = self._output_chunks_inserted * chunk
            self.add_sequence(ids[start:start + chunk])
            self._output_chunks_inserted += 1

    def flush_output(self, generated: TokenLike, chunk: int = 20):
        """Inserta el bloque parcial final, si existe, al terminar la generación"""
        ids = as_ids(generated)
        self.insert_output(ids, chunk)
        start = self._output_chunks_inserted * chunk
        if start < len(ids):
            self.add_sequence(ids[start:])
            self._output_chunks_inserted += 1

    def reset_output_tracking(self):
        """Nueva salida: los bloques se cuentan desde cero"""
        self._output_chunks_inserted = 0

    def search(self, context: TokenLike) -> RetrievalResult:
        """Búsqueda por sufijo sobre las secuencias de la caché; vacía si no es accesible"""
        if not self.accessible():
            return EMPTY_RESULT
        ids = as_ids(context)
        upper = min(self.n_max, len(ids))
        for n in range(upper, 0, -1):
            bucket = self._grams[n].get(ids[-n:])
            if bucket:
                # las cap_positions ocurrencias más recientes
                occurrences = list(bucket)[-self.cap_positions:]
                return RetrievalResult.from_sequences(
                    (self._sequences[seq_id][p:p + self.cont_len] for seq_id, p in occurrences),
                    side=self.count_side,
                    match_length=n,
                )
        return EMPTY_RESULT


def cache_insert_verified(cache: RetrievalCache, context: TokenLike, accepted_draft: TokenLike):
    cache.insert_verified(context, accepted_draft)


def cache_insert_output(cache: RetrievalCache, generated: TokenLike, chunk: int = 20):
    cache.insert_output(generated, chunk)


def cache_search(cache: RetrievalCache, context: TokenLike) -> RetrievalResult:
    return cache.search(context)


class MissingTable:
    """Claves de sufijo (últimos min(n_max, |contexto|) ids) sin resultados en el datastore"""

    def __init__(self, n_max: int = 16):
        self.n_max = n_max
        self._keys: Set[Key] = set()

    def __len__(self) -> int:
        return len(self._keys)

    def key(self, context: TokenLike) -> Key:
        return as_ids(context)[-self.n_max:]

    def add(self, context: TokenLike):
        self._keys.add(self.key(context))

    def contains(self, context: TokenLike) -> bool:
        return self.key(context) in self._keys

    def clear(self):
        self._keys.clear()

    def digests(self) -> List[str]:
        return sorted(key_digest(key) for key in self._keys)


def key_digest(key: Key) -> str:
    data = b"".join(int(t).to_bytes(4, "little") for t in key)
    return hashlib.blake2b(data, digest_size=16).hexdigest()


def missing_add(table: MissingTable, context: TokenLike):
    table.add(context)


def missing_contains(table: MissingTable, context: TokenLike) -> bool:
    return table.contains(context)


def dump_session(path: Union[str, Path], cache: Optional[RetrievalCache], missing: Optional[MissingTable]):
    """
    Volcado de depuración del estado de sesión en JSON lines

    Args:
        path: Archivo de destino
        cache: Caché de la sesión
        missing: Missing table de la sesión
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for seq in (cache.sequences if cache is not None else []):
            f.write(json.dumps({"kind": "sequence", "tokens": list(seq)}) + "\n")
        for digest in (missing.digests() if missing is not None else []):
            f.write(json.dumps({"kind": "missing", "key": digest}) + "\n")
    logger.info(f"Estado de sesión volcado en {path}")
