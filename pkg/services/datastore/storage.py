"""
Serialización binaria del datastore

Formato (little-endian):
    cabecera   magic "FCDS", version u32, n_max u32, cont_len u32, cap_positions u32, flags u32
    vocabulario  u64 longitud + texto del vocabulario (una superficie escapada por línea)
    por fuente (D_c y, si flags & 1, D_r):
        u64 longitud del corpus + corpus u32
        u64 bytes de tablas + por n = 1..n_max: u32 K, claves K*n u32, conteos K u32, posiciones u32
"""

import hashlib
import io
import logging
import struct
from pathlib import Path
from typing import List, Union

import numpy as np

from services.datastore.index import Datastore, DatastoreParams, GramTable, SourceIndex, Source
from services.errors import DatastoreFormatError, DatastoreIOError
from services.tokenization.tokenizer import Vocabulary

logger = logging.getLogger(__name__)

MAGIC = b"FCDS"
FORMAT_VERSION = 1
HEADER = struct.Struct("<4sIIIII")
U32 = struct.Struct("<I")
U64 = struct.Struct("<Q")
FLAG_HAS_REPO = 1
_DTYPE = np.dtype("<u4")


class _Reader:
    def __init__(self, data: bytes):
        self._view = memoryview(data)
        self.offset = 0

    def take(self, size: int) -> memoryview:
        if self.offset + size > len(self._view):
            raise DatastoreFormatError("Archivo de datastore truncado")
        chunk = self._view[self.offset:self.offset + size]
        self.offset += size
        return chunk

    def u32(self) -> int:
        return U32.unpack(self.take(U32.size))[0]

    def u64(self) -> int:
        return U64.unpack(self.take(U64.size))[0]

    def array(self, count: int) -> np.ndarray:
        if count == 0:
            return np.zeros(0, dtype=_DTYPE)
        return np.frombuffer(self.take(count * _DTYPE.itemsize), dtype=_DTYPE)


def encode_tables(grams: List[GramTable], n_max: int) -> bytes:
    buf = io.BytesIO()
    for n in range(1, n_max + 1):
        table = grams[n]
        keys = np.fromiter((t for key in table for t in key), dtype=_DTYPE, count=len(table) * n)
        counts = np.fromiter((len(v) for v in table.values()), dtype=_DTYPE, count=len(table))
        positions = np.fromiter((p for v in table.values() for p in v), dtype=_DTYPE, count=int(counts.sum()))
        buf.write(U32.pack(len(table)))
        buf.write(keys.tobytes())
        buf.write(counts.tobytes())
        buf.write(positions.tobytes())
    return buf.getvalue()


def decode_tables(data: bytes, n_max: int) -> List[GramTable]:
    reader = _Reader(data)
    grams: List[GramTable] = [dict()]
    for n in range(1, n_max + 1):
        k = reader.u32()
        keys = reader.array(k * n).reshape(k, n).tolist()
        counts = reader.array(k)
        positions = reader.array(int(counts.sum())).tolist()
        ends = np.cumsum(counts).tolist()
        table: GramTable = {}
        start = 0
        for key, end in zip(keys, ends):
            table[tuple(key)] = positions[start:end]
            start = end
        grams.append(table)
    return grams


def _write_index(f, index: SourceIndex):
    corpus = index.corpus.astype(_DTYPE, copy=False)
    f.write(U64.pack(len(corpus)))
    f.write(corpus.tobytes())
    tables = encode_tables(index.grams, index.n_max)
    f.write(U64.pack(len(tables)))
    f.write(tables)


def _read_index(reader: _Reader, params: DatastoreParams, source: Source, rebuild: bool) -> SourceIndex:
    corpus = reader.array(reader.u64()).astype(np.uint32)
    tables = bytes(reader.take(reader.u64()))
    if rebuild:
        if not len(corpus):
            return SourceIndex.empty(params, source)
        return SourceIndex.from_corpus(corpus, params, source)
    return SourceIndex(corpus, decode_tables(tables, params.n_max), params, source)


def save_datastore(ds: Datastore, path: Union[str, Path]):
    """
    Guarda el datastore en un único archivo binario

    Args:
        ds: Datastore a serializar
        path: Ruta de destino
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    flags = FLAG_HAS_REPO if ds.repo is not None else 0
    vocab_bytes = ds.vocab.to_text().encode("utf-8")
    try:
        with open(path, "wb") as f:
            f.write(HEADER.pack(MAGIC, FORMAT_VERSION, ds.n_max, ds.cont_len, ds.cap_positions, flags))
            f.write(U64.pack(len(vocab_bytes)))
            f.write(vocab_bytes)
            _write_index(f, ds.common)
            if ds.repo is not None:
                _write_index(f, ds.repo)
    except OSError as e:
        raise DatastoreIOError(f"Error escribiendo datastore {path}: {e}") from e
    logger.info(f"Datastore guardado en {path} ({path.stat().st_size} bytes)")


def load_datastore(path: Union[str, Path]) -> Datastore:
    """
    Carga un datastore; si la versión no coincide reconstruye las tablas desde el corpus

    Args:
        path: Ruta del archivo .fcds

    Returns:
        Datastore con vocabulario congelado
    """
    try:
        data = Path(path).read_bytes()
    except OSError as e:
        raise DatastoreIOError(f"No se pudo leer el datastore {path}: {e}") from e

    reader = _Reader(data)
    magic, version, n_max, cont_len, cap_positions, flags = HEADER.unpack(reader.take(HEADER.size))
    if magic != MAGIC:
        raise DatastoreFormatError(f"Magic inválido en {path}: {bytes(magic)!r}")
    rebuild = version != FORMAT_VERSION
    if rebuild:
        logger.warning(f"Versión de datastore {version} != {FORMAT_VERSION}; reconstruyendo índices")

    params = DatastoreParams(n_max=n_max, cont_len=cont_len, cap_positions=cap_positions)
    vocab = Vocabulary.from_text(bytes(reader.take(reader.u64())).decode("utf-8"), frozen=True)
    common = _read_index(reader, params, "common", rebuild)
    repo = _read_index(reader, params, "repo", rebuild) if flags & FLAG_HAS_REPO else None
    logger.info(f"Datastore cargado desde {path}: {len(vocab)} tokens de vocabulario")
    return Datastore(common=common, vocab=vocab, params=params, repo=repo)


def file_digest(path: Union[str, Path]) -> str:
    """SHA-256 del contenido de un artefacto"""
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()
