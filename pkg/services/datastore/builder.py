"""
Construcción de las fuentes del datastore
D_c a partir de documentos de código común y D_r a partir de un repositorio,
excluyendo las porciones a generar para evitar fugas de datos
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

from services.datastore.index import DatastoreParams, SourceIndex
from services.errors import DatastoreIOError, EmptyCorpusError
from services.tokenization.tokenizer import Vocabulary, tokenize

logger = logging.getLogger(__name__)

DEFAULT_EXTENSIONS = (".py", ".pyi", ".js", ".ts", ".java", ".c", ".h", ".cpp", ".go", ".rs", ".rb")


@dataclass(frozen=True)
class ExcludedSpan:
    """Rango de bytes [start, end) de un archivo relativo a la raíz del repositorio"""

    path: str
    start: int
    end: int


def read_exclusion_file(path: Union[str, Path]) -> List[ExcludedSpan]:
    """
    Lee un archivo de exclusiones "ruta<TAB>byte_inicio<TAB>byte_fin" por línea

    Args:
        path: Ruta del archivo de exclusiones

    Returns:
        Lista de rangos excluidos
    """
    spans = []
    try:
        with open(path, "r", encoding="utf-8") as f:
            for line_no, line in enumerate(f, 1):
                line = line.rstrip("\n")
                if not line.strip() or line.startswith("#"):
                    continue
                parts = line.split("\t")
                if len(parts) != 3:
                    raise DatastoreIOError(f"Línea {line_no} de {path} mal formada: {line!r}")
                start, end = int(parts[1]), int(parts[2])
                if start < 0 or end < start:
                    raise DatastoreIOError(f"Rango inválido en línea {line_no} de {path}: {start}-{end}")
                spans.append(ExcludedSpan(Path(parts[0]).as_posix(), start, end))
    except OSError as e:
        raise DatastoreIOError(f"No se pudo leer el archivo de exclusiones {path}: {e}") from e
    except ValueError as e:
        raise DatastoreIOError(f"Offsets no numéricos en {path}: {e}") from e
    return spans


def cut_spans(data: bytes, spans: Sequence[Tuple[int, int]]) -> List[bytes]:
    """Segmentos de data que quedan tras eliminar los rangos (fusionados) excluidos"""
    segments, cursor = [], 0
    for start, end in sorted(spans):
        start, end = min(start, len(data)), min(end, len(data))
        if end <= cursor:
            continue
        start = max(start, cursor)
        if start > cursor:
            segments.append(data[cursor:start])
        cursor = end
    if cursor < len(data):
        segments.append(data[cursor:])
    return [segment for segment in segments if segment]


def build_common(files: Sequence[str], vocab: Vocabulary, params: Optional[DatastoreParams] = None) -> SourceIndex:
    """
    Construye D_c a partir de documentos de texto

    Args:
        files: Contenido de cada documento
        vocab: Vocabulario en modo construcción
        params: Parámetros del datastore

    Returns:
        SourceIndex de la fuente común
    """
    params = params or DatastoreParams()
    if not files:
        raise EmptyCorpusError()
    documents = [tokenize(text, vocab).tokens for text in files]
    index = SourceIndex.from_token_sequences(documents, params, source="common")
    logger.info(f"D_c construido: {len(files)} documentos, {index.token_count} tokens")
    return index


def iter_source_files(repo_root: Path, extensions: Iterable[str]) -> List[Path]:
    allowed = {ext.lower() for ext in extensions}
    return sorted(
        (p for p in repo_root.rglob("*") if p.is_file() and p.suffix.lower() in allowed),
        key=lambda p: p.relative_to(repo_root).as_posix(),
    )


def _decode_segment(segment: bytes, rel: str) -> str:
    """UTF-8 estricto; los bytes inválidos se sustituyen por U+FFFD con un aviso"""
    try:
        return segment.decode("utf-8")
    except UnicodeDecodeError as e:
        logger.warning(
            f"UTF-8 inválido en {rel} (byte {e.start} del segmento); "
            "se sustituye por U+FFFD. ¿Una exclusión corta un carácter multibyte?"
        )
        return segment.decode("utf-8", errors="replace")


def build_repo(
    repo_root: Union[str, Path],
    excluded_spans: Sequence[ExcludedSpan],
    vocab: Vocabulary,
    params: Optional[DatastoreParams] = None,
    extensions: Optional[Iterable[str]] = None,
) -> SourceIndex:
    """
    Construye D_r con los archivos fuente de un repositorio

    Args:
        repo_root: Directorio raíz del repositorio
        excluded_spans: Rangos de bytes a eliminar antes de tokenizar
        vocab: Vocabulario en modo construcción
        params: Parámetros del datastore
        extensions: Extensiones de archivo a ingerir

    Returns:
        SourceIndex del repositorio
    """
    params = params or DatastoreParams()
    root = Path(repo_root)
    if not root.is_dir():
        raise DatastoreIOError(f"El repositorio no es un directorio legible: {root}")

    spans_by_file: Dict[str, List[Tuple[int, int]]] = {}
    for span in excluded_spans:
        spans_by_file.setdefault(span.path, []).append((span.start, span.end))

    documents = []
    files = iter_source_files(root, extensions or DEFAULT_EXTENSIONS)
    for path in files:
        rel = path.relative_to(root).as_posix()
        try:
            data = path.read_bytes()
        except OSError as e:
            raise DatastoreIOError(f"Error leyendo {path}: {e}") from e
        # cada segmento superviviente es un documento propio: ningún n-grama cruza un hueco
        for segment in cut_spans(data, spans_by_file.get(rel, [])):
            documents.append(tokenize(_decode_segment(segment, rel), vocab).tokens)

    unused = set(spans_by_file) - {p.relative_to(root).as_posix() for p in files}
    for rel in sorted(unused):
        logger.warning(f"Exclusión para archivo no ingerido: {rel}")

    index = SourceIndex.from_token_sequences(documents, params, source="repo")
    logger.info(f"D_r construido desde {root}: {len(files)} archivos, {index.token_count} tokens")
    return index
