"""
Tokenizador de referencia y vocabulario
Tokenización determinista sin pérdida que preserva la estructura de líneas,
de modo que las claves del datastore y la lógica de skip token estén bien definidas
"""

import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, List, Optional, Sequence, Tuple, Union

from services.errors import UnknownTokenError

logger = logging.getLogger(__name__)

# Maximal munch: identificadores, espacios sin salto de línea, salto de línea, cualquier otro carácter
TOKEN_PATTERN = re.compile(r"[A-Za-z0-9_]+|[^\S\n]+|\n|.", re.DOTALL)

_ESCAPES = {"\\": "\\\\", "\n": "\\n", "\t": "\\t", "\r": "\\r"}
_UNESCAPES = {"\\": "\\", "n": "\n", "t": "\t", "r": "\r"}


def escape_surface(surface: str) -> str:
    return "".join(_ESCAPES.get(ch, ch) for ch in surface)


def unescape_surface(line: str) -> str:
    out = []
    chars = iter(line)
    for ch in chars:
        if ch == "\\":
            nxt = next(chars, "")
            out.append(_UNESCAPES.get(nxt, nxt))
        else:
            out.append(ch)
    return "".join(out)


def surface_flags(surface: str) -> Tuple[bool, bool]:
    """(is_whitespace, contains_newline) derivados solo de la superficie"""
    return surface.isspace(), "\n" in surface


class Vocabulary:
    """Biyección entre TokenId y superficies distintas"""

    def __init__(self, surfaces: Optional[Iterable[str]] = None, frozen: bool = False):
        self._surfaces: List[str] = []
        self._ids: dict = {}
        self._flags: List[Tuple[bool, bool]] = []
        for surface in surfaces or ():
            self._append(surface)
        self._frozen = frozen

    def _append(self, surface: str) -> int:
        if not surface:
            raise ValueError("Las superficies del vocabulario no pueden ser vacías")
        if surface in self._ids:
            raise ValueError(f"Superficie duplicada en vocabulario: {surface!r}")
        token_id = len(self._surfaces)
        self._surfaces.append(surface)
        self._ids[surface] = token_id
        self._flags.append(surface_flags(surface))
        return token_id

    @property
    def frozen(self) -> bool:
        return self._frozen

    def freeze(self) -> "Vocabulary":
        self._frozen = True
        return self

    def __len__(self) -> int:
        return len(self._surfaces)

    def __contains__(self, surface: str) -> bool:
        return surface in self._ids

    def surface(self, token_id: int) -> str:
        return self._surfaces[token_id]

    def flags(self, token_id: int) -> Tuple[bool, bool]:
        return self._flags[token_id]

    def lookup(self, surface: str, allow_new: bool = False) -> int:
        """
        Obtiene el id de una superficie

        Args:
            surface: Superficie del token
            allow_new: Añade ids nuevos aunque el vocabulario esté congelado
                (ruta de generación: identificadores nuevos nunca fallan)

        Returns:
            TokenId de la superficie
        """
        token_id = self._ids.get(surface)
        if token_id is not None:
            return token_id
        if self._frozen and not allow_new:
            raise UnknownTokenError(surface)
        return self._append(surface)

    def copy(self, frozen: Optional[bool] = None) -> "Vocabulary":
        return Vocabulary(self._surfaces, frozen=self._frozen if frozen is None else frozen)

    def is_prefix_of(self, other: "Vocabulary") -> bool:
        return len(self) <= len(other) and all(
            other.surface(i) == surface for i, surface in enumerate(self._surfaces)
        )

    def to_text(self) -> str:
        """Una superficie escapada por línea; número de línea = TokenId"""
        return "".join(escape_surface(surface) + "\n" for surface in self._surfaces)

    @classmethod
    def from_text(cls, text: str, frozen: bool = True) -> "Vocabulary":
        lines = text.split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        return cls((unescape_surface(line) for line in lines), frozen=frozen)

    def save(self, path: Union[str, Path]):
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(self.to_text())
        logger.info(f"Vocabulario guardado en {path} ({len(self)} tokens)")

    @classmethod
    def load(cls, path: Union[str, Path], frozen: bool = True) -> "Vocabulary":
        with open(path, "r", encoding="utf-8", newline="") as f:
            return cls.from_text(f.read(), frozen=frozen)


@dataclass(frozen=True)
class TokenSequence:
    """Secuencia inmutable de TokenId con metadatos por token"""

    tokens: Tuple[int, ...]
    is_whitespace: Tuple[bool, ...]
    contains_newline: Tuple[bool, ...]

    def __post_init__(self):
        if not (len(self.tokens) == len(self.is_whitespace) == len(self.contains_newline)):
            raise ValueError("tokens y metadatos deben tener la misma longitud")

    @classmethod
    def empty(cls) -> "TokenSequence":
        return cls((), (), ())

    @classmethod
    def from_ids(cls, ids: Iterable[int], vocab: Vocabulary) -> "TokenSequence":
        tokens = tuple(int(i) for i in ids)
        flags = [vocab.flags(i) for i in tokens]
        return cls(tokens, tuple(f[0] for f in flags), tuple(f[1] for f in flags))

    def __len__(self) -> int:
        return len(self.tokens)

    def __iter__(self) -> Iterator[int]:
        return iter(self.tokens)

    def __getitem__(self, item):
        if isinstance(item, slice):
            return TokenSequence(self.tokens[item], self.is_whitespace[item], self.contains_newline[item])
        return self.tokens[item]

    def __add__(self, other: "TokenSequence") -> "TokenSequence":
        return TokenSequence(
            self.tokens + other.tokens,
            self.is_whitespace + other.is_whitespace,
            self.contains_newline + other.contains_newline,
        )


TokenLike = Union[TokenSequence, Sequence[int]]


def as_ids(context: TokenLike) -> Tuple[int, ...]:
    """Ids de una TokenSequence o de cualquier secuencia de enteros"""
    if isinstance(context, TokenSequence):
        return context.tokens
    return tuple(context)


def split_surfaces(text: str) -> List[str]:
    return TOKEN_PATTERN.findall(text)


def tokenize(text: str, vocab: Vocabulary, allow_new: bool = False) -> TokenSequence:
    """
    Tokeniza texto con el tokenizador de referencia

    Args:
        text: Texto UTF-8
        vocab: Vocabulario; se extiende si no está congelado
        allow_new: Permite ids nuevos sobre un vocabulario congelado

    Returns:
        TokenSequence cuya concatenación de superficies es exactamente text
    """
    ids = [vocab.lookup(surface, allow_new=allow_new) for surface in split_surfaces(text)]
    return TokenSequence.from_ids(ids, vocab)


def detokenize(sequence: TokenLike, vocab: Vocabulary) -> str:
    return "".join(vocab.surface(i) for i in as_ids(sequence))


def is_skip_position(context: TokenSequence) -> bool:
    """
    True si el próximo token sería el primer token no blanco de su línea

    Args:
        context: Contexto actual

    Returns:
        True si el contexto está vacío o termina en un token con salto de línea
        seguido solo de tokens de espacio en blanco
    """
    return skip_position_from_flags(context.is_whitespace, context.contains_newline)


def skip_position_from_flags(is_whitespace: Sequence[bool], contains_newline: Sequence[bool]) -> bool:
    for i in range(len(is_whitespace) - 1, -1, -1):
        if contains_newline[i]:
            return True
        if not is_whitespace[i]:
            return False
    return True
