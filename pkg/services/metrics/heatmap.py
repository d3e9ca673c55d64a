"""
Mapas de calor por posición de token: tasa de recuperación exitosa y tasa de
espacios en blanco según (línea, índice de token dentro de la línea)
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from services.tokenization.tokenizer import TokenSequence

logger = logging.getLogger(__name__)

HEATMAP_COLUMNS = ["line_index", "token_index", "retrieval_success_rate", "whitespace_rate"]
DEFAULT_MAX_TOKEN_INDEX = 12


@dataclass
class _Cell:
    total: int = 0
    retrieved: int = 0
    whitespace: int = 0


def token_positions(output: TokenSequence) -> List[Tuple[int, int]]:
    """(línea, índice dentro de la línea) de cada token; la línea 0 es donde empieza la salida"""
    positions = []
    line, index = 0, 0
    for newline in output.contains_newline:
        positions.append((line, index))
        if newline:
            line, index = line + 1, 0
        else:
            index += 1
    return positions


@dataclass
class HeatmapBuilder:
    """Acumula generaciones y produce la tabla larga del mapa de calor"""

    max_token_index: int = DEFAULT_MAX_TOKEN_INDEX
    max_line_index: Optional[int] = None
    _cells: Dict[Tuple[int, int], _Cell] = field(default_factory=dict, init=False, repr=False)
    _lines_seen: int = field(default=0, init=False, repr=False)

    def __post_init__(self):
        if self.max_token_index < 1:
            raise ValueError(f"max_token_index debe ser >= 1: {self.max_token_index}")
        if self.max_line_index is not None and self.max_line_index < 1:
            raise ValueError(f"max_line_index debe ser >= 1: {self.max_line_index}")

    def add(self, output: TokenSequence, token_from_draft: Sequence[bool]):
        """
        Registra una generación

        Args:
            output: Tokens generados (sin el prompt)
            token_from_draft: Procedencia de cada token (True = borrador aceptado)
        """
        if len(token_from_draft) != len(output):
            raise ValueError("token_from_draft debe tener un valor por token generado")
        for (line, index), drafted, blank in zip(token_positions(output), token_from_draft, output.is_whitespace):
            self._lines_seen = max(self._lines_seen, line + 1)
            if index >= self.max_token_index:
                continue
            if self.max_line_index is not None and line >= self.max_line_index:
                continue
            cell = self._cells.setdefault((line, index), _Cell())
            cell.total += 1
            cell.retrieved += int(drafted)
            cell.whitespace += int(blank)

    @property
    def line_count(self) -> int:
        return self.max_line_index if self.max_line_index is not None else self._lines_seen

    def to_frame(self) -> pd.DataFrame:
        """Exactamente max_token_index filas por línea; celdas sin datos quedan vacías"""
        rows = []
        for line in range(self.line_count):
            for index in range(self.max_token_index):
                cell = self._cells.get((line, index))
                if cell is None or cell.total == 0:
                    rows.append((line, index, np.nan, np.nan))
                else:
                    rows.append((line, index, cell.retrieved / cell.total, cell.whitespace / cell.total))
        return pd.DataFrame(rows, columns=HEATMAP_COLUMNS)

    def write_csv(self, path: Union[str, Path]) -> pd.DataFrame:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        frame = self.to_frame()
        frame.to_csv(path, index=False, float_format="%.6f", na_rep="", lineterminator="\n")
        logger.info(f"Mapa de calor escrito en {path}: {self.line_count} líneas x {self.max_token_index} tokens")
        return frame


def position_success_rates(
    token_from_draft: Sequence[bool],
    token_at_skip: Sequence[bool],
) -> Tuple[float, float]:
    """
    Tasa de tokens recuperados en posiciones de skip token y en el resto

    Returns:
        (tasa en skip, tasa fuera de skip); nan si no hay tokens de una clase
    """
    drafted = np.asarray(token_from_draft, dtype=bool)
    skip = np.asarray(token_at_skip, dtype=bool)
    if drafted.shape != skip.shape:
        raise ValueError("token_from_draft y token_at_skip deben tener la misma longitud")
    at_skip = drafted[skip].mean() if skip.any() else np.nan
    elsewhere = drafted[~skip].mean() if (~skip).any() else np.nan
    return float(at_skip), float(elsewhere)
