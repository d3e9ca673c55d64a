"""
Configuración de logging: texto plano o JSON estructurado
"""

import logging
import sys
from typing import Optional

from pythonjsonlogger import jsonlogger

TEXT_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
JSON_FORMAT = "%(asctime)s %(levelname)s %(name)s %(message)s"


def configure_logging(level: str = "INFO", fmt: str = "text", stream: Optional[object] = None) -> logging.Handler:
    """
    Instala un único handler en el logger raíz

    Args:
        level: Nivel de logging (DEBUG, INFO, ...)
        fmt: "text" o "json"
        stream: Destino del handler (stderr por defecto)

    Returns:
        El handler instalado
    """
    handler = logging.StreamHandler(stream or sys.stderr)
    if fmt == "json":
        handler.setFormatter(jsonlogger.JsonFormatter(JSON_FORMAT))
    else:
        handler.setFormatter(logging.Formatter(TEXT_FORMAT))

    root = logging.getLogger()
    for existing in list(root.handlers):
        root.removeHandler(existing)
    root.addHandler(handler)
    root.setLevel(level.upper())
    return handler
