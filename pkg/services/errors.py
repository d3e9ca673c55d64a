"""
Jerarquía de excepciones de RetroDraft
"""


class RetroDraftError(Exception):
    """Error base del sistema"""


class UnknownTokenError(RetroDraftError):
    """Superficie no presente en un vocabulario congelado"""

    def __init__(self, surface: str):
        super().__init__(f"Token desconocido en vocabulario congelado: {surface!r}")
        self.surface = surface


class EmptyCorpusError(RetroDraftError):
    """El corpus a indexar no contiene ningún token"""

    def __init__(self, message: str = "empty corpus"):
        super().__init__(message)


class DatastoreIOError(RetroDraftError):
    """Fallo de lectura al ingerir un repositorio o cargar un artefacto"""


class DatastoreFormatError(RetroDraftError):
    """Archivo de datastore corrupto o con magic incorrecto"""


class ModelFormatError(RetroDraftError):
    """Archivo de modelo corrupto o con magic incorrecto"""


class EmptyDraftError(RetroDraftError):
    """Se pidió construir un Trie sin resultados de recuperación"""

    def __init__(self, message: str = "ambos resultados de recuperación están vacíos"):
        super().__init__(message)


class MismatchedPredictionsError(RetroDraftError):
    """Las predicciones no corresponden al árbol verificado"""


class MismatchedOutputsError(RetroDraftError):
    """La salida especulativa difiere de la salida autorregresiva"""

    def __init__(self, position: int, expected: int, actual: int):
        super().__init__(
            f"Divergencia en la posición {position}: autorregresivo={expected}, especulativo={actual}"
        )
        self.position = position
        self.expected = expected
        self.actual = actual


class SuiteError(RetroDraftError):
    """Suite de benchmark vacía o mal formada"""
