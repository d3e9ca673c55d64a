"""
Configuración centralizada de RetroDraft
Maneja rutas de artefactos, parámetros de construcción y logging desde variables de entorno
"""

import os
from pathlib import Path
from typing import List, Tuple
import logging

logger = logging.getLogger(__name__)

# Cargar variables de entorno desde .env
try:
    from dotenv import load_dotenv
    # Cargar .env desde el directorio raíz del proyecto
    env_path = Path(__file__).parent.parent / ".env"
    if env_path.exists():
        load_dotenv(env_path)
        logger.info(f"Cargado archivo .env desde: {env_path}")
    else:
        logger.debug(f"Archivo .env no encontrado en: {env_path}")
        load_dotenv()
except ImportError:
    logger.warning("python-dotenv no está instalado. Usando variables de entorno del sistema.")


def _split_list(value: str) -> List[str]:
    return [item.strip() for item in value.split(",") if item.strip()]


class Settings:
    """Configuración centralizada del sistema"""

    # Artefactos
    DATA_DIR: str = os.getenv("RETRODRAFT_DATA_DIR", "./data")
    DATASTORE_PATH: str = os.getenv("DATASTORE_PATH", "./data/datastore.fcds")
    MODEL_PATH: str = os.getenv("MODEL_PATH", "./data/model.fcng")
    BENCH_OUTPUT_DIR: str = os.getenv("BENCH_OUTPUT_DIR", "./data/bench")

    # Construcción del datastore
    SOURCE_EXTENSIONS: List[str] = _split_list(
        os.getenv("SOURCE_EXTENSIONS", ".py,.pyi,.js,.ts,.java,.c,.h,.cpp,.go,.rs,.rb")
    )
    DATASTORE_N_MAX: int = int(os.getenv("DATASTORE_N_MAX", "16"))
    DATASTORE_CONT_LEN: int = int(os.getenv("DATASTORE_CONT_LEN", "10"))
    DATASTORE_CAP_POSITIONS: int = int(os.getenv("DATASTORE_CAP_POSITIONS", "256"))

    # Modelo de referencia
    NGRAM_ORDER: int = int(os.getenv("NGRAM_ORDER", "3"))

    # Benchmark
    BENCH_WORKERS: int = int(os.getenv("BENCH_WORKERS", "1"))

    # Logging
    LOG_LEVEL: str = os.getenv("LOG_LEVEL", "INFO").upper()
    LOG_FORMAT: str = os.getenv("LOG_FORMAT", "text").lower()

    @classmethod
    def validate(cls) -> Tuple[bool, List[str]]:
        """
        Valida que las configuraciones críticas sean coherentes

        Returns:
            Tuple (is_valid, list_of_errors)
        """
        errors = []

        if cls.DATASTORE_N_MAX < 1:
            errors.append(f"DATASTORE_N_MAX debe ser >= 1: {cls.DATASTORE_N_MAX}")
        if cls.DATASTORE_CONT_LEN < 1:
            errors.append(f"DATASTORE_CONT_LEN debe ser >= 1: {cls.DATASTORE_CONT_LEN}")
        if cls.DATASTORE_CAP_POSITIONS < 1:
            errors.append(f"DATASTORE_CAP_POSITIONS debe ser >= 1: {cls.DATASTORE_CAP_POSITIONS}")
        if cls.NGRAM_ORDER < 1:
            errors.append(f"NGRAM_ORDER debe ser >= 1: {cls.NGRAM_ORDER}")
        if cls.BENCH_WORKERS < 1:
            errors.append(f"BENCH_WORKERS debe ser >= 1: {cls.BENCH_WORKERS}")

        if not cls.SOURCE_EXTENSIONS:
            errors.append("SOURCE_EXTENSIONS está vacío; build_repo no ingeriría ningún archivo.")
        for ext in cls.SOURCE_EXTENSIONS:
            if not ext.startswith("."):
                errors.append(f"Extensión inválida en SOURCE_EXTENSIONS: {ext}")

        if cls.LOG_LEVEL not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
            errors.append(f"LOG_LEVEL inválido: {cls.LOG_LEVEL}")
        if cls.LOG_FORMAT not in ("text", "json"):
            errors.append(f"LOG_FORMAT inválido (text|json): {cls.LOG_FORMAT}")

        return len(errors) == 0, errors

    @classmethod
    def datastore_params(cls):
        """Parámetros de construcción del datastore según el entorno"""
        from services.datastore.index import DatastoreParams

        return DatastoreParams(
            n_max=cls.DATASTORE_N_MAX,
            cont_len=cls.DATASTORE_CONT_LEN,
            cap_positions=cls.DATASTORE_CAP_POSITIONS,
        )

    @classmethod
    def print_config(cls):
        """Imprime la configuración actual"""
        print("\n=== Configuración de RetroDraft ===")
        print("\nArtefactos:")
        print(f"  Datos: {cls.DATA_DIR}")
        print(f"  Datastore: {cls.DATASTORE_PATH}")
        print(f"  Modelo: {cls.MODEL_PATH}")
        print(f"  Bench: {cls.BENCH_OUTPUT_DIR}")
        print("\nDatastore:")
        print(f"  n_max: {cls.DATASTORE_N_MAX}")
        print(f"  Continuación: {cls.DATASTORE_CONT_LEN} tokens")
        print(f"  Posiciones por clave: {cls.DATASTORE_CAP_POSITIONS}")
        print(f"  Extensiones: {', '.join(cls.SOURCE_EXTENSIONS)}")
        print("\nModelo de referencia:")
        print(f"  Orden n-grama: {cls.NGRAM_ORDER}")
        print("\nBenchmark:")
        print(f"  Workers: {cls.BENCH_WORKERS}")
        print("\nLogging:")
        print(f"  Nivel: {cls.LOG_LEVEL}")
        print(f"  Formato: {cls.LOG_FORMAT}")

        is_valid, errors = cls.validate()
        print(f"\nValidacion: {'[OK]' if is_valid else '[ERROR]'}")
        if errors:
            print("Errores:")
            for error in errors:
                print(f"  - {error}")


# Instancia global de configuración
settings = Settings()
