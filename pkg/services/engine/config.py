"""
Configuración del motor de decodificación especulativa
"""

from typing import Dict, Literal

from pydantic import BaseModel, ConfigDict, Field


class EngineConfig(BaseModel):
    """
    Hiperparámetros de una sesión de decodificación

    Los valores por defecto son los publicados (l=50, p=0.5, alpha=beta=1,
    n_max=16, 512 tokens nuevos); nunca se leen del entorno.
    """

    model_config = ConfigDict(extra="forbid", validate_assignment=True)

    l: int = Field(50, ge=0, description="Secuencias necesarias para activar la caché")  # noqa: E741
    p: float = Field(0.5, ge=0.0, le=1.0, description="Probabilidad de recuperar en posiciones de skip token")
    alpha: float = Field(1.0, ge=0.0)
    beta: float = Field(1.0, ge=0.0)
    k: int = Field(10, ge=1, description="Caminos raíz-hoja seleccionados del Trie")
    draft_budget: int = Field(64, ge=1, description="Máximo de nodos del árbol de borradores")
    n_max: int = Field(16, ge=1)
    cont_len: int = Field(10, ge=1)
    chunk: int = Field(20, ge=1, description="Tamaño de bloque de la salida insertado en la caché")
    max_new_tokens: int = Field(512, ge=0)
    rng_seed: int = Field(0, ge=0)
    persist_session_state: bool = False

    max_cache_sequences: int = Field(1024, ge=1)
    cache_count_side: Literal["repo", "common"] = "repo"
    flush_on_finish: bool = False

    # Ejes de ablación
    use_cache: bool = True
    use_strategy: bool = True
    use_repo_datastore: bool = True
    parallel_retrieval: bool = True

    def snapshot(self) -> Dict:
        return self.model_dump()


# Componentes que activa cada configuración nombrada de ablación
ABLATION_COMPONENTS = ("datastore", "strategy", "cache")


def ablation_config(base: EngineConfig, datastore: bool, strategy: bool, cache: bool) -> EngineConfig:
    """
    Configuración de ablación sobre una base

    La línea base usa solo D_c, sin estrategia de recuperación y sin caché;
    cada componente activado se suma a ella.
    """
    return base.model_copy(
        update={
            "use_repo_datastore": datastore,
            "use_strategy": strategy,
            "use_cache": cache,
        }
    )


def ablation_name(datastore: bool, strategy: bool, cache: bool) -> str:
    enabled = [name for name, on in zip(ABLATION_COMPONENTS, (datastore, strategy, cache)) if on]
    if not enabled:
        return "baseline"
    if len(enabled) == len(ABLATION_COMPONENTS):
        return "full"
    return "".join(f"+{name}" for name in enabled)
