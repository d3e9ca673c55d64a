"""Bucle de decodificación especulativa y línea base autorregresiva"""

from .config import ABLATION_COMPONENTS, EngineConfig, ablation_config, ablation_name
from .decoder import (
    SpeculativeEngine,
    autoregressive_generate,
    generate,
    resolve_vocab,
    sample_seed,
)

__all__ = [
    'ABLATION_COMPONENTS',
    'EngineConfig',
    'SpeculativeEngine',
    'ablation_config',
    'ablation_name',
    'autoregressive_generate',
    'generate',
    'resolve_vocab',
    'sample_seed',
]
