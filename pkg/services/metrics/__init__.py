"""
Módulo de métricas: contabilidad por generación, agregados de benchmark y mapas de calor
"""

from .generation import (
    GenerationMetrics,
    MetricsReport,
    RETRIEVAL_SOURCES,
    StepTrace,
    check_equivalence,
    compute_metrics,
    first_divergence,
    write_traces,
)
from .heatmap import HEATMAP_COLUMNS, HeatmapBuilder, position_success_rates, token_positions
from .metrics_collector import MetricsCollector, SAMPLE_COLUMNS, TIMING_COLUMNS

__all__ = [
    'GenerationMetrics',
    'HEATMAP_COLUMNS',
    'HeatmapBuilder',
    'MetricsCollector',
    'MetricsReport',
    'RETRIEVAL_SOURCES',
    'SAMPLE_COLUMNS',
    'StepTrace',
    'TIMING_COLUMNS',
    'check_equivalence',
    'compute_metrics',
    'first_divergence',
    'position_success_rates',
    'token_positions',
    'write_traces',
]
