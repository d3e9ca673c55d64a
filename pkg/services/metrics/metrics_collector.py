"""
Colector de Métricas del benchmark
Registra los resultados por muestra y configuración y calcula agregados
"""

import json
from typing import Dict, List, Optional
from datetime import datetime
from pathlib import Path
import logging

import pandas as pd

from services.metrics.generation import GenerationMetrics

logger = logging.getLogger(__name__)

# Columnas que dependen solo de (manifest, semilla): reproducibles byte a byte
SAMPLE_COLUMNS = [
    'config',
    'sample',
    'L',
    'F',
    'acceptance_length',
    'drafted_tokens',
    'cache_hits',
    'datastore_searches',
    'datastore_hits',
    'skipped_missing',
    'skipped_probability',
    'equivalent',
    'output_sha256',
]

# Columnas de reloj: varían entre ejecuciones
TIMING_COLUMNS = [
    'config',
    'sample',
    'wall_ms',
    'decoding_speed',
    'ar_wall_ms',
    'ar_decoding_speed',
    'speedup',
    'cache_ms',
    'datastore_ms',
]

AGGREGATED_FIELDS = ['acceptance_length', 'decoding_speed', 'speedup']


class MetricsCollector:
    """Colector de métricas por muestra del benchmark"""

    def __init__(self, metrics_file: Optional[str] = None):
        """
        Inicializa el colector de métricas

        Args:
            metrics_file: Archivo JSON donde persistir las métricas (None = solo memoria)
        """
        self.metrics_file = Path(metrics_file) if metrics_file else None
        self.metrics = {'samples': [], 'system_stats': {}, 'aggregated': {}, 'failures': []}
        if self.metrics_file is not None:
            self.metrics_file.parent.mkdir(parents=True, exist_ok=True)
            self.load_metrics()

    def load_metrics(self):
        """Carga métricas desde archivo si existe"""
        if self.metrics_file is None or not self.metrics_file.exists():
            return
        try:
            with open(self.metrics_file, 'r', encoding='utf-8') as f:
                self.metrics = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            logger.warning(f"Error cargando métricas: {e}")
            self.metrics = {'samples': [], 'system_stats': {}, 'aggregated': {}, 'failures': []}

    def save_metrics(self):
        """Guarda métricas en archivo"""
        if self.metrics_file is None:
            return
        try:
            with open(self.metrics_file, 'w', encoding='utf-8') as f:
                json.dump(self.metrics, f, indent=2, ensure_ascii=False)
        except OSError as e:
            logger.error(f"Error guardando métricas: {e}")

    def record_sample(
        self,
        config: str,
        sample: str,
        spec: GenerationMetrics,
        ar: GenerationMetrics,
        equivalent: bool,
        output_sha256: str,
    ) -> Dict:
        """
        Registra una muestra del benchmark

        Args:
            config: Nombre de la configuración (p. ej. "baseline", "full")
            sample: Nombre de la muestra de la suite
            spec: Métricas de la decodificación especulativa
            ar: Métricas de la decodificación autorregresiva
            equivalent: Si ambas salidas fueron idénticas
            output_sha256: Digest de la salida especulativa

        Returns:
            El registro añadido
        """
        speedup = ar.decoding_speed / spec.decoding_speed if spec.decoding_speed > 0 else None
        record = {
            'timestamp': datetime.now().isoformat(),
            'config': config,
            'sample': sample,
            'L': spec.L,
            'F': spec.F,
            'acceptance_length': spec.acceptance_length,
            'drafted_tokens': spec.drafted_tokens,
            'cache_hits': spec.cache_hits,
            'datastore_searches': spec.datastore_searches,
            'datastore_hits': spec.datastore_hits,
            'skipped_missing': spec.skipped_missing,
            'skipped_probability': spec.skipped_probability,
            'equivalent': equivalent,
            'output_sha256': output_sha256,
            'wall_ms': spec.wall_ms,
            'decoding_speed': spec.decoding_speed,
            'ar_wall_ms': ar.wall_ms,
            'ar_decoding_speed': ar.decoding_speed,
            'speedup': speedup,
            'cache_ms': spec.cache_ms,
            'datastore_ms': spec.datastore_ms,
        }
        self.metrics['samples'].append(record)
        self.save_metrics()
        return record

    def record_failure(self, config: str, sample: str, error: str) -> Dict:
        """Registra una muestra que no pudo ejecutarse; no entra en los agregados"""
        record = {'config': config, 'sample': sample, 'error': error}
        self.metrics.setdefault('failures', []).append(record)
        self.save_metrics()
        return record

    def record_system_stats(self, datastore_tokens: int, repo_tokens: int, vocab_size: int):
        """
        Registra estadísticas de los artefactos usados

        Args:
            datastore_tokens: Tokens indexados en D_c
            repo_tokens: Tokens indexados en D_r
            vocab_size: Tamaño del vocabulario
        """
        self.metrics['system_stats'] = {
            'timestamp': datetime.now().isoformat(),
            'datastore_tokens': datastore_tokens,
            'repo_tokens': repo_tokens,
            'vocab_size': vocab_size,
        }
        self.save_metrics()

    def to_frame(self) -> pd.DataFrame:
        columns = list(dict.fromkeys(SAMPLE_COLUMNS + TIMING_COLUMNS))
        return pd.DataFrame(self.metrics.get('samples', []), columns=columns)

    def calculate_aggregated_metrics(self) -> Dict:
        """
        Calcula media, mínimo, máximo y mediana por configuración

        Returns:
            Diccionario {config: {campo: {mean, min, max, median}}}
        """
        frame = self.to_frame()
        if frame.empty:
            return {'total_samples': 0, 'message': 'No hay muestras registradas'}

        aggregated = {'total_samples': len(frame), 'configs': {}}
        for config, group in frame.groupby('config', sort=False):
            stats = {'samples': len(group), 'equivalent': bool(group['equivalent'].all())}
            for name in AGGREGATED_FIELDS:
                values = pd.to_numeric(group[name], errors='coerce').dropna()
                stats[name] = {
                    'mean': float(values.mean()) if len(values) else None,
                    'min': float(values.min()) if len(values) else None,
                    'max': float(values.max()) if len(values) else None,
                    'median': float(values.median()) if len(values) else None,
                }
            # L/F agregado sobre todas las muestras de la configuración
            total_f = int(group['F'].sum())
            stats['pooled_acceptance_length'] = int(group['L'].sum()) / total_f if total_f else 0.0
            aggregated['configs'][config] = stats

        self.metrics['aggregated'] = aggregated
        self.save_metrics()
        return aggregated

    def write_csvs(self, samples_path: Path, timings_path: Path):
        """Escribe las columnas deterministas y las de reloj en archivos separados"""
        frame = self.to_frame()
        for path, columns in ((samples_path, SAMPLE_COLUMNS), (timings_path, TIMING_COLUMNS)):
            path = Path(path)
            path.parent.mkdir(parents=True, exist_ok=True)
            frame[columns].to_csv(path, index=False, float_format="%.6f", lineterminator="\n")
        logger.info(f"CSV del benchmark escritos: {samples_path}, {timings_path}")

    def get_metrics_report(self) -> Dict:
        """
        Genera un reporte completo de métricas

        Returns:
            Diccionario con reporte completo
        """
        aggregated = self.calculate_aggregated_metrics()
        return {
            'timestamp': datetime.now().isoformat(),
            'system_stats': self.metrics.get('system_stats', {}),
            'sample_metrics': aggregated,
            'recent_samples': self.metrics['samples'][-10:],
            'failures': self.metrics.get('failures', []),
        }

    def clear_metrics(self):
        """Limpia todas las métricas"""
        self.metrics = {'samples': [], 'system_stats': {}, 'aggregated': {}, 'failures': []}
        self.save_metrics()

    @property
    def samples(self) -> List[Dict]:
        return self.metrics.get('samples', [])
