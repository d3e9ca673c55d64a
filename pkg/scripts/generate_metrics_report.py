"""
Script para generar el reporte de métricas de un benchmark de RetroDraft
Lee el metrics.json que escribe el comando bench
"""

import os
import sys
from pathlib import Path
import json
from datetime import datetime

# Agregar paths para imports
parent_dir = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, parent_dir)

from config.settings import settings
from services.metrics.metrics_collector import MetricsCollector


def format_float(value, decimals=3):
    """Formatea un valor float"""
    if value is None:
        return "N/A"
    return f"{value:.{decimals}f}"


def print_report(report: dict):
    """Imprime un reporte formateado"""
    print("\n" + "=" * 80)
    print("REPORTE DE MÉTRICAS - RetroDraft")
    print("=" * 80)
    print(f"Fecha: {datetime.now().strftime('%Y-%m-%d %H:%M:%S')}\n")

    # Estadísticas de los artefactos
    system_stats = report.get('system_stats', {})
    print("[ARTEFACTOS]")
    print("-" * 80)
    print(f"  Tokens en D_c:             {system_stats.get('datastore_tokens', 0):,}")
    print(f"  Tokens en D_r:             {system_stats.get('repo_tokens', 0):,}")
    print(f"  Vocabulario:               {system_stats.get('vocab_size', 0):,}")
    print()

    failures = report.get('failures', [])
    if failures:
        print(f"[FALLOS] ({len(failures)} muestras no ejecutadas)")
        print("-" * 80)
        for failure in failures:
            print(f"  {failure.get('config')}/{failure.get('sample')}: {failure.get('error')}")
        print()

    sample_metrics = report.get('sample_metrics', {})
    total_samples = sample_metrics.get('total_samples', 0)
    if total_samples == 0:
        print("[ADVERTENCIA] No hay muestras registradas aun.")
        print("   Ejecuta el comando bench para generar metricas.")
        print()
        return

    print(f"[MUESTRAS] (Total: {total_samples})")
    print("-" * 80)
    labels = {
        'acceptance_length': ('Longitud de aceptacion', 3),
        'decoding_speed': ('ms por token', 4),
        'speedup': ('Speedup', 3),
    }
    for config, stats in sample_metrics.get('configs', {}).items():
        equivalent = "[OK]" if stats.get('equivalent') else "[DIVERGENCIA]"
        print(f"\n  {config} ({stats.get('samples', 0)} muestras) {equivalent}")
        print(f"    L/F agregado: {format_float(stats.get('pooled_acceptance_length'))}")
        for name, (label, decimals) in labels.items():
            values = stats.get(name, {})
            print(f"    {label}:")
            print(f"      Promedio:  {format_float(values.get('mean'), decimals)}")
            print(f"      Mínimo:    {format_float(values.get('min'), decimals)}")
            print(f"      Máximo:    {format_float(values.get('max'), decimals)}")
            print(f"      Mediana:   {format_float(values.get('median'), decimals)}")

    print("\n" + "=" * 80)
    print()


def main():
    """Función principal"""
    metrics_file = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(settings.BENCH_OUTPUT_DIR) / "metrics.json"
    if not metrics_file.exists():
        print(f"[ERROR] No existe {metrics_file}; ejecuta primero el comando bench")
        return 1

    print("Generando reporte de métricas...")
    metrics_collector = MetricsCollector(str(metrics_file))
    report = metrics_collector.get_metrics_report()
    print_report(report)

    # Guardar reporte en JSON
    report_file = metrics_file.with_name("metrics_report.json")
    with open(report_file, 'w', encoding='utf-8') as f:
        json.dump(report, f, indent=2, ensure_ascii=False)

    print(f"[OK] Reporte guardado en: {report_file}")
    print()
    return 0


if __name__ == "__main__":
    sys.exit(main())
