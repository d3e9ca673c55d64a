#!/usr/bin/env python3
"""
Script de verificación de setup de RetroDraft
Verifica que las dependencias estén instaladas y que los directorios de artefactos existan
"""

import sys
import importlib
import os
from pathlib import Path

# Agregar path del proyecto
sys.path.insert(0, str(Path(__file__).parent.parent))


def check_import(module_name, package_name=None):
    """Verifica si un módulo puede ser importado"""
    try:
        importlib.import_module(module_name)
        print(f"[OK] {package_name or module_name}")
        return True
    except ImportError as e:
        print(f"[ERROR] {package_name or module_name}: {e}")
        return False


def check_directories():
    """Verifica que los paquetes del sistema existan y crea el directorio de datos"""
    from config.settings import settings

    required_dirs = [
        'services',
        'services/tokenization',
        'services/datastore',
        'services/draft_cache',
        'services/draft_tree',
        'services/model',
        'services/engine',
        'services/metrics',
        'services/cli',
    ]

    all_exist = True
    for dir_path in required_dirs:
        if os.path.exists(dir_path):
            print(f"[OK] Directorio: {dir_path}")
        else:
            print(f"[ERROR] Directorio faltante: {dir_path}")
            all_exist = False

    Path(settings.DATA_DIR).mkdir(parents=True, exist_ok=True)
    print(f"[OK] Directorio de datos: {settings.DATA_DIR}")
    return all_exist


def check_artifacts():
    """Informa de los artefactos ya construidos"""
    from config.settings import settings

    print("\nArtefactos:")
    for label, path in (("Datastore", settings.DATASTORE_PATH), ("Modelo", settings.MODEL_PATH)):
        if Path(path).exists():
            print(f"[OK] {label}: {path}")
        else:
            print(f"[INFO] {label}: {path} aún no construido")


def main():
    """Función principal de verificación"""
    print("Verificando setup de RetroDraft\n")
    print("=" * 60)

    # Verificar dependencias
    print("\nDependencias Python:")
    print("-" * 60)

    dependencies = [
        ('numpy', 'NumPy'),
        ('pandas', 'pandas'),
        ('pydantic', 'Pydantic'),
        ('dotenv', 'python-dotenv'),
        ('pythonjsonlogger', 'python-json-logger'),
        ('pytest', 'pytest'),
    ]

    all_deps_ok = all([check_import(*dep) for dep in dependencies])

    # Verificar directorios
    print("\nEstructura de Directorios:")
    print("-" * 60)
    all_dirs_ok = all_deps_ok and check_directories()
    if all_deps_ok:
        check_artifacts()

    # Resumen
    print("\n" + "=" * 60)
    print("Resumen:")
    print("-" * 60)

    if all_deps_ok and all_dirs_ok:
        print("[OK] Setup completo! Sistema listo para usar.")
        return_code = 0
    else:
        print("[ERROR] Setup incompleto. Revisa los errores arriba.")
        return_code = 1

    print("\nSiguiente paso:")
    if not all_deps_ok:
        print("   pip install -r requirements.txt")
    else:
        print("   python -m services.cli.main build-datastore --common CORPUS_DIR")
        print("   python -m services.cli.main train-model --datastore ./data/datastore.fcds")

    return return_code


if __name__ == "__main__":
    sys.exit(main())
