"""Script para verificar la configuración de entorno y del motor"""
import sys
from pathlib import Path

from pydantic import ValidationError

# Agregar path del proyecto
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from config.settings import settings  # noqa: E402
from services.engine.config import EngineConfig  # noqa: E402


def check_engine_defaults() -> list:
    """Construye el EngineConfig por defecto; devuelve los errores de validación"""
    try:
        cfg = EngineConfig()
    except ValidationError as e:
        return [f"EngineConfig: {err['loc']} {err['msg']}" for err in e.errors()]
    print("Motor (valores por defecto):")
    for key, value in cfg.snapshot().items():
        print(f"  {key}: {value}")
    return []


def main() -> int:
    print("=" * 60)
    print("Validacion de Configuracion")
    print("=" * 60)
    print()

    is_valid, errors = settings.validate()
    if is_valid:
        settings.print_config()
        print()
    errors += check_engine_defaults()

    if errors:
        print("[ERROR] Problemas encontrados:")
        print()
        for error in errors:
            print(f"  - {error}")
        print()
        print("Por favor, revisa tu archivo .env y corrige los errores")
        return 1

    print()
    params = settings.datastore_params()
    if params.n_max < EngineConfig().n_max:
        print(f"[AVISO] DATASTORE_N_MAX={params.n_max} limita el n_max del motor")

    missing = [p for p in (settings.DATASTORE_PATH, settings.MODEL_PATH) if not Path(p).exists()]
    print("=" * 60)
    if missing:
        print("[OK] Configuracion valida. Falta construir: " + ", ".join(missing))
    else:
        print("[OK] Configuracion valida. Todo listo para generar.")
    print("=" * 60)
    return 0


if __name__ == "__main__":
    sys.exit(main())
