"""
Manifest de una ejecución de benchmark
"""

import json
import logging
from datetime import datetime
from pathlib import Path
from typing import Dict, List, Optional, Union

from pydantic import BaseModel, Field

logger = logging.getLogger(__name__)


class SampleResult(BaseModel):
    config: str
    sample: str
    seed: int
    L: int
    F: int
    acceptance_length: float
    decoding_speed: float
    speedup: Optional[float] = None
    equivalent: bool
    output_sha256: str


class SampleFailure(BaseModel):
    config: str
    sample: str
    error: str


class ConfigAggregate(BaseModel):
    samples: int
    mean_acceptance_length: float
    pooled_acceptance_length: float
    mean_decoding_speed: float
    mean_speedup: Optional[float] = None
    equivalent: bool


class RunManifest(BaseModel):
    """Instantánea reproducible: configuración, digests de artefactos y resultados"""

    created_at: str = Field(default_factory=lambda: datetime.now().isoformat())
    suite: str
    ablation: str = "none"
    config: Dict
    datastore_sha256: str
    model_sha256: str
    samples: List[SampleResult] = Field(default_factory=list)
    failures: List[SampleFailure] = Field(default_factory=list)
    aggregates: Dict[str, ConfigAggregate] = Field(default_factory=dict)

    def save(self, path: Union[str, Path]):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(self.model_dump_json(indent=2) + "\n")
        logger.info(f"Manifest guardado en {path}")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "RunManifest":
        with open(path, "r", encoding="utf-8") as f:
            return cls.model_validate(json.load(f))


def aggregate(samples: List[SampleResult]) -> Dict[str, ConfigAggregate]:
    """Agregados por configuración, en orden de primera aparición"""
    grouped: Dict[str, List[SampleResult]] = {}
    for result in samples:
        grouped.setdefault(result.config, []).append(result)

    aggregates = {}
    for config, results in grouped.items():
        total_f = sum(r.F for r in results)
        speedups = [r.speedup for r in results if r.speedup is not None]
        aggregates[config] = ConfigAggregate(
            samples=len(results),
            mean_acceptance_length=sum(r.acceptance_length for r in results) / len(results),
            pooled_acceptance_length=sum(r.L for r in results) / total_f if total_f else 0.0,
            mean_decoding_speed=sum(r.decoding_speed for r in results) / len(results),
            mean_speedup=sum(speedups) / len(speedups) if speedups else None,
            equivalent=all(r.equivalent for r in results),
        )
    return aggregates
