"""
Interfaz de línea de comandos de RetroDraft

    python -m services.cli.main build-datastore --repo DIR --common FILE ... --out PATH
    python -m services.cli.main train-model --datastore PATH --out PATH
    python -m services.cli.main generate --datastore PATH --model PATH --prompt FILE
    python -m services.cli.main bench --suite DIR --ablate all
    python -m services.cli.main heatmap --suite DIR --max-token-index 12
    python -m services.cli.main sweep --suite DIR --param p --values 0.1 0.5 0.9

Códigos de salida: 0 correcto, 2 entrada o uso inválido, 3 divergencia con la
decodificación autorregresiva.
"""

import argparse
import itertools
import json
import logging
import sys
import time
from pathlib import Path
from typing import Dict, List, Literal, Optional, Sequence, get_args, get_origin

import pandas as pd
from dotenv import dotenv_values
from pydantic import ValidationError

# Agregar path del proyecto para ejecución directa
project_root = Path(__file__).parent.parent.parent
if str(project_root) not in sys.path:
    sys.path.insert(0, str(project_root))

from config.logging_config import configure_logging
from config.settings import settings
from services.cli.manifest import RunManifest, SampleFailure, SampleResult, aggregate
from services.cli.suite import (
    generation_vocab,
    load_suite,
    output_digest,
    outputs_match,
    read_text,
    run_autoregressive,
    run_suite,
)
from services.datastore.builder import build_common, build_repo, iter_source_files, read_exclusion_file
from services.datastore.index import Datastore, DatastoreParams, SourceIndex
from services.datastore.storage import file_digest, load_datastore, save_datastore
from services.engine.config import EngineConfig, ablation_config, ablation_name
from services.engine.decoder import SpeculativeEngine, autoregressive_generate
from services.errors import DatastoreIOError, MismatchedOutputsError, RetroDraftError, SuiteError
from services.metrics.generation import check_equivalence, write_traces
from services.metrics.heatmap import DEFAULT_MAX_TOKEN_INDEX, HeatmapBuilder, position_success_rates
from services.metrics.metrics_collector import MetricsCollector
from services.model.ngram_model import ReferenceNgramModel, train_ngram
from services.tokenization.tokenizer import Vocabulary, detokenize, tokenize

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_MISMATCH = 3

SWEEP_PARAMS = ("p", "l", "alpha", "beta")


# ---------------------------------------------------------------------------
# Configuración del motor: archivo key=value + flags
# ---------------------------------------------------------------------------

def add_engine_arguments(parser: argparse.ArgumentParser):
    """Un flag por campo de EngineConfig; None significa "no indicado" """
    group = parser.add_argument_group("Motor")
    group.add_argument("--config", help="Archivo key=value con campos de EngineConfig")
    for name, info in EngineConfig.model_fields.items():
        flag = "--" + name.replace("_", "-")
        annotation = info.annotation
        if annotation is bool:
            group.add_argument(flag, dest=name, action=argparse.BooleanOptionalAction, default=None, help=info.description)
        elif get_origin(annotation) is Literal:
            group.add_argument(flag, dest=name, choices=get_args(annotation), default=None, help=info.description)
        else:
            group.add_argument(flag, dest=name, type=annotation, default=None, help=info.description)


def read_config_file(path: Optional[str]) -> Dict[str, str]:
    if not path:
        return {}
    if not Path(path).is_file():
        raise FileNotFoundError(f"Archivo de configuración no encontrado: {path}")
    return {key: value for key, value in dotenv_values(path).items() if value is not None}


def engine_config(args: argparse.Namespace, base: Optional[Dict] = None) -> EngineConfig:
    """Base (manifest) < archivo de configuración < flags"""
    values = dict(base or {})
    values.update(read_config_file(getattr(args, "config", None)))
    for name in EngineConfig.model_fields:
        value = getattr(args, name, None)
        if value is not None:
            values[name] = value
    return EngineConfig(**values)


# ---------------------------------------------------------------------------
# Artefactos
# ---------------------------------------------------------------------------

def load_artifacts(args: argparse.Namespace):
    datastore = load_datastore(args.datastore)
    model = ReferenceNgramModel.load(args.model)
    return datastore, model, generation_vocab(model, datastore)


def _collect_files(paths: Sequence[str], extensions: Sequence[str]) -> List[Path]:
    files = []
    for raw in paths:
        path = Path(raw)
        if path.is_dir():
            files.extend(iter_source_files(path, extensions))
        else:
            files.append(path)
    return files


def cmd_build_datastore(args: argparse.Namespace) -> int:
    if not args.repo and not args.common:
        raise DatastoreIOError("build-datastore necesita --repo o --common")
    params = DatastoreParams(n_max=args.n_max, cont_len=args.cont_len, cap_positions=args.cap_positions)
    extensions = args.extensions or settings.SOURCE_EXTENSIONS
    vocab = Vocabulary()
    started = time.perf_counter()

    common = SourceIndex.empty(params, "common")
    if args.common:
        texts = [read_text(path) for path in _collect_files(args.common, extensions)]
        common = build_common(texts, vocab, params)

    repo = None
    if args.repo:
        spans = read_exclusion_file(args.exclude) if args.exclude else []
        repo = build_repo(args.repo, spans, vocab, params, extensions=extensions)

    vocab.freeze()
    datastore = Datastore(common=common, vocab=vocab, params=params, repo=repo)
    save_datastore(datastore, args.out)
    vocab.save(f"{args.out}.vocab")

    elapsed = time.perf_counter() - started
    tokens = common.token_count + (repo.token_count if repo is not None else 0)
    print(f"tokens: {tokens}")
    print(f"vocabulario: {len(vocab)}")
    print(f"tiempo de construcción: {elapsed:.3f} s")
    return EXIT_OK


def cmd_train_model(args: argparse.Namespace) -> int:
    if not args.corpus and not args.datastore:
        raise SuiteError("train-model necesita --corpus o --datastore")

    datastore = load_datastore(args.datastore) if args.datastore else None
    # el vocabulario del datastore es prefijo del del modelo
    vocab = datastore.vocab.copy(frozen=False) if datastore is not None else Vocabulary()

    if args.corpus:
        documents = [tokenize(read_text(path), vocab).tokens for path in _collect_files(args.corpus, settings.SOURCE_EXTENSIONS)]
    else:
        documents = list(datastore.common.documents())
        if datastore.repo is not None:
            documents.extend(datastore.repo.documents())

    end_token = vocab.lookup(args.end_token) if args.end_token else None
    vocab.freeze()
    model = train_ngram(documents, order=args.order, end_token=end_token, vocab=vocab)
    model.save(args.out)
    print(f"modelo: orden {args.order}, {len(model.counts)} contextos, vocabulario {len(vocab)}")
    return EXIT_OK


def cmd_generate(args: argparse.Namespace) -> int:
    cfg = engine_config(args)
    datastore, model, vocab = load_artifacts(args)
    vocab = vocab.copy()
    prompt = tokenize(read_text(args.prompt), vocab, allow_new=True)

    with SpeculativeEngine(model, datastore, cfg, vocab=vocab, record_drafts=bool(args.dump_drafts)) as engine:
        output, metrics = engine.generate(prompt)
        if args.dump_session:
            engine.dump_session(args.dump_session)
        drafts = engine.drafts

    if args.trace:
        write_traces(metrics, args.trace)
    if args.dump_drafts:
        Path(args.dump_drafts).parent.mkdir(parents=True, exist_ok=True)
        with open(args.dump_drafts, "w", encoding="utf-8", newline="\n") as f:
            for step, tree in enumerate(drafts):
                f.write(json.dumps({"step": step, **tree}) + "\n")

    text = detokenize(output, vocab)
    if args.json:
        print(json.dumps({"text": text, "metrics": metrics.to_dict()}, ensure_ascii=False))
    else:
        sys.stdout.write(text)
        if text and not text.endswith("\n"):
            sys.stdout.write("\n")

    if args.verify_equivalence:
        ar_output, ar_metrics = autoregressive_generate(model, prompt, cfg.max_new_tokens, vocab=vocab)
        check_equivalence(ar_output, output)
        logger.info(f"Equivalencia verificada: {len(output)} tokens, aceptación media {metrics.acceptance_length:.3f}")
    return EXIT_OK


def _bench_configs(base: EngineConfig, ablate: str) -> List[tuple]:
    if ablate == "none":
        return [("default", base)]
    if ablate == "all":
        combos = itertools.product((False, True), repeat=3)
        ordered = sorted(combos, key=lambda c: (sum(c), [not v for v in c]))
        return [(ablation_name(*c), ablation_config(base, *c)) for c in ordered]
    toggles = {"datastore": (True, False, False), "strategy": (False, True, False), "cache": (False, False, True)}
    return [
        (ablation_name(False, False, False), ablation_config(base, False, False, False)),
        (ablation_name(*toggles[ablate]), ablation_config(base, *toggles[ablate])),
    ]


def cmd_bench(args: argparse.Namespace) -> int:
    base_values, ablate = None, args.ablate
    if args.manifest:
        previous = RunManifest.load(args.manifest)
        base_values = previous.config
        ablate = ablate or previous.ablation
    ablate = ablate or "none"
    cfg = engine_config(args, base_values)

    samples = load_suite(args.suite)
    datastore, model, vocab = load_artifacts(args)
    out_dir = Path(args.out)
    collector = MetricsCollector(str(out_dir / "metrics.json"))
    collector.clear_metrics()
    collector.record_system_stats(
        datastore.common.token_count,
        datastore.repo.token_count if datastore.repo is not None else 0,
        len(vocab),
    )

    ar_runs = run_autoregressive(samples, model, datastore, cfg.max_new_tokens, vocab, keep_going=True)
    results: List[SampleResult] = []
    failures: List[SampleFailure] = []
    mismatches = 0
    for name, config in _bench_configs(cfg, ablate):
        logger.info(f"Configuración {name}: {len(samples)} muestras")
        runs = run_suite(samples, model, datastore, config, vocab, workers=args.workers, keep_going=True)
        for run, ar in zip(runs, ar_runs):
            if ar.failed or run.failed:
                error = ar.error if ar.failed else run.error
                collector.record_failure(name, run.sample, error)
                failures.append(SampleFailure(config=name, sample=run.sample, error=error))
                continue
            equivalent = outputs_match(ar.output, run.output)
            if not equivalent:
                mismatches += 1
                logger.error(f"Divergencia en {name}/{run.sample}")
            digest = output_digest(run.output)
            record = collector.record_sample(name, run.sample, run.metrics, ar.metrics, equivalent, digest)
            results.append(SampleResult(
                config=name,
                sample=run.sample,
                seed=run.seed,
                L=run.metrics.L,
                F=run.metrics.F,
                acceptance_length=run.metrics.acceptance_length,
                decoding_speed=run.metrics.decoding_speed,
                speedup=record["speedup"],
                equivalent=equivalent,
                output_sha256=digest,
            ))

    collector.calculate_aggregated_metrics()
    collector.write_csvs(out_dir / "samples.csv", out_dir / "timings.csv")
    manifest = RunManifest(
        suite=str(args.suite),
        ablation=ablate,
        config=cfg.snapshot(),
        datastore_sha256=file_digest(args.datastore),
        model_sha256=file_digest(args.model),
        samples=results,
        failures=failures,
        aggregates=aggregate(results),
    )
    manifest.save(out_dir / "manifest.json")

    for name, agg in manifest.aggregates.items():
        speedup = f"{agg.mean_speedup:.3f}x" if agg.mean_speedup is not None else "n/a"
        print(f"{name:<28} aceptación {agg.mean_acceptance_length:.3f}  "
              f"{agg.mean_decoding_speed:.4f} ms/token  speedup {speedup}")

    if mismatches:
        print(f"error: {mismatches} muestras divergen de la decodificación autorregresiva", file=sys.stderr)
        return EXIT_MISMATCH
    if failures:
        print(f"error: {len(failures)} ejecuciones fallidas; informe parcial en {out_dir}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


def cmd_heatmap(args: argparse.Namespace) -> int:
    cfg = engine_config(args)
    samples = load_suite(args.suite)
    datastore, model, vocab = load_artifacts(args)

    builder = HeatmapBuilder(max_token_index=args.max_token_index, max_line_index=args.max_line_index)
    drafted, at_skip = [], []
    for run in run_suite(samples, model, datastore, cfg, vocab, workers=args.workers):
        builder.add(run.output, run.metrics.token_from_draft)
        drafted.extend(run.metrics.token_from_draft)
        at_skip.extend(run.metrics.token_at_skip)

    builder.write_csv(args.out)
    skip_rate, other_rate = position_success_rates(drafted, at_skip)
    logger.info(f"Tasa de recuperación: skip token {skip_rate:.4f}, resto {other_rate:.4f}")
    print(f"heatmap: {args.out}")
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = engine_config(args)
    samples = load_suite(args.suite)
    datastore, model, vocab = load_artifacts(args)

    rows = []
    for raw in args.values:
        value = int(raw) if args.param == "l" else float(raw)
        point = EngineConfig(**{**cfg.snapshot(), args.param: value})
        runs = run_suite(samples, model, datastore, point, vocab, workers=args.workers)
        total_l = sum(r.metrics.L for r in runs)
        total_f = sum(r.metrics.F for r in runs)
        rows.append({
            "param": args.param,
            "value": value,
            "samples": len(runs),
            "mean_acceptance_length": sum(r.metrics.acceptance_length for r in runs) / len(runs),
            "pooled_acceptance_length": total_l / total_f if total_f else 0.0,
        })
        logger.info(f"{args.param}={value}: aceptación media {rows[-1]['mean_acceptance_length']:.3f}")

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(rows).to_csv(out, index=False, float_format="%.6f", lineterminator="\n")
    print(f"sweep: {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser y punto de entrada
# ---------------------------------------------------------------------------

def _add_artifact_arguments(parser: argparse.ArgumentParser):
    parser.add_argument("--datastore", default=settings.DATASTORE_PATH, help="Archivo .fcds")
    parser.add_argument("--model", default=settings.MODEL_PATH, help="Archivo .fcng")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="retrodraft", description="Decodificación especulativa basada en recuperación")
    parser.add_argument("--log-level", default=settings.LOG_LEVEL)
    parser.add_argument("--log-format", default=settings.LOG_FORMAT, choices=("text", "json"))
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-datastore", help="Construye D_r y/o D_c")
    p.add_argument("--repo", help="Raíz del repositorio (D_r)")
    p.add_argument("--common", nargs="+", help="Archivos o directorios del corpus común (D_c)")
    p.add_argument("--exclude", help="Archivo de exclusiones ruta<TAB>inicio<TAB>fin")
    p.add_argument("--out", default=settings.DATASTORE_PATH)
    p.add_argument("--n-max", type=int, default=settings.DATASTORE_N_MAX)
    p.add_argument("--cont-len", type=int, default=settings.DATASTORE_CONT_LEN)
    p.add_argument("--cap-positions", type=int, default=settings.DATASTORE_CAP_POSITIONS)
    p.add_argument("--extensions", nargs="+", help="Extensiones a ingerir (por defecto SOURCE_EXTENSIONS)")
    p.set_defaults(func=cmd_build_datastore)

    p = sub.add_parser("train-model", help="Entrena el modelo n-grama de referencia")
    p.add_argument("--corpus", nargs="+", help="Archivos o directorios de entrenamiento")
    p.add_argument("--datastore", help="Datastore cuyo vocabulario (y corpus, sin --corpus) se reutiliza")
    p.add_argument("--order", type=int, default=settings.NGRAM_ORDER)
    p.add_argument("--end-token", help="Superficie del token de fin")
    p.add_argument("--out", default=settings.MODEL_PATH)
    p.set_defaults(func=cmd_train_model)

    p = sub.add_parser("generate", help="Genera a partir de un prompt")
    _add_artifact_arguments(p)
    p.add_argument("--prompt", required=True, help="Archivo con el prompt")
    p.add_argument("--json", action="store_true", help="Emite texto y GenerationMetrics como JSON")
    p.add_argument("--verify-equivalence", action="store_true", help="Compara con la decodificación autorregresiva")
    p.add_argument("--trace", help="Exporta una traza JSON por paso")
    p.add_argument("--dump-drafts", help="Exporta el árbol de borradores de cada paso")
    p.add_argument("--dump-session", help="Vuelca caché y missing table al terminar")
    add_engine_arguments(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("bench", help="Benchmark y ablaciones sobre una suite")
    _add_artifact_arguments(p)
    p.add_argument("--suite", required=True)
    p.add_argument("--ablate", choices=("none", "datastore", "cache", "strategy", "all"))
    p.add_argument("--manifest", help="Reutiliza la configuración de un manifest previo")
    p.add_argument("--out", default=settings.BENCH_OUTPUT_DIR)
    p.add_argument("--workers", type=int, default=settings.BENCH_WORKERS)
    add_engine_arguments(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("heatmap", help="Mapa de calor por posición de token")
    _add_artifact_arguments(p)
    p.add_argument("--suite", required=True)
    p.add_argument("--max-token-index", type=int, default=DEFAULT_MAX_TOKEN_INDEX)
    p.add_argument("--max-line-index", type=int)
    p.add_argument("--out", default=str(Path(settings.BENCH_OUTPUT_DIR) / "heatmap.csv"))
    p.add_argument("--workers", type=int, default=settings.BENCH_WORKERS)
    add_engine_arguments(p)
    p.set_defaults(func=cmd_heatmap)

    p = sub.add_parser("sweep", help="Barrido de un hiperparámetro")
    _add_artifact_arguments(p)
    p.add_argument("--suite", required=True)
    p.add_argument("--param", required=True, choices=SWEEP_PARAMS)
    p.add_argument("--values", required=True, nargs="+")
    p.add_argument("--out", default=str(Path(settings.BENCH_OUTPUT_DIR) / "sweep.csv"))
    p.add_argument("--workers", type=int, default=settings.BENCH_WORKERS)
    add_engine_arguments(p)
    p.set_defaults(func=cmd_sweep)
    return parser


def _validation_message(error: ValidationError) -> str:
    return "; ".join(
        f"{'.'.join(str(part) for part in item['loc'])}: {item['msg']}" for item in error.errors()
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.log_level, args.log_format)
    try:
        return args.func(args)
    except MismatchedOutputsError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_MISMATCH
    except ValidationError as e:
        print(f"error: configuración inválida: {_validation_message(e)}", file=sys.stderr)
        return EXIT_INPUT
    except (RetroDraftError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
