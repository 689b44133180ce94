"""
Command-line module for the brainmatch pipeline.

Subcommands:
- match: ingest components and a template, rank components, export CSV/JSON
  and optionally the selected component as NIfTI
- bench: time scoring with one worker lane vs N lanes
- synth: write a deterministic synthetic component set to disk

Exit codes: 0 success, 2 usage or input error, 1 internal failure.
"""

import argparse
import logging
import os
import sys
import uuid
from datetime import datetime
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

from pydantic import BaseModel, ConfigDict, ValidationError

from brainmatch import config
from brainmatch.benchmark import BenchmarkResult, format_table, run_benchmark
from brainmatch.config import parse_dims
from brainmatch.logging_config import get_logger_with_run, setup_logging
from brainmatch.matcher import extract_network
from brainmatch.metrics import MetricError, MetricKind, Template
from brainmatch.nifti_io import NiftiError, NiftiHeader, Volume, load_nifti, save_volume
from brainmatch.pardata import ExecutionConfig, PardataError
from brainmatch.reports import MatchDocument, write_json, write_report_csv
from brainmatch.synth import InvalidSpec, SynthSpec, generate

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_INPUT = 2

NIFTI_SUFFIXES = (".nii", ".nii.gz")

logger = logging.getLogger(__name__)


class InputError(Exception):
    """Raised for missing or inconsistent command-line inputs."""

    pass


class RunConfig(BaseModel):
    """Settings of one CLI invocation, flags layered over config defaults."""

    model_config = ConfigDict(frozen=True)

    command: str
    components_path: Optional[Path] = None
    template_path: Optional[Path] = None
    metric: MetricKind = MetricKind(config.METRIC)
    workers: int = config.WORKERS
    partitions: int = config.PARTITIONS
    zscore: bool = config.ZSCORE
    dice_threshold: float = config.DICE_THRESHOLD
    template_threshold: float = config.TEMPLATE_THRESHOLD
    out_csv: Optional[Path] = None
    out_json: Optional[Path] = None
    out_nii: Optional[Path] = None
    out_dir: Optional[Path] = None
    seed: int = config.SEED
    n_components: int = config.N_COMPONENTS
    dims: Tuple[int, int, int] = parse_dims(config.DIMS_TEXT)
    noise_sigma: float = config.NOISE_SIGMA
    planted_index: Optional[int] = None
    reps: int = config.BENCH_REPS

    @property
    def partition_count(self) -> Optional[int]:
        return self.partitions or None

    def execution(self) -> ExecutionConfig:
        return ExecutionConfig(workers=self.workers)

    def synth_spec(self) -> SynthSpec:
        return SynthSpec(
            seed=self.seed,
            n_components=self.n_components,
            dims=self.dims,
            noise_sigma=self.noise_sigma,
            planted_index=self.planted_index,
            template_threshold=self.template_threshold,
        )


class SynthManifest(BaseModel):
    """Echo of the spec plus the files written by synth."""

    model_config = ConfigDict(frozen=True)

    spec: SynthSpec
    components: List[str]
    template: str


class BenchmarkDocument(BaseModel):
    model_config = ConfigDict(frozen=True)

    run_id: str
    source: str
    result: BenchmarkResult


# --- Input loading ---


def _load_file(path: Path) -> Tuple[List[Volume], NiftiHeader]:
    try:
        result = load_nifti(path)
    except NiftiError as e:
        raise InputError(f"{path}: {e}") from e
    return result.volumes, result.header


def load_components(
    path: Path, exclude: Optional[Path] = None
) -> Tuple[List[Volume], List[NiftiHeader]]:
    """
    Loads candidate components from a 4D file or a directory of NIfTI files.

    Directory entries are read in lexicographic order; non-NIfTI files and
    the template file itself are skipped.

    Returns:
        Tuple[List[Volume], List[NiftiHeader]]: Components and, per component,
            the header of the file it came from
    """
    if not path.exists():
        raise InputError(f"Components path not found: {path}")

    if path.is_dir():
        skip = exclude.resolve() if exclude is not None else None
        files = sorted(
            p for p in path.iterdir()
            if p.is_file() and p.name.endswith(NIFTI_SUFFIXES) and p.resolve() != skip
        )
        if not files:
            raise InputError(f"No .nii or .nii.gz files in {path}")
    else:
        files = [path]

    volumes, headers = [], []
    for file in files:
        file_volumes, header = _load_file(file)
        volumes.extend(file_volumes)
        headers.extend([header] * len(file_volumes))
    logger.info(f"Loaded {len(volumes)} component(s) from {len(files)} file(s) under {path}")
    return volumes, headers


def load_template(path: Path, threshold: float) -> Template:
    """First volume of the template file, binarized at threshold for Dice."""
    if not path.exists():
        raise InputError(f"Template path not found: {path}")
    volumes, _ = _load_file(path)
    if len(volumes) > 1:
        logger.warning(f"{path.name} holds {len(volumes)} volumes; using the first as template")
    try:
        return Template(volumes[0], threshold)
    except ValueError as e:
        raise InputError(str(e)) from e


# --- Commands ---


def cmd_match(cfg: RunConfig, run_id: str = "N/A") -> int:
    """
    Ranks components against the template and exports the results.

    Returns:
        int: Exit code
    """
    run_logger = get_logger_with_run(__name__, run_id)
    if cfg.components_path is None:
        raise InputError("match needs --components")
    if cfg.template_path is None:
        raise InputError("match needs --template")

    template = load_template(cfg.template_path, cfg.template_threshold)
    components, headers = load_components(cfg.components_path, exclude=cfg.template_path)

    run_logger.info(f"Matching {len(components)} component(s) with {cfg.metric.value}")
    report, selected = extract_network(
        components,
        template,
        cfg.metric,
        cfg.execution(),
        partition_count=cfg.partition_count,
        f_threshold=cfg.dice_threshold,
        zscore=cfg.zscore,
    )

    try:
        if cfg.out_csv:
            write_report_csv(report, cfg.out_csv)
        if cfg.out_json:
            document = MatchDocument(
                run_id=run_id,
                components_path=str(cfg.components_path),
                template_path=str(cfg.template_path),
                report=report,
            )
            write_json(document, cfg.out_json)
        if cfg.out_nii:
            save_volume(cfg.out_nii, selected, headers[report.selected])
            run_logger.info(f"Wrote selected component to {cfg.out_nii}")
    except OSError as e:
        raise InputError(f"Cannot write output: {e}") from e

    best = report.scores[0]
    print(
        f"Selected component {best.component_index} ({best.component_label}): "
        f"{cfg.metric.value}={best.value:.9f}, rank 1 of {report.component_count} "
        f"[{report.elapsed_seconds:.4f}s, {report.workers} worker(s)]"
    )
    return EXIT_OK


def cmd_bench(cfg: RunConfig, run_id: str = "N/A") -> int:
    """
    Times scoring with 1 worker lane and with cfg.workers lanes.

    Uses --components/--template when given, otherwise a synthetic workload.

    Returns:
        int: Exit code
    """
    run_logger = get_logger_with_run(__name__, run_id)
    if cfg.components_path is not None:
        if cfg.template_path is None:
            raise InputError("bench with --components also needs --template")
        template = load_template(cfg.template_path, cfg.template_threshold)
        components, _ = load_components(cfg.components_path, exclude=cfg.template_path)
        source = str(cfg.components_path)
    else:
        spec = cfg.synth_spec()
        components, template = generate(spec)
        source = f"synth(seed={spec.seed}, n={spec.n_components}, dims={spec.dims})"

    run_logger.info(f"Benchmark workload: {source}")
    result = run_benchmark(
        components,
        template,
        cfg.metric,
        cfg.workers,
        cfg.reps,
        partition_count=cfg.partition_count,
        f_threshold=cfg.dice_threshold,
        zscore=cfg.zscore,
    )

    document = BenchmarkDocument(run_id=run_id, source=source, result=result)
    print(format_table(result))
    if cfg.out_json:
        try:
            write_json(document, cfg.out_json)
        except OSError as e:
            raise InputError(f"Cannot write {cfg.out_json}: {e}") from e
    else:
        print(document.model_dump_json(indent=2))
    return EXIT_OK


def cmd_synth(spec: SynthSpec, out_dir: Path) -> int:
    """
    Writes comp_<i>.nii.gz for every component, template.nii.gz and manifest.json.

    Returns:
        int: Exit code
    """
    components, template = generate(spec)
    width = max(3, len(str(spec.n_components - 1)))

    names = []
    try:
        for index, volume in enumerate(components):
            name = f"comp_{index:0{width}d}.nii.gz"
            save_volume(out_dir / name, volume)
            names.append(name)
        save_volume(out_dir / "template.nii.gz", template.volume)
        manifest = SynthManifest(spec=spec, components=names, template="template.nii.gz")
        write_json(manifest, out_dir / "manifest.json")
    except OSError as e:
        raise InputError(f"Cannot write to {out_dir}: {e}") from e

    print(f"Wrote {len(names)} component(s), template.nii.gz and manifest.json to {out_dir}")
    return EXIT_OK


# --- Argument parsing ---


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise ValueError(f"must be >= 1, got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="brainmatch",
        description="Template matching of brain network components over a partitioned dataset engine.",
    )
    parser.add_argument("--log-level", default=config.LOG_LEVEL, help="Console log level")
    subparsers = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--components", type=Path, help="4D NIfTI file or directory of NIfTI files")
    common.add_argument("--template", type=Path, help="Template NIfTI file")
    common.add_argument(
        "--metric", choices=[kind.value for kind in MetricKind], default=MetricKind(config.METRIC).value
    )
    common.add_argument("--workers", type=_positive_int, default=config.WORKERS)
    common.add_argument(
        "--partitions", type=_positive_int, default=config.PARTITIONS or None,
        help="Dataset partitions (default: one per worker)",
    )
    common.add_argument("--zscore", action="store_true", default=config.ZSCORE)
    common.add_argument("--dice-threshold", type=float, default=config.DICE_THRESHOLD)
    common.add_argument("--template-threshold", type=float, default=config.TEMPLATE_THRESHOLD)
    common.add_argument("--out-json", type=Path)

    synthetic = argparse.ArgumentParser(add_help=False)
    synthetic.add_argument("--seed", type=int, default=config.SEED)
    synthetic.add_argument("--n-components", type=int, default=config.N_COMPONENTS)
    synthetic.add_argument("--dims", type=parse_dims, default=parse_dims(config.DIMS_TEXT))
    synthetic.add_argument("--noise-sigma", type=float, default=config.NOISE_SIGMA)
    synthetic.add_argument("--planted-index", type=int)

    match = subparsers.add_parser("match", parents=[common], help="Rank components against a template")
    match.add_argument("--out-csv", type=Path)
    match.add_argument("--out-nii", type=Path, help="Write the selected component here")

    bench = subparsers.add_parser(
        "bench", parents=[common, synthetic], help="Serial vs parallel scoring benchmark"
    )
    bench.add_argument("--reps", type=_positive_int, default=config.BENCH_REPS)

    synth = subparsers.add_parser("synth", parents=[synthetic], help="Write a synthetic component set")
    synth.add_argument("--template-threshold", type=float, default=config.TEMPLATE_THRESHOLD)
    synth.add_argument("--out-dir", type=Path, required=True)

    return parser


def run_config_from_args(args: argparse.Namespace) -> RunConfig:
    values = {
        "command": args.command,
        "components_path": getattr(args, "components", None),
        "template_path": getattr(args, "template", None),
        "out_csv": getattr(args, "out_csv", None),
        "out_json": getattr(args, "out_json", None),
        "out_nii": getattr(args, "out_nii", None),
        "out_dir": getattr(args, "out_dir", None),
        "planted_index": getattr(args, "planted_index", None),
        "partitions": getattr(args, "partitions", None) or 0,
    }
    for name in (
        "metric", "workers", "zscore", "dice_threshold", "template_threshold",
        "seed", "n_components", "dims", "noise_sigma", "reps",
    ):
        if hasattr(args, name):
            values[name] = getattr(args, name)
    return RunConfig(**values)


def _log_file_name() -> Optional[str]:
    # Insert a per-run timestamp before the extension, e.g. brainmatch_2025-11-16_13-40-57.log
    if not config.LOG_FILE:
        return None
    root, ext = os.path.splitext(config.LOG_FILE)
    return f"{root}_{datetime.now().strftime('%Y-%m-%d_%H-%M-%S')}{ext or '.log'}"


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Parses arguments, runs one subcommand and maps failures to exit codes.
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_INPUT

    setup_logging(log_level=args.log_level, log_file=_log_file_name(), log_dir=config.LOG_DIR)
    run_id = str(uuid.uuid4())
    run_logger = get_logger_with_run(__name__, run_id)
    run_logger.info(f"Starting {args.command}")

    try:
        cfg = run_config_from_args(args)
        if cfg.command == "match":
            return cmd_match(cfg, run_id)
        if cfg.command == "bench":
            return cmd_bench(cfg, run_id)
        if cfg.out_dir is None:
            raise InputError("synth needs --out-dir")
        return cmd_synth(cfg.synth_spec(), cfg.out_dir)
    except (InputError, NiftiError, MetricError, PardataError, InvalidSpec, ValidationError) as e:
        run_logger.error(f"{type(e).__name__}: {e}")
        print(f"brainmatch: error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as e:
        run_logger.error(f"Internal failure: {e}", exc_info=True)
        print(f"brainmatch: internal error: {e}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
