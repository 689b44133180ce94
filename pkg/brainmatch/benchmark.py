"""
Benchmark module for the brainmatch pipeline.

Times the scoring phase (file I/O excluded) with one worker lane and with N
lanes on the same in-memory workload, and reports median, min and max
wall-clock times and the resulting speedup.
"""

import logging
import statistics
import time
from typing import Optional, Sequence, Tuple

from pydantic import BaseModel, ConfigDict, model_validator

from brainmatch.matcher import score_components
from brainmatch.metrics import MetricKind, Template
from brainmatch.nifti_io import Volume
from brainmatch.pardata import ExecutionConfig

# Configure logging
logger = logging.getLogger(__name__)

# Published single-node timings: parallel pipeline vs plain serial loop
PUBLISHED_SERIAL_SECONDS = 23.86625409
PUBLISHED_PARALLEL_SECONDS = 6.437999964

TIMING_BASIS = "wall clock, scoring only (I/O excluded)"


class BenchmarkResult(BaseModel):
    """Serial-vs-parallel timings of one workload."""

    model_config = ConfigDict(frozen=True)

    serial_seconds: float
    parallel_seconds: float
    workers: int
    speedup: float
    component_count: int
    dims: Tuple[int, int, int]
    repetitions: int
    metric: MetricKind = MetricKind.SSD
    serial_min: Optional[float] = None
    serial_max: Optional[float] = None
    parallel_min: Optional[float] = None
    parallel_max: Optional[float] = None
    timing_basis: str = TIMING_BASIS

    @model_validator(mode="after")
    def _check_times(self) -> "BenchmarkResult":
        if self.serial_seconds <= 0 or self.parallel_seconds <= 0:
            raise ValueError("benchmark times must be positive")
        expected = self.serial_seconds / self.parallel_seconds
        if abs(self.speedup - expected) > 1e-9 * max(1.0, expected):
            raise ValueError(f"speedup {self.speedup} disagrees with times ({expected})")
        return self

    @classmethod
    def from_timings(
        cls,
        serial: Sequence[float],
        parallel: Sequence[float],
        *,
        workers: int,
        component_count: int,
        dims: Tuple[int, int, int],
        metric: MetricKind = MetricKind.SSD,
    ) -> "BenchmarkResult":
        """Summarizes repeated timings by their medians."""
        if not serial or not parallel:
            raise ValueError("need at least one serial and one parallel timing")
        serial_median = statistics.median(serial)
        parallel_median = statistics.median(parallel)
        return cls(
            serial_seconds=serial_median,
            parallel_seconds=parallel_median,
            workers=workers,
            speedup=serial_median / parallel_median,
            component_count=component_count,
            dims=dims,
            repetitions=min(len(serial), len(parallel)),
            metric=metric,
            serial_min=min(serial),
            serial_max=max(serial),
            parallel_min=min(parallel),
            parallel_max=max(parallel),
        )

    @property
    def serial_throughput(self) -> float:
        return 1.0 / self.serial_seconds

    @property
    def parallel_throughput(self) -> float:
        return 1.0 / self.parallel_seconds


def time_scoring(
    components: Sequence[Volume],
    template: Template,
    metric: MetricKind,
    cfg: ExecutionConfig,
    *,
    partition_count: Optional[int] = None,
    f_threshold: float = 0.0,
    zscore: bool = False,
) -> float:
    """Wall-clock seconds of one score_components call."""
    start = time.perf_counter()
    score_components(
        components,
        template,
        metric,
        cfg,
        partition_count=partition_count,
        f_threshold=f_threshold,
        zscore=zscore,
    )
    return time.perf_counter() - start


def run_benchmark(
    components: Sequence[Volume],
    template: Template,
    metric: MetricKind,
    workers: int,
    repetitions: int,
    *,
    partition_count: Optional[int] = None,
    f_threshold: float = 0.0,
    zscore: bool = False,
) -> BenchmarkResult:
    """
    Times the workload with 1 lane and with `workers` lanes.

    One untimed warm-up runs per setting; timed repetitions then alternate
    serial and parallel so drift affects both equally.

    Args:
        components: In-memory candidate volumes
        template: Network template
        metric: Metric to score with
        workers: Lane count of the parallel run
        repetitions: Timed runs per setting
        partition_count: Partitions of the parallel run (default: workers)

    Returns:
        BenchmarkResult: Median/min/max times and speedup
    """
    if repetitions < 1:
        raise ValueError(f"repetitions must be >= 1, got: {repetitions}")

    serial_cfg = ExecutionConfig(workers=1)
    parallel_cfg = ExecutionConfig(workers=workers)
    options = dict(f_threshold=f_threshold, zscore=zscore)

    logger.info(
        f"Benchmarking {len(components)} component(s), metric={metric.value}, "
        f"workers=1 vs {workers}, {repetitions} repetition(s)"
    )
    time_scoring(components, template, metric, serial_cfg, partition_count=1, **options)
    time_scoring(components, template, metric, parallel_cfg, partition_count=partition_count, **options)

    serial, parallel = [], []
    for rep in range(repetitions):
        serial.append(
            time_scoring(components, template, metric, serial_cfg, partition_count=1, **options)
        )
        parallel.append(
            time_scoring(
                components, template, metric, parallel_cfg, partition_count=partition_count, **options
            )
        )
        logger.debug(f"rep {rep + 1}: serial={serial[-1]:.4f}s parallel={parallel[-1]:.4f}s")

    result = BenchmarkResult.from_timings(
        serial,
        parallel,
        workers=workers,
        component_count=len(components),
        dims=template.shape,
        metric=metric,
    )
    logger.info(
        f"Median serial {result.serial_seconds:.4f}s, parallel {result.parallel_seconds:.4f}s, "
        f"speedup {result.speedup:.3f}x"
    )
    return result


def format_table(result: BenchmarkResult) -> str:
    """Human-readable comparison table with times and throughput (1/Time)."""
    rows = [
        ("Platform", "Time (second)", "1/Time", "min", "max"),
        (
            f"parallel ({result.workers} workers)",
            f"{result.parallel_seconds:.9f}",
            f"{result.parallel_throughput:.5f}",
            f"{result.parallel_min or result.parallel_seconds:.6f}",
            f"{result.parallel_max or result.parallel_seconds:.6f}",
        ),
        (
            "serial (1 worker)",
            f"{result.serial_seconds:.9f}",
            f"{result.serial_throughput:.5f}",
            f"{result.serial_min or result.serial_seconds:.6f}",
            f"{result.serial_max or result.serial_seconds:.6f}",
        ),
    ]
    widths = [max(len(row[i]) for row in rows) for i in range(len(rows[0]))]
    separator = "+".join("-" * (w + 2) for w in widths)
    lines = [separator]
    for index, row in enumerate(rows):
        lines.append("|".join(f" {cell:<{w}} " for cell, w in zip(row, widths)))
        if index == 0:
            lines.append(separator)
    lines.append(separator)
    dims = "x".join(str(d) for d in result.dims)
    lines.append(
        f"speedup {result.speedup:.3f}x over {result.component_count} component(s) of {dims}, "
        f"median of {result.repetitions} ({result.timing_basis})"
    )
    return "\n".join(lines)
