#!/usr/bin/env python3
"""
Benchmark sweep script for the brainmatch pipeline.

Times serial vs parallel scoring over a grid of worker counts and component
counts on synthetic workloads and writes one CSV row per cell. Larger
component sets are expected to widen the gap between the serial baseline
and the parallel run.
"""

import argparse
import logging
import os
import sys
import time
from pathlib import Path

import pandas as pd

# Add parent directory to path to import brainmatch modules
sys.path.insert(0, str(Path(__file__).parent.parent))

from brainmatch.benchmark import run_benchmark
from brainmatch.config import BENCH_REPS, SEED, parse_dims
from brainmatch.logging_config import setup_logging
from brainmatch.metrics import MetricKind
from brainmatch.synth import SynthSpec, generate

# Configure logging with centralized setup
log_level = os.getenv("LOG_LEVEL", "INFO")
setup_logging(log_level=log_level)

logger = logging.getLogger(__name__)

WORKER_COUNTS = (1, 2, 4, 8)
COMPONENT_COUNTS = (21, 42, 84, 168)


def sweep(dims, metric: MetricKind, reps: int, out_csv: Path) -> pd.DataFrame:
    """
    Runs every (component count, worker count) cell and writes the table.

    Returns:
        pd.DataFrame: One row per cell
    """
    rows = []
    for n_components in COMPONENT_COUNTS:
        spec = SynthSpec(seed=SEED, n_components=n_components, dims=dims, noise_sigma=0.1, planted_index=0)
        components, template = generate(spec)
        for workers in WORKER_COUNTS:
            result = run_benchmark(components, template, metric, workers, reps)
            rows.append(
                {
                    "component_count": n_components,
                    "workers": workers,
                    "serial_seconds": result.serial_seconds,
                    "parallel_seconds": result.parallel_seconds,
                    "speedup": result.speedup,
                }
            )
            logger.info(f"n={n_components} workers={workers}: speedup {result.speedup:.3f}x")

    frame = pd.DataFrame(rows)
    out_csv.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(out_csv, index=False, float_format="%.9f")
    return frame


def main():
    parser = argparse.ArgumentParser(description=__doc__.strip().splitlines()[0])
    parser.add_argument("--dims", type=parse_dims, default=(32, 32, 32))
    parser.add_argument("--metric", type=MetricKind, default=MetricKind.SSD)
    parser.add_argument("--reps", type=int, default=BENCH_REPS)
    parser.add_argument("--out-csv", type=Path, default=Path("results/benchmark_sweep.csv"))
    args = parser.parse_args()

    logger.info("--- Starting benchmark sweep ---")
    start_time = time.time()
    try:
        frame = sweep(args.dims, args.metric, args.reps, args.out_csv)
    except Exception as e:
        logger.error(f"Benchmark sweep failed: {e}", exc_info=True)
        sys.exit(1)

    logger.info("--- Benchmark sweep complete ---")
    logger.info(f"Cells: {len(frame)}, table written to {args.out_csv}")
    logger.info(f"Time taken: {time.time() - start_time:.2f} seconds")


if __name__ == "__main__":
    main()
