#!/usr/bin/env python3
"""Pre-registered plain cross-entropy baseline for the benchmark dataset.

Runs the benchmark configuration with selection and refinement disabled
(ce_only) and prints the test-accuracy statistics. The `final` number this
script prints is frozen into tests/test_acceptance.py as the baseline the
selection-driven run must beat; the acceptance test re-runs the baseline
and checks it still reproduces the frozen value before using it.
"""

import argparse
import json
import sys
import tempfile
from pathlib import Path

from dstlab import lab
from dstlab.config import ExperimentConfig

# The benchmark setup: 4 blobs x 1000 samples in 2-D, spread 0.5, half the
# labels redrawn uniformly, 2-64-64-4 networks on the desk schedule.
BENCHMARK_MASTER_SEED = 4
BENCHMARK_DATA_SEED = 11


def benchmark_config(**overrides) -> ExperimentConfig:
    return ExperimentConfig(
        master_seed=BENCHMARK_MASTER_SEED,
        data_seed=BENCHMARK_DATA_SEED,
        scatter_every=0,
        **overrides,
    )


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument(
        "--out",
        default=None,
        help="run directory (default: a fresh temporary directory)",
    )
    args = parser.parse_args(argv)
    out = Path(args.out) if args.out else Path(tempfile.mkdtemp()) / "ce-baseline"
    run_dir = lab.run(benchmark_config(ce_only=True), out)
    summary = lab.load_summary(run_dir)
    print(json.dumps({"run_dir": str(run_dir), "accuracy": summary["accuracy"]}, indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())
