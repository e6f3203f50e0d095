#!/usr/bin/env python3
"""Replay both benchmark shapes through the twin and print the error reports.

Usage:  python3 demos/benchmark_tour.py [output_dir]

With an output directory, each run also saves its JSON report and per-tick
trace CSV there, which is handy for plotting the tip path or the error
history offline.
"""

import json
import sys
from pathlib import Path

from rcmtwin.bench import run_benchmark
from rcmtwin.twin import trace_to_csv


def main() -> int:
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else None
    if out:
        out.mkdir(parents=True, exist_ok=True)
    worst = 0
    for shape in ("cone", "pyramid"):
        run = run_benchmark(shape)
        r = run.report
        print(f"{shape:8s} {len(run.trajectory.samples):4d} waypoints -> "
              f"{r.n_samples} ticks in {run.runtime_s:.2f}s")
        print(f"  tracking rmse {r.tracking_rmse_mm:.5f} mm  "
              f"max {r.tracking_max_mm:.5f} mm")
        print(f"  pivot    rmse {r.rcm_rmse_mm:.6f} mm  "
              f"max {r.rcm_max_mm:.6f} mm")
        print(f"  {'PASS' if run.passed else 'FAIL: ' + '; '.join(run.failures)}")
        if out:
            (out / f"{shape}_report.json").write_text(
                json.dumps(run.to_json_dict(), indent=2))
            trace_to_csv(run.replay.rows, out / f"{shape}_trace.csv")
            print(f"  report + trace written under {out}/")
        worst = max(worst, 0 if run.passed else 1)
    return worst


if __name__ == "__main__":
    raise SystemExit(main())
