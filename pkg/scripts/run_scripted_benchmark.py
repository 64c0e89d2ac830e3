"""Run the bundled suite with replay backends across all five strategies.

Produces a results directory with per-run records, report.json, and a
comparison table, then prints the table plus per-strategy token totals.

Usage: python scripts/run_scripted_benchmark.py [results_dir]
"""

from __future__ import annotations

import sys

from geoaov.assets import suite_path
from geoaov.bench import ExperimentConfig, run_experiment
from geoaov.metrics import render_table
from geoaov.replay import GT_REPLAY_MODEL


def main() -> None:
    results_dir = sys.argv[1] if len(sys.argv) > 1 else "results"
    cfg = ExperimentConfig(
        suite=suite_path(),
        results_dir=results_dir,
        strategies=[
            "geoflow",
            "flow_implicit",
            "sequential",
            "group_chat_ledger",
            "swarm_handoff",
        ],
    )
    report = run_experiment(cfg)
    print(render_table(report))
    print()
    print("total tokens per strategy (scripted like-for-like decisions):")
    for strategy, models in report.cells.items():
        total = sum(t["tokens"] for t in models[GT_REPLAY_MODEL]["per_task"].values())
        print(f"  {strategy:<20} {total:>8}")
    print(f"\nrecords and reports written to {results_dir}/")


if __name__ == "__main__":
    main()
