"""Command-line surface: validate suites, plan tasks, run experiments,
score run records, rebuild reports, and serve the workbench API."""

from __future__ import annotations

import argparse
import json
import sys

from . import bench, metrics, planner, replay
from .assets import suite_path
from .backend import BackendConfig
from .errors import EngineError
from .graph import serialize, validate
from .toolenv import catalog_default


def _backend_from_args(args) -> BackendConfig:
    if args.base_url:
        return BackendConfig(
            kind="http_openai_compatible",
            base_url=args.base_url,
            model=args.model or "gpt-4o-mini",
            api_key_env=args.api_key_env,
        )
    return BackendConfig(kind="scripted", model=replay.GT_REPLAY_MODEL)


def cmd_validate(args) -> int:
    tasks = bench.load_suite(args.suite)
    catalog = catalog_default()
    worst = 0
    for task in tasks:
        report = validate(task.ground_truth.aov, catalog)
        flag = "ok" if report.ok else "INVALID"
        print(f"{task.id:<28} vertices={len(task.ground_truth.aov.tasks)} "
              f"calls={len(task.ground_truth.trace)} {flag}")
        for v in report.violations:
            print(f"  - {v.code.value}: {v.message}")
            worst = 1
    print(f"{len(tasks)} tasks checked")
    return worst


def cmd_plan(args) -> int:
    tasks = {t.id: t for t in bench.load_suite(args.suite)}
    task = tasks.get(args.task_id)
    if task is None:
        print(f"unknown task {args.task_id!r}; available: {', '.join(sorted(tasks))}",
              file=sys.stderr)
        return 2
    backend_cfg = _backend_from_args(args)
    if backend_cfg.kind == "scripted":
        gt = task.ground_truth
        reply = gt.aov if args.mode == "geoflow" else replay.terse_graph(gt.aov)
        backend = replay.build_script_backend_for_plan(reply)
    else:
        backend = backend_cfg.connect()
    req = planner.PlannerRequest(
        task_query=task.query, catalog=catalog_default(), mode=args.mode
    )
    graph, usage = planner.generate(req, backend)
    print(serialize(graph))
    print(f"-- usage: {usage.prompt_tokens} prompt + {usage.completion_tokens} completion tokens",
          file=sys.stderr)
    return 0


def cmd_run(args) -> int:
    with open(args.config, encoding="utf-8") as fh:
        raw = json.load(fh)
    backends = [BackendConfig(**b) for b in raw.get("backends", [])] or None
    judge = BackendConfig(**raw["judge"]) if "judge" in raw else None
    kwargs = {
        "suite": raw.get("suite", suite_path()),
        "strategies": raw.get("strategies", ["geoflow"]),
        "oracle_fewshot": raw.get("oracle_fewshot", False),
        "parallelism": raw.get("parallelism", 1),
        "seed": raw.get("seed", 0),
        "results_dir": raw.get("results_dir", "results"),
    }
    if backends:
        kwargs["backends"] = backends
    if judge:
        kwargs["judge"] = judge
    report = bench.run_experiment(bench.ExperimentConfig(**kwargs))
    print(metrics.render_table(report))
    print(f"report written to {kwargs['results_dir']}/report.json")
    return 0


def cmd_score(args) -> int:
    with open(args.record, encoding="utf-8") as fh:
        record = json.load(fh)
    tasks = {t.id: t for t in bench.load_suite(args.suite)}
    task = tasks.get(record.get("task_id", ""))
    if task is None:
        print(f"record references unknown task {record.get('task_id')!r}", file=sys.stderr)
        return 2
    score = bench.rescore_record(record, task.ground_truth)
    print(json.dumps(score.to_dict(), indent=2, sort_keys=True))
    return 0


def cmd_report(args) -> int:
    report = bench.report_from_records(args.results_dir)
    print(metrics.render_table(report))
    return 0


def cmd_serve(args) -> int:
    from .service import serve

    print(f"serving workbench API on http://{args.host}:{args.port}")
    serve(host=args.host, port=args.port, suite=args.suite, seed=args.seed)
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="geoaov", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="validate a task suite")
    p.add_argument("suite", nargs="?", default=suite_path())
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("plan", help="generate a workflow for one suite task")
    p.add_argument("task_id")
    p.add_argument("--suite", default=suite_path())
    p.add_argument("--mode", choices=["geoflow", "flow_implicit"], default="geoflow")
    p.add_argument("--base-url", default="", help="OpenAI-compatible endpoint (default: scripted)")
    p.add_argument("--model", default="")
    p.add_argument("--api-key-env", default="")
    p.set_defaults(fn=cmd_plan)

    p = sub.add_parser("run", help="run an experiment from a JSON config")
    p.add_argument("config")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("score", help="recompute scores from a run record")
    p.add_argument("record")
    p.add_argument("--suite", default=suite_path())
    p.set_defaults(fn=cmd_score)

    p = sub.add_parser("report", help="rebuild the report from run records")
    p.add_argument("results_dir")
    p.set_defaults(fn=cmd_report)

    p = sub.add_parser("serve", help="serve the workbench HTTP API")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8321)
    p.add_argument("--suite", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_serve)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except EngineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
