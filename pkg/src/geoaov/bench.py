"""Benchmark suite loading, experiment runs, scoring, and reports.

A suite is a manifest plus one human-editable JSON file per task, each
carrying the query, the ground-truth workflow, the expected tool-call
trace, and final-state assertions. Experiments fan (task, strategy,
backend) cells over a worker pool; every cell leaves a run record on disk
and the report is assembled deterministically, so identical scripted
inputs reproduce identical report bytes.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from . import metrics, planner, replay
from .backend import BackendConfig, Usage
from .errors import EngineError, SuiteError
from .executor import (
    GRAPH_STRATEGIES,
    StrategyKind,
    run_graph_strategy,
    run_group_chat,
    run_sequential,
    run_swarm,
)
from .graph import deserialize, serialize, validate
from .metrics import GroundTruth, TaskScore
from .toolenv import FaultPlan, ToolCallRecord, ToolEnvironment, assert_final_state, catalog_default


@dataclass
class TaskCase:
    id: str
    query: str
    ground_truth: GroundTruth
    oracle: bool = False
    tags: list[str] = field(default_factory=list)


@dataclass
class ExperimentConfig:
    suite: str
    strategies: list[str] = field(default_factory=lambda: [StrategyKind.GEOFLOW.value])
    backends: list[BackendConfig] = field(
        default_factory=lambda: [BackendConfig(kind="scripted", model=replay.GT_REPLAY_MODEL)]
    )
    judge: BackendConfig = field(
        default_factory=lambda: BackendConfig(kind="scripted", model=replay.GT_REPLAY_MODEL)
    )
    faults: dict[str, FaultPlan] | None = None  # task id -> plan
    refine: bool = False
    oracle_fewshot: bool = False
    parallelism: int = 1
    seed: int = 0
    results_dir: str = "results"


def _load_task_file(path: str, catalog) -> TaskCase:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise SuiteError(f"cannot load task file {path!r}: {exc}") from exc

    task_id = data.get("id") or os.path.basename(path)

    def bad(field_path: str, message: str) -> SuiteError:
        return SuiteError(
            f"task {task_id!r}: {field_path}: {message}", task_id=task_id, field_path=field_path
        )

    for key in ("id", "query", "ground_truth"):
        if key not in data:
            raise bad(key, "missing")
    gt_raw = data["ground_truth"]
    if "aov" not in gt_raw or "trace" not in gt_raw:
        raise bad("ground_truth", "needs 'aov' and 'trace'")
    try:
        aov = deserialize(json.dumps(gt_raw["aov"]))
    except EngineError as exc:
        raise bad("ground_truth.aov", str(exc)) from exc
    report = validate(aov, catalog)
    if not report.ok:
        raise bad("ground_truth.aov", "; ".join(report.messages()))

    for i, call in enumerate(gt_raw["trace"]):
        where = f"ground_truth.trace[{i}]"
        for key in ("agent", "tool", "arguments", "vertex"):
            if key not in call:
                raise bad(where, f"missing {key!r}")
        if call["vertex"] not in aov.tasks:
            raise bad(where, f"unknown vertex {call['vertex']!r}")
        if aov.tasks[call["vertex"]].agent != call["agent"]:
            raise bad(
                where,
                f"agent {call['agent']!r} does not own vertex {call['vertex']!r}",
            )
        if catalog.tool(call["agent"], call["tool"]) is None:
            raise bad(where, f"unknown tool {call['tool']!r} for agent {call['agent']!r}")

    assertions = gt_raw.get("final_assertions", [])
    assert_final_state({}, assertions)  # shape check only; raises BadAssertionPath

    return TaskCase(
        id=data["id"],
        query=data["query"],
        ground_truth=GroundTruth(aov=aov, trace=gt_raw["trace"], final_assertions=assertions),
        oracle=bool(data.get("oracle", False)),
        tags=list(data.get("tags", [])),
    )


def load_suite(path: str) -> list[TaskCase]:
    """Load a suite manifest (or a directory containing manifest.json)."""
    if os.path.isdir(path):
        path = os.path.join(path, "manifest.json")
    try:
        with open(path, encoding="utf-8") as fh:
            manifest = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise SuiteError(f"cannot load suite manifest {path!r}: {exc}") from exc
    base = os.path.dirname(path)
    catalog = catalog_default()
    tasks = [_load_task_file(os.path.join(base, rel), catalog) for rel in manifest.get("tasks", [])]
    ids = [t.id for t in tasks]
    if len(set(ids)) != len(ids):
        raise SuiteError(f"duplicate task ids in suite: {sorted(ids)}")
    oracles = [t.id for t in tasks if t.oracle]
    if len(oracles) > 1:
        raise SuiteError(f"at most one oracle case allowed, got {oracles}")
    return tasks


def _connect(cfg: BackendConfig, task: TaskCase | None, strategy: str | None):
    """gt-replay backends are synthesized from the task's ground truth."""
    if cfg.kind == "scripted" and cfg.model == replay.GT_REPLAY_MODEL and not cfg.script_path:
        if task is None:  # the judge
            return replay.build_judge_script(5)
        return replay.build_script(task.ground_truth, strategy)
    return cfg.connect()


@dataclass
class RunRow:
    strategy: str
    model: str
    task_id: str
    score: TaskScore
    record: dict


def run_one(
    task: TaskCase,
    strategy: str,
    backend_cfg: BackendConfig,
    cfg: ExperimentConfig,
    oracle_example: tuple | None = None,
) -> RunRow:
    """Plan (graph strategies), execute, and score one cell."""
    gt = task.ground_truth
    faults = (cfg.faults or {}).get(task.id)
    is_replay = (
        backend_cfg.kind == "scripted"
        and backend_cfg.model == replay.GT_REPLAY_MODEL
        and not backend_cfg.script_path
    )

    refine_backend = None
    if is_replay and strategy in GRAPH_STRATEGIES and cfg.refine and faults is not None:
        scenario = replay.build_refine_scenario(gt)
        backend = scenario.execution
        faults = scenario.faults
        refine_backend = scenario.refine_backend
    else:
        backend = _connect(backend_cfg, task, strategy)
        if not is_replay and cfg.refine:
            refine_backend = backend

    env = ToolEnvironment(faults=faults, seed=cfg.seed)
    planner_usage = Usage()
    final_graph = None

    if strategy in GRAPH_STRATEGIES:
        req = planner.PlannerRequest(
            task_query=task.query,
            catalog=env.catalog,
            oracle_example=oracle_example,
            mode=strategy,
        )
        graph, planner_usage = planner.generate(req, backend)
        refine_hook = None
        if refine_backend is not None:
            hook_backend = refine_backend

            def refine_hook(ctx):
                return planner.refine(ctx, hook_backend)

        result = run_graph_strategy(
            graph,
            env,
            backend,
            mode=strategy,
            assertions=gt.final_assertions,
            refine_hook=refine_hook,
            task_query=task.query,
        )
        final_graph = result.graph_history[-1]
    elif strategy == StrategyKind.SEQUENTIAL.value:
        result = run_sequential(env, backend, task.query, assertions=gt.final_assertions)
    elif strategy == StrategyKind.GROUP_CHAT_LEDGER.value:
        result = run_group_chat(env, backend, task.query, assertions=gt.final_assertions)
    elif strategy == StrategyKind.SWARM_HANDOFF.value:
        result = run_swarm(env, backend, task.query, assertions=gt.final_assertions)
    else:
        raise ValueError(f"unknown strategy {strategy!r}")

    judge_log: list[dict] = []
    flow = None
    if final_graph is not None:
        judge_backend = _connect(cfg.judge, None, None)
        inner = metrics.judge_from_backend(judge_backend)

        def judge(cand_obj: str, gt_obj: str) -> int:
            grade = inner(cand_obj, gt_obj)
            judge_log.append({"candidate": cand_obj, "reference": gt_obj, "score": grade})
            return grade

        flow = metrics.flow_score(final_graph, gt, judge)

    score = TaskScore(
        success=metrics.success(result),
        correctness=metrics.correctness(result, gt),
        flow_score=flow,
        tokens=planner_usage.total() + result.usage_total.total(),
    )
    record = {
        "task_id": task.id,
        "strategy": strategy,
        "model": backend_cfg.model,
        "seed": cfg.seed,
        "score": score.to_dict(),
        "planner_usage": planner_usage.to_dict(),
        "judge_log": judge_log,
        "final_graph": json.loads(serialize(final_graph)) if final_graph is not None else None,
        "run": result.to_dict(),
    }
    return RunRow(strategy=strategy, model=backend_cfg.model, task_id=task.id, score=score, record=record)


def _failed_row(task: TaskCase, strategy: str, backend_cfg: BackendConfig, exc: Exception) -> RunRow:
    score = TaskScore(success=0, correctness=0.0, flow_score=None, tokens=0)
    record = {
        "task_id": task.id,
        "strategy": strategy,
        "model": backend_cfg.model,
        "score": score.to_dict(),
        "error": f"{type(exc).__name__}: {exc}",
    }
    return RunRow(strategy=strategy, model=backend_cfg.model, task_id=task.id, score=score, record=record)


def record_filename(task_id: str, strategy: str, model: str, seed: int) -> str:
    return f"{task_id}__{strategy}__{model}__seed{seed}.json"


def run_experiment(cfg: ExperimentConfig) -> metrics.MetricsReport:
    """Run every (backend, strategy, task) cell and write records + report."""
    tasks = load_suite(cfg.suite)
    oracle_example = None
    if cfg.oracle_fewshot:
        oracle = next((t for t in tasks if t.oracle), None)
        if oracle is not None:
            oracle_example = (oracle.query, oracle.ground_truth.aov)
            tasks = [t for t in tasks if not t.oracle]

    jobs = [
        (task, strategy, backend_cfg)
        for backend_cfg in cfg.backends
        for strategy in cfg.strategies
        for task in tasks
    ]

    def work(job) -> RunRow:
        task, strategy, backend_cfg = job
        try:
            return run_one(task, strategy, backend_cfg, cfg, oracle_example)
        except EngineError as exc:
            return _failed_row(task, strategy, backend_cfg, exc)

    if cfg.parallelism > 1:
        with ThreadPoolExecutor(max_workers=cfg.parallelism) as pool:
            rows = list(pool.map(work, jobs))
    else:
        rows = [work(job) for job in jobs]
    rows.sort(key=lambda r: (r.strategy, r.model, r.task_id))

    records_dir = os.path.join(cfg.results_dir, "records")
    os.makedirs(records_dir, exist_ok=True)
    for row in rows:
        name = record_filename(row.task_id, row.strategy, row.model, cfg.seed)
        with open(os.path.join(records_dir, name), "w", encoding="utf-8") as fh:
            json.dump(row.record, fh, indent=2, sort_keys=True)

    report = metrics.aggregate(
        [
            {"strategy": r.strategy, "model": r.model, "task_id": r.task_id, "score": r.score}
            for r in rows
        ]
    )
    payload = {
        "header": {
            "suite": os.path.basename(cfg.suite.rstrip("/")),
            "strategies": sorted(cfg.strategies),
            "models": sorted({b.model for b in cfg.backends}),
            "judge_model": cfg.judge.model,
            "seed": cfg.seed,
        },
        "cells": report.cells,
    }
    with open(os.path.join(cfg.results_dir, "report.json"), "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
    with open(os.path.join(cfg.results_dir, "report.txt"), "w", encoding="utf-8") as fh:
        fh.write(metrics.render_table(report) + "\n")
    return report


def rescore_record(record: dict, gt: GroundTruth) -> TaskScore:
    """Recompute a record's scores from its stored run and judge transcript."""
    run = record["run"]
    trace = [
        ToolCallRecord(
            seq=r["seq"],
            agent=r["agent"],
            tool=r["tool"],
            arguments=r["arguments"],
            result=r["result"],
            error=r["error"],
            usage_attribution=Usage(**r["usage_attribution"]),
            vertex=r.get("vertex"),
        )
        for r in run["trace"]
    ]

    class _Shim:
        completed = run["completed"]

    shim = _Shim()
    shim.trace = trace

    flow = None
    if record.get("final_graph") is not None:
        final_graph = deserialize(json.dumps(record["final_graph"]))
        scores = iter([e["score"] for e in record["judge_log"]])

        def judge(cand: str, ref: str) -> int:
            return next(scores)

        flow = metrics.flow_score(final_graph, gt, judge)
    return TaskScore(
        success=metrics.success(shim),
        correctness=metrics.correctness(shim, gt),
        flow_score=flow,
        tokens=record["score"]["tokens"],
    )


def report_from_records(results_dir: str) -> metrics.MetricsReport:
    """Rebuild the aggregate report from the run records on disk."""
    records_dir = os.path.join(results_dir, "records")
    rows = []
    for name in sorted(os.listdir(records_dir)):
        if not name.endswith(".json"):
            continue
        with open(os.path.join(records_dir, name), encoding="utf-8") as fh:
            record = json.load(fh)
        score = record["score"]
        rows.append(
            {
                "strategy": record["strategy"],
                "model": record["model"],
                "task_id": record["task_id"],
                "score": TaskScore(
                    success=score["success"],
                    correctness=score["correctness"],
                    flow_score=score["flow_score"],
                    tokens=score["tokens"],
                ),
            }
        )
    return metrics.aggregate(rows)
