"""HTTP service for the workbench: browse tasks, generate and edit
workflows, execute them with scripted decisions, and watch progress.

Workflows live in memory, one execution per workflow at a time. Every
edit round-trips through server-side validation, so a graph the engine
would reject can never reach execution. Execution emits sequenced events
(vertex status changes, tool calls, usage deltas) that clients poll with
a cursor.
"""

from __future__ import annotations

import json
import threading
from typing import Any

from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from . import bench, metrics, planner, replay
from .assets import suite_path
from .backend import ScriptedBackend
from .errors import EngineError
from .executor import GRAPH_STRATEGIES, run_graph_strategy
from .graph import AovGraph, Status, deserialize, serialize, validate
from .metrics import TaskScore
from .toolenv import ToolEnvironment, catalog_default


class _Workflow:
    def __init__(self, wf_id: str, task_id: str, mode: str, graph: AovGraph):
        self.id = wf_id
        self.task_id = task_id
        self.mode = mode
        self.graph = graph
        self.status = "idle"  # idle | running | done | failed
        self.events: list[dict] = []
        self.vertex_statuses: dict[str, str] = {k: v.status for k, v in graph.tasks.items()}
        self.usage = {"prompt_tokens": 0, "completion_tokens": 0}
        self.run_record: dict | None = None
        self.score: TaskScore | None = None
        self.lock = threading.Lock()

    def emit(self, kind: str, payload: dict) -> None:
        with self.lock:
            self.events.append({"seq": len(self.events), "kind": kind, "payload": payload})
            if kind == "vertex_status":
                self.vertex_statuses[payload["vertex"]] = payload["status"]
            elif kind == "usage":
                self.usage = payload["total"]

    def snapshot(self) -> dict:
        with self.lock:
            return {
                "id": self.id,
                "task_id": self.task_id,
                "mode": self.mode,
                "graph": json.loads(serialize(self.graph)),
                "status": self.status,
                "vertex_statuses": dict(self.vertex_statuses),
                "usage": dict(self.usage),
            }


def _graph_payload(data: Any) -> AovGraph:
    return deserialize(json.dumps(data))


def create_app(suite: str | None = None, seed: int = 0) -> FastAPI:
    app = FastAPI(title="geoaov workbench service")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    tasks = {t.id: t for t in bench.load_suite(suite or suite_path())}
    catalog = catalog_default()
    workflows: dict[str, _Workflow] = {}
    counter = {"n": 0}
    registry_lock = threading.Lock()

    def _error(status: int, message: str) -> JSONResponse:
        return JSONResponse(status_code=status, content={"detail": message})

    @app.get("/api/tasks")
    def list_tasks() -> list[dict]:
        return [
            {
                "id": t.id,
                "query": t.query,
                "oracle": t.oracle,
                "tags": t.tags,
                "vertices": len(t.ground_truth.aov.tasks),
                "calls": len(t.ground_truth.trace),
            }
            for t in tasks.values()
        ]

    @app.get("/api/catalog")
    def get_catalog() -> dict:
        return {
            "agents": [
                {"name": a.name, "description": a.description, "tools": [t.name for t in a.tools]}
                for a in catalog.agents
            ]
        }

    @app.post("/api/workflows/generate")
    def generate(body: dict):
        task = tasks.get(body.get("task_id", ""))
        if task is None:
            return _error(404, f"unknown task {body.get('task_id')!r}")
        mode = body.get("mode", "geoflow")
        if mode not in GRAPH_STRATEGIES:
            return _error(422, f"mode must be one of {list(GRAPH_STRATEGIES)}")
        gt = task.ground_truth
        reply_graph = gt.aov if mode == "geoflow" else replay.terse_graph(gt.aov)
        backend = ScriptedBackend([replay.planner_entry(reply_graph)])
        req = planner.PlannerRequest(task_query=task.query, catalog=catalog, mode=mode)
        try:
            graph, usage = planner.generate(req, backend)
        except EngineError as exc:
            return _error(502, f"planner failed: {exc}")
        with registry_lock:
            counter["n"] += 1
            wf = _Workflow(f"wf-{counter['n']}", task.id, mode, graph)
            wf.usage = usage.to_dict()
            workflows[wf.id] = wf
        return {"workflow_id": wf.id, **wf.snapshot()}

    @app.get("/api/workflows/{wf_id}")
    def get_workflow(wf_id: str):
        wf = workflows.get(wf_id)
        if wf is None:
            return _error(404, f"unknown workflow {wf_id!r}")
        return wf.snapshot()

    @app.put("/api/workflows/{wf_id}")
    def put_workflow(wf_id: str, body: dict):
        wf = workflows.get(wf_id)
        if wf is None:
            return _error(404, f"unknown workflow {wf_id!r}")
        if wf.status == "running":
            return _error(409, "workflow is executing; edits are locked")
        try:
            graph = _graph_payload(body.get("graph", body))
        except EngineError as exc:
            return JSONResponse(
                status_code=422,
                content={"detail": {"ok": False, "violations": [
                    {"code": "PARSE", "subject": "graph", "message": str(exc)}
                ]}},
            )
        report = validate(graph, catalog)
        if not report.ok:
            return JSONResponse(status_code=422, content={"detail": report.to_dict()})
        with wf.lock:
            wf.graph = graph
            wf.vertex_statuses = {k: v.status for k, v in graph.tasks.items()}
            wf.status = "idle"
        return wf.snapshot()

    def _execute(wf: _Workflow) -> None:
        task = tasks[wf.task_id]
        gt = task.ground_truth
        backend = replay.build_service_script(wf.graph, gt)
        env = ToolEnvironment(seed=seed)
        try:
            result = run_graph_strategy(
                wf.graph,
                env,
                backend,
                mode=wf.mode,
                assertions=gt.final_assertions,
                task_query=task.query,
                on_event=wf.emit,
            )
        except EngineError as exc:
            with wf.lock:
                wf.status = "failed"
                wf.run_record = {"error": str(exc)}
            wf.emit("run_finished", {"completed": False, "error": str(exc)})
            return
        judge = metrics.judge_from_backend(replay.build_judge_script(5))
        score = TaskScore(
            success=metrics.success(result),
            correctness=metrics.correctness(result, gt),
            flow_score=metrics.flow_score(result.graph_history[-1], gt, judge),
            tokens=result.usage_total.total(),
        )
        with wf.lock:
            wf.status = "done" if result.completed else "failed"
            wf.graph = result.graph_history[-1]
            wf.run_record = result.to_dict()
            wf.score = score

    @app.post("/api/workflows/{wf_id}/execute")
    def execute(wf_id: str):
        wf = workflows.get(wf_id)
        if wf is None:
            return _error(404, f"unknown workflow {wf_id!r}")
        with wf.lock:
            if wf.status == "running":
                return _error(409, "already executing")
            report = validate(wf.graph, catalog)
            if not report.ok:
                return JSONResponse(status_code=422, content={"detail": report.to_dict()})
            wf.status = "running"
            wf.events.clear()
            wf.usage = {"prompt_tokens": 0, "completion_tokens": 0}
            # execute means a fresh run; done statuses from a previous run
            # would otherwise make the walk skip every vertex
            for sub in wf.graph.tasks.values():
                sub.status = Status.PENDING
            wf.vertex_statuses = {k: "pending" for k in wf.graph.tasks}
        thread = threading.Thread(target=_execute, args=(wf,), daemon=True)
        thread.start()
        return {"workflow_id": wf.id, "status": "running"}

    @app.get("/api/workflows/{wf_id}/status")
    def status(wf_id: str, after: int = 0):
        wf = workflows.get(wf_id)
        if wf is None:
            return _error(404, f"unknown workflow {wf_id!r}")
        with wf.lock:
            events = wf.events[after:]
            return {
                "status": wf.status,
                "running": wf.status == "running",
                "vertex_statuses": dict(wf.vertex_statuses),
                "usage": dict(wf.usage),
                "events": events,
                "next_cursor": len(wf.events),
            }

    @app.get("/api/runs/{wf_id}/trace")
    def run_trace(wf_id: str):
        wf = workflows.get(wf_id)
        if wf is None or wf.run_record is None:
            return _error(404, f"no finished run for workflow {wf_id!r}")
        return {
            "workflow_id": wf.id,
            "task_id": wf.task_id,
            "completed": wf.run_record.get("completed"),
            "trace": wf.run_record.get("trace", []),
            "usage_total": wf.run_record.get("usage_total"),
            "failure": wf.run_record.get("failure"),
        }

    @app.get("/api/report")
    def report():
        runs = {}
        for wf in workflows.values():
            if wf.score is None:
                continue
            runs[wf.id] = {
                "task_id": wf.task_id,
                "mode": wf.mode,
                "score": wf.score.to_dict(),
            }
        return {"runs": runs}

    return app


def serve(host: str = "127.0.0.1", port: int = 8321, suite: str | None = None, seed: int = 0) -> None:
    import uvicorn

    uvicorn.run(create_app(suite=suite, seed=seed), host=host, port=port, log_level="warning")
