"""Run scoring: success, correctness, workflow-structure score, tokens.

Correctness aligns the predicted tool-call trace against the ground-truth
trace (longest order-preserving alignment, denominator = predicted call
count). The structure score partitions the ground-truth graph into
per-agent DFS units and charges a whole unit for any structural mismatch
or any below-threshold objective judgment. All scoring is pure given the
run record and the judge transcript, so reports are reproducible
bit-exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Callable

from . import backend as backend_mod
from .errors import MismatchedTaskSets
from .graph import AovGraph, group_by_agent_dfs

JUDGE_PASS_THRESHOLD = 4


@dataclass
class GroundTruth:
    aov: AovGraph
    trace: list[dict]  # [{agent, tool, arguments, vertex?}]
    final_assertions: list[dict] = field(default_factory=list)
    objectives: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if not self.objectives:
            self.objectives = {k: v.objective for k, v in self.aov.tasks.items()}


def success(result) -> int:
    """1 iff the run completed, regardless of intermediate errors."""
    return 1 if result.completed else 0


def _call_key(agent: str, tool: str, arguments: dict) -> str:
    return json.dumps([agent, tool, arguments], sort_keys=True)


def correctness(result, gt: GroundTruth) -> float:
    """Fraction of predicted tool calls that align with the ground truth.

    Longest order-preserving alignment on (agent, tool, canonical args);
    error-flagged predictions stay in the denominator but never match.
    """
    predicted = list(result.trace)
    if not predicted:
        return 0.0
    gt_keys = [_call_key(c["agent"], c["tool"], c.get("arguments", {})) for c in gt.trace]
    pred_keys = [
        None if rec.error else _call_key(rec.agent, rec.tool, rec.arguments) for rec in predicted
    ]
    # classic LCS table over the two key sequences
    n, m = len(pred_keys), len(gt_keys)
    table = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            if pred_keys[i - 1] is not None and pred_keys[i - 1] == gt_keys[j - 1]:
                table[i][j] = table[i - 1][j - 1] + 1
            else:
                table[i][j] = max(table[i - 1][j], table[i][j - 1])
    return table[n][m] / max(1, n)


def _match_vertices(
    candidate: AovGraph, gt: AovGraph
) -> tuple[dict[str, str | None], dict[str, str]]:
    """Greedy per-agent positional matching of gt vertices to candidate ones.

    Ids are never compared (planners invent their own); within an agent,
    the i-th gt vertex in DFS order pairs with the i-th candidate vertex
    in DFS order. Returns (gt id → candidate id or None, inverse map).
    """
    cand_groups = dict(group_by_agent_dfs(candidate))
    match: dict[str, str | None] = {}
    inverse: dict[str, str] = {}
    for agent, gt_vertices in group_by_agent_dfs(gt):
        cand_vertices = cand_groups.get(agent, [])
        for i, gv in enumerate(gt_vertices):
            cv = cand_vertices[i] if i < len(cand_vertices) else None
            match[gv] = cv
            if cv is not None:
                inverse[cv] = gv
    return match, inverse


def flow_score(
    candidate: AovGraph,
    gt: GroundTruth,
    judge: Callable[[str, str], int],
) -> float:
    """Fraction of ground-truth agent units the candidate reproduces cleanly.

    A unit errs on structure (agent group absent, a gt vertex unmatched,
    or a gt edge into the unit with no counterpart edge between the
    matched candidate vertices) or on content (any matched objective
    judged below the pass threshold). Structure is settled first; only
    structurally clean units spend judge calls, in deterministic unit,
    then vertex, order.
    """
    units = group_by_agent_dfs(gt.aov)
    if not units:
        return 1.0
    match, _ = _match_vertices(candidate, gt.aov)
    cand_edges = candidate.edges()
    gt_edges = gt.aov.edges()

    unit_clean: list[bool] = []
    unit_vertices: list[list[str]] = []
    for agent, vertices in units:
        clean = all(match[v] is not None for v in vertices)
        if clean:
            for u, v in gt_edges:
                # an edge belongs to the unit of its target vertex
                if v in vertices:
                    mu, mv = match.get(u), match.get(v)
                    if mu is None or mv is None or (mu, mv) not in cand_edges:
                        clean = False
                        break
        unit_clean.append(clean)
        unit_vertices.append(vertices)

    score_sum = 0
    for clean, vertices in zip(unit_clean, unit_vertices):
        if not clean:
            continue
        ok = True
        for gv in vertices:
            cv = match[gv]
            grade = judge(candidate.tasks[cv].objective, gt.objectives[gv])
            if grade < JUDGE_PASS_THRESHOLD:
                ok = False
                break
        score_sum += 1 if ok else 0
    return score_sum / len(units)


def judge_from_backend(judge_backend) -> Callable[[str, str], int]:
    def judge(candidate_objective: str, gt_objective: str) -> int:
        return backend_mod.judge_score(judge_backend, candidate_objective, gt_objective)

    return judge


@dataclass
class TaskScore:
    success: int
    correctness: float
    flow_score: float | None
    tokens: int

    def to_dict(self) -> dict:
        return {
            "success": self.success,
            "correctness": self.correctness,
            "flow_score": self.flow_score,
            "tokens": self.tokens,
        }


@dataclass
class MetricsReport:
    # strategy → model → {"per_task": {task: TaskScore}, "aggregate": {...}}
    cells: dict[str, dict[str, dict]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"cells": self.cells}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def _mean(values: list[float]) -> float:
    return sum(values) / len(values)


def aggregate(rows: list[dict]) -> MetricsReport:
    """Fold per-task scores into per-(strategy, model) means.

    Each row: {strategy, model, task_id, score: TaskScore}. Every
    (strategy, model) cell must cover the same task set.
    """
    cells: dict[str, dict[str, dict]] = {}
    for row in rows:
        cell = cells.setdefault(row["strategy"], {}).setdefault(
            row["model"], {"per_task": {}}
        )
        cell["per_task"][row["task_id"]] = row["score"].to_dict()

    task_sets = {
        (strategy, model): frozenset(cell["per_task"])
        for strategy, models in cells.items()
        for model, cell in models.items()
    }
    if len(set(task_sets.values())) > 1:
        detail = {f"{s}/{m}": sorted(ids) for (s, m), ids in task_sets.items()}
        raise MismatchedTaskSets(f"cells cover different task sets: {detail}")

    for models in cells.values():
        for cell in models.values():
            per_task = cell["per_task"]
            flow_values = [t["flow_score"] for t in per_task.values() if t["flow_score"] is not None]
            cell["aggregate"] = {
                "success": _mean([t["success"] for t in per_task.values()]),
                "correctness": _mean([t["correctness"] for t in per_task.values()]),
                "flow_score": _mean(flow_values) if flow_values else None,
                "tokens": _mean([t["tokens"] for t in per_task.values()]),
            }
    return MetricsReport(cells=cells)


def format_pct(fraction: float) -> str:
    return f"{fraction * 100:.2f}%"


def render_table(report: MetricsReport) -> str:
    """Plain-text strategy × model comparison table."""
    header = f"{'strategy':<20} {'model':<16} {'success':>8} {'correct':>8} {'flow':>8} {'tokens':>10}"
    lines = [header, "-" * len(header)]
    for strategy in sorted(report.cells):
        for model in sorted(report.cells[strategy]):
            agg = report.cells[strategy][model]["aggregate"]
            flow = format_pct(agg["flow_score"]) if agg["flow_score"] is not None else "-"
            lines.append(
                f"{strategy:<20} {model:<16} "
                f"{format_pct(agg['success']):>8} {format_pct(agg['correctness']):>8} "
                f"{flow:>8} {agg['tokens']:>10.1f}"
            )
    return "\n".join(lines)
