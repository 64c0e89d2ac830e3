"""The meta-agent: workflow generation, output repair, and refinement.

Generation prompts the backend with the agent catalog and output-format
example, then parses and validates the reply; malformed or invalid output
earns repair turns carrying the violations verbatim. Refinement rebuilds a
failed workflow from the chat history and error message, with the engine
(not the model) enforcing that completed vertices stay untouched.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .assets import asset_text, load_prompt
from .backend import ChatMessage, Usage
from .errors import EngineError, PlanningFailed, RefinementFailed
from .graph import AovGraph, Status, deserialize, serialize, validate
from .toolenv import AgentCatalog

REPAIR_BUDGET = 2
REFINE_BUDGET = 3

GEOFLOW_RULES = (
    "- Write each objective as a complete instruction carrying every study parameter: "
    "area of interest, target time range, data source, and the map operations required.\n"
    "- Name the designated API the agent must call inside each objective."
)
IMPLICIT_RULES = "- Keep each objective to a terse subtask label of at most five words."


@dataclass
class PlannerRequest:
    task_query: str
    catalog: AgentCatalog
    oracle_example: tuple[str, AovGraph] | None = None
    mode: str = "geoflow"  # geoflow | flow_implicit


@dataclass
class RefinementContext:
    current_graph: AovGraph
    chat_history: list[ChatMessage] = field(default_factory=list)
    error: dict = field(default_factory=dict)  # {"vertex": id, "message": text}
    attempt: int = 1


def terse_label(objective: str, max_words: int = 5) -> str:
    """Collapse a detailed objective to a short label. Idempotent."""
    words = objective.replace(",", " ").replace(".", " ").split()
    return " ".join(words[:max_words]).lower()


def build_prompt(req: PlannerRequest) -> list[ChatMessage]:
    """Assemble the workflow-generation conversation for one task."""
    if not req.catalog.agents:
        raise ValueError("catalog must be non-empty")
    mode_rules = GEOFLOW_RULES if req.mode == "geoflow" else IMPLICIT_RULES
    system = load_prompt("planner_system").format(
        catalog_block=req.catalog.prompt_block(),
        format_example=asset_text("prompts/format_example.txt").rstrip("\n"),
        mode_rules=mode_rules,
    )
    messages = [ChatMessage(role="system", content=system)]
    if req.oracle_example is not None:
        query, graph = req.oracle_example
        messages.append(ChatMessage(role="user", content=query))
        messages.append(ChatMessage(role="assistant", content=serialize(graph)))
    messages.append(ChatMessage(role="user", content=req.task_query))
    return messages


def extract_json_object(text: str) -> str | None:
    """First balanced top-level {...} block, string-aware; None if absent."""
    start = text.find("{")
    while start != -1:
        depth = 0
        in_string = False
        escaped = False
        for i in range(start, len(text)):
            ch = text[i]
            if in_string:
                if escaped:
                    escaped = False
                elif ch == "\\":
                    escaped = True
                elif ch == '"':
                    in_string = False
                continue
            if ch == '"':
                in_string = True
            elif ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth == 0:
                    return text[start : i + 1]
        start = text.find("{", start + 1)
    return None


def _try_parse(text: str, catalog: AgentCatalog) -> tuple[AovGraph | None, list[str]]:
    block = extract_json_object(text)
    if block is None:
        return None, ["reply contains no JSON object"]
    try:
        graph = deserialize(block)
    except EngineError as exc:
        return None, [str(exc)]
    report = validate(graph, catalog)
    if not report.ok:
        return None, report.messages()
    return graph, []


def generate(req: PlannerRequest, backend) -> tuple[AovGraph, Usage]:
    """Produce a validated workflow graph for the request.

    One generation turn plus up to REPAIR_BUDGET repair turns; each repair
    feeds the violation list back verbatim. Usage sums every turn.
    """
    messages = build_prompt(req)
    usage_total = Usage()
    violations: list[str] = []
    for _ in range(1 + REPAIR_BUDGET):
        reply, usage = backend.complete(messages, [])
        usage_total = usage_total + usage
        graph, violations = _try_parse(reply.content, req.catalog)
        if graph is not None:
            return graph, usage_total
        messages = messages + [
            reply,
            ChatMessage(
                role="user",
                content=(
                    "That workflow is invalid:\n"
                    + "\n".join(f"- {v}" for v in violations)
                    + "\nReturn a corrected JSON object in the required format."
                ),
            ),
        ]
    raise PlanningFailed(
        f"planner output still invalid after {REPAIR_BUDGET} repairs", last_violations=violations
    )


def _refinement_problems(old: AovGraph, new: AovGraph, error: dict) -> list[str]:
    """D8 checks: done vertices verbatim; the failed vertex reset or gone."""
    problems: list[str] = []
    for key, sub in old.tasks.items():
        if sub.status != Status.DONE.value:
            continue
        cand = new.tasks.get(key)
        if cand is None:
            problems.append(f"completed subtask {key!r} was removed")
        elif (
            cand.id != sub.id
            or cand.agent != sub.agent
            or cand.objective != sub.objective
            or cand.status != Status.DONE.value
        ):
            problems.append(f"completed subtask {key!r} was modified; it must stay verbatim")
    failed_id = error.get("vertex")
    if failed_id and failed_id in new.tasks:
        if new.tasks[failed_id].status not in (Status.PENDING.value,):
            problems.append(
                f"failed subtask {failed_id!r} must be reset to 'pending' or replaced"
            )
    return problems


def refine(ctx: RefinementContext, backend) -> tuple[AovGraph, Usage]:
    """Rebuild a failed workflow, preserving completed vertices.

    The update prompt carries the current graph and the error; the reply
    must parse, validate, keep done vertices verbatim, and reset or drop
    the failed vertex. Violations earn repair turns within REPAIR_BUDGET;
    attempts beyond REFINE_BUDGET raise RefinementFailed immediately.
    """
    if ctx.attempt > REFINE_BUDGET:
        raise RefinementFailed(f"refinement budget of {REFINE_BUDGET} attempts exhausted")
    update = ChatMessage(
        role="user",
        content=(
            f"Current workflow:\n{serialize(ctx.current_graph)}\n\n"
            f"Subtask {ctx.error.get('vertex')!r} failed with error: "
            f"{ctx.error.get('message')}\n"
            "Return the full updated workflow JSON."
        ),
    )
    messages = (
        [ChatMessage(role="system", content=load_prompt("refine_system"))]
        + list(ctx.chat_history)
        + [update]
    )
    usage_total = Usage()
    catalog_problems: list[str] = []
    for _ in range(1 + REPAIR_BUDGET):
        reply, usage = backend.complete(messages, [])
        usage_total = usage_total + usage
        block = extract_json_object(reply.content)
        problems: list[str] = []
        graph: AovGraph | None = None
        if block is None:
            problems = ["reply contains no JSON object"]
        else:
            try:
                graph = deserialize(block)
            except EngineError as exc:
                problems = [str(exc)]
        if graph is not None:
            report = validate(graph)
            problems = report.messages() + _refinement_problems(
                ctx.current_graph, graph, ctx.error
            )
        if graph is not None and not problems:
            for sub in graph.tasks.values():
                if sub.status != Status.DONE.value:
                    sub.status = Status.PENDING.value
            return graph, usage_total
        catalog_problems = problems
        messages = messages + [
            reply,
            ChatMessage(
                role="user",
                content=(
                    "That update is invalid:\n"
                    + "\n".join(f"- {p}" for p in problems)
                    + "\nReturn a corrected JSON object."
                ),
            ),
        ]
    raise RefinementFailed(
        "refinement reply still invalid after repairs: " + "; ".join(catalog_problems)
    )
