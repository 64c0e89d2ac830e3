"""Orchestration strategies: graph-driven execution plus three baselines.

The graph strategies walk the workflow in topological order and run one
tool-augmented subagent loop per vertex. The baselines reproduce the
orchestration shape (and thus the token profile) of sequential pipelines,
orchestrator-led group chat, and handoff-style agent transfer; they share
the same subagent loop so like-for-like comparisons differ only in how
control and chat history move around.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable

from .backend import ChatMessage, ToolSchema, Usage
from .errors import RefinementFailed
from .graph import AovGraph, Status, serialize, topo_order
from .planner import REFINE_BUDGET, RefinementContext, terse_label
from .toolenv import ToolEnvironment, assert_final_state

VERTEX_TURN_CAP = 8
SWARM_HOP_CAP = 16
GROUP_CHAT_ROUND_CAP = 12
ORCH_REPAIR_TURNS = 1


class StrategyKind(str, Enum):
    GEOFLOW = "geoflow"
    FLOW_IMPLICIT = "flow_implicit"
    SEQUENTIAL = "sequential"
    GROUP_CHAT_LEDGER = "group_chat_ledger"
    SWARM_HANDOFF = "swarm_handoff"


GRAPH_STRATEGIES = (StrategyKind.GEOFLOW.value, StrategyKind.FLOW_IMPLICIT.value)


@dataclass
class RunResult:
    completed: bool
    final_state: dict
    trace: list
    graph_history: list[AovGraph]
    chat: list[ChatMessage]
    usage_total: Usage
    failure: dict | None = None

    def to_dict(self) -> dict:
        return {
            "completed": self.completed,
            "final_state": self.final_state,
            "trace": [r.to_dict() for r in self.trace],
            "graph_history": [json.loads(serialize(g)) for g in self.graph_history],
            "chat": [m.to_dict() for m in self.chat],
            "usage_total": self.usage_total.to_dict(),
            "failure": self.failure,
        }


EventHook = Callable[[str, dict], None]


def _emit(on_event: EventHook | None, kind: str, payload: dict) -> None:
    if on_event is not None:
        on_event(kind, payload)


class _Run:
    """Mutable state shared by one task execution."""

    def __init__(self, env: ToolEnvironment, backend, on_event: EventHook | None = None):
        self.env = env
        self.backend = backend
        self.chat: list[ChatMessage] = []
        self.usage = Usage()
        self.on_event = on_event

    def complete(self, messages: list[ChatMessage], tools: list[ToolSchema]):
        reply, usage = self.backend.complete(messages, tools)
        self.usage = self.usage + usage
        _emit(self.on_event, "usage", {"delta": usage.to_dict(), "total": self.usage.to_dict()})
        return reply, usage

    def subagent_loop(
        self,
        agent: str,
        system_text: str,
        tools: list[ToolSchema],
        vertex: str | None = None,
        opening: ChatMessage | None = None,
        intercept: Callable[[str, dict], dict | None] | None = None,
    ) -> tuple[bool, str | None]:
        """Run one agent until it replies with text or hits the turn cap.

        Tool calls go to the environment; `intercept` may satisfy a call
        without touching the environment (handoff transfers). Returns
        (ok, handoff_target). A vertex fails when the cap is hit or an
        errored (agent, tool) pair is never retried successfully.
        """
        local: list[ChatMessage] = []
        if opening is not None:
            local.append(opening)
        open_errors: set[tuple[str, str]] = set()
        handoff: str | None = None
        capped = True
        for _ in range(VERTEX_TURN_CAP):
            request = [ChatMessage(role="system", content=system_text)] + self.chat + local
            reply, usage = self.complete(request, tools)
            local.append(reply)
            if not reply.tool_calls:
                capped = False
                break
            for call in reply.tool_calls:
                if intercept is not None:
                    hijacked = intercept(call.tool_name, call.arguments)
                    if hijacked is not None:
                        if "handoff" in hijacked:
                            handoff = hijacked["handoff"]
                        local.append(
                            ChatMessage(
                                role="tool",
                                content=json.dumps(hijacked),
                                tool_call_id=call.call_id,
                            )
                        )
                        continue
                result, record = self.env.invoke(
                    agent, call.tool_name, call.arguments, usage=usage, vertex=vertex
                )
                _emit(
                    self.on_event,
                    "tool_call",
                    {"record": record.to_dict()},
                )
                if record.error:
                    open_errors.add((record.agent, record.tool))
                else:
                    open_errors.discard((record.agent, record.tool))
                local.append(
                    ChatMessage(
                        role="tool", content=json.dumps(result), tool_call_id=call.call_id
                    )
                )
            if handoff is not None:
                capped = False
                break
        self.chat.extend(local)
        ok = not capped and not open_errors
        return ok, handoff


def _agent_system(env: ToolEnvironment, agent: str, instruction: str) -> str:
    spec = env.catalog.get(agent)
    description = spec.description if spec else agent
    return f"You are {agent}: {description}.\n{instruction}"


def _finish(
    run: _Run,
    env: ToolEnvironment,
    graphs: list[AovGraph],
    assertions: list[dict],
    completed: bool,
    failure: dict | None,
) -> RunResult:
    if completed and assertions:
        ok, failures = assert_final_state(env.state, assertions)
        if not ok:
            completed = False
            failure = {"stage": "assertions", "message": "; ".join(failures)}
    result = RunResult(
        completed=completed,
        final_state=env.state.snapshot(),
        trace=list(env.trace),
        graph_history=graphs,
        chat=run.chat,
        usage_total=run.usage,
        failure=failure,
    )
    _emit(
        run.on_event,
        "run_finished",
        {"completed": result.completed, "usage_total": result.usage_total.to_dict()},
    )
    return result


def run_graph_strategy(
    graph: AovGraph,
    env: ToolEnvironment,
    backend,
    mode: str = StrategyKind.GEOFLOW.value,
    assertions: list[dict] | None = None,
    refine_hook: Callable[[RefinementContext], tuple[AovGraph, Usage]] | None = None,
    task_query: str | None = None,
    on_event: EventHook | None = None,
) -> RunResult:
    """Execute a workflow graph vertex by vertex in topological order.

    On a vertex failure the refine hook (when given) is asked for an
    updated graph; execution restarts on it, skipping vertices already
    done. When refinement is unavailable or gives up, the run presses on
    through the remaining vertices so the damage stays measurable.
    """
    assertions = list(assertions or [])
    work = graph.clone()
    graphs = [work]
    run = _Run(env, backend, on_event)
    if task_query:
        run.chat.append(ChatMessage(role="user", content=task_query))
    refine_attempts = 0
    refining = refine_hook is not None
    failure: dict | None = None

    restart = True
    while restart:
        restart = False
        for vid in topo_order(work):
            sub = work.tasks[vid]
            if sub.status in (Status.DONE.value, Status.FAILED.value):
                continue
            sub.status = Status.RUNNING.value
            _emit(on_event, "vertex_status", {"vertex": vid, "status": sub.status})
            if mode == StrategyKind.GEOFLOW.value:
                instruction = f"Your objective: {sub.objective}"
            else:
                instruction = f"Your subtask: {terse_label(sub.objective)}"
            spec = env.catalog.get(sub.agent)
            tools = spec.tools if spec else []
            ok, _ = run.subagent_loop(
                sub.agent, _agent_system(env, sub.agent, instruction), tools, vertex=vid
            )
            sub.status = Status.DONE.value if ok else Status.FAILED.value
            _emit(on_event, "vertex_status", {"vertex": vid, "status": sub.status})
            if ok:
                continue
            failure = {
                "stage": "vertex",
                "message": f"subtask {vid!r} failed during execution",
            }
            if refining and refine_attempts < REFINE_BUDGET:
                refine_attempts += 1
                ctx = RefinementContext(
                    current_graph=work,
                    chat_history=list(run.chat),
                    error={"vertex": vid, "message": failure["message"]},
                    attempt=refine_attempts,
                )
                try:
                    new_graph, usage = refine_hook(ctx)
                except RefinementFailed as exc:
                    refining = False
                    failure = {"stage": "refinement", "message": str(exc)}
                else:
                    run.usage = run.usage + usage
                    work = new_graph.clone()
                    graphs.append(work)
                    _emit(on_event, "graph_replaced", {"version": len(graphs)})
                    failure = None
                    restart = True
                    break
        # a refined graph restarts the topo walk; otherwise we are done

    all_done = all(s.status == Status.DONE.value for s in work.tasks.values())
    if not all_done and failure is None:
        failure = {"stage": "vertex", "message": "not all subtasks completed"}
    return _finish(run, env, graphs, assertions, all_done, failure)


def run_sequential(
    env: ToolEnvironment,
    backend,
    task_query: str,
    assertions: list[dict] | None = None,
    on_event: EventHook | None = None,
) -> RunResult:
    """Pipeline baseline: every catalog agent speaks exactly once, in order."""
    run = _Run(env, backend, on_event)
    run.chat.append(ChatMessage(role="user", content=task_query))
    all_ok = True
    for spec in env.catalog.agents:
        instruction = (
            "Work on the user's task with your own APIs, building on the "
            "conversation so far. Reply with text when your part is done."
        )
        ok, _ = run.subagent_loop(
            spec.name, _agent_system(env, spec.name, instruction), spec.tools
        )
        all_ok = all_ok and ok
    failure = None if all_ok else {"stage": "vertex", "message": "an agent step failed"}
    return _finish(run, env, [], assertions or [], all_ok, failure)


ORCH_SYSTEM = (
    "You orchestrate a team of GIS agents: {names}. Each round, first restate "
    "the task ledger (facts so far, what remains), then pick the next speaker."
)
ORCH_PICK = (
    "Reply with exactly one agent name from {names}, or TERMINATE if the task is complete."
)


def run_group_chat(
    env: ToolEnvironment,
    backend,
    task_query: str,
    assertions: list[dict] | None = None,
    round_cap: int = GROUP_CHAT_ROUND_CAP,
    on_event: EventHook | None = None,
) -> RunResult:
    """Orchestrator baseline: ledger turn + speaker-selection turn per round.

    Both orchestrator turns are charged to usage; this consensus overhead
    is the mechanism behind the strategy's token cost.
    """
    run = _Run(env, backend, on_event)
    run.chat.append(ChatMessage(role="user", content=task_query))
    names = env.catalog.names()
    orch_system = ORCH_SYSTEM.format(names=", ".join(names))
    completed = False
    failure: dict | None = None
    for _ in range(round_cap):
        ledger_req = [ChatMessage(role="system", content=orch_system)] + run.chat + [
            ChatMessage(role="user", content="Update the ledger.")
        ]
        ledger, _ = run.complete(ledger_req, [])
        run.chat.append(ledger)

        speaker: str | None = None
        pick_prompt = ChatMessage(role="user", content=ORCH_PICK.format(names=", ".join(names)))
        pick_req = [ChatMessage(role="system", content=orch_system)] + run.chat + [pick_prompt]
        for attempt in range(1 + ORCH_REPAIR_TURNS):
            pick, _ = run.complete(pick_req, [])
            name = pick.content.strip()
            if name == "TERMINATE" or name in names:
                speaker = name
                break
            pick_req = pick_req + [
                pick,
                ChatMessage(
                    role="user",
                    content=f"{name!r} is not a valid choice. " + ORCH_PICK.format(names=", ".join(names)),
                ),
            ]
        if speaker is None:
            failure = {"stage": "orchestrator", "message": "speaker selection failed"}
            break
        if speaker == "TERMINATE":
            completed = True
            break
        spec = env.catalog.get(speaker)
        instruction = "Continue the task with your own APIs. Reply with text when done."
        ok, _ = run.subagent_loop(
            speaker, _agent_system(env, speaker, instruction), spec.tools
        )
        if not ok:
            failure = {"stage": "vertex", "message": f"agent {speaker!r} step failed"}
    else:
        failure = {"stage": "orchestrator", "message": "round cap exhausted"}
    if failure is not None:
        completed = False
    return _finish(run, env, [], assertions or [], completed, failure)


TRIAGE_AGENT = "triage_agent"


def _transfer_schema(target: str) -> ToolSchema:
    return ToolSchema(
        name=f"transfer_to_{target}",
        description=f"Hand the conversation off to {target}",
        parameters={"type": "object", "properties": {}, "required": []},
    )


def run_swarm(
    env: ToolEnvironment,
    backend,
    task_query: str,
    assertions: list[dict] | None = None,
    on_event: EventHook | None = None,
) -> RunResult:
    """Handoff baseline: control moves via transfer_to_<agent> tool calls.

    A synthetic triage agent (transfers only, no platform APIs) starts the
    conversation. Transfers to known agents are satisfied in-chat without
    touching the environment; a transfer to a made-up agent falls through
    to the platform and is recorded as an unknown tool.
    """
    run = _Run(env, backend, on_event)
    run.chat.append(ChatMessage(role="user", content=task_query))
    names = env.catalog.names()
    known_transfers = {f"transfer_to_{n}": n for n in names + [TRIAGE_AGENT]}

    def intercept(tool_name: str, arguments: dict) -> dict | None:
        if tool_name in known_transfers:
            return {"handoff": known_transfers[tool_name], "status": "transferred"}
        return None

    current = TRIAGE_AGENT
    completed = False
    failure: dict | None = None
    for _ in range(SWARM_HOP_CAP):
        if current == TRIAGE_AGENT:
            system = (
                f"You are {TRIAGE_AGENT}: route the user's task to the right specialist. "
                "You have no platform APIs of your own."
            )
            tools = [_transfer_schema(n) for n in names]
        else:
            spec = env.catalog.get(current)
            system = _agent_system(
                env,
                current,
                "Use your own APIs; transfer when another specialist is needed, "
                "or reply with text when the task is complete.",
            )
            tools = list(spec.tools) + [
                _transfer_schema(n) for n in names + [TRIAGE_AGENT] if n != current
            ]
        ok, handoff = run.subagent_loop(current, system, tools, intercept=intercept)
        if handoff is not None:
            current = handoff
            continue
        completed = ok
        if not ok:
            failure = {"stage": "vertex", "message": f"agent {current!r} step failed"}
        break
    else:
        failure = {"stage": "handoff", "message": "handoff cap exhausted"}
    if failure is not None:
        completed = False
    return _finish(run, env, [], assertions or [], completed, failure)
