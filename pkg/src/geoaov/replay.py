"""Scripted decision replays for benchmark tasks.

Given a task's ground truth (workflow graph plus tool-call trace), these
builders emit the exact chat-completion replies each strategy's executor
will request, in the order it will request them. That turns the whole
pipeline into a deterministic fixture: same decisions under every
strategy, so metric and token comparisons are like-for-like.

Token model: scripted replies carry no pinned usage, so the backend sizes
each turn as ceil(chars/4) over the serialized request and reply. The
deliberation texts below are therefore calibrated, not cosmetic: terse
notes for explicit-objective execution, chattier notes for implicit
objectives and the baselines, long ledger restatements for the
orchestrator. Changing them shifts the measured token profile.
"""

from __future__ import annotations

from dataclasses import dataclass

from .backend import ChatMessage, ScriptedBackend, ScriptEntry, ToolCall
from .executor import TRIAGE_AGENT, StrategyKind
from .graph import AovGraph, Status, serialize, topo_order
from .metrics import GroundTruth
from .planner import terse_label
from .toolenv import FaultEntry, FaultPlan, catalog_default

GT_REPLAY_MODEL = "gt-replay"

PLANNER_MATCH = {"role": "system", "content_prefix": "You are a workflow planner"}

VERTEX_DONE = "Subtask complete; results are in the shared history."
ABORT_TEXT = "The API call failed; stopping this subtask so the workflow can be refined."

IMPLICIT_NOTE = (
    "The terse label omits the study parameters, so I am inferring the area of "
    "interest, time range, and data source from the shared history first."
)
IMPLICIT_DONE = (
    "Subtask finished; parameters were inferred from the shared history rather than "
    "stated instructions."
)

SEQ_NOTE = (
    "Taking my turn in the pipeline. No explicit objective was assigned to me, so I "
    "will scan the full conversation so far, restate what the user asked for, check "
    "which inputs earlier agents produced, decide which of my APIs advances the task "
    "from here, and call it with parameters reconstructed from the history. If the "
    "reconstruction is wrong the next agent will have to compensate, so I am spelling "
    "out my assumptions: the area of interest, the date window, and the data source "
    "are all taken from the user's opening message as echoed above."
)
SEQ_DONE = (
    "My pipeline turn is complete. Everything I produced is recorded above for the "
    "next agent; I could not verify whether later stages actually need more from me, "
    "since the pipeline order is fixed and I will not be consulted again. Handing the "
    "conversation onward with my assumptions spelled out in full."
)
SEQ_IDLE = (
    "I reviewed the whole conversation and none of my APIs are needed at this point "
    "in the pipeline. The fixed turn order obliges me to respond regardless, so I am "
    "recording explicitly that I checked each of my tools against the task, found no "
    "applicable action, and am passing my turn without calling anything."
)

SWARM_NOTE = (
    "I have the conversation now. Before acting I am re-deriving the task parameters "
    "from the handoff context: which area of interest, which dates, and which data "
    "source the user meant, plus whether an earlier specialist already produced the "
    "inputs my APIs require. Proceeding with my best reconstruction."
)
SWARM_TRANSFER = (
    "My part is done. Returning control to triage so the next specialist can pick up "
    "the remaining work with the context above."
)
SWARM_FINAL = (
    "All requested work is complete; summarizing results for the user and ending the "
    "handoff chain here."
)
TRIAGE_NOTE = (
    "Reading the task and the progress so far to decide which specialist should act "
    "next; routing the conversation accordingly."
)

LEDGER_TEXT = (
    "Ledger update. Restating the task for the team: the user's request, the facts "
    "established so far, and the work remaining. Facts: every API result reported "
    "above stands as recorded, including datasets loaded, detections produced, layers "
    "rendered, and statistics computed. Remaining: the next unfinished stage of the "
    "task as described by the user. Decision follows: I will now select the next "
    "speaker best positioned to advance the task, or terminate if nothing remains."
)
GC_DONE = "Step complete; results recorded for the orchestrator."
FINAL_LEDGER = (
    "Ledger update. All stages of the user's request are complete and verified "
    "against the conversation; no work remains for any agent on the team."
)


def _agent_match(agent: str) -> dict[str, str]:
    return {"role": "system", "content_prefix": f"You are {agent}:"}


def _text(agent: str, content: str) -> ScriptEntry:
    return ScriptEntry(
        reply=ChatMessage(role="assistant", content=content), match=_agent_match(agent)
    )


class _CallIds:
    def __init__(self):
        self.n = 0

    def next(self) -> str:
        self.n += 1
        return f"call_{self.n}"


def _call_turn(agent: str, call: dict, ids: _CallIds, note: str = "") -> ScriptEntry:
    return ScriptEntry(
        reply=ChatMessage(
            role="assistant",
            content=note,
            tool_calls=[ToolCall(ids.next(), call["tool"], dict(call["arguments"]))],
        ),
        match=_agent_match(agent),
    )


def calls_by_vertex(gt: GroundTruth) -> dict[str, list[dict]]:
    out: dict[str, list[dict]] = {vid: [] for vid in gt.aov.tasks}
    for call in gt.trace:
        out[call["vertex"]].append(call)
    return out


def acting_agents(gt: GroundTruth) -> list[str]:
    order: list[str] = []
    for call in gt.trace:
        if call["agent"] not in order:
            order.append(call["agent"])
    return order


def terse_graph(aov: AovGraph) -> AovGraph:
    g = aov.clone()
    for sub in g.tasks.values():
        sub.objective = terse_label(sub.objective)
    return g


def planner_entry(graph: AovGraph) -> ScriptEntry:
    return ScriptEntry(
        reply=ChatMessage(role="assistant", content=serialize(graph)), match=PLANNER_MATCH
    )


def build_script_backend_for_plan(graph: AovGraph) -> ScriptedBackend:
    return ScriptedBackend([planner_entry(graph)])


def _vertex_turns(
    gt: GroundTruth, ids: _CallIds, note: str, done_text: str
) -> list[ScriptEntry]:
    entries: list[ScriptEntry] = []
    by_vertex = calls_by_vertex(gt)
    for vid in topo_order(gt.aov):
        agent = gt.aov.tasks[vid].agent
        for call in by_vertex[vid]:
            entries.append(_call_turn(agent, call, ids, note))
        entries.append(_text(agent, done_text))
    return entries


def build_geoflow_script(gt: GroundTruth) -> ScriptedBackend:
    ids = _CallIds()
    entries = [planner_entry(gt.aov)]
    entries.extend(_vertex_turns(gt, ids, "", VERTEX_DONE))
    return ScriptedBackend(entries)


def build_flow_implicit_script(gt: GroundTruth) -> ScriptedBackend:
    ids = _CallIds()
    entries = [planner_entry(terse_graph(gt.aov))]
    entries.extend(_vertex_turns(gt, ids, IMPLICIT_NOTE, IMPLICIT_DONE))
    return ScriptedBackend(entries)


def build_sequential_script(gt: GroundTruth, catalog=None) -> ScriptedBackend:
    catalog = catalog or catalog_default()
    ids = _CallIds()
    by_agent: dict[str, list[dict]] = {}
    for call in gt.trace:
        by_agent.setdefault(call["agent"], []).append(call)
    entries: list[ScriptEntry] = []
    for spec in catalog.agents:
        calls = by_agent.get(spec.name, [])
        if not calls:
            entries.append(_text(spec.name, SEQ_IDLE))
            continue
        for call in calls:
            entries.append(_call_turn(spec.name, call, ids, SEQ_NOTE))
        entries.append(_text(spec.name, SEQ_DONE))
    return ScriptedBackend(entries)


def build_group_chat_script(gt: GroundTruth) -> ScriptedBackend:
    ids = _CallIds()
    orch_match = {"role": "system", "content_prefix": "You orchestrate"}
    by_agent: dict[str, list[dict]] = {}
    for call in gt.trace:
        by_agent.setdefault(call["agent"], []).append(call)
    entries: list[ScriptEntry] = []
    for agent in acting_agents(gt):
        entries.append(
            ScriptEntry(reply=ChatMessage(role="assistant", content=LEDGER_TEXT), match=orch_match)
        )
        entries.append(
            ScriptEntry(reply=ChatMessage(role="assistant", content=agent), match=orch_match)
        )
        for call in by_agent[agent]:
            entries.append(_call_turn(agent, call, ids, SEQ_NOTE))
        entries.append(_text(agent, GC_DONE))
    entries.append(
        ScriptEntry(reply=ChatMessage(role="assistant", content=FINAL_LEDGER), match=orch_match)
    )
    entries.append(
        ScriptEntry(reply=ChatMessage(role="assistant", content="TERMINATE"), match=orch_match)
    )
    return ScriptedBackend(entries)


def _transfer_turn(agent: str, target: str, ids: _CallIds, note: str) -> ScriptEntry:
    return ScriptEntry(
        reply=ChatMessage(
            role="assistant",
            content=note,
            tool_calls=[ToolCall(ids.next(), f"transfer_to_{target}", {})],
        ),
        match=_agent_match(agent),
    )


def build_swarm_script(gt: GroundTruth) -> ScriptedBackend:
    ids = _CallIds()
    by_agent: dict[str, list[dict]] = {}
    for call in gt.trace:
        by_agent.setdefault(call["agent"], []).append(call)
    agents = acting_agents(gt)
    entries: list[ScriptEntry] = []
    entries.append(_transfer_turn(TRIAGE_AGENT, agents[0], ids, TRIAGE_NOTE))
    for i, agent in enumerate(agents):
        for call in by_agent[agent]:
            entries.append(_call_turn(agent, call, ids, SWARM_NOTE))
        if i + 1 < len(agents):
            entries.append(_transfer_turn(agent, TRIAGE_AGENT, ids, SWARM_TRANSFER))
            entries.append(_transfer_turn(TRIAGE_AGENT, agents[i + 1], ids, TRIAGE_NOTE))
        else:
            entries.append(_text(agent, SWARM_FINAL))
    return ScriptedBackend(entries)


def build_script(gt: GroundTruth, strategy: str) -> ScriptedBackend:
    """Clean-run replay script for one strategy."""
    builders = {
        StrategyKind.GEOFLOW.value: build_geoflow_script,
        StrategyKind.FLOW_IMPLICIT.value: build_flow_implicit_script,
        StrategyKind.SEQUENTIAL.value: build_sequential_script,
        StrategyKind.GROUP_CHAT_LEDGER.value: build_group_chat_script,
        StrategyKind.SWARM_HANDOFF.value: build_swarm_script,
    }
    builder = builders.get(strategy)
    if builder is None:
        raise ValueError(f"unknown strategy {strategy!r}")
    return builder(gt)


def build_judge_script(score: int = 5) -> ScriptedBackend:
    return ScriptedBackend(
        [ScriptEntry(reply=ChatMessage(role="assistant", content=str(score)))], repeat=True
    )


def _occurrence_of(trace: list[dict], index: int) -> int:
    target = trace[index]
    return sum(
        1
        for c in trace[: index + 1]
        if c["agent"] == target["agent"] and c["tool"] == target["tool"]
    )


def degradation_fault_plan(gt: GroundTruth, k: int) -> FaultPlan:
    """Error out the last k ground-truth calls.

    Faulting a trace suffix is cascade-safe: any call whose inputs a
    faulted call would have produced comes later in the trace, so it is
    in the faulted suffix itself. Correctness then degrades to exactly
    (n - k) / n.
    """
    n = len(gt.trace)
    if not 0 <= k <= n:
        raise ValueError(f"k must be within 0..{n}")
    entries = [
        FaultEntry(
            agent=gt.trace[i]["agent"],
            tool=gt.trace[i]["tool"],
            occurrence=_occurrence_of(gt.trace, i),
            effect="error",
        )
        for i in range(n - k, n)
    ]
    return FaultPlan(entries)


@dataclass
class RefineScenario:
    """Everything a one-fault-plus-refinement run needs, prebuilt."""

    faults: FaultPlan
    execution: ScriptedBackend
    refine_backend: ScriptedBackend


def build_refine_scenario(gt: GroundTruth, vertex_index: int = 0) -> RefineScenario:
    """Fault the first call of one vertex; script the recovery.

    The faulted vertex aborts on attempt one, the scripted refinement
    returns the same workflow with completed vertices kept done and the
    failed vertex reset, and the re-walk replays the vertex in full. The
    trace ends up one call longer than ground truth: n matched calls plus
    the faulted one, so correctness is exactly n / (n + 1) while the task
    still succeeds.
    """
    order = topo_order(gt.aov)
    by_vertex = calls_by_vertex(gt)
    target_vid = order[vertex_index]
    if not by_vertex[target_vid]:
        raise ValueError(f"vertex {target_vid!r} has no ground-truth calls to fault")
    first_call = by_vertex[target_vid][0]
    flat_index = next(i for i, c in enumerate(gt.trace) if c is first_call)
    faults = FaultPlan(
        [
            FaultEntry(
                agent=first_call["agent"],
                tool=first_call["tool"],
                occurrence=_occurrence_of(gt.trace, flat_index),
                effect="error",
            )
        ]
    )

    ids = _CallIds()
    entries = [planner_entry(gt.aov)]
    for vid in order[:vertex_index]:
        agent = gt.aov.tasks[vid].agent
        for call in by_vertex[vid]:
            entries.append(_call_turn(agent, call, ids))
        entries.append(_text(agent, VERTEX_DONE))
    agent = gt.aov.tasks[target_vid].agent
    entries.append(_call_turn(agent, first_call, ids))
    entries.append(_text(agent, ABORT_TEXT))
    # post-refinement re-walk: done vertices skipped, target replayed fully
    for vid in order[vertex_index:]:
        agent = gt.aov.tasks[vid].agent
        for call in by_vertex[vid]:
            entries.append(_call_turn(agent, call, ids))
        entries.append(_text(agent, VERTEX_DONE))

    refined = gt.aov.clone()
    for vid in order[:vertex_index]:
        refined.tasks[vid].status = Status.DONE.value
    refine_backend = ScriptedBackend(
        [ScriptEntry(reply=ChatMessage(role="assistant", content=serialize(refined)), match=PLANNER_MATCH)]
    )
    return RefineScenario(
        faults=faults, execution=ScriptedBackend(entries), refine_backend=refine_backend
    )


def build_service_script(
    graph: AovGraph, gt: GroundTruth, planner_reply: AovGraph | None = None
) -> ScriptedBackend:
    """Replay script for executing a possibly user-edited workflow.

    Recorded decisions are keyed by vertex id: vertices the user added
    have no recorded calls and reply with text immediately; a vertex
    reassigned to another agent replays its calls against that agent, so
    an API outside the new agent's set fails the natural way.
    """
    ids = _CallIds()
    by_vertex = calls_by_vertex(gt)
    entries: list[ScriptEntry] = []
    if planner_reply is not None:
        entries.append(planner_entry(planner_reply))
    for vid in topo_order(graph):
        agent = graph.tasks[vid].agent
        for call in by_vertex.get(vid, []):
            entries.append(
                ScriptEntry(
                    reply=ChatMessage(
                        role="assistant",
                        content="",
                        tool_calls=[ToolCall(ids.next(), call["tool"], dict(call["arguments"]))],
                    )
                )
            )
        entries.append(ScriptEntry(reply=ChatMessage(role="assistant", content=VERTEX_DONE)))
    return ScriptedBackend(entries)
