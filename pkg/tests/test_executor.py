import pytest

from geoaov import replay
from geoaov.backend import ChatMessage, ScriptEntry, ScriptedBackend, ToolCall, Usage
from geoaov.executor import (
    GRAPH_STRATEGIES,
    VERTEX_TURN_CAP,
    StrategyKind,
    run_graph_strategy,
    run_group_chat,
    run_sequential,
    run_swarm,
)
from geoaov.graph import Status, topo_order
from geoaov.planner import RefinementContext, refine
from geoaov.toolenv import ToolEnvironment

import oracles


def execution_backend(task, strategy="geoflow"):
    """Replay script minus the planner turn (consumed by planner.generate)."""
    script = replay.build_script(task.ground_truth, strategy)
    if strategy in GRAPH_STRATEGIES:
        return ScriptedBackend(script.entries[1:])
    return script


def run_graph_task(task, strategy="geoflow", env=None, **kwargs):
    gt = task.ground_truth
    env = env or ToolEnvironment()
    graph = gt.aov if strategy == "geoflow" else replay.terse_graph(gt.aov)
    return run_graph_strategy(
        graph.clone(), env, execution_backend(task, strategy),
        mode=strategy, assertions=gt.final_assertions, task_query=task.query,
        **kwargs,
    )


@pytest.fixture
def diamond_task(tasks_by_id):
    for task in tasks_by_id.values():
        g = task.ground_truth.aov
        if any(len(s.next) > 1 for s in g.tasks.values()):
            return task
    pytest.fail("suite has no branching task")


class TestGraphStrategy:
    def test_replay_completes_with_exact_trace(self, tasks_by_id):
        task = tasks_by_id["vehicles-la-eo"]
        result = run_graph_task(task)
        assert result.completed and result.failure is None
        got = [(r.agent, r.tool, r.arguments) for r in result.trace]
        want = [(c["agent"], c["tool"], c["arguments"]) for c in task.ground_truth.trace]
        assert got == want
        assert not any(r.error for r in result.trace)

    def test_all_vertices_end_done(self, tasks_by_id):
        task = tasks_by_id["vehicles-la-eo"]
        result = run_graph_task(task)
        final = result.graph_history[-1]
        assert all(s.status == Status.DONE.value for s in final.tasks.values())

    def test_flow_implicit_same_decisions(self, tasks_by_id):
        task = tasks_by_id["vehicles-la-eo"]
        geo = run_graph_task(task, "geoflow")
        imp = run_graph_task(task, "flow_implicit")
        assert imp.completed
        assert [(r.agent, r.tool) for r in imp.trace] == [(r.agent, r.tool) for r in geo.trace]

    def test_dependency_safety_on_branching_graph(self, diamond_task):
        result = run_graph_task(diamond_task)
        assert result.completed
        gt_graph = diamond_task.ground_truth.aov
        first_seq = {}
        last_seq = {}
        for rec in result.trace:
            first_seq.setdefault(rec.vertex, rec.seq)
            last_seq[rec.vertex] = rec.seq
        for u, v in gt_graph.edges():
            if u in last_seq and v in first_seq:
                assert last_seq[u] < first_seq[v], (u, v)

    def test_usage_additivity(self, tasks_by_id):
        task = tasks_by_id["vehicles-la-eo"]
        backend = execution_backend(task)
        seen = []
        original = backend.complete

        def spy(messages, tools=None):
            reply, usage = original(messages, tools)
            seen.append(usage)
            return reply, usage

        backend.complete = spy
        gt = task.ground_truth
        result = run_graph_strategy(
            gt.aov.clone(), ToolEnvironment(), backend,
            assertions=gt.final_assertions, task_query=task.query,
        )
        total = Usage()
        for u in seen:
            total = total + u
        assert result.usage_total == total

    def test_bit_identical_repeat_runs(self, tasks_by_id):
        task = tasks_by_id["flood-bangladesh-sar"]
        a = run_graph_task(task).to_dict()
        b = run_graph_task(task).to_dict()
        assert a == b

    def test_shared_chat_carries_prior_vertex_results(self, tasks_by_id):
        task = tasks_by_id["vehicles-la-eo"]
        result = run_graph_task(task)
        roles = [m.role for m in result.chat]
        assert "tool" in roles and "assistant" in roles
        # the task query opens the shared history
        assert result.chat[0].role == "user"
        assert result.chat[0].content == task.query

    def test_assertion_failure_fails_run(self, tasks_by_id):
        task = tasks_by_id["vehicles-la-eo"]
        gt = task.ground_truth
        impossible = gt.final_assertions + [
            {"path": "analytics.count:unicorn", "comparator": "exists"}
        ]
        result = run_graph_strategy(
            gt.aov.clone(), ToolEnvironment(), execution_backend(task),
            assertions=impossible, task_query=task.query,
        )
        assert not result.completed
        assert result.failure["stage"] == "assertions"

    def test_turn_cap_fails_vertex(self):
        graph = oracles.make_graph([], [("t0", "database_agent")])
        looping = ScriptedBackend([ScriptEntry(
            reply=ChatMessage(role="assistant", content="", tool_calls=[
                ToolCall("c1", "load_satellite_imagery",
                         {"aoi": "x", "start": "2024-01-01", "end": "2024-01-02", "source": "EO"}),
            ]),
        )], repeat=True)
        result = run_graph_strategy(graph, ToolEnvironment(), looping)
        assert not result.completed
        assert result.failure["stage"] == "vertex"
        assert len(result.trace) == VERTEX_TURN_CAP

    def test_fault_without_refinement_presses_on(self, tasks_by_id):
        task = tasks_by_id["vehicles-la-eo"]
        gt = task.ground_truth
        faults = replay.degradation_fault_plan(gt, 1)
        env = ToolEnvironment(faults=faults)
        result = run_graph_strategy(
            gt.aov.clone(), env, execution_backend(task),
            assertions=gt.final_assertions, task_query=task.query,
        )
        assert not result.completed
        # the faulted call is error-flagged, every other call still happened
        assert sum(1 for r in result.trace if r.error) == 1
        assert len(result.trace) == len(gt.trace)

    def test_events_tell_the_run_story(self, tasks_by_id):
        task = tasks_by_id["vehicles-la-eo"]
        events = []
        run_graph_task(task, on_event=lambda kind, payload: events.append((kind, payload)))
        statuses = [e[1] for e in events if e[0] == "vertex_status"]
        order = topo_order(task.ground_truth.aov)
        # each vertex shows running then done, in topological order
        expected = []
        for vid in order:
            expected += [{"vertex": vid, "status": "running"}, {"vertex": vid, "status": "done"}]
        assert statuses == expected
        totals = [e[1]["total"] for e in events if e[0] == "usage"]
        sums = [t["prompt_tokens"] + t["completion_tokens"] for t in totals]
        assert sums == sorted(sums)
        assert events[-1][0] == "run_finished"
        assert events[-1][1]["completed"] is True


class TestRefinementFlow:
    def test_scenario_restores_success(self, tasks_by_id):
        task = tasks_by_id["vehicles-la-eo"]
        gt = task.ground_truth
        scenario = replay.build_refine_scenario(gt)
        env = ToolEnvironment(faults=scenario.faults)
        execution = ScriptedBackend(scenario.execution.entries[1:])

        def refine_hook(ctx: RefinementContext):
            return refine(ctx, scenario.refine_backend)

        result = run_graph_strategy(
            gt.aov.clone(), env, execution,
            assertions=gt.final_assertions, task_query=task.query,
            refine_hook=refine_hook,
        )
        assert result.completed
        assert len(result.graph_history) == 2
        assert len(result.trace) == len(gt.trace) + 1
        assert sum(1 for r in result.trace if r.error) == 1

    def test_done_vertices_not_reexecuted(self, tasks_by_id):
        task = tasks_by_id["flood-bangladesh-sar"]
        gt = task.ground_truth
        order = topo_order(gt.aov)
        scenario = replay.build_refine_scenario(gt, vertex_index=1)
        env = ToolEnvironment(faults=scenario.faults)

        result = run_graph_strategy(
            gt.aov.clone(), env, ScriptedBackend(scenario.execution.entries[1:]),
            assertions=gt.final_assertions, task_query=task.query,
            refine_hook=lambda ctx: refine(ctx, scenario.refine_backend),
        )
        assert result.completed
        by_vertex = replay.calls_by_vertex(gt)
        done_before_fault = order[0]
        calls_for_first = [r for r in result.trace if r.vertex == done_before_fault]
        assert len(calls_for_first) == len(by_vertex[done_before_fault])


class TestSequential:
    def test_every_agent_speaks_idle_included(self, tasks_by_id, catalog):
        # pick a task that leaves at least one catalog agent unused
        task = next(
            t for t in tasks_by_id.values()
            if len({c["agent"] for c in t.ground_truth.trace}) < len(catalog.agents)
        )
        gt = task.ground_truth
        result = run_sequential(
            ToolEnvironment(), replay.build_sequential_script(gt),
            task_query=task.query, assertions=gt.final_assertions,
        )
        assert result.completed
        trace_agents = {r.agent for r in result.trace}
        assert trace_agents == {c["agent"] for c in gt.trace}
        # idle agents still produced an assistant turn in the shared chat
        speakers = {
            m.content for m in result.chat if m.role == "assistant" and not m.tool_calls
        }
        assert len(speakers) >= 1


class TestGroupChat:
    def test_bad_speaker_name_repaired_once(self):
        env = ToolEnvironment()
        entries = [
            ScriptEntry(reply=ChatMessage(role="assistant", content="Ledger: nothing yet.")),
            ScriptEntry(reply=ChatMessage(role="assistant", content="the_database_guy")),
            ScriptEntry(reply=ChatMessage(role="assistant", content="TERMINATE")),
        ]
        result = run_group_chat(env, ScriptedBackend(entries), task_query="do the thing")
        assert result.completed
        assert result.failure is None

    def test_unrepaired_speaker_fails_run(self):
        env = ToolEnvironment()
        entries = [
            ScriptEntry(reply=ChatMessage(role="assistant", content="Ledger: nothing yet.")),
            ScriptEntry(reply=ChatMessage(role="assistant", content="nobody")),
            ScriptEntry(reply=ChatMessage(role="assistant", content="still nobody")),
        ]
        result = run_group_chat(env, ScriptedBackend(entries), task_query="q")
        assert not result.completed
        assert result.failure["stage"] == "orchestrator"

    def test_round_cap_exhaustion(self):
        env = ToolEnvironment()
        entries = [
            ScriptEntry(reply=ChatMessage(role="assistant", content="Ledger.")),
            ScriptEntry(reply=ChatMessage(role="assistant", content="database_agent")),
            ScriptEntry(reply=ChatMessage(role="assistant", content="standing by.")),
        ]
        result = run_group_chat(
            env, ScriptedBackend(entries, repeat=True), task_query="q", round_cap=2,
        )
        assert not result.completed
        assert result.failure["stage"] == "orchestrator"
        assert "cap" in result.failure["message"]

    def test_full_replay_on_suite_task(self, tasks_by_id):
        task = tasks_by_id["vehicles-la-eo"]
        gt = task.ground_truth
        result = run_group_chat(
            ToolEnvironment(), replay.build_group_chat_script(gt),
            task_query=task.query, assertions=gt.final_assertions,
        )
        assert result.completed
        assert [(r.agent, r.tool) for r in result.trace] == [
            (c["agent"], c["tool"]) for c in gt.trace
        ]


class TestSwarm:
    def test_full_replay_transfers_stay_out_of_trace(self, tasks_by_id):
        task = tasks_by_id["vehicles-la-eo"]
        gt = task.ground_truth
        result = run_swarm(
            ToolEnvironment(), replay.build_swarm_script(gt),
            task_query=task.query, assertions=gt.final_assertions,
        )
        assert result.completed
        assert all(not r.tool.startswith("transfer_to_") for r in result.trace)
        assert [(r.agent, r.tool) for r in result.trace] == [
            (c["agent"], c["tool"]) for c in gt.trace
        ]

    def test_unknown_transfer_hits_environment(self):
        env = ToolEnvironment()
        entries = [
            ScriptEntry(reply=ChatMessage(role="assistant", content="", tool_calls=[
                ToolCall("c1", "transfer_to_weather_agent", {}),
            ])),
            ScriptEntry(reply=ChatMessage(role="assistant", content="giving up")),
        ]
        result = run_swarm(env, ScriptedBackend(entries), task_query="q")
        assert not result.completed
        assert len(result.trace) == 1
        assert result.trace[0].error
        assert result.trace[0].result["error"]["type"] == "unknown_tool"

    def test_triage_has_no_platform_tools(self):
        env = ToolEnvironment()
        offered = []

        class Probe:
            def complete(self, messages, tools=None):
                offered.append([t.name for t in tools or []])
                return ChatMessage(role="assistant", content="done"), Usage(1, 1)

        run_swarm(env, Probe(), task_query="q")
        assert all(name.startswith("transfer_to_") for name in offered[0])


class TestStrategyParity:
    def test_identical_final_state_across_all_five(self, tasks_by_id):
        task = tasks_by_id["vehicles-la-eo"]
        gt = task.ground_truth
        hashes = {}
        for strategy in ("geoflow", "flow_implicit"):
            env = ToolEnvironment()
            run_graph_task(task, strategy, env=env)
            hashes[strategy] = env.state.state_hash()
        env = ToolEnvironment()
        run_sequential(env, replay.build_sequential_script(gt),
                       task_query=task.query, assertions=gt.final_assertions)
        hashes["sequential"] = env.state.state_hash()
        env = ToolEnvironment()
        run_group_chat(env, replay.build_group_chat_script(gt),
                       task_query=task.query, assertions=gt.final_assertions)
        hashes["group_chat_ledger"] = env.state.state_hash()
        env = ToolEnvironment()
        run_swarm(env, replay.build_swarm_script(gt),
                  task_query=task.query, assertions=gt.final_assertions)
        hashes["swarm_handoff"] = env.state.state_hash()
        assert len(set(hashes.values())) == 1, hashes
