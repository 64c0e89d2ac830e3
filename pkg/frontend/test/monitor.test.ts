import { describe, expect, it } from "vitest";

import {
  applyEvent,
  initialMonitor,
  replayEvents,
  tokenTally,
} from "../src/monitor.js";
import type { RunEvent, ToolCallRecord } from "../src/types.js";
import { mkGraph } from "./helpers.js";

const graph = () => mkGraph([["a", "b"]]);

function record(partial: Partial<ToolCallRecord> = {}): ToolCallRecord {
  return {
    seq: 1,
    agent: "vision_agent",
    tool: "run_detector",
    arguments: { dataset: "ds-1" },
    result: { detection_id: "det-1" },
    error: null,
    usage_attribution: { prompt_tokens: 10, completion_tokens: 2 },
    vertex: "a",
    ...partial,
  };
}

/** A plausible clean-run stream in service event shape. */
function stream(): RunEvent[] {
  return [
    { seq: 0, kind: "vertex_status", payload: { vertex: "a", status: "running" } },
    { seq: 1, kind: "usage", payload: { delta: { prompt_tokens: 40, completion_tokens: 6 }, total: { prompt_tokens: 40, completion_tokens: 6 } } },
    { seq: 2, kind: "tool_call", payload: { record: record() } },
    { seq: 3, kind: "vertex_status", payload: { vertex: "a", status: "done" } },
    { seq: 4, kind: "vertex_status", payload: { vertex: "b", status: "running" } },
    { seq: 5, kind: "usage", payload: { delta: { prompt_tokens: 52, completion_tokens: 9 }, total: { prompt_tokens: 92, completion_tokens: 15 } } },
    { seq: 6, kind: "tool_call", payload: { record: record({ seq: 2, agent: "map_agent", tool: "render_layer", vertex: "b" }) } },
    { seq: 7, kind: "vertex_status", payload: { vertex: "b", status: "done" } },
    { seq: 8, kind: "run_finished", payload: { completed: true, usage_total: { prompt_tokens: 92, completion_tokens: 15 } } },
  ];
}

describe("initialMonitor", () => {
  it("starts idle with every vertex pending and zero tokens", () => {
    const m = initialMonitor(graph());
    expect(m.runStatus).toBe("idle");
    expect(m.vertexStatuses).toEqual({ a: "pending", b: "pending" });
    expect(tokenTally(m)).toBe(0);
  });
});

describe("applyEvent", () => {
  it("flips to running on the first event and tracks statuses", () => {
    const m = applyEvent(initialMonitor(graph()), stream()[0]!);
    expect(m.runStatus).toBe("running");
    expect(m.vertexStatuses["a"]).toBe("running");
  });

  it("does not mutate the previous state", () => {
    const start = initialMonitor(graph());
    applyEvent(start, stream()[0]!);
    expect(start.vertexStatuses["a"]).toBe("pending");
    expect(start.runStatus).toBe("idle");
  });

  it("takes token totals from the event, not by summing deltas", () => {
    let m = initialMonitor(graph());
    m = applyEvent(m, stream()[1]!);
    m = applyEvent(m, stream()[5]!);
    expect(m.promptTokens).toBe(92);
    expect(m.completionTokens).toBe(15);
    expect(tokenTally(m)).toBe(107);
  });

  it("renders successful and failed tool calls differently", () => {
    let m = initialMonitor(graph());
    m = applyEvent(m, { seq: 0, kind: "tool_call", payload: { record: record() } });
    m = applyEvent(m, {
      seq: 1,
      kind: "tool_call",
      payload: { record: record({ error: "tool backend unavailable" }) },
    });
    expect(m.feed[0]!.kind).toBe("tool_call");
    expect(m.feed[0]!.text).toContain("run_detector");
    expect(m.feed[1]!.kind).toBe("error");
    expect(m.feed[1]!.text).toContain("failed: tool backend unavailable");
  });

  it("ignores stale or duplicate sequence numbers", () => {
    const first = stream()[0]!;
    let m = applyEvent(initialMonitor(graph()), first);
    const again = applyEvent(m, first);
    expect(again).toBe(m);
    m = applyEvent(m, { ...first, seq: -5 } as RunEvent);
    expect(m.feed).toHaveLength(0);
  });

  it("finishes done or failed from run_finished", () => {
    const done = applyEvent(initialMonitor(graph()), stream()[8]!);
    expect(done.runStatus).toBe("done");
    expect(tokenTally(done)).toBe(107);
    const failed = applyEvent(initialMonitor(graph()), {
      seq: 0,
      kind: "run_finished",
      payload: { completed: false, usage_total: { prompt_tokens: 5, completion_tokens: 1 } },
    });
    expect(failed.runStatus).toBe("failed");
  });

  it("notes refinement graph replacements in the feed", () => {
    const m = applyEvent(initialMonitor(graph()), {
      seq: 0,
      kind: "graph_replaced",
      payload: { version: 2 },
    });
    expect(m.graphVersion).toBe(2);
    expect(m.feed[0]!.text).toContain("version 2");
  });
});

describe("replayEvents", () => {
  it("reproduces the incrementally built state exactly", () => {
    const events = stream();
    let live = initialMonitor(graph());
    for (const event of events) live = applyEvent(live, event);
    expect(replayEvents(graph(), events)).toEqual(live);
  });

  it("lands on a fully done run for a clean stream", () => {
    const final = replayEvents(graph(), stream());
    expect(final.runStatus).toBe("done");
    expect(final.vertexStatuses).toEqual({ a: "done", b: "done" });
    expect(final.feed.filter((f) => f.kind === "tool_call")).toHaveLength(2);
    expect(tokenTally(final)).toBe(107);
  });

  it("replay of any prefix equals the live state at that point", () => {
    const events = stream();
    let live = initialMonitor(graph());
    for (let i = 0; i < events.length; i++) {
      live = applyEvent(live, events[i]!);
      expect(replayEvents(graph(), events.slice(0, i + 1))).toEqual(live);
    }
  });
});
