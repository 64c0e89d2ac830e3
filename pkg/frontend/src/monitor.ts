/** Run monitor state, built purely by folding service events in arrival
 * order. Replaying a recorded stream through `replayEvents` reproduces the
 * live state exactly; that property is what the tests pin down. */

import type { Graph, RunEvent, UsageDict, VertexStatus } from "./types.js";

export interface FeedItem {
  seq: number;
  text: string;
  kind: "tool_call" | "error" | "note";
}

export interface MonitorState {
  runStatus: "idle" | "running" | "done" | "failed";
  vertexStatuses: Record<string, VertexStatus>;
  feed: FeedItem[];
  promptTokens: number;
  completionTokens: number;
  graphVersion: number;
  /** seq of the last applied event; stale or duplicate events are ignored */
  lastSeq: number;
}

export function initialMonitor(graph: Graph): MonitorState {
  const vertexStatuses: Record<string, VertexStatus> = {};
  for (const id of Object.keys(graph.tasks)) vertexStatuses[id] = "pending";
  return {
    runStatus: "idle",
    vertexStatuses,
    feed: [],
    promptTokens: 0,
    completionTokens: 0,
    graphVersion: 1,
    lastSeq: -1,
  };
}

export function tokenTally(state: MonitorState): number {
  return state.promptTokens + state.completionTokens;
}

function formatArgs(args: Record<string, unknown>): string {
  return Object.entries(args)
    .map(([k, v]) => `${k}=${JSON.stringify(v)}`)
    .join(" ");
}

export function applyEvent(state: MonitorState, event: RunEvent): MonitorState {
  if (event.seq <= state.lastSeq) return state;
  const next: MonitorState = {
    ...state,
    vertexStatuses: { ...state.vertexStatuses },
    feed: [...state.feed],
    lastSeq: event.seq,
    runStatus: state.runStatus === "idle" ? "running" : state.runStatus,
  };
  switch (event.kind) {
    case "vertex_status": {
      next.vertexStatuses[event.payload.vertex] = event.payload.status;
      break;
    }
    case "tool_call": {
      const r = event.payload.record;
      const line = `${r.agent} ${r.tool}(${formatArgs(r.arguments)})`;
      if (r.error) {
        next.feed.push({ seq: event.seq, kind: "error", text: `${line} failed: ${r.error}` });
      } else {
        next.feed.push({ seq: event.seq, kind: "tool_call", text: line });
      }
      break;
    }
    case "usage": {
      next.promptTokens = event.payload.total.prompt_tokens;
      next.completionTokens = event.payload.total.completion_tokens;
      break;
    }
    case "graph_replaced": {
      next.graphVersion = event.payload.version;
      next.feed.push({
        seq: event.seq,
        kind: "note",
        text: `workflow refined, now at version ${event.payload.version}`,
      });
      break;
    }
    case "run_finished": {
      next.runStatus = event.payload.completed ? "done" : "failed";
      applyUsageTotal(next, event.payload.usage_total);
      break;
    }
  }
  return next;
}

function applyUsageTotal(state: MonitorState, total: UsageDict): void {
  state.promptTokens = total.prompt_tokens;
  state.completionTokens = total.completion_tokens;
}

export function replayEvents(graph: Graph, events: RunEvent[]): MonitorState {
  return events.reduce(applyEvent, initialMonitor(graph));
}
