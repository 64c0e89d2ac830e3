/** Graph editing model. The draft lives client-side; every save round-trips
 * through the service, and a 422 verdict becomes per-vertex markers. The
 * client also runs a local cycle check so the save control can warn before
 * the round-trip, but the server verdict is what blocks persistence. */

import type { Graph, ValidationReport, Violation } from "./types.js";

export interface EditorState {
  /** last snapshot accepted by the service */
  base: Graph;
  draft: Graph;
  dirty: boolean;
  /** violations keyed by vertex id; "" collects graph-level ones */
  markers: Record<string, Violation[]>;
}

export function cloneGraph(graph: Graph): Graph {
  return JSON.parse(JSON.stringify(graph)) as Graph;
}

export function openEditor(graph: Graph): EditorState {
  return { base: cloneGraph(graph), draft: cloneGraph(graph), dirty: false, markers: {} };
}

function touched(state: EditorState): EditorState {
  return { ...state, dirty: true, markers: {} };
}

export function setObjective(state: EditorState, id: string, text: string): EditorState {
  const next = touched(state);
  next.draft = cloneGraph(state.draft);
  const v = next.draft.tasks[id];
  if (!v) throw new Error(`no vertex ${id}`);
  v.objective = text;
  return next;
}

export function setAgent(state: EditorState, id: string, agent: string): EditorState {
  const next = touched(state);
  next.draft = cloneGraph(state.draft);
  const v = next.draft.tasks[id];
  if (!v) throw new Error(`no vertex ${id}`);
  v.agent = agent;
  return next;
}

/** Add from -> to, keeping next/prev symmetric. Adding an existing edge is a
 * no-op that does not mark the draft dirty. */
export function addEdge(state: EditorState, from: string, to: string): EditorState {
  const a = state.draft.tasks[from];
  const b = state.draft.tasks[to];
  if (!a || !b) throw new Error(`unknown endpoint ${!a ? from : to}`);
  if (a.next.includes(to) && b.prev.includes(from)) return state;
  const next = touched(state);
  next.draft = cloneGraph(state.draft);
  const na = next.draft.tasks[from]!;
  const nb = next.draft.tasks[to]!;
  if (!na.next.includes(to)) na.next.push(to);
  if (!nb.prev.includes(from)) nb.prev.push(from);
  return next;
}

export function removeEdge(state: EditorState, from: string, to: string): EditorState {
  const a = state.draft.tasks[from];
  const b = state.draft.tasks[to];
  if (!a || !b) throw new Error(`unknown endpoint ${!a ? from : to}`);
  if (!a.next.includes(to) && !b.prev.includes(from)) return state;
  const next = touched(state);
  next.draft = cloneGraph(state.draft);
  next.draft.tasks[from]!.next = next.draft.tasks[from]!.next.filter((x) => x !== to);
  next.draft.tasks[to]!.prev = next.draft.tasks[to]!.prev.filter((x) => x !== from);
  return next;
}

/** DFS over next edges; true when the draft contains a dependency cycle. */
export function hasLocalCycle(graph: Graph): boolean {
  const state = new Map<string, "open" | "closed">();
  const visit = (id: string): boolean => {
    const mark = state.get(id);
    if (mark === "open") return true;
    if (mark === "closed") return false;
    state.set(id, "open");
    for (const child of graph.tasks[id]?.next ?? []) {
      if (child in graph.tasks && visit(child)) return true;
    }
    state.set(id, "closed");
    return false;
  };
  return Object.keys(graph.tasks).some(visit);
}

export function markersFromReport(report: ValidationReport, graph: Graph): Record<string, Violation[]> {
  const markers: Record<string, Violation[]> = {};
  for (const violation of report.violations) {
    const key = violation.subject in graph.tasks ? violation.subject : "";
    (markers[key] ??= []).push(violation);
  }
  return markers;
}

/** Fold a save verdict back into the editor. Success adopts the server's
 * snapshot as the new base; rejection keeps the draft and surfaces markers. */
export function applySaveResult(
  state: EditorState,
  result: { ok: true; graph: Graph } | { ok: false; report: ValidationReport },
): EditorState {
  if (result.ok) {
    return { base: cloneGraph(result.graph), draft: cloneGraph(result.graph), dirty: false, markers: {} };
  }
  return { ...state, markers: markersFromReport(result.report, state.draft) };
}
