import { describe, expect, it } from "vitest";

import {
  addEdge,
  applySaveResult,
  hasLocalCycle,
  markersFromReport,
  openEditor,
  removeEdge,
  setAgent,
  setObjective,
} from "../src/editor.js";
import type { ValidationReport } from "../src/types.js";
import { mkGraph } from "./helpers.js";

const base = () =>
  mkGraph([
    ["a", "b"],
    ["b", "c"],
  ]);

describe("openEditor", () => {
  it("starts clean with an independent draft", () => {
    const g = base();
    const state = openEditor(g);
    expect(state.dirty).toBe(false);
    expect(state.draft).toEqual(g);
    expect(state.draft).not.toBe(g);
    state.draft.tasks["a"]!.objective = "scribble";
    expect(g.tasks["a"]!.objective).not.toBe("scribble");
  });
});

describe("field edits", () => {
  it("setObjective marks dirty and leaves the base alone", () => {
    const state = setObjective(openEditor(base()), "a", "new text");
    expect(state.dirty).toBe(true);
    expect(state.draft.tasks["a"]!.objective).toBe("new text");
    expect(state.base.tasks["a"]!.objective).toBe("objective for a");
  });

  it("setAgent swaps the assignment", () => {
    const state = setAgent(openEditor(base()), "b", "map_agent");
    expect(state.draft.tasks["b"]!.agent).toBe("map_agent");
    expect(state.dirty).toBe(true);
  });

  it("rejects unknown vertices", () => {
    expect(() => setObjective(openEditor(base()), "zz", "x")).toThrow(/no vertex/);
  });
});

describe("edge edits", () => {
  it("addEdge keeps next and prev symmetric", () => {
    const state = addEdge(openEditor(base()), "a", "c");
    expect(state.draft.tasks["a"]!.next).toContain("c");
    expect(state.draft.tasks["c"]!.prev).toContain("a");
    expect(state.dirty).toBe(true);
  });

  it("adding an existing edge is a no-op", () => {
    const opened = openEditor(base());
    expect(addEdge(opened, "a", "b")).toBe(opened);
  });

  it("removeEdge drops both directions", () => {
    const state = removeEdge(openEditor(base()), "a", "b");
    expect(state.draft.tasks["a"]!.next).not.toContain("b");
    expect(state.draft.tasks["b"]!.prev).not.toContain("a");
  });

  it("removing a missing edge is a no-op", () => {
    const opened = openEditor(base());
    expect(removeEdge(opened, "a", "c")).toBe(opened);
  });

  it("throws on unknown endpoints", () => {
    expect(() => addEdge(openEditor(base()), "a", "zz")).toThrow(/zz/);
  });
});

describe("hasLocalCycle", () => {
  it("is false for a DAG", () => {
    expect(hasLocalCycle(base())).toBe(false);
  });

  it("spots a back edge added in the editor", () => {
    const state = addEdge(openEditor(base()), "c", "a");
    expect(hasLocalCycle(state.draft)).toBe(true);
  });

  it("ignores dangling references instead of crashing", () => {
    const g = base();
    g.tasks["c"]!.next.push("ghost");
    expect(hasLocalCycle(g)).toBe(false);
  });
});

describe("markers", () => {
  const report: ValidationReport = {
    ok: false,
    violations: [
      { code: "CYCLE", subject: "b", message: "'b' is part of a dependency cycle" },
      { code: "NO_SOURCE", subject: "graph", message: "no entry vertex" },
    ],
  };

  it("keys violations by vertex, graph-level ones under the empty key", () => {
    const markers = markersFromReport(report, base());
    expect(markers["b"]).toHaveLength(1);
    expect(markers["b"]![0]!.code).toBe("CYCLE");
    expect(markers[""]).toHaveLength(1);
  });

  it("applySaveResult keeps the rejected draft and surfaces markers", () => {
    const dirtyState = addEdge(openEditor(base()), "c", "a");
    const after = applySaveResult(dirtyState, { ok: false, report });
    expect(after.dirty).toBe(true);
    expect(after.draft).toEqual(dirtyState.draft);
    expect(after.markers["b"]![0]!.code).toBe("CYCLE");
  });

  it("applySaveResult adopts the server graph on success", () => {
    const dirtyState = setObjective(openEditor(base()), "a", "saved text");
    const after = applySaveResult(dirtyState, { ok: true, graph: dirtyState.draft });
    expect(after.dirty).toBe(false);
    expect(after.markers).toEqual({});
    expect(after.base.tasks["a"]!.objective).toBe("saved text");
  });
});
