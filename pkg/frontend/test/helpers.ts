import type { Graph, Vertex, VertexStatus } from "../src/types.js";

/** Build a graph from edge pairs, keeping next/prev symmetric. */
export function mkGraph(edges: [string, string][], extra: string[] = []): Graph {
  const tasks: Record<string, Vertex> = {};
  const ensure = (id: string): Vertex => {
    tasks[id] ??= {
      id,
      objective: `objective for ${id}`,
      next: [],
      prev: [],
      status: "pending" as VertexStatus,
      agent: "vision_agent",
    };
    return tasks[id]!;
  };
  for (const [from, to] of edges) {
    ensure(from).next.push(to);
    ensure(to).prev.push(from);
  }
  for (const id of extra) ensure(id);
  return { tasks };
}
