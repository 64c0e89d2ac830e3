/** Layered DAG layout. Columns are longest-path ranks (every edge points to a
 * strictly later column), rows within a column follow the mean row of the
 * predecessors to keep edges short. Pure and deterministic. */

import type { Graph } from "./types.js";

export interface PlacedVertex {
  id: string;
  col: number;
  row: number;
  x: number;
  y: number;
}

export interface Layout {
  nodes: Map<string, PlacedVertex>;
  columns: string[][];
  /** vertices left unranked by a dependency cycle; parked in a final column */
  cyclic: string[];
}

export const COL_WIDTH = 220;
export const ROW_HEIGHT = 96;
export const MARGIN_X = 40;
export const MARGIN_Y = 32;

export function layeredLayout(graph: Graph): Layout {
  const ids = Object.keys(graph.tasks).sort();
  const indeg = new Map<string, number>();
  for (const id of ids) indeg.set(id, graph.tasks[id]!.prev.length);

  // Kahn walk assigning rank = 1 + max rank of predecessors
  const rank = new Map<string, number>();
  let ready = ids.filter((id) => indeg.get(id) === 0);
  while (ready.length > 0) {
    const id = ready.shift()!;
    const v = graph.tasks[id]!;
    const r = v.prev.reduce((acc, p) => Math.max(acc, (rank.get(p) ?? -1) + 1), 0);
    rank.set(id, r);
    for (const child of [...v.next].sort()) {
      const d = (indeg.get(child) ?? 0) - 1;
      indeg.set(child, d);
      if (d === 0) ready.push(child);
    }
    ready.sort();
  }

  const cyclic = ids.filter((id) => !rank.has(id)).sort();
  const maxRank = Math.max(-1, ...rank.values());
  for (const id of cyclic) rank.set(id, maxRank + 1);

  const columns: string[][] = [];
  for (const id of ids) {
    const r = rank.get(id)!;
    (columns[r] ??= []).push(id);
  }

  const nodes = new Map<string, PlacedVertex>();
  columns.forEach((col, c) => {
    const keyed = col.map((id) => {
      const prevRows = graph.tasks[id]!.prev
        .map((p) => nodes.get(p)?.row)
        .filter((r): r is number => r !== undefined);
      const mean =
        prevRows.length > 0 ? prevRows.reduce((a, b) => a + b, 0) / prevRows.length : 0;
      return { id, mean };
    });
    keyed.sort((a, b) => a.mean - b.mean || (a.id < b.id ? -1 : 1));
    keyed.forEach(({ id }, row) => {
      nodes.set(id, {
        id,
        col: c,
        row,
        x: MARGIN_X + c * COL_WIDTH,
        y: MARGIN_Y + row * ROW_HEIGHT,
      });
    });
    columns[c] = keyed.map((k) => k.id);
  });

  return { nodes, columns, cyclic };
}

export interface EdgeLine {
  from: string;
  to: string;
  x1: number;
  y1: number;
  x2: number;
  y2: number;
}

export function edgeLines(graph: Graph, layout: Layout, nodeW: number, nodeH: number): EdgeLine[] {
  const lines: EdgeLine[] = [];
  for (const v of Object.values(graph.tasks)) {
    for (const to of v.next) {
      const a = layout.nodes.get(v.id);
      const b = layout.nodes.get(to);
      if (!a || !b) continue;
      lines.push({
        from: v.id,
        to,
        x1: a.x + nodeW,
        y1: a.y + nodeH / 2,
        x2: b.x,
        y2: b.y + nodeH / 2,
      });
    }
  }
  lines.sort((p, q) => (p.from + p.to < q.from + q.to ? -1 : 1));
  return lines;
}
