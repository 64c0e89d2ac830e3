/** Payload shapes of the workbench HTTP API, mirrored one to one. */

export type VertexStatus = "pending" | "running" | "done" | "failed";

export interface Vertex {
  id: string;
  objective: string;
  next: string[];
  prev: string[];
  status: VertexStatus;
  agent: string;
}

export interface Graph {
  tasks: Record<string, Vertex>;
}

export interface TaskSummary {
  id: string;
  query: string;
  oracle: boolean;
  tags: string[];
  vertices: number;
  calls: number;
}

export interface AgentInfo {
  name: string;
  description: string;
  tools: string[];
}

export interface Catalog {
  agents: AgentInfo[];
}

export interface Violation {
  code: string;
  subject: string;
  message: string;
}

export interface ValidationReport {
  ok: boolean;
  violations: Violation[];
}

export interface UsageDict {
  prompt_tokens: number;
  completion_tokens: number;
}

export interface WorkflowSnapshot {
  id: string;
  task_id: string;
  mode: string;
  graph: Graph;
  status: string;
  vertex_statuses: Record<string, VertexStatus>;
  usage: UsageDict;
}

export interface ToolCallRecord {
  seq: number;
  agent: string;
  tool: string;
  arguments: Record<string, unknown>;
  result: unknown;
  error: string | null;
  usage_attribution: UsageDict;
  vertex: string | null;
}

export type RunEvent =
  | { seq: number; kind: "vertex_status"; payload: { vertex: string; status: VertexStatus } }
  | { seq: number; kind: "tool_call"; payload: { record: ToolCallRecord } }
  | { seq: number; kind: "usage"; payload: { delta: UsageDict; total: UsageDict } }
  | { seq: number; kind: "graph_replaced"; payload: { version: number } }
  | { seq: number; kind: "run_finished"; payload: { completed: boolean; usage_total: UsageDict } };

export interface StatusPage {
  status: string;
  running: boolean;
  vertex_statuses: Record<string, VertexStatus>;
  usage: UsageDict;
  events: RunEvent[];
  next_cursor: number;
}

export interface RunTrace {
  workflow_id: string;
  task_id: string;
  completed: boolean | null;
  trace: ToolCallRecord[];
  usage_total: UsageDict | null;
  failure: { stage: string; message: string } | null;
}

export interface RunScore {
  success: number;
  correctness: number;
  flow_score: number | null;
  tokens: number;
}

export interface ReportBody {
  runs: Record<string, { task_id: string; mode: string; score: RunScore }>;
}
