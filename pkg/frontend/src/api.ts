/** Typed fetch client for the workbench service. The service is the single
 * source of truth for graph validity: saves go through PUT and come back
 * either as a fresh snapshot or as a validation report. */

import type {
  Catalog,
  Graph,
  ReportBody,
  RunTrace,
  StatusPage,
  TaskSummary,
  ValidationReport,
  WorkflowSnapshot,
} from "./types.js";

export type SaveResult =
  | { ok: true; snapshot: WorkflowSnapshot }
  | { ok: false; report: ValidationReport };

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
  }
}

async function readDetail(resp: Response): Promise<string> {
  try {
    const body = (await resp.json()) as { detail?: unknown };
    if (typeof body.detail === "string") return body.detail;
    return JSON.stringify(body.detail ?? body);
  } catch {
    return resp.statusText;
  }
}

export class WorkbenchClient {
  constructor(readonly baseUrl: string = "") {}

  private async getJson<T>(path: string): Promise<T> {
    const resp = await fetch(this.baseUrl + path);
    if (!resp.ok) throw new ApiError(resp.status, await readDetail(resp));
    return (await resp.json()) as T;
  }

  tasks(): Promise<TaskSummary[]> {
    return this.getJson("/api/tasks");
  }

  catalog(): Promise<Catalog> {
    return this.getJson("/api/catalog");
  }

  async generate(taskId: string, mode = "geoflow"): Promise<WorkflowSnapshot> {
    const resp = await fetch(this.baseUrl + "/api/workflows/generate", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ task_id: taskId, mode }),
    });
    if (!resp.ok) throw new ApiError(resp.status, await readDetail(resp));
    return (await resp.json()) as WorkflowSnapshot;
  }

  workflow(id: string): Promise<WorkflowSnapshot> {
    return this.getJson(`/api/workflows/${id}`);
  }

  /** PUT the edited graph. A 422 is not an exception: it is the validation
   * verdict the editor renders inline. */
  async save(id: string, graph: Graph): Promise<SaveResult> {
    const resp = await fetch(this.baseUrl + `/api/workflows/${id}`, {
      method: "PUT",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ graph }),
    });
    if (resp.status === 422) {
      const body = (await resp.json()) as { detail: ValidationReport };
      return { ok: false, report: body.detail };
    }
    if (!resp.ok) throw new ApiError(resp.status, await readDetail(resp));
    return { ok: true, snapshot: (await resp.json()) as WorkflowSnapshot };
  }

  async execute(id: string): Promise<void> {
    const resp = await fetch(this.baseUrl + `/api/workflows/${id}/execute`, {
      method: "POST",
    });
    if (!resp.ok) throw new ApiError(resp.status, await readDetail(resp));
  }

  status(id: string, after = 0): Promise<StatusPage> {
    return this.getJson(`/api/workflows/${id}/status?after=${after}`);
  }

  trace(id: string): Promise<RunTrace> {
    return this.getJson(`/api/runs/${id}/trace`);
  }

  report(): Promise<ReportBody> {
    return this.getJson("/api/report");
  }
}
