/** DOM shell. All decisions live in the pure modules (layout, editor,
 * monitor); this file only renders their state and forwards clicks to the
 * client. Base URL comes from ?api=... or defaults to same origin with a
 * localhost fallback for file:// use. */

import { ApiError, WorkbenchClient } from "./api.js";
import {
  addEdge,
  applySaveResult,
  hasLocalCycle,
  openEditor,
  removeEdge,
  setAgent,
  setObjective,
  type EditorState,
} from "./editor.js";
import { COL_WIDTH, edgeLines, layeredLayout } from "./layout.js";
import {
  applyEvent,
  initialMonitor,
  tokenTally,
  type MonitorState,
} from "./monitor.js";
import type { Catalog, RunScore, TaskSummary, WorkflowSnapshot } from "./types.js";

const NODE_W = 180;
const NODE_H = 72;
const POLL_MS = 250;

function apiBase(): string {
  const param = new URLSearchParams(window.location.search).get("api");
  if (param) return param.replace(/\/$/, "");
  if (window.location.protocol === "file:") return "http://127.0.0.1:8321";
  return "";
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  ...children: (Node | string)[]
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) {
    if (k === "class") node.className = v;
    else node.setAttribute(k, v);
  }
  node.append(...children);
  return node;
}

function svgEl(tag: string, attrs: Record<string, string>): SVGElement {
  const node = document.createElementNS("http://www.w3.org/2000/svg", tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  return node;
}

interface AppState {
  tasks: TaskSummary[];
  catalog: Catalog;
  workflow: WorkflowSnapshot | null;
  editor: EditorState | null;
  monitor: MonitorState | null;
  score: RunScore | null;
  selected: string | null;
  running: boolean;
  banner: string | null;
}

class App {
  private client = new WorkbenchClient(apiBase());
  private state: AppState = {
    tasks: [],
    catalog: { agents: [] },
    workflow: null,
    editor: null,
    monitor: null,
    score: null,
    selected: null,
    running: false,
    banner: null,
  };
  private root: HTMLElement;
  private pollTimer: number | null = null;

  constructor(root: HTMLElement) {
    this.root = root;
  }

  async start(): Promise<void> {
    try {
      const [tasks, catalog] = await Promise.all([this.client.tasks(), this.client.catalog()]);
      this.state.tasks = tasks;
      this.state.catalog = catalog;
      this.state.banner = null;
    } catch (err) {
      this.state.banner = `service unreachable: ${String(err)}`;
    }
    this.render();
  }

  private async guard(action: () => Promise<void>): Promise<void> {
    try {
      await action();
      this.state.banner = null;
    } catch (err) {
      this.state.banner = err instanceof ApiError ? `${err.status}: ${err.message}` : String(err);
    }
    this.render();
  }

  private openWorkflow(snapshot: WorkflowSnapshot): void {
    this.state.workflow = snapshot;
    this.state.editor = openEditor(snapshot.graph);
    this.state.monitor = initialMonitor(snapshot.graph);
    this.state.score = null;
    this.state.selected = Object.keys(snapshot.graph.tasks)[0] ?? null;
    this.state.running = false;
  }

  private pickTask(taskId: string, mode: string): void {
    void this.guard(async () => {
      this.openWorkflow(await this.client.generate(taskId, mode));
    });
  }

  private save(): void {
    const wf = this.state.workflow;
    const editor = this.state.editor;
    if (!wf || !editor) return;
    void this.guard(async () => {
      const result = await this.client.save(wf.id, editor.draft);
      if (result.ok) {
        this.state.workflow = result.snapshot;
        this.state.editor = applySaveResult(editor, { ok: true, graph: result.snapshot.graph });
        this.state.monitor = initialMonitor(result.snapshot.graph);
      } else {
        this.state.editor = applySaveResult(editor, result);
      }
    });
  }

  private run(): void {
    const wf = this.state.workflow;
    if (!wf || this.state.running) return;
    void this.guard(async () => {
      await this.client.execute(wf.id);
      this.state.running = true;
      this.state.score = null;
      this.state.monitor = initialMonitor(this.state.editor?.base ?? wf.graph);
      this.poll(wf.id, 0);
    });
  }

  private poll(wfId: string, cursor: number): void {
    if (this.pollTimer !== null) window.clearTimeout(this.pollTimer);
    this.pollTimer = window.setTimeout(() => {
      void (async () => {
        try {
          const page = await this.client.status(wfId, cursor);
          let monitor = this.state.monitor ?? initialMonitor(this.state.workflow!.graph);
          for (const event of page.events) monitor = applyEvent(monitor, event);
          this.state.monitor = monitor;
          this.state.running = page.running;
          if (!page.running && (page.status === "done" || page.status === "failed")) {
            const report = await this.client.report();
            this.state.score = report.runs[wfId]?.score ?? null;
            const snapshot = await this.client.workflow(wfId);
            this.state.workflow = snapshot;
            this.state.editor = openEditor(snapshot.graph);
          } else {
            this.poll(wfId, page.next_cursor);
          }
        } catch (err) {
          this.state.banner = String(err);
          this.state.running = false;
        }
        this.render();
      })();
    }, POLL_MS);
  }

  private render(): void {
    this.root.replaceChildren(
      this.renderBanner(),
      el(
        "div",
        { class: "columns" },
        this.renderTaskList(),
        this.renderCanvas(),
        this.renderInspector(),
      ),
      this.renderRunPanel(),
    );
  }

  private renderBanner(): HTMLElement {
    if (!this.state.banner) return el("div", { class: "banner hidden" });
    return el("div", { class: "banner" }, this.state.banner);
  }

  private renderTaskList(): HTMLElement {
    const list = el("div", { class: "panel tasks" }, el("h2", {}, "Tasks"));
    for (const task of this.state.tasks) {
      const btn = el("button", { class: "task" }, `${task.id} (${task.vertices}v)`);
      btn.title = task.query;
      btn.addEventListener("click", () => this.pickTask(task.id, "geoflow"));
      list.append(btn);
    }
    if (this.state.tasks.length === 0) list.append(el("p", { class: "dim" }, "no tasks"));
    return list;
  }

  private renderCanvas(): HTMLElement {
    const wrap = el("div", { class: "panel canvas" }, el("h2", {}, "Workflow"));
    const editor = this.state.editor;
    if (!editor) {
      wrap.append(el("p", { class: "dim" }, "pick a task to generate a workflow"));
      return wrap;
    }
    const graph = editor.draft;
    const layout = layeredLayout(graph);
    const cols = layout.columns.length;
    const rows = Math.max(1, ...layout.columns.map((c) => c.length));
    const svg = svgEl("svg", {
      width: String(cols * COL_WIDTH + 80),
      height: String(rows * 96 + 64),
      class: "graph",
    });
    for (const line of edgeLines(graph, layout, NODE_W, NODE_H)) {
      svg.append(
        svgEl("line", {
          x1: String(line.x1),
          y1: String(line.y1),
          x2: String(line.x2),
          y2: String(line.y2),
          class: "edge",
        }),
      );
    }
    const statuses = this.state.monitor?.vertexStatuses ?? {};
    for (const node of layout.nodes.values()) {
      const vertex = graph.tasks[node.id]!;
      const status = statuses[node.id] ?? vertex.status;
      const marked = (editor.markers[node.id] ?? []).length > 0;
      const g = svgEl("g", {
        transform: `translate(${node.x},${node.y})`,
        class: `vertex ${status}${marked ? " marked" : ""}${
          node.id === this.state.selected ? " selected" : ""
        }`,
      });
      g.append(svgEl("rect", { width: String(NODE_W), height: String(NODE_H), rx: "8" }));
      const title = svgEl("text", { x: "10", y: "22", class: "vid" });
      title.textContent = `${node.id} [${status}]`;
      const agent = svgEl("text", { x: "10", y: "42", class: "vagent" });
      agent.textContent = vertex.agent;
      const obj = svgEl("text", { x: "10", y: "60", class: "vobj" });
      obj.textContent =
        vertex.objective.length > 26 ? vertex.objective.slice(0, 25) + "…" : vertex.objective;
      g.append(title, agent, obj);
      g.addEventListener("click", () => {
        this.state.selected = node.id;
        this.render();
      });
      svg.append(g);
    }
    wrap.append(svg);
    return wrap;
  }

  private renderInspector(): HTMLElement {
    const panel = el("div", { class: "panel inspector" }, el("h2", {}, "Vertex"));
    const editor = this.state.editor;
    const id = this.state.selected;
    if (!editor || !id || !(id in editor.draft.tasks)) {
      panel.append(el("p", { class: "dim" }, "select a vertex"));
      return panel;
    }
    const vertex = editor.draft.tasks[id]!;
    const locked = this.state.running;

    const objective = el("textarea", { rows: "4" }) as HTMLTextAreaElement;
    objective.value = vertex.objective;
    objective.disabled = locked;
    objective.addEventListener("change", () => {
      this.state.editor = setObjective(editor, id, objective.value);
      this.render();
    });

    const agentSelect = el("select", {}) as HTMLSelectElement;
    for (const agent of this.state.catalog.agents) {
      const opt = el("option", { value: agent.name }, agent.name) as HTMLOptionElement;
      opt.selected = agent.name === vertex.agent;
      agentSelect.append(opt);
    }
    agentSelect.disabled = locked;
    agentSelect.addEventListener("change", () => {
      this.state.editor = setAgent(editor, id, agentSelect.value);
      this.render();
    });

    const edges = el("div", { class: "edges" }, el("h3", {}, "Outgoing edges"));
    for (const to of vertex.next) {
      const drop = el("button", { class: "mini" }, "remove");
      drop.disabled = locked;
      drop.addEventListener("click", () => {
        this.state.editor = removeEdge(editor, id, to);
        this.render();
      });
      edges.append(el("div", { class: "edge-row" }, `→ ${to} `, drop));
    }
    const addTarget = el("select", {}) as HTMLSelectElement;
    addTarget.append(el("option", { value: "" }, "add edge to…"));
    for (const other of Object.keys(editor.draft.tasks).sort()) {
      if (other !== id && !vertex.next.includes(other)) {
        addTarget.append(el("option", { value: other }, other));
      }
    }
    addTarget.disabled = locked;
    addTarget.addEventListener("change", () => {
      if (addTarget.value) {
        this.state.editor = addEdge(editor, id, addTarget.value);
        this.render();
      }
    });
    edges.append(addTarget);

    const cycle = hasLocalCycle(editor.draft);
    const save = el("button", { class: "primary" }, editor.dirty ? "Save changes" : "Saved");
    save.disabled = !editor.dirty || locked;
    save.addEventListener("click", () => this.save());

    const problems = el("div", { class: "violations" });
    if (cycle) {
      problems.append(el("p", { class: "violation" }, "draft contains a dependency cycle"));
    }
    for (const [subject, violations] of Object.entries(editor.markers)) {
      for (const v of violations) {
        problems.append(
          el("p", { class: "violation" }, `${v.code} on ${subject || "graph"}: ${v.message}`),
        );
      }
    }

    panel.append(
      el("label", {}, "Objective"),
      objective,
      el("label", {}, "Agent"),
      agentSelect,
      edges,
      save,
      problems,
    );
    return panel;
  }

  private renderRunPanel(): HTMLElement {
    const panel = el("div", { class: "panel run" }, el("h2", {}, "Run"));
    const wf = this.state.workflow;
    const monitor = this.state.monitor;
    if (!wf || !monitor) {
      panel.append(el("p", { class: "dim" }, "nothing loaded"));
      return panel;
    }
    const dirty = this.state.editor?.dirty ?? false;
    const runBtn = el(
      "button",
      { class: "primary" },
      this.state.running ? "Running…" : "Execute",
    );
    runBtn.disabled = this.state.running || dirty;
    runBtn.title = dirty ? "save your edits first" : "";
    runBtn.addEventListener("click", () => this.run());

    const tally = el(
      "span",
      { class: "tally" },
      `tokens: ${tokenTally(monitor)} (${monitor.promptTokens}p + ${monitor.completionTokens}c)`,
    );
    const header = el("div", { class: "run-header" }, runBtn, tally);

    const feed = el("div", { class: "feed" });
    for (const item of monitor.feed.slice(-60)) {
      feed.append(el("p", { class: `feed-item ${item.kind}` }, `#${item.seq} ${item.text}`));
    }

    panel.append(header, feed);
    if (this.state.score) {
      const s = this.state.score;
      panel.append(
        el(
          "p",
          { class: "score" },
          `run finished ${monitor.runStatus}: success=${s.success} ` +
            `correctness=${(s.correctness * 100).toFixed(1)}% ` +
            `flow=${s.flow_score === null ? "-" : (s.flow_score * 100).toFixed(1) + "%"} ` +
            `tokens=${s.tokens}`,
        ),
      );
    }
    return panel;
  }
}

const root = document.getElementById("app");
if (root) {
  void new App(root).start();
}
