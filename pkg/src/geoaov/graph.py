"""Activity-on-vertex workflow graphs.

A workflow is a DAG whose vertices are subtasks and whose edges are
precedence constraints. Each vertex carries a free-text objective, the name
of the agent responsible for it, and an execution status. The on-disk form
is a JSON dictionary (file extension ``.aov.json``) with one entry per
subtask under a top-level ``tasks`` key.

Graphs are treated as immutable once validated; the executor mutates
statuses only on its own private clone (see :meth:`AovGraph.clone`).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from heapq import heappop, heappush
from typing import TYPE_CHECKING

from .errors import CyclicGraph, ParseError, SchemaError

if TYPE_CHECKING:  # pragma: no cover
    from .toolenv import AgentCatalog

MAX_VERTICES = 64
SUBTASK_KEYS = ("id", "objective", "next", "prev", "status", "agent")


class Status(str, Enum):
    PENDING = "pending"
    RUNNING = "running"
    DONE = "done"
    FAILED = "failed"


VALID_STATUSES = frozenset(s.value for s in Status)


class ViolationCode(str, Enum):
    DUP_ID = "DUP_ID"
    DANGLING_EDGE = "DANGLING_EDGE"
    ASYMMETRIC_EDGE = "ASYMMETRIC_EDGE"
    CYCLE = "CYCLE"
    UNKNOWN_AGENT = "UNKNOWN_AGENT"
    NO_SOURCE = "NO_SOURCE"
    BAD_STATUS = "BAD_STATUS"


@dataclass
class Subtask:
    """One vertex: an agentic scope-and-objective bound to a named agent."""

    id: str
    objective: str
    agent: str
    next: list[str] = field(default_factory=list)
    prev: list[str] = field(default_factory=list)
    status: str = Status.PENDING.value

    def clone(self) -> "Subtask":
        return Subtask(
            id=self.id,
            objective=self.objective,
            agent=self.agent,
            next=list(self.next),
            prev=list(self.prev),
            status=self.status,
        )


@dataclass
class AovGraph:
    """The whole workflow: a mapping from subtask id to :class:`Subtask`."""

    tasks: dict[str, Subtask] = field(default_factory=dict)

    def clone(self) -> "AovGraph":
        return AovGraph({k: v.clone() for k, v in self.tasks.items()})

    def ids(self) -> list[str]:
        return list(self.tasks)

    def edges(self) -> set[tuple[str, str]]:
        """Directed edges between existing vertices.

        The union of what ``next`` and ``prev`` claim; asymmetric halves and
        references to missing vertices are a validation concern, not ours.
        """
        ids = set(self.tasks)
        out: set[tuple[str, str]] = set()
        for key, sub in self.tasks.items():
            for succ in sub.next:
                if succ in ids:
                    out.add((key, succ))
            for pred in sub.prev:
                if pred in ids:
                    out.add((pred, key))
        return out


@dataclass
class Violation:
    code: ViolationCode
    subject: str | tuple[str, str]
    message: str

    def to_dict(self) -> dict:
        subject = list(self.subject) if isinstance(self.subject, tuple) else self.subject
        return {"code": self.code.value, "subject": subject, "message": self.message}


@dataclass
class ValidationReport:
    ok: bool
    violations: list[Violation]

    @classmethod
    def from_violations(cls, violations: list[Violation]) -> "ValidationReport":
        return cls(ok=not violations, violations=violations)

    def codes(self) -> set[ViolationCode]:
        return {v.code for v in self.violations}

    def messages(self) -> list[str]:
        return [v.message for v in self.violations]

    def to_dict(self) -> dict:
        return {"ok": self.ok, "violations": [v.to_dict() for v in self.violations]}


def _cycle_vertices(graph: AovGraph) -> list[str]:
    """Vertices that cannot be eliminated by repeatedly removing sources."""
    indeg = {k: 0 for k in graph.tasks}
    out: dict[str, list[str]] = {k: [] for k in graph.tasks}
    for a, b in graph.edges():
        indeg[b] += 1
        out[a].append(b)
    ready = [k for k, d in indeg.items() if d == 0]
    seen = 0
    while ready:
        v = ready.pop()
        seen += 1
        for succ in out[v]:
            indeg[succ] -= 1
            if indeg[succ] == 0:
                ready.append(succ)
    if seen == len(graph.tasks):
        return []
    return sorted(k for k, d in indeg.items() if d > 0)


def validate(graph: AovGraph, catalog: "AgentCatalog | None" = None) -> ValidationReport:
    """Check every structural invariant and report all violations at once.

    Pure: the graph is never modified. When ``catalog`` is given, agent
    names are checked against it; otherwise only structure is examined.
    """
    violations: list[Violation] = []
    tasks = graph.tasks
    ids = set(tasks)

    by_id: dict[str, list[str]] = {}
    for key, sub in tasks.items():
        by_id.setdefault(sub.id, []).append(key)
    for key, sub in tasks.items():
        if not sub.id:
            violations.append(Violation(ViolationCode.DUP_ID, key, f"entry {key!r} has an empty id"))
        elif sub.id != key:
            violations.append(
                Violation(
                    ViolationCode.DUP_ID,
                    key,
                    f"entry {key!r} carries id {sub.id!r}; ids must be unique and match their key",
                )
            )
        elif len(by_id[sub.id]) > 1:
            violations.append(
                Violation(
                    ViolationCode.DUP_ID,
                    key,
                    f"id {sub.id!r} is shared by entries {sorted(by_id[sub.id])}",
                )
            )

    asymmetric: set[tuple[str, str]] = set()
    for key, sub in tasks.items():
        for succ in sub.next:
            if succ not in ids:
                violations.append(
                    Violation(
                        ViolationCode.DANGLING_EDGE,
                        f"{key}->{succ}",
                        f"{key!r} lists unknown successor {succ!r}",
                    )
                )
            elif key not in tasks[succ].prev:
                asymmetric.add((key, succ))
        for pred in sub.prev:
            if pred not in ids:
                violations.append(
                    Violation(
                        ViolationCode.DANGLING_EDGE,
                        f"{pred}->{key}",
                        f"{key!r} lists unknown predecessor {pred!r}",
                    )
                )
            elif key not in tasks[pred].next:
                asymmetric.add((pred, key))
    for a, b in sorted(asymmetric):
        violations.append(
            Violation(
                ViolationCode.ASYMMETRIC_EDGE,
                (a, b),
                f"edge {a}->{b} is not mirrored in both next and prev",
            )
        )

    cyclic = _cycle_vertices(graph)
    for v in cyclic:
        violations.append(Violation(ViolationCode.CYCLE, v, f"{v!r} is part of a dependency cycle"))

    # Source-lessness in an acyclic graph is only reachable through bad
    # references; when a cycle exists it is a symptom of the cycle and is
    # not reported separately.
    if tasks and not cyclic and all(sub.prev for sub in tasks.values()):
        violations.append(
            Violation(ViolationCode.NO_SOURCE, "graph", "no vertex has an empty prev list")
        )

    if catalog is not None:
        known = set(catalog.names())
        for key, sub in tasks.items():
            if sub.agent not in known:
                violations.append(
                    Violation(
                        ViolationCode.UNKNOWN_AGENT,
                        key,
                        f"{key!r} is assigned to unknown agent {sub.agent!r}",
                    )
                )

    for key, sub in tasks.items():
        if sub.status not in VALID_STATUSES:
            violations.append(
                Violation(
                    ViolationCode.BAD_STATUS,
                    key,
                    f"{key!r} has status {sub.status!r}; expected one of {sorted(VALID_STATUSES)}",
                )
            )

    return ValidationReport.from_violations(violations)


def topo_order(graph: AovGraph) -> list[str]:
    """Execution order of the vertices.

    Deterministic: among simultaneously ready vertices, ties break by
    ascending lexicographic id. Raises :class:`CyclicGraph` on cycles.
    """
    indeg = {k: 0 for k in graph.tasks}
    out: dict[str, list[str]] = {k: [] for k in graph.tasks}
    for a, b in graph.edges():
        indeg[b] += 1
        out[a].append(b)
    heap: list[str] = []
    for k, d in indeg.items():
        if d == 0:
            heappush(heap, k)
    order: list[str] = []
    while heap:
        v = heappop(heap)
        order.append(v)
        for succ in sorted(out[v]):
            indeg[succ] -= 1
            if indeg[succ] == 0:
                heappush(heap, succ)
    if len(order) != len(graph.tasks):
        stuck = sorted(set(graph.tasks) - set(order))
        raise CyclicGraph(f"graph has a cycle involving {stuck}")
    return order


def group_by_agent_dfs(graph: AovGraph) -> list[tuple[str, list[str]]]:
    """Depth-first visit sequence partitioned into per-agent groups.

    The DFS starts from sources in ascending id order and pushes children
    in ascending id order. The visit sequence is grouped by agent: groups
    appear in first-visit order and each holds that agent's vertices in
    visit order. Raises :class:`CyclicGraph` on cycles.
    """
    if not graph.tasks:
        return []
    if _cycle_vertices(graph):
        raise CyclicGraph("cannot group a cyclic graph")

    indeg = {k: 0 for k in graph.tasks}
    children: dict[str, list[str]] = {k: [] for k in graph.tasks}
    for a, b in graph.edges():
        indeg[b] += 1
        children[a].append(b)

    visited: set[str] = set()
    seq: list[str] = []
    sources = sorted(k for k, d in indeg.items() if d == 0)
    for start in sources:
        stack = [start]
        while stack:
            v = stack.pop()
            if v in visited:
                continue
            visited.add(v)
            seq.append(v)
            stack.extend(sorted(children[v], reverse=True))

    groups: dict[str, list[str]] = {}
    agent_order: list[str] = []
    for v in seq:
        agent = graph.tasks[v].agent
        if agent not in groups:
            groups[agent] = []
            agent_order.append(agent)
        groups[agent].append(v)
    return [(a, groups[a]) for a in agent_order]


def serialize(graph: AovGraph) -> str:
    """Canonical JSON text for a graph, round-trippable via :func:`deserialize`."""
    payload = {
        "tasks": {
            key: {
                "id": sub.id,
                "objective": sub.objective,
                "next": list(sub.next),
                "prev": list(sub.prev),
                "status": sub.status,
                "agent": sub.agent,
            }
            for key, sub in graph.tasks.items()
        }
    }
    return json.dumps(payload, indent=2)


def _reject_duplicate_keys(pairs: list[tuple[str, object]]) -> dict:
    out: dict = {}
    for k, v in pairs:
        if k in out:
            raise SchemaError(f"duplicate key {k!r}")
        out[k] = v
    return out


def _quote_bare_keys(text: str) -> str:
    """Quote unquoted identifier keys so near-JSON planner output parses.

    Walks the text with string awareness so identifiers inside string
    values are never touched.
    """
    out: list[str] = []
    i = 0
    n = len(text)
    in_string = False
    escaped = False
    last_significant = ""
    while i < n:
        ch = text[i]
        if in_string:
            out.append(ch)
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_string = False
                last_significant = '"'
            i += 1
            continue
        if ch == '"':
            in_string = True
            out.append(ch)
            i += 1
            continue
        if (ch.isalpha() or ch == "_") and last_significant in ("{", ","):
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            k = j
            while k < n and text[k] in " \t\r\n":
                k += 1
            if k < n and text[k] == ":":
                out.append(f'"{text[i:j]}"')
                last_significant = '"'
                i = j
                continue
            out.append(ch)
            last_significant = ch
            i += 1
            continue
        out.append(ch)
        if ch not in " \t\r\n":
            last_significant = ch
        i += 1
    return "".join(out)


def _parse_json(text: str):
    try:
        return json.loads(text, object_pairs_hook=_reject_duplicate_keys)
    except json.JSONDecodeError as first:
        try:
            return json.loads(_quote_bare_keys(text), object_pairs_hook=_reject_duplicate_keys)
        except json.JSONDecodeError:
            raise ParseError(first.msg, position=first.pos) from first


def deserialize(text: str) -> AovGraph:
    """Parse untrusted text into a graph.

    The schema is strict: exactly the keys from the task-dictionary format
    are accepted, anything else raises :class:`SchemaError`. As a courtesy
    to sloppy planners, bare (unquoted) object keys are tolerated.
    Structural problems (cycles, dangling edges, bad statuses) are left to
    :func:`validate`.
    """
    data = _parse_json(text)
    if not isinstance(data, dict):
        raise SchemaError("top level must be a JSON object")
    extra = set(data) - {"tasks"}
    if extra:
        raise SchemaError(f"unknown top-level key(s): {sorted(extra)}")
    if "tasks" not in data:
        raise SchemaError("missing required top-level key 'tasks'")
    tasks_obj = data["tasks"]
    if not isinstance(tasks_obj, dict):
        raise SchemaError("'tasks' must be an object")
    if len(tasks_obj) > MAX_VERTICES:
        raise SchemaError(f"graph has {len(tasks_obj)} vertices; the cap is {MAX_VERTICES}")

    tasks: dict[str, Subtask] = {}
    for key, raw in tasks_obj.items():
        if not isinstance(raw, dict):
            raise SchemaError(f"task {key!r} must be an object")
        missing = set(SUBTASK_KEYS) - set(raw)
        if missing:
            raise SchemaError(f"task {key!r} is missing key(s): {sorted(missing)}")
        unknown = set(raw) - set(SUBTASK_KEYS)
        if unknown:
            raise SchemaError(f"task {key!r} has unknown key(s): {sorted(unknown)}")
        for fld in ("id", "objective", "status", "agent"):
            if not isinstance(raw[fld], str):
                raise SchemaError(f"task {key!r}: {fld!r} must be a string")
        for fld in ("next", "prev"):
            if not isinstance(raw[fld], list) or not all(isinstance(x, str) for x in raw[fld]):
                raise SchemaError(f"task {key!r}: {fld!r} must be a list of ids")
        tasks[key] = Subtask(
            id=raw["id"],
            objective=raw["objective"],
            agent=raw["agent"],
            next=list(raw["next"]),
            prev=list(raw["prev"]),
            status=raw["status"],
        )
    return AovGraph(tasks)
