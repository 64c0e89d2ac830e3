"""Simulated geospatial platform: agent catalog, tool handlers, faults.

Tool results are seeded-hash functions of the canonical arguments, which
makes them deterministic across runs yet sensitive to argument changes:
calling a detector with the wrong category provably yields a different
count downstream. No real imagery, geodesy, or inference is involved; the
fidelity target is API-shape realism.
"""

from __future__ import annotations

import copy
import hashlib
import json
import re
import time
from dataclasses import dataclass, field
from typing import Any

from .backend import ToolSchema, Usage
from .errors import BadAssertionPath

EO_MODELS = ("swin-l-eo", "landcover-cls")
SAR_MODELS = ("swin-l-sar",)
DETECTOR_MODELS = EO_MODELS + SAR_MODELS


@dataclass
class AgentSpec:
    name: str
    description: str
    tools: list[ToolSchema]


@dataclass
class AgentCatalog:
    agents: list[AgentSpec]

    def names(self) -> list[str]:
        return [a.name for a in self.agents]

    def get(self, name: str) -> AgentSpec | None:
        for a in self.agents:
            if a.name == name:
                return a
        return None

    def tool(self, agent: str, tool: str) -> ToolSchema | None:
        spec = self.get(agent)
        if spec is None:
            return None
        for t in spec.tools:
            if t.name == tool:
                return t
        return None

    def prompt_block(self) -> str:
        """The agent list as it appears in planner system prompts."""
        lines = []
        for a in self.agents:
            lines.append(f"- {a.name}: {a.description}")
            for t in a.tools:
                params = ", ".join(t.parameters.get("properties", {}))
                lines.append(f"    - API {t.name}({params}): {t.description}")
        return "\n".join(lines)


def _schema(props: dict[str, dict], required: list[str] | None = None) -> dict:
    return {
        "type": "object",
        "properties": props,
        "required": sorted(props) if required is None else required,
    }


def catalog_default() -> AgentCatalog:
    """The fixed built-in agent catalog."""
    return AgentCatalog(
        agents=[
            AgentSpec(
                name="database_agent",
                description="APIs fetching satellite images and browsing the archive catalog",
                tools=[
                    ToolSchema(
                        name="load_satellite_imagery",
                        description=(
                            "Load imagery for an area of interest and date range from the "
                            "EO or SAR archive; returns a dataset id"
                        ),
                        parameters=_schema(
                            {
                                "aoi": {"type": "string", "description": "area of interest"},
                                "start": {"type": "string", "format": "date"},
                                "end": {"type": "string", "format": "date"},
                                "source": {"type": "string", "enum": ["EO", "SAR"]},
                            }
                        ),
                    ),
                    ToolSchema(
                        name="query_catalog",
                        description="List archive products intersecting an area of interest",
                        parameters=_schema(
                            {
                                "aoi": {"type": "string"},
                                "product_type": {"type": "string"},
                            }
                        ),
                    ),
                ],
            ),
            AgentSpec(
                name="vision_agent",
                description="Satellite vision APIs for detection and classification",
                tools=[
                    ToolSchema(
                        name="run_detector",
                        description=(
                            "Run a vision model over a loaded dataset and return detections "
                            "of one object category; returns a detection id"
                        ),
                        parameters=_schema(
                            {
                                "dataset": {"type": "string"},
                                "model": {"type": "string", "enum": list(DETECTOR_MODELS)},
                                "category": {"type": "string"},
                            }
                        ),
                    ),
                    ToolSchema(
                        name="summarize_detections",
                        description="Summarize a detection set into a short text report",
                        parameters=_schema({"detection": {"type": "string"}}),
                    ),
                ],
            ),
            AgentSpec(
                name="map_agent",
                description="Map rendering and annotation APIs",
                tools=[
                    ToolSchema(
                        name="render_layer",
                        description=(
                            "Render a dataset or detection set as a named map layer; "
                            "returns a layer id"
                        ),
                        parameters=_schema(
                            {
                                "source_id": {"type": "string"},
                                "name": {"type": "string"},
                            }
                        ),
                    ),
                    ToolSchema(
                        name="annotate",
                        description="Attach a text annotation to an existing map layer",
                        parameters=_schema(
                            {
                                "layer": {"type": "string"},
                                "text": {"type": "string"},
                            }
                        ),
                    ),
                ],
            ),
            AgentSpec(
                name="analytics_agent",
                description="Numeric summaries over detections and datasets",
                tools=[
                    ToolSchema(
                        name="count_objects",
                        description="Total object count for a detection set",
                        parameters=_schema({"detection": {"type": "string"}}),
                    ),
                    ToolSchema(
                        name="area_stats",
                        description="Compute an area statistic over a loaded dataset",
                        parameters=_schema(
                            {
                                "dataset": {"type": "string"},
                                "statistic": {"type": "string", "enum": ["mean", "max", "coverage"]},
                            }
                        ),
                    ),
                ],
            ),
        ]
    )


@dataclass
class FaultEntry:
    agent: str
    tool: str
    occurrence: int  # 1-based, counted per (agent, tool)
    effect: str  # error | wrong_result | delay
    message: str = "injected tool fault"


@dataclass
class FaultPlan:
    entries: list[FaultEntry] = field(default_factory=list)

    def match(self, agent: str, tool: str, occurrence: int) -> FaultEntry | None:
        for e in self.entries:
            if e.agent == agent and e.tool == tool and e.occurrence == occurrence:
                return e
        return None


@dataclass
class ToolCallRecord:
    seq: int
    agent: str
    tool: str
    arguments: dict[str, Any]
    result: dict[str, Any]
    error: bool
    usage_attribution: Usage
    vertex: str | None = None

    def to_dict(self) -> dict:
        return {
            "seq": self.seq,
            "agent": self.agent,
            "tool": self.tool,
            "arguments": self.arguments,
            "result": self.result,
            "error": self.error,
            "usage_attribution": self.usage_attribution.to_dict(),
            "vertex": self.vertex,
        }


@dataclass
class EnvState:
    loaded_rasters: dict[str, dict] = field(default_factory=dict)
    detections: dict[str, dict] = field(default_factory=dict)
    map_layers: list[dict] = field(default_factory=list)
    analytics: dict[str, float] = field(default_factory=dict)

    def snapshot(self) -> dict:
        return copy.deepcopy(
            {
                "loaded_rasters": self.loaded_rasters,
                "detections": self.detections,
                "map_layers": self.map_layers,
                "analytics": self.analytics,
            }
        )

    def state_hash(self) -> str:
        return hashlib.sha256(
            json.dumps(self.snapshot(), sort_keys=True).encode()
        ).hexdigest()[:16]


_DATE_8 = re.compile(r"^(\d{4})(\d{2})(\d{2})$")
_DATE_SLASH = re.compile(r"^(\d{4})/(\d{1,2})/(\d{1,2})$")
_DATE_MONTH = re.compile(r"^(\d{4})-(\d{1,2})(?:-(\d{1,2}))?$")


def _canonical_date(value: str) -> str:
    m = _DATE_8.match(value)
    if m:
        return f"{m.group(1)}-{m.group(2)}-{m.group(3)}"
    m = _DATE_SLASH.match(value)
    if m:
        return f"{m.group(1)}-{int(m.group(2)):02d}-{int(m.group(3)):02d}"
    m = _DATE_MONTH.match(value)
    if m:
        day = int(m.group(3)) if m.group(3) else 1
        return f"{m.group(1)}-{int(m.group(2)):02d}-{day:02d}"
    return value


def canonicalize_arguments(arguments: dict[str, Any], schema: dict | None = None) -> dict[str, Any]:
    """Lowercase keys; normalize date-typed values to ISO-8601."""
    props = (schema or {}).get("properties", {})
    out: dict[str, Any] = {}
    for key, value in arguments.items():
        lk = key.lower()
        if isinstance(value, str) and props.get(lk, {}).get("format") == "date":
            value = _canonical_date(value)
        out[lk] = value
    return out


def _hash_int(*parts: Any) -> int:
    blob = json.dumps(parts, sort_keys=True, default=str).encode()
    return int.from_bytes(hashlib.sha256(blob).digest()[:8], "big")


class ToolEnvironment:
    """Owns one task's environment state, trace, and fault bookkeeping."""

    def __init__(
        self,
        catalog: AgentCatalog | None = None,
        faults: FaultPlan | None = None,
        seed: int = 0,
    ):
        self.catalog = catalog or catalog_default()
        self.faults = faults or FaultPlan()
        self.seed = seed
        self.state = EnvState()
        self.trace: list[ToolCallRecord] = []
        self._occurrences: dict[tuple[str, str], int] = {}
        self._counters: dict[str, int] = {}

    def _next_id(self, prefix: str) -> str:
        self._counters[prefix] = self._counters.get(prefix, 0) + 1
        return f"{prefix}-{self._counters[prefix]}"

    def invoke(
        self,
        agent: str,
        tool: str,
        arguments: dict[str, Any],
        usage: Usage | None = None,
        vertex: str | None = None,
    ) -> tuple[dict[str, Any], ToolCallRecord]:
        """Run one tool call, mutate state, append exactly one record.

        Unknown (agent, tool) pairs and schema problems come back as error
        results rather than exceptions: the calling subagent must see them
        in-band, the way a live platform would report a failed API call.
        """
        usage = usage or Usage()
        schema_obj = self.catalog.tool(agent, tool)
        if schema_obj is None:
            args = canonicalize_arguments(arguments)
            result = {
                "error": {
                    "type": "unknown_tool",
                    "message": f"agent {agent!r} has no API named {tool!r}",
                }
            }
            return result, self._record(agent, tool, args, result, True, usage, vertex)

        args = canonicalize_arguments(arguments, schema_obj.parameters)
        occ = self._occurrences.get((agent, tool), 0) + 1
        self._occurrences[(agent, tool)] = occ

        fault = self.faults.match(agent, tool, occ)
        seed = self.seed
        if fault is not None:
            if fault.effect == "error":
                result = {"error": {"type": "injected_fault", "message": fault.message}}
                return result, self._record(agent, tool, args, result, True, usage, vertex)
            if fault.effect == "wrong_result":
                seed = self.seed ^ 0x5EED
            elif fault.effect == "delay":
                time.sleep(0.02)

        missing = [
            p
            for p in schema_obj.parameters.get("required", [])
            if p not in args or args[p] in ("", None)
        ]
        if missing:
            result = {
                "error": {
                    "type": "schema_violation",
                    "message": f"{tool} missing required argument(s): {missing}",
                }
            }
            return result, self._record(agent, tool, args, result, True, usage, vertex)

        handler = getattr(self, f"_tool_{tool}", None)
        assert handler is not None, f"catalog tool {tool} has no handler"
        result = handler(args, seed)
        is_error = "error" in result
        return result, self._record(agent, tool, args, result, is_error, usage, vertex)

    def _record(
        self,
        agent: str,
        tool: str,
        args: dict,
        result: dict,
        error: bool,
        usage: Usage,
        vertex: str | None,
    ) -> ToolCallRecord:
        rec = ToolCallRecord(
            seq=len(self.trace) + 1,
            agent=agent,
            tool=tool,
            arguments=args,
            result=copy.deepcopy(result),
            error=error,
            usage_attribution=usage,
            vertex=vertex,
        )
        self.trace.append(rec)
        return rec

    # Tool handlers. Each takes canonical args plus the effective seed and
    # returns a JSON-shaped result; {"error": {...}} marks a failed call.

    def _tool_load_satellite_imagery(self, args: dict, seed: int) -> dict:
        if args["source"] not in ("EO", "SAR"):
            return {
                "error": {
                    "type": "schema_violation",
                    "message": f"source must be EO or SAR, got {args['source']!r}",
                }
            }
        ds = self._next_id("ds")
        self.state.loaded_rasters[ds] = {
            "aoi": args["aoi"],
            "date_range": [args["start"], args["end"]],
            "source": args["source"],
        }
        scenes = 1 + _hash_int(seed, "scenes", args["aoi"], args["start"], args["end"], args["source"]) % 40
        return {"dataset": ds, "scenes": scenes}

    def _tool_query_catalog(self, args: dict, seed: int) -> dict:
        n = 1 + _hash_int(seed, "catalog", args["aoi"], args["product_type"]) % 5
        products = [
            {
                "product_id": f"{args['product_type']}-{_hash_int(seed, args['aoi'], i) % 10_000:04d}",
                "aoi": args["aoi"],
            }
            for i in range(n)
        ]
        return {"products": products}

    def _tool_run_detector(self, args: dict, seed: int) -> dict:
        dataset = self.state.loaded_rasters.get(args["dataset"])
        if dataset is None:
            return {
                "error": {
                    "type": "schema_violation",
                    "message": f"unknown dataset {args['dataset']!r}; load imagery first",
                }
            }
        model = args["model"]
        if model not in DETECTOR_MODELS:
            return {
                "error": {
                    "type": "schema_violation",
                    "message": f"unknown model {model!r}; expected one of {list(DETECTOR_MODELS)}",
                }
            }
        # EO-trained and SAR-trained models are not interchangeable.
        if dataset["source"] == "SAR" and model not in SAR_MODELS:
            return {
                "error": {
                    "type": "model_mismatch",
                    "message": f"model {model!r} cannot run on SAR imagery",
                }
            }
        if dataset["source"] == "EO" and model not in EO_MODELS:
            return {
                "error": {
                    "type": "model_mismatch",
                    "message": f"model {model!r} cannot run on EO imagery",
                }
            }
        det = self._next_id("det")
        count = 1 + _hash_int(
            seed,
            "detect",
            dataset["aoi"],
            dataset["date_range"],
            dataset["source"],
            model,
            args["category"],
        ) % 200
        self.state.detections[det] = {
            "dataset": args["dataset"],
            "model": model,
            "category": args["category"],
            "count": count,
        }
        return {"detection": det, "count": count}

    def _tool_summarize_detections(self, args: dict, seed: int) -> dict:
        det = self.state.detections.get(args["detection"])
        if det is None:
            return {
                "error": {
                    "type": "schema_violation",
                    "message": f"unknown detection {args['detection']!r}",
                }
            }
        return {
            "summary": (
                f"{det['count']} {det['category']} objects detected over "
                f"{self.state.loaded_rasters[det['dataset']]['aoi']}"
            )
        }

    def _tool_render_layer(self, args: dict, seed: int) -> dict:
        sid = args["source_id"]
        if sid not in self.state.loaded_rasters and sid not in self.state.detections:
            return {
                "error": {
                    "type": "schema_violation",
                    "message": f"unknown source {sid!r}; nothing to render",
                }
            }
        layer = self._next_id("layer")
        self.state.map_layers.append(
            {"layer": layer, "source_id": sid, "name": args["name"], "annotations": []}
        )
        return {"layer": layer}

    def _tool_annotate(self, args: dict, seed: int) -> dict:
        for rec in self.state.map_layers:
            if rec["layer"] == args["layer"]:
                rec["annotations"].append(args["text"])
                return {"layer": args["layer"], "annotations": len(rec["annotations"])}
        return {
            "error": {
                "type": "schema_violation",
                "message": f"unknown layer {args['layer']!r}",
            }
        }

    def _tool_count_objects(self, args: dict, seed: int) -> dict:
        det = self.state.detections.get(args["detection"])
        if det is None:
            return {
                "error": {
                    "type": "schema_violation",
                    "message": f"unknown detection {args['detection']!r}",
                }
            }
        key = f"count:{det['category']}"
        self.state.analytics[key] = self.state.analytics.get(key, 0) + det["count"]
        return {"metric": key, "value": self.state.analytics[key]}

    def _tool_area_stats(self, args: dict, seed: int) -> dict:
        dataset = self.state.loaded_rasters.get(args["dataset"])
        if dataset is None:
            return {
                "error": {
                    "type": "schema_violation",
                    "message": f"unknown dataset {args['dataset']!r}",
                }
            }
        key = f"{args['statistic']}:{args['dataset']}"
        value = round(
            (_hash_int(seed, "stats", dataset["aoi"], dataset["date_range"], args["statistic"]) % 10_000)
            / 100,
            2,
        )
        self.state.analytics[key] = value
        return {"metric": key, "value": value}


_COMPARATORS = ("eq", "ne", "gt", "ge", "lt", "le", "contains", "count_eq", "count_ge", "exists")


def _walk_path(value: Any, parts: list[str], path: str) -> list[Any]:
    if not parts:
        return [value]
    head, rest = parts[0], parts[1:]
    if head == "*":
        if isinstance(value, dict):
            children = [value[k] for k in sorted(value)]
        elif isinstance(value, list):
            children = list(value)
        else:
            return []
        out: list[Any] = []
        for child in children:
            out.extend(_walk_path(child, rest, path))
        return out
    if isinstance(value, dict):
        if head in value:
            return _walk_path(value[head], rest, path)
        return []
    if isinstance(value, list):
        if head.isdigit() and int(head) < len(value):
            return _walk_path(value[int(head)], rest, path)
        return []
    return []


def _compare(comparator: str, actual: Any, expected: Any) -> bool:
    if comparator == "eq":
        return actual == expected
    if comparator == "ne":
        return actual != expected
    if comparator == "gt":
        return actual > expected
    if comparator == "ge":
        return actual >= expected
    if comparator == "lt":
        return actual < expected
    if comparator == "le":
        return actual <= expected
    if comparator == "contains":
        return expected in actual
    raise AssertionError(comparator)


def assert_final_state(
    state: "EnvState | dict", assertions: list[dict]
) -> tuple[bool, list[str]]:
    """Evaluate path/comparator/expected predicates over a state snapshot.

    Paths are dot-separated with ``*`` fanning out over dict values (in
    sorted key order) or list items, e.g. ``detections.*.category``.
    ``count_eq``/``count_ge`` compare how many values the path matched;
    ``exists`` requires at least one match. The other comparators apply to
    every matched value and demand at least one match.
    """
    snapshot = state.snapshot() if isinstance(state, EnvState) else state
    failures: list[str] = []
    for i, a in enumerate(assertions):
        if not isinstance(a, dict) or "path" not in a or "comparator" not in a:
            raise BadAssertionPath(f"assertion {i} must have 'path' and 'comparator'")
        path, comparator = a["path"], a["comparator"]
        if comparator not in _COMPARATORS:
            raise BadAssertionPath(f"assertion {i}: unknown comparator {comparator!r}")
        if not isinstance(path, str) or not path or path.startswith(".") or path.endswith("."):
            raise BadAssertionPath(f"assertion {i}: malformed path {path!r}")
        if comparator != "exists" and "expected" not in a:
            raise BadAssertionPath(f"assertion {i}: comparator {comparator!r} needs 'expected'")
        matched = _walk_path(snapshot, path.split("."), path)
        expected = a.get("expected")
        if comparator == "exists":
            if not matched:
                failures.append(f"{path}: no value exists")
        elif comparator == "count_eq":
            if len(matched) != expected:
                failures.append(f"{path}: matched {len(matched)} values, expected {expected}")
        elif comparator == "count_ge":
            if len(matched) < expected:
                failures.append(f"{path}: matched {len(matched)} values, expected >= {expected}")
        elif not matched:
            failures.append(f"{path}: no value to compare")
        else:
            for value in matched:
                try:
                    ok = _compare(comparator, value, expected)
                except TypeError:
                    ok = False
                if not ok:
                    failures.append(f"{path}: {value!r} failed {comparator} {expected!r}")
    return (not failures, failures)
