"""Regenerate the bundled benchmark suite from the task table below.

Writes src/geoaov/suite/manifest.json and one JSON file per task. The
generated files are committed as package data; rerun this script after
editing the table. Trace arguments are written in canonical form (lowercase
keys, ISO dates) and resource ids follow the environment's counters (first
load is ds-1, first detection det-1, first layer layer-1).

Usage: python scripts/build_suite.py
"""

from __future__ import annotations

import json
import os

SUITE_DIR = os.path.join(os.path.dirname(__file__), "..", "src", "geoaov", "suite")

# step = (tool, overrides); vertices group steps per agent
AGENT_OF = {
    "load_satellite_imagery": "database_agent",
    "query_catalog": "database_agent",
    "run_detector": "vision_agent",
    "summarize_detections": "vision_agent",
    "render_layer": "map_agent",
    "annotate": "map_agent",
    "count_objects": "analytics_agent",
    "area_stats": "analytics_agent",
}

TASKS = [
    {
        "slug": "ships-rotterdam-sar",
        "aoi": "Rotterdam harbor",
        "start": "2024-03-01",
        "end": "2024-04-01",
        "source": "SAR",
        "model": "swin-l-sar",
        "category": "ship",
        "goal": "map and count ship traffic",
        "layer_name": "ship-density",
        "vertices": [
            ["load_satellite_imagery"],
            ["run_detector"],
            ["render_layer"],
            ["count_objects"],
        ],
        "tags": ["detection", "sar", "maritime"],
    },
    {
        "slug": "vehicles-la-eo",
        "aoi": "Los Angeles basin",
        "start": "2024-05-01",
        "end": "2024-05-15",
        "source": "EO",
        "model": "swin-l-eo",
        "category": "vehicle",
        "goal": "survey vehicle density",
        "vertices": [
            ["load_satellite_imagery"],
            ["run_detector", "summarize_detections"],
            ["count_objects"],
        ],
        "tags": ["detection", "eo", "degradation"],
    },
    {
        "slug": "landcover-nile-delta",
        "aoi": "Nile Delta",
        "start": "2024-02-01",
        "end": "2024-03-01",
        "source": "EO",
        "model": "landcover-cls",
        "category": "cropland",
        "goal": "classify cropland extent",
        "statistic": "coverage",
        "vertices": [
            ["load_satellite_imagery"],
            ["run_detector"],
            ["area_stats"],
        ],
        "tags": ["landcover", "eo"],
    },
    {
        "slug": "flood-bangladesh-sar",
        "aoi": "Brahmaputra floodplain",
        "start": "2024-07-01",
        "end": "2024-07-10",
        "source": "SAR",
        "model": "swin-l-sar",
        "category": "flooded_area",
        "goal": "map flood extent and count affected zones",
        "layer_name": "flood-extent",
        "annotation": "Flooding mapped from SAR change detection",
        "vertices": [
            ["load_satellite_imagery"],
            ["run_detector"],
            ["render_layer", "annotate"],
            ["count_objects"],
        ],
        "tags": ["flood", "sar", "degradation"],
    },
    {
        "slug": "wildfire-california-eo",
        "aoi": "Sierra Nevada foothills",
        "start": "2023-08-01",
        "end": "2023-09-01",
        "source": "EO",
        "model": "swin-l-eo",
        "category": "burn_scar",
        "goal": "map burn scars and count them",
        "product_type": "L2A",
        "layer_name": "burn-scars",
        "annotation": "Post-fire burn scar assessment",
        "vertices": [
            ["query_catalog", "load_satellite_imagery"],
            ["run_detector"],
            ["render_layer", "annotate"],
            ["count_objects"],
        ],
        "tags": ["wildfire", "eo", "degradation"],
    },
    {
        "slug": "deforestation-amazon",
        "aoi": "Rondonia forest frontier",
        "start": "2024-01-01",
        "end": "2024-06-01",
        "source": "EO",
        "model": "landcover-cls",
        "category": "forest_loss",
        "goal": "summarize forest loss",
        "vertices": [
            ["load_satellite_imagery"],
            ["run_detector", "summarize_detections"],
        ],
        "tags": ["landcover", "eo"],
    },
    {
        "slug": "ports-singapore-sar",
        "aoi": "Singapore Strait",
        "start": "2024-04-01",
        "end": "2024-04-08",
        "source": "SAR",
        "model": "swin-l-sar",
        "category": "ship",
        "goal": "count anchored ships",
        "vertices": [
            ["load_satellite_imagery"],
            ["run_detector"],
            ["count_objects"],
        ],
        "tags": ["detection", "sar", "maritime"],
    },
    {
        "slug": "urban-growth-lagos",
        "aoi": "Lagos metropolitan area",
        "start": "2023-01-01",
        "end": "2024-01-01",
        "source": "EO",
        "model": "landcover-cls",
        "category": "built_up",
        "goal": "measure built-up expansion",
        "product_type": "L2A",
        "statistic": "coverage",
        "vertices": [
            ["query_catalog", "load_satellite_imagery"],
            ["run_detector"],
            ["area_stats"],
        ],
        "tags": ["landcover", "eo", "urban"],
    },
    {
        "slug": "oil-slick-gulf-sar",
        "aoi": "Gulf of Mexico shelf",
        "start": "2024-06-01",
        "end": "2024-06-05",
        "source": "SAR",
        "model": "swin-l-sar",
        "category": "oil_slick",
        "goal": "map suspected oil slicks",
        "layer_name": "slick-candidates",
        "vertices": [
            ["load_satellite_imagery"],
            ["run_detector"],
            ["render_layer"],
        ],
        "tags": ["detection", "sar", "maritime"],
    },
    {
        "slug": "airfield-activity-eo",
        "aoi": "Nevada test range",
        "start": "2024-03-10",
        "end": "2024-03-20",
        "source": "EO",
        "model": "swin-l-eo",
        "category": "aircraft",
        "goal": "report aircraft presence",
        "vertices": [
            ["load_satellite_imagery"],
            ["run_detector", "summarize_detections"],
            ["count_objects"],
        ],
        "tags": ["detection", "eo"],
    },
    {
        "slug": "glacier-retreat-alps",
        "aoi": "Bernese Alps",
        "start": "2023-07-01",
        "end": "2024-07-01",
        "source": "EO",
        "model": "landcover-cls",
        "category": "glacier_ice",
        "goal": "measure glacier ice coverage",
        "statistic": "coverage",
        "vertices": [
            ["load_satellite_imagery"],
            ["run_detector"],
            ["area_stats"],
        ],
        "tags": ["landcover", "eo", "cryosphere"],
    },
    {
        "slug": "reservoir-levels-mead",
        "aoi": "Lake Mead",
        "start": "2024-05-01",
        "end": "2024-06-01",
        "source": "EO",
        "model": "landcover-cls",
        "category": "open_water",
        "goal": "map open water and compute coverage",
        "layer_name": "water-extent",
        "statistic": "coverage",
        "vertices": [
            ["load_satellite_imagery"],
            ["run_detector"],
            ["render_layer"],
            ["area_stats"],
        ],
        "tags": ["landcover", "eo", "hydrology"],
    },
    {
        "slug": "coastal-erosion-norfolk",
        "aoi": "Norfolk coast",
        "start": "2023-01-01",
        "end": "2024-01-01",
        "source": "SAR",
        "model": "swin-l-sar",
        "category": "shoreline_change",
        "goal": "compare shoreline change across two dates",
        "second_window": ["2024-01-01", "2024-02-01"],
        "vertices": [
            ["load_satellite_imagery", "load_satellite_imagery#2"],
            ["run_detector", "run_detector#2"],
        ],
        "tags": ["change", "sar", "coastal"],
    },
    {
        "slug": "crop-health-punjab",
        "aoi": "Punjab plains",
        "start": "2024-04-01",
        "end": "2024-04-20",
        "source": "EO",
        "model": "landcover-cls",
        "category": "cropland",
        "goal": "count healthy cropland zones",
        "product_type": "L2A",
        "vertices": [
            ["query_catalog", "load_satellite_imagery"],
            ["run_detector"],
            ["count_objects"],
        ],
        "tags": ["landcover", "eo", "agriculture"],
    },
    {
        "slug": "ship-traffic-suez",
        "aoi": "Suez Canal approach",
        "start": "2024-02-10",
        "end": "2024-02-17",
        "source": "SAR",
        "model": "swin-l-sar",
        "category": "ship",
        "goal": "summarize, map, and count transiting ships",
        "layer_name": "transit-traffic",
        "vertices": [
            ["load_satellite_imagery"],
            ["run_detector", "summarize_detections"],
            ["render_layer"],
            ["count_objects"],
        ],
        "tags": ["detection", "sar", "maritime"],
    },
    {
        "slug": "solar-farms-atacama",
        "aoi": "Atacama plateau",
        "start": "2024-01-01",
        "end": "2024-03-01",
        "source": "EO",
        "model": "swin-l-eo",
        "category": "solar_panel",
        "goal": "inventory solar farms with counts and coverage",
        "layer_name": "solar-sites",
        "annotation": "Candidate utility-scale solar installations",
        "statistic": "coverage",
        "branch": True,
        "vertices": [
            ["load_satellite_imagery"],
            ["run_detector"],
            ["render_layer", "annotate"],
            ["count_objects", "area_stats"],
        ],
        "tags": ["detection", "eo", "energy"],
    },
    {
        "slug": "wetland-monitor-pantanal",
        "aoi": "Pantanal basin",
        "start": "2024-03-01",
        "end": "2024-04-01",
        "source": "EO",
        "model": "landcover-cls",
        "category": "wetland",
        "goal": "summarize wetland classification",
        "vertices": [
            ["load_satellite_imagery"],
            ["run_detector", "summarize_detections"],
        ],
        "tags": ["landcover", "eo", "hydrology"],
    },
    {
        "slug": "container-port-shanghai",
        "aoi": "Yangshan port",
        "start": "2024-05-05",
        "end": "2024-05-12",
        "source": "SAR",
        "model": "swin-l-sar",
        "category": "ship",
        "goal": "count container ships at berth",
        "product_type": "GRD",
        "vertices": [
            ["query_catalog", "load_satellite_imagery"],
            ["run_detector"],
            ["count_objects"],
        ],
        "tags": ["detection", "sar", "maritime"],
    },
    {
        "slug": "storm-damage-florida",
        "aoi": "Fort Myers",
        "start": "2023-10-01",
        "end": "2023-10-08",
        "source": "EO",
        "model": "swin-l-eo",
        "category": "damaged_building",
        "goal": "map and count damaged buildings",
        "layer_name": "damage-assessment",
        "branch": True,
        "vertices": [
            ["load_satellite_imagery"],
            ["run_detector"],
            ["render_layer"],
            ["count_objects"],
        ],
        "tags": ["detection", "eo", "disaster"],
    },
    {
        "slug": "oracle-vessels-aegean",
        "aoi": "Aegean shipping lanes",
        "start": "2024-01-05",
        "end": "2024-01-12",
        "source": "SAR",
        "model": "swin-l-sar",
        "category": "ship",
        "goal": "count vessels underway",
        "oracle": True,
        "vertices": [
            ["load_satellite_imagery"],
            ["run_detector"],
            ["count_objects"],
        ],
        "tags": ["detection", "sar", "oracle"],
    },
]


def expand_call(tool: str, spec: dict, ctx: dict) -> dict:
    """Arguments for one call, advancing the resource-id context."""
    if tool == "load_satellite_imagery":
        ctx["ds"] += 1
        ctx["last_ds"] = f"ds-{ctx['ds']}"
        window = (
            spec["second_window"] if ctx["ds"] > 1 and "second_window" in spec
            else [spec["start"], spec["end"]]
        )
        return {
            "aoi": spec["aoi"],
            "start": window[0],
            "end": window[1],
            "source": spec["source"],
        }
    if tool == "query_catalog":
        return {"aoi": spec["aoi"], "product_type": spec.get("product_type", "L1C")}
    if tool == "run_detector":
        ctx["det_input"] = ctx["det_input"] + 1 if "second_window" in spec else 1
        dataset = f"ds-{ctx['det_input']}" if "second_window" in spec else ctx["last_ds"]
        ctx["det"] += 1
        ctx["last_det"] = f"det-{ctx['det']}"
        return {"dataset": dataset, "model": spec["model"], "category": spec["category"]}
    if tool == "summarize_detections":
        return {"detection": ctx["last_det"]}
    if tool == "render_layer":
        ctx["layer"] += 1
        ctx["last_layer"] = f"layer-{ctx['layer']}"
        return {"source_id": ctx["last_det"], "name": spec["layer_name"]}
    if tool == "annotate":
        return {"layer": ctx["last_layer"], "text": spec["annotation"]}
    if tool == "count_objects":
        return {"detection": ctx["last_det"]}
    if tool == "area_stats":
        return {"dataset": ctx["last_ds"], "statistic": spec.get("statistic", "mean")}
    raise ValueError(tool)


def objective_for(agent: str, tools: list[str], spec: dict) -> str:
    aoi, start, end, source = spec["aoi"], spec["start"], spec["end"], spec["source"]
    if agent == "database_agent":
        parts = []
        if "query_catalog" in tools:
            parts.append(
                f"query the archive catalog for {spec.get('product_type', 'L1C')} products "
                f"over {aoi} with the query_catalog API"
            )
        n_loads = sum(1 for t in tools if t.startswith("load_satellite_imagery"))
        window = f"{start} to {end}"
        if n_loads > 1:
            w2 = spec["second_window"]
            window += f" and {w2[0]} to {w2[1]}"
        parts.append(
            f"load {source} satellite imagery over {aoi} for {window} "
            f"with the load_satellite_imagery API"
        )
        body = ", then ".join(parts)
        return body[0].upper() + body[1:] + "."
    if agent == "vision_agent":
        parts = [
            f"Run the {spec['model']} detector on the loaded {source} imagery of {aoi} "
            f"to extract {spec['category']} detections with the run_detector API"
        ]
        if any(t.startswith("summarize_detections") for t in tools):
            parts.append("summarize the detections with the summarize_detections API")
        return ", then ".join(parts) + "."
    if agent == "map_agent":
        parts = [
            f"Render the {spec['category']} detections over {aoi} as map layer "
            f"'{spec['layer_name']}' with the render_layer API"
        ]
        if "annotate" in tools:
            parts.append("annotate the layer with the annotate API")
        return ", then ".join(parts) + "."
    if agent == "analytics_agent":
        parts = []
        if "count_objects" in tools:
            parts.append(
                f"Count the detected {spec['category']} objects with the count_objects API"
            )
        if "area_stats" in tools:
            stat = spec.get("statistic", "mean")
            parts.append(
                f"{'compute' if parts else 'Compute'} the {stat} statistic over the loaded "
                f"{aoi} imagery with the area_stats API"
            )
        return ", then ".join(parts) + "."
    raise ValueError(agent)


def build_task(spec: dict) -> dict:
    ctx = {"ds": 0, "det": 0, "layer": 0, "det_input": 0}
    vertices = []
    trace = []
    for vi, tools in enumerate(spec["vertices"]):
        vid = f"task{vi}"
        base_tools = [t.split("#")[0] for t in tools]
        agent = AGENT_OF[base_tools[0]]
        assert all(AGENT_OF[t] == agent for t in base_tools), spec["slug"]
        for tool in base_tools:
            trace.append(
                {
                    "agent": agent,
                    "tool": tool,
                    "arguments": expand_call(tool, spec, ctx),
                    "vertex": vid,
                }
            )
        vertices.append((vid, agent, objective_for(agent, tools, spec)))

    n = len(vertices)
    tasks = {}
    branch = spec.get("branch", False)
    for i, (vid, agent, objective) in enumerate(vertices):
        if branch and n == 4:
            # diamond: task0 -> task1 -> {task2, task3}
            nxt = {0: ["task1"], 1: ["task2", "task3"], 2: [], 3: []}[i]
            prv = {0: [], 1: ["task0"], 2: ["task1"], 3: ["task1"]}[i]
        else:
            nxt = [f"task{i + 1}"] if i + 1 < n else []
            prv = [f"task{i - 1}"] if i > 0 else []
        tasks[vid] = {
            "id": vid,
            "objective": objective,
            "next": nxt,
            "prev": prv,
            "status": "pending",
            "agent": agent,
        }

    assertions = [
        {"path": "loaded_rasters.ds-1.aoi", "comparator": "eq", "expected": spec["aoi"]},
        {"path": "loaded_rasters.ds-1.source", "comparator": "eq", "expected": spec["source"]},
        {"path": "detections.*.category", "comparator": "eq", "expected": spec["category"]},
        {"path": "detections.*", "comparator": "count_ge", "expected": 1},
    ]
    flat_tools = [t.split("#")[0] for tools in spec["vertices"] for t in tools]
    if "render_layer" in flat_tools:
        assertions.append(
            {"path": "map_layers.0.name", "comparator": "eq", "expected": spec["layer_name"]}
        )
    if "annotate" in flat_tools:
        assertions.append(
            {"path": "map_layers.0.annotations", "comparator": "count_ge", "expected": 1}
        )
    if "count_objects" in flat_tools:
        assertions.append(
            {"path": f"analytics.count:{spec['category']}", "comparator": "exists"}
        )
    if "area_stats" in flat_tools:
        assertions.append(
            {
                "path": f"analytics.{spec.get('statistic', 'mean')}:ds-1",
                "comparator": "exists",
            }
        )

    query = (
        f"Using {spec['source']} imagery of {spec['aoi']} from {spec['start']} to "
        f"{spec['end']}, {spec['goal']} (category: {spec['category']})."
    )
    return {
        "id": spec["slug"],
        "query": query,
        "oracle": bool(spec.get("oracle", False)),
        "tags": spec["tags"],
        "ground_truth": {
            "aov": {"tasks": tasks},
            "trace": trace,
            "final_assertions": assertions,
        },
    }


def main() -> None:
    tasks_dir = os.path.join(SUITE_DIR, "tasks")
    os.makedirs(tasks_dir, exist_ok=True)
    names = []
    for spec in TASKS:
        task = build_task(spec)
        name = f"tasks/{task['id']}.json"
        names.append(name)
        with open(os.path.join(SUITE_DIR, name.replace("/", os.sep)), "w", encoding="utf-8") as fh:
            json.dump(task, fh, indent=2)
            fh.write("\n")
    with open(os.path.join(SUITE_DIR, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump({"tasks": names}, fh, indent=2)
        fh.write("\n")
    print(f"wrote {len(names)} tasks to {os.path.abspath(SUITE_DIR)}")


if __name__ == "__main__":
    main()
