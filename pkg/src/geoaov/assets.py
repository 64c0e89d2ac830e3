"""Access to files bundled with the package (prompt templates, task suite)."""

from __future__ import annotations

from importlib import resources


def asset_text(relpath: str) -> str:
    node = resources.files("geoaov")
    for part in relpath.split("/"):
        node = node / part
    return node.read_text(encoding="utf-8")


def load_prompt(name: str) -> str:
    """Read a prompt template, dropping leading '#' comment lines."""
    lines = asset_text(f"prompts/{name}.txt").splitlines()
    while lines and lines[0].startswith("#"):
        lines.pop(0)
    return "\n".join(lines).strip("\n")


def suite_path() -> str:
    """Filesystem path of the bundled benchmark suite manifest."""
    return str(resources.files("geoaov") / "suite" / "manifest.json")
