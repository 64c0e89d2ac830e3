"""Agentic workflow engine for geospatial tasks.

Plans tool-using workflows as activity-on-vertex graphs, executes them
with function-calling agents under several orchestration strategies, and
scores the results against ground-truth traces.
"""

__version__ = "0.1.0"
