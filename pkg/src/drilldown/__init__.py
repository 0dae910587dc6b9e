"""LLM-assisted drill-down exploration engine.

Greedy coverage-maximization path recommendation over columnar data, intent
fusion from chart state, interaction logs, and instructions, incremental
chart-spec mutation with validation and rollback, deterministic insight
ranking, and a branching exploration tree, exposed as a session HTTP service.
"""

__version__ = "0.1.0"
