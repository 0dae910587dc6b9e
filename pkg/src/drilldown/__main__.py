"""CLI entry point: run the session service.

    python -m drilldown --port 8000 --provider mock
    python -m drilldown --provider http   # DRILLDOWN_ENDPOINT / DRILLDOWN_API_KEY

The mock provider optionally loads fixture payloads from --fixtures-dir
(JSON files mapping prompt digests or schema names to payloads).
"""

from __future__ import annotations

import argparse

import uvicorn

from .llm import HttpProvider, MockProvider, load_fixture_dir
from .service import create_app
from .tabular import CELL_CAP


def main(argv: list[str] | None = None) -> None:
    parser = argparse.ArgumentParser(prog="drilldown", description=__doc__)
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8000)
    parser.add_argument("--provider", choices=("mock", "http"), default="mock")
    parser.add_argument(
        "--fixtures-dir", default=None, help="mock fixture payload directory"
    )
    parser.add_argument(
        "--max-cells",
        type=int,
        default=CELL_CAP,
        help="per-dataset ingestion cap on rows x columns",
    )
    args = parser.parse_args(argv)

    if args.provider == "http":
        adapter = HttpProvider()
    else:
        fixtures, defaults = (
            load_fixture_dir(args.fixtures_dir) if args.fixtures_dir else ({}, {})
        )
        adapter = MockProvider(fixtures=fixtures, defaults=defaults)
    app = create_app(adapter=adapter, max_cells=args.max_cells)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")


if __name__ == "__main__":
    main()
