"""Deterministic report emission for the command-line tool.

Reports embed the run configuration (seed, base, resolution, levels,
orders, tool version) so equal configurations produce byte-identical
output: JSON is dumped with sorted keys and CSV rows in a fixed order,
with no timestamps or environment-dependent fields.
"""

from __future__ import annotations

import io
import json
from dataclasses import asdict, dataclass


TOOL_VERSION = "0.1.0"


@dataclass(frozen=True)
class RunConfig:
    """Everything that determines a run's output."""

    command: str
    diagram: str | None = None
    resolution: int | None = None
    level: int | None = None
    order: int | None = None
    base: float | None = None
    seed: int | None = None
    eps: float | None = None
    threads: int | None = None

    def as_dict(self) -> dict:
        d = {k: v for k, v in asdict(self).items() if v is not None}
        d["tool_version"] = TOOL_VERSION
        return d


def json_report(config: RunConfig, payload: dict) -> str:
    doc = {"config": config.as_dict(), **payload}
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def csv_report(config: RunConfig, header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    cfg = config.as_dict()
    for key in sorted(cfg):
        buf.write(f"# {key}={cfg[key]}\n")
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(repr(x) if isinstance(x, float) else str(x) for x in row))
        buf.write("\n")
    return buf.getvalue()
