"""Canonical JSON/JSONL/CSV writers for reproducible output files.

Floats are rendered with 17 significant digits so a value round-trips
exactly and two runs with the same seed produce byte-identical files.
"""

from __future__ import annotations

import json
import math
import time
from pathlib import Path

import numpy as np


def _format_float(x: float) -> str:
    if math.isnan(x) or math.isinf(x):
        # JSON has no literals for these; keep them greppable
        return json.dumps(str(x))
    return format(x, ".17g")


def dumps_canonical(obj) -> str:
    """Serialize to JSON with deterministic float formatting."""
    if obj is None or isinstance(obj, bool):
        return json.dumps(obj)
    if isinstance(obj, (np.floating, float)):
        return _format_float(float(obj))
    if isinstance(obj, (np.integer, int)):
        return str(int(obj))
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, np.ndarray):
        return dumps_canonical(obj.tolist())
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(dumps_canonical(v) for v in obj) + "]"
    if isinstance(obj, dict):
        items = (f"{json.dumps(str(k), ensure_ascii=False)}: {dumps_canonical(v)}" for k, v in obj.items())
        return "{" + ", ".join(items) + "}"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_canonical(obj) + "\n", encoding="utf-8")
    return path


def write_jsonl(path, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(dumps_canonical(row) + "\n")
    return path


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(
                ",".join(
                    _format_float(float(v)) if isinstance(v, (float, np.floating)) else str(v)
                    for v in row
                )
                + "\n"
            )
    return path


def run_manifest(command: str, resolved_config: dict, seed, outputs, duration_s: float) -> dict:
    """Provenance record written next to every output artifact."""
    from . import __version__

    return {
        "command": command,
        "config": resolved_config,
        "seed": seed,
        "tool_version": __version__,
        "outputs": [str(p) for p in outputs],
        "duration_s": duration_s,
    }


def now() -> float:
    return time.perf_counter()
