"""
Result tables and their byte-stable CSV/JSON serialisation.

Numbers are written with 9 significant digits (``format(x, ".9g")``), which
is locale-independent and identical across runs for identical values.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import ECHO_PREFIX

DIGITS = 9


@dataclass
class ResultTable:
    """Named columns, rows of values and a metadata block.

    ``config`` is a list of ``key=value`` echo lines; ``derived`` holds
    scalars or small nested structures computed from the rows.
    """

    columns: tuple
    rows: list = field(default_factory=list)
    config: list = field(default_factory=list)
    derived: dict = field(default_factory=dict)
    version: str = __version__


def format_value(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        x = float(value)
        if math.isnan(x):
            return "nan"
        return format(x, f".{DIGITS}g")
    return str(value)


def _json_value(value):
    """Plain JSON value rounded the same way as the CSV text."""
    if isinstance(value, dict):
        return {str(k): _json_value(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [_json_value(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        x = float(value)
        if not math.isfinite(x):
            return None
        return float(format(x, f".{DIGITS}g"))
    return value


def render_csv(table: ResultTable) -> str:
    lines = [ECHO_PREFIX + line for line in table.config]
    lines.append(f"# version: mwrelay {table.version}")
    for key in sorted(table.derived):
        lines.append(f"# derived: {key}="
                     + json.dumps(_json_value(table.derived[key]), sort_keys=True))
    lines.append(",".join(table.columns))
    lines.extend(",".join(format_value(v) for v in row) for row in table.rows)
    return "\n".join(lines) + "\n"


def render_json(table: ResultTable) -> str:
    doc = {"version": table.version, "config": list(table.config),
           "columns": list(table.columns),
           "rows": [_json_value(list(row)) for row in table.rows],
           "derived": _json_value(table.derived)}
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def write_results(table: ResultTable, path, fmt: str = "csv") -> list:
    """Write ``table`` as CSV, JSON or both and return the paths written.

    With ``fmt="both"`` the JSON mirror goes next to the CSV with a
    ``.json`` suffix. I/O errors are re-raised with the path in the message.
    """
    path = Path(path)
    targets = []
    if fmt in ("csv", "both"):
        targets.append((path, render_csv(table)))
    if fmt in ("json", "both"):
        json_path = path.with_suffix(".json") if fmt == "both" else path
        targets.append((json_path, render_json(table)))
    if not targets:
        raise ValueError(f"unknown output format {fmt!r}")
    written = []
    for target, text in targets:
        try:
            with open(target, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        except OSError as exc:
            raise OSError(f"cannot write results to {target}: {exc}") from exc
        written.append(target)
    return written
