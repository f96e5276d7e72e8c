"""File formats: panel CSVs, returns tables, atomic writes and provenance."""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from .errors import ConfigError, IngestionError
from .panel import Panel


def config_hash(obj: Any) -> str:
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def provenance_line(cfg: Any, seed: int | None) -> str:
    return f"# config_hash={config_hash(cfg)} seed={seed}"


def atomic_write(path: str | Path, text: str) -> Path:
    """Write via a temp file in the same directory, then rename over the target."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError as exc:
        raise IngestionError(f"cannot write {path}: {exc}") from exc
    return path


def _fmt(x: float) -> str:
    # repr of a Python float is the shortest string that round-trips exactly
    return repr(float(x))


def panel_to_csv(panel: Panel, header_comment: str | None = None) -> str:
    """Rows are time points: header ``t,s1,...,sp``, then ``t`` = 1..n."""
    lines = [header_comment] if header_comment else []
    lines.append(",".join(["t"] + [f"s{i + 1}" for i in range(panel.p)]))
    cols = panel.values.T.tolist()
    for t, row in enumerate(cols, start=1):
        lines.append(",".join([str(t)] + [_fmt(v) for v in row]))
    return "\n".join(lines) + "\n"


def write_json(path: str | Path, obj: Any, cfg: Any = None, seed: int | None = None) -> Path:
    payload = {"provenance": {"config_hash": config_hash(cfg), "seed": seed}, **obj}
    return atomic_write(path, json.dumps(payload, indent=2, sort_keys=False, allow_nan=False) + "\n")


def write_csv(path: str | Path, body: str, cfg: Any = None, seed: int | None = None) -> Path:
    return atomic_write(path, provenance_line(cfg, seed) + "\n" + body)


@dataclass(frozen=True)
class ReturnsTable:
    dates: tuple[str, ...]
    names: tuple[str, ...]
    values: np.ndarray  # n x p

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    def to_panel(self) -> Panel:
        return Panel(self.values.T.copy(), role="X")


def _read_rows(path: Path):
    try:
        with open(path, newline="") as fh:
            rows = [(lineno, r) for lineno, r in enumerate(csv.reader(fh), start=1)]
    except OSError as exc:
        raise IngestionError(f"cannot read {path}: {exc}") from exc
    return [(ln, r) for ln, r in rows if r and not r[0].lstrip().startswith("#")]


def ingest_returns(path: str | Path, transform: str = "none", missing: str = "error") -> ReturnsTable:
    """Read ``label,<name1>,...,<namep>`` CSV data (first column: dates or time index).

    ``transform="log_returns"`` replaces each column by log(P_t / P_{t-1}).
    ``missing="drop_row"`` drops rows with empty cells instead of failing.
    Lines starting with ``#`` are ignored. Row numbers in errors are file lines.
    """
    if transform not in ("none", "log_returns"):
        raise ConfigError(f"transform must be 'none' or 'log_returns', got {transform!r}")
    if missing not in ("error", "drop_row"):
        raise ConfigError(f"missing must be 'error' or 'drop_row', got {missing!r}")
    rows = _read_rows(Path(path))
    if not rows:
        raise IngestionError(f"{path} has no header")
    _, header = rows[0]
    if len(header) < 2:
        raise IngestionError("header needs a label column and at least one series", row=rows[0][0])
    names = tuple(h.strip() for h in header[1:])
    dates, data, linenos = [], [], []
    for lineno, r in rows[1:]:
        if len(r) != len(header):
            raise IngestionError(f"expected {len(header)} fields, got {len(r)}", row=lineno)
        vals = []
        drop = False
        for name, cell in zip(names, r[1:]):
            cell = cell.strip()
            if cell == "" or cell.lower() in ("na", "nan"):
                if missing == "drop_row":
                    drop = True
                    break
                raise IngestionError("missing value", row=lineno, column=name)
            try:
                v = float(cell)
            except ValueError:
                raise IngestionError(f"non-numeric value {cell!r}", row=lineno, column=name) from None
            if not math.isfinite(v):
                raise IngestionError(f"non-finite value {cell!r}", row=lineno, column=name)
            vals.append(v)
        if drop:
            continue
        dates.append(r[0].strip())
        data.append(vals)
        linenos.append(lineno)
    if not data:
        raise IngestionError(f"{path} has no data rows")
    values = np.array(data, dtype=float)
    if transform == "log_returns":
        if values.shape[0] < 2:
            raise IngestionError("log returns need at least two rows")
        bad = np.argwhere(values <= 0)
        if bad.size:
            r, c = bad[0]
            raise IngestionError("non-positive price under log transform", row=linenos[r], column=names[c])
        values = np.log(values[1:] / values[:-1])
        dates = dates[1:]
    return ReturnsTable(tuple(dates), names, values)


def read_panel_csv(path: str | Path) -> Panel:
    """Inverse of :func:`panel_to_csv`."""
    return ingest_returns(path).to_panel()
