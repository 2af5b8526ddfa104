"""CSV/JSON/SVG writers with atomic replacement and result envelopes."""
from __future__ import annotations

import csv
import io
import json
import os
import tempfile
import time
from pathlib import Path

from . import __version__
from .config import jsonable

CSV_SCHEMA_VERSION = 1


def atomic_write_text(path: str | os.PathLike, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise
    return path


def fmt(x) -> str:
    if isinstance(x, bool):
        return str(x).lower()
    if isinstance(x, (int,)) and not isinstance(x, bool):
        return str(x)
    if isinstance(x, float):
        return f"{x:.17g}"
    try:
        return f"{float(x):.17g}"
    except (TypeError, ValueError):
        return "" if x is None else str(x)


def csv_text(kind: str, header, rows) -> str:
    buf = io.StringIO()
    buf.write(f"# schema: symswitch/{kind}/v{CSV_SCHEMA_VERSION}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def write_csv(path, kind: str, header, rows) -> Path:
    return atomic_write_text(path, csv_text(kind, header, rows))


def read_csv(path) -> tuple[str | None, list[dict]]:
    """Return (schema tag, rows as dicts); comment lines are skipped."""
    schema = None
    lines = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#"):
                if "schema:" in line and schema is None:
                    schema = line.split("schema:", 1)[1].strip()
                continue
            lines.append(line)
    return schema, list(csv.DictReader(lines))


def envelope(kind: str, payload, params: dict, config_hash: str, started: float) -> dict:
    return {
        "kind": kind,
        "tool_version": __version__,
        "config_hash": config_hash,
        "wall_clock_s": time.time() - started,
        "params": params,
        "payload": payload,
    }


def write_json(path, obj) -> Path:
    return atomic_write_text(path, json.dumps(jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n")


def plot_svg(path, series, *, xlabel: str, ylabel: str, logx: bool = False, logy: bool = False, title: str | None = None) -> Path:
    """Static line plot; ``series`` is a list of (label, xs, ys)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 3.5))
    for label, xs, ys in series:
        ax.plot(xs, ys, marker="." if len(xs) < 30 else None, label=label)
    if logx:
        ax.set_xscale("log")
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    if len(series) > 1:
        ax.legend()
    fig.tight_layout()
    buf = io.StringIO()
    fig.savefig(buf, format="svg")
    plt.close(fig)
    return atomic_write_text(path, buf.getvalue())
