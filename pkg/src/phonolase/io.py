"""Plot-ready output: CSV with a ``#`` header block, matrix CSVs with axis sidecars, JSON."""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from . import __version__

FLOAT_FMT = "{:.12g}"


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "nan" if math.isnan(v) else FLOAT_FMT.format(float(v))
    return str(v).replace(",", ";").replace("\n", " ")


def header_lines(params: dict | None = None, assumptions=(), extra: dict | None = None) -> list[str]:
    lines = [f"# phonolase {__version__}"]
    for key, val in (params or {}).items():
        lines.append(f"# param {key} = {_fmt(val)}")
    for key, val in (extra or {}).items():
        lines.append(f"# {key} = {_fmt(val)}")
    for a in assumptions:
        lines.append(f"# assumption: {a}")
    return lines


def write_csv(path, columns, rows, params=None, assumptions=(), extra=None) -> Path:
    """Header block, one column-name line, then one line per row."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = header_lines(params, assumptions, extra)
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")
    return path


def read_csv(path):
    """Return ``(header_lines, columns, float array)`` from :func:`write_csv` output."""
    header, body = [], []
    for line in Path(path).read_text().splitlines():
        (header if line.startswith("#") else body).append(line)
    columns = body[0].split(",")
    data = np.array(
        [[float(x) if x not in ("", "true", "false") else np.nan for x in ln.split(",")] for ln in body[1:]]
    )
    return header, columns, data.reshape(len(body) - 1, len(columns))


def data_section(path) -> str:
    """Everything except the ``#`` header (used for determinism checks)."""
    return "\n".join(ln for ln in Path(path).read_text().splitlines() if not ln.startswith("#"))


def write_matrix(path, M, x, p, params=None, assumptions=(), extra=None) -> list[Path]:
    """Matrix CSV (rows indexed by ``p``, columns by ``x``) plus ``_x``/``_p`` sidecars."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = header_lines(params, assumptions, extra)
    lines.append(f"# rows: p ({len(p)}), columns: x ({len(x)})")
    lines += [",".join(_fmt(v) for v in row) for row in np.asarray(M)]
    path.write_text("\n".join(lines) + "\n")
    stem = path.with_suffix("")
    px = write_csv(f"{stem}_x.csv", ["x"], [[v] for v in x], params)
    pp = write_csv(f"{stem}_p.csv", ["p"], [[v] for v in p], params)
    return [path, px, pp]


def read_matrix(path) -> np.ndarray:
    rows = [ln for ln in Path(path).read_text().splitlines() if not ln.startswith("#")]
    return np.array([[float(v) for v in ln.split(",")] for ln in rows])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return None if not math.isfinite(v) else v
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": float(obj.real), "im": float(obj.imag)}
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, Path):
        return str(obj)
    return obj


def to_json(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True)


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(to_json(obj) + "\n")
    return path
