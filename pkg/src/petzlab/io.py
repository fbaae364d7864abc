"""JSON matrix and channel files, plus CSV and markdown projections of reports.

A matrix file is ``{"dims": [...], "matrix": [[[re, im], ...], ...]}`` with
row-major entries. A channel file is ``{"dimIn": a, "dimOut": b, "kraus": [...]}``
where each Kraus entry is a nested ``[re, im]`` list of the same form.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Sequence

import numpy as np

from .channels import Channel
from .errors import ShapeError
from .harness import CHECKS

CSV_COLUMNS = ("index", "label", "seed", "dimA", "dimB", "check", "status", "worstSlack", "gap", "dmBest")


def fmt(x) -> str:
    """Twelve significant digits; infinities print as ``infinity``."""
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    x = float(x)
    if math.isinf(x):
        return "infinity" if x > 0 else "-infinity"
    return f"{x:.12g}"


def matrix_to_nested(a) -> list:
    a = np.atleast_2d(np.asarray(a, dtype=complex))
    return [[[float(z.real), float(z.imag)] for z in row] for row in a]


def matrix_from_nested(data, where: str = "matrix") -> np.ndarray:
    if not isinstance(data, list) or not data or not all(isinstance(row, list) for row in data):
        raise ShapeError(f"{where}: expected a non-empty list of rows")
    width = len(data[0])
    out = np.empty((len(data), width), dtype=complex)
    for i, row in enumerate(data):
        if len(row) != width:
            raise ShapeError(f"{where}[{i}]: row has {len(row)} entries, expected {width}")
        for j, z in enumerate(row):
            if isinstance(z, (int, float)) and not isinstance(z, bool):
                out[i, j] = z
            elif isinstance(z, list) and len(z) == 2 and all(isinstance(c, (int, float)) for c in z):
                out[i, j] = complex(z[0], z[1])
            else:
                raise ShapeError(f"{where}[{i}][{j}]: expected [re, im], got {z!r}")
    return out


def matrix_to_dict(a, dims: Sequence[int] | None = None) -> dict:
    a = np.atleast_2d(np.asarray(a, dtype=complex))
    return {"dims": [int(d) for d in (dims if dims is not None else [a.shape[0]])], "matrix": matrix_to_nested(a)}


def matrix_from_dict(data, where: str = "") -> tuple[np.ndarray, list[int]]:
    if not isinstance(data, dict) or "matrix" not in data:
        raise ShapeError(f"{where}: expected an object with a 'matrix' field")
    a = matrix_from_nested(data["matrix"], f"{where}.matrix")
    dims = data.get("dims", [a.shape[0]])
    if not isinstance(dims, list) or not all(isinstance(d, int) and d >= 1 for d in dims):
        raise ShapeError(f"{where}.dims: expected a list of positive integers")
    if math.prod(dims) != a.shape[0]:
        raise ShapeError(f"{where}.dims: {dims} does not match a {a.shape[0]}-row matrix")
    return a, list(dims)


def channel_to_dict(channel: Channel) -> dict:
    return {"dimIn": channel.dim_in, "dimOut": channel.dim_out, "kraus": [matrix_to_nested(k) for k in channel.kraus]}


def channel_from_dict(data, where: str = "") -> Channel:
    if not isinstance(data, dict) or "kraus" not in data:
        raise ShapeError(f"{where}: expected an object with a 'kraus' field")
    if not isinstance(data["kraus"], list) or not data["kraus"]:
        raise ShapeError(f"{where}.kraus: expected a non-empty list")
    ops = []
    for i, k in enumerate(data["kraus"]):
        if isinstance(k, dict):
            ops.append(matrix_from_dict(k, f"{where}.kraus[{i}]")[0])
        else:
            ops.append(matrix_from_nested(k, f"{where}.kraus[{i}]"))
    channel = Channel(ops)
    for key, actual in (("dimIn", channel.dim_in), ("dimOut", channel.dim_out)):
        if key in data and data[key] != actual:
            raise ShapeError(f"{where}.{key}: declared {data[key]}, Kraus operators give {actual}")
    return channel


def read_json(path) -> object:
    path = Path(path)
    try:
        with path.open() as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ShapeError(f"{path}: invalid JSON ({exc})") from exc


def write_json(path, data) -> None:
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def load_matrix(path) -> tuple[np.ndarray, list[int]]:
    return matrix_from_dict(read_json(path), str(path))


def save_matrix(path, a, dims: Sequence[int] | None = None) -> None:
    write_json(path, matrix_to_dict(a, dims))


def load_channel(path) -> Channel:
    return channel_from_dict(read_json(path), str(path))


def save_channel(path, channel: Channel) -> None:
    write_json(path, channel_to_dict(channel))


def _worst(slacks: dict):
    finite = [s for s in slacks.values() if isinstance(s, (int, float))]
    return min(finite) if finite else None


def _check_order(name: str):
    return (CHECKS.index(name), "") if name in CHECKS else (len(CHECKS), name)


def report_rows(reports: Sequence[dict]) -> list[dict]:
    """One row per (instance, check); ``gap`` and ``dmBest`` prefer the check's own values."""
    rows = []
    for r in reports:
        inst = r.get("instance", {})
        checks = r.get("checks", {})
        for name in sorted(checks, key=_check_order):
            chk = checks[name]
            values = chk.get("values", {})
            rows.append({
                "index": r.get("index"),
                "label": inst.get("label", ""),
                "seed": inst.get("seed"),
                "dimA": inst.get("dimA"),
                "dimB": inst.get("dimB"),
                "check": name,
                "status": chk.get("status"),
                "worstSlack": _worst(chk.get("slacks", {})),
                "gap": values.get("gap", r.get("gap")),
                "dmBest": values.get("dmBest", r.get("dmBest")),
            })
    return rows


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float) or v in ("inf", "-inf"):
        return fmt(float(v))
    return str(v)


def render_csv(reports: Sequence[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in report_rows(reports):
        writer.writerow([_cell(row[c]) for c in CSV_COLUMNS])
    return buf.getvalue()


def render_markdown(reports: Sequence[dict]) -> str:
    """One table per check name, one row per instance."""
    by_check: dict[str, list[dict]] = {}
    for row in report_rows(reports):
        by_check.setdefault(row["check"], []).append(row)
    cols = ("index", "label", "dimA", "dimB", "status", "worstSlack", "gap", "dmBest")
    lines = ["# Verification report", ""]
    if not by_check:
        lines.append("No checks were run.")
    for name in sorted(by_check, key=_check_order):
        lines += [f"## {name}", "", "| " + " | ".join(cols) + " |", "|" + "---|" * len(cols)]
        for row in by_check[name]:
            lines.append("| " + " | ".join(_cell(row[c]) for c in cols) + " |")
        lines.append("")
    return "\n".join(lines).rstrip("\n") + "\n"
