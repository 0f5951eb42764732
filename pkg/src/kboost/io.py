"""CSV/JSON serialization for datasets, fits and study reports.

Floats are written with ``%.17g`` so a write/read round trip is bit-exact
and reruns of the same configuration produce byte-identical files.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .smoothers import Dataset

__all__ = ["fmt", "load_dataset", "read_column", "write_csv", "write_dataset", "write_report", "TABLE_NAMES"]


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    return str(v)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([fmt(v) for v in row])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def _read_rows(path):
    path = Path(path)
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc.strerror or exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path}: file is empty")
        return [h.strip() for h in header], list(enumerate(reader, start=2))


def _column(header, name, path):
    try:
        return header.index(name)
    except ValueError:
        raise ValueError(f"{path}: no column {name!r} in header {','.join(header)}") from None


def _parse(rows, idx, path):
    out = np.empty((len(rows), len(idx)))
    for i, (line, row) in enumerate(rows):
        try:
            vals = [float(row[j]) for j in idx]
        except (IndexError, ValueError):
            raise ValueError(f"{path}: malformed row {line}: {','.join(row)}") from None
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"{path}: non-finite value in row {line}")
        out[i] = vals
    return out


def load_dataset(path, cols: Optional[tuple] = None, support: Optional[tuple] = None) -> Dataset:
    """Read a CSV with a header into a :class:`Dataset`.

    ``cols`` maps ``(x_name, y_name)``; the default is ``("x", "y")``. Extra
    columns are ignored and blank lines skipped.
    """
    xname, yname = cols or ("x", "y")
    header, rows = _read_rows(path)
    rows = [(line, r) for line, r in rows if any(c.strip() for c in r)]
    idx = [_column(header, xname, path), _column(header, yname, path)]
    vals = _parse(rows, idx, path)
    if vals.shape[0] < 2:
        raise ValueError(f"{path}: need at least 2 observations, found {vals.shape[0]}")
    return Dataset(vals[:, 0], vals[:, 1], support)


def read_column(path, name: str = "x") -> np.ndarray:
    header, rows = _read_rows(path)
    rows = [(line, r) for line, r in rows if any(c.strip() for c in r)]
    return _parse(rows, [_column(header, name, path)], path)[:, 0]


def write_dataset(path, data: Dataset, **extra) -> Path:
    names = ["x", "y", *extra]
    cols = [data.x, data.y, *(np.asarray(v, dtype=float) for v in extra.values())]
    return write_csv(path, names, zip(*cols))


# bench outputs: (study, model) -> file stem
TABLE_NAMES = {
    ("tables", "m1"): "table1",
    ("lowrank", "m1"): "table2",
    ("tables", "m2"): "table3",
    ("lowrank", "m2"): "table4",
    ("robust", "m1"): "table5",
    ("robust", "m2"): "table5_m2",
    ("real", None): "table6",
}


def _split_label(label):
    if label == "spline":
        return "spline", "none"
    smoother, _, kernel = label.partition("-")
    return smoother, kernel


def _table_rows(report):
    s = report.study
    if s == "tables":
        header = ["kernel", "n", "method", "mean", "sd"]
        rows = []
        for c in report.cells:
            smoother, kernel = _split_label(c.method)
            rows.append([kernel, c.n, smoother, c.mean, c.sd])
        return header, rows
    if s == "lowrank":
        return ["n", "rank", "mean", "sd"], [[c.n, c.extra["rank"], c.mean, c.sd] for c in report.cells]
    if s == "robust":
        header = ["c", "n", "method", "kernel", "robust_mean", "robust_sd", "nonrobust_mean", "nonrobust_sd"]
        plain = {(c.method, c.n): c for c in report.cells if not c.extra["robust"]}
        rows = []
        for c in report.cells:
            if c.extra["robust"]:
                p = plain[(c.method, c.n)]
                smoother, kernel = _split_label(c.method)
                rows.append([c.extra["c"], c.n, smoother, kernel, c.mean, c.sd, p.mean, p.sd])
        rows.sort(key=lambda r: r[0])  # stable: keeps method/n order within each c
        return header, rows
    if s == "real":
        header = ["c_factor", "smoother", "robust", "param", "b", "mse"]
        rows = [[c.extra.get("c_factor"), c.method, c.extra["robust"], c.tuned[0][0], c.tuned[0][1], c.mean] for c in report.cells]
        return header, rows
    raise ValueError(f"unknown study {s!r}")


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        f = float(v)
        return f if math.isfinite(f) else repr(f)
    if hasattr(v, "value"):
        return v.value
    return v


def write_report(report, out_dir) -> list:
    """Write ``<table>.csv`` plus ``<table>.json`` metadata; returns the paths."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create {out}: {exc.strerror or exc}") from exc
    model = None if report.study == "real" else report.model.split("-")[0]
    stem = TABLE_NAMES.get((report.study, model), f"{report.study}_{model}")
    header, rows = _table_rows(report)
    csv_path = write_csv(out / f"{stem}.csv", header, rows)
    meta = dict(report.metadata)
    meta["cells"] = [
        {
            "method": c.method,
            "n": c.n,
            **c.extra,
            "mean": c.mean,
            "sd": c.sd,
            "repeat_means": c.repeat_means,
            "tuned": [{"param": p, "b": b} for p, b in c.tuned],
            "seeds": c.seeds,
        }
        for c in report.cells
    ]
    json_path = out / f"{stem}.json"
    try:
        json_path.write_text(json.dumps(_jsonable(meta), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {json_path}: {exc.strerror or exc}") from exc
    return [csv_path, json_path]
