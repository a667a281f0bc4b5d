"""Reading and writing grids, edge scores and ground-truth graphs.

A grid on disk is a manifest (JSON or TOML) plus one CSV per present cell::

    {
      "loci": ["MFC", "STR"],          # optional, order of first appearance otherwise
      "periods": [3, 4, 5],            # optional, sorted labels otherwise
      "cells": [
        {"locus": "MFC", "period": 3, "path": "MFC_3.csv"},
        ...
      ]
    }

Relative paths resolve against the manifest's directory. Cell CSVs have a
header row of variable names and one observation per row. Edge-score files
list the upper triangle as ``i,j,score`` (0-based node indices); truth files
list edges as ``i,j``.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .errors import DataError
from .model import DatasetGrid, cell_label, tomllib, upper_pairs


def _fmt(x: float) -> str:
    return repr(float(x))


def read_matrix_csv(path) -> tuple[np.ndarray, list[str]]:
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataError("cannot read %s: %s" % (path, exc)) from exc
    if not rows:
        raise DataError("%s is empty" % path)
    header, body = rows[0], [r for r in rows[1:] if r]
    try:
        values = np.array([[float(v) for v in r] for r in body], dtype=float).reshape(len(body), len(header))
    except ValueError as exc:
        raise DataError("%s: non-numeric or ragged rows (%s)" % (path, exc)) from exc
    return values, header


def write_matrix_csv(path, X, header) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        X = np.asarray(X)
        fmt = str if np.issubdtype(X.dtype, np.integer) else _fmt
        for row in X:
            w.writerow([fmt(v) for v in row])


def _load_structured(path: Path) -> dict:
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise DataError("cannot read manifest %s: %s" % (path, exc)) from exc
    try:
        if path.suffix.lower() == ".toml":
            return tomllib.loads(raw.decode())
        return json.loads(raw)
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise DataError("cannot parse %s: %s" % (path, exc)) from exc


def read_manifest(path) -> DatasetGrid:
    """Load a :class:`DatasetGrid` from a manifest file."""
    path = Path(path)
    spec = _load_structured(path)
    entries = spec.get("cells")
    if not isinstance(entries, list) or not entries:
        raise DataError("%s: manifest needs a non-empty 'cells' list" % path)
    cells, header = {}, None
    for e in entries:
        try:
            key = (str(e["locus"]), int(e["period"]))
            file = Path(e["path"])
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError("%s: bad cell entry %r" % (path, e)) from exc
        if not file.is_absolute():
            file = path.parent / file
        X, h = read_matrix_csv(file)
        if header is None:
            header = h
        elif h != header:
            raise DataError("%s: variable names differ from the first cell" % file)
        cells[key] = X
    loci = spec.get("loci") or list(dict.fromkeys(b for b, _ in cells))
    periods = spec.get("periods") or sorted({t for _, t in cells})
    return DatasetGrid(loci, periods, cells, spec.get("variables") or header)


def write_grid(out_dir, grid: DatasetGrid, variables=None) -> Path:
    """Write cell CSVs and a ``manifest.json``; returns the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    variables = list(variables or grid.variables or ["x%d" % j for j in range(grid.p)])
    entries = []
    for cell in grid.present_cells():
        name = "%s.csv" % cell_label(cell)
        write_matrix_csv(out / name, grid[cell], variables)
        entries.append({"locus": cell[0], "period": cell[1], "path": name})
    manifest = {"loci": list(grid.loci), "periods": list(grid.periods), "variables": variables, "cells": entries}
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n")
    return path


def write_edge_scores(path, scores) -> None:
    scores = np.asarray(scores)
    iu, ju = upper_pairs(scores.shape[0])
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["i", "j", "score"])
        for i, j in zip(iu, ju):
            w.writerow([int(i), int(j), _fmt(scores[i, j])])


def _read_rows(path, expected):
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataError("cannot read %s: %s" % (path, exc)) from exc
    if not rows or [c.strip() for c in rows[0]] != expected:
        raise DataError("%s: expected header %s" % (path, ",".join(expected)))
    return [r for r in rows[1:] if r]


def read_edge_scores(path, p: int | None = None) -> np.ndarray:
    """Symmetric score matrix from an ``i,j,score`` file."""
    rows = _read_rows(path, ["i", "j", "score"])
    try:
        ij = np.array([(int(r[0]), int(r[1])) for r in rows], dtype=int).reshape(-1, 2)
        s = np.array([float(r[2]) for r in rows])
    except (ValueError, IndexError) as exc:
        raise DataError("%s: malformed row (%s)" % (path, exc)) from exc
    if p is None:
        p = int(ij.max()) + 1 if len(ij) else 0
    out = np.zeros((p, p))
    out[ij[:, 0], ij[:, 1]] = s
    out[ij[:, 1], ij[:, 0]] = s
    return out


def write_truth(path, adjacency) -> None:
    a = np.asarray(adjacency)
    iu, ju = upper_pairs(a.shape[0])
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["i", "j"])
        for i, j in zip(iu, ju):
            if a[i, j]:
                w.writerow([int(i), int(j)])


def read_truth(path, p: int) -> np.ndarray:
    rows = _read_rows(path, ["i", "j"])
    g = np.zeros((p, p), dtype=np.int8)
    for r in rows:
        i, j = int(r[0]), int(r[1])
        g[i, j] = g[j, i] = 1
    return g


def write_edge_list(path, edges, names=None) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["i", "j"] + (["name_i", "name_j"] if names else []))
        for i, j in edges:
            w.writerow([i, j] + ([names[i], names[j]] if names else []))


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
