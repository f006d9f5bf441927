"""Readers and writers for data CSVs, weight matrices, edge lists and DOT files.

Edge lists are TSV with a ``# vertices`` comment line listing every vertex
label (so isolated vertices survive a round trip), then an ``i j weight``
header and one row per edge written with vertex labels.
"""

from __future__ import annotations

import csv
import hashlib
import os
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .density import Dataset, WeightMatrix
from .errors import DataError, ForestPriorError
from .forest import Forest


def read_dataset_csv(path, discrete: bool = False) -> Dataset:
    """Load a CSV whose first row names the columns; ``discrete`` requires integer codes."""
    path = Path(path)
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                vals = [int(c) if discrete else float(c) for c in row]
            except ValueError:
                bad = next(c for c in row if not _parses(c, discrete))
                kind = "integer code" if discrete else "number"
                raise DataError(f"{path}:{lineno}: {bad!r} is not a valid {kind}") from None
            rows.append(vals)
    if not rows:
        raise DataError(f"{path}: no data rows")
    try:
        return Dataset(np.asarray(rows, dtype=float), header)
    except ForestPriorError as exc:
        raise DataError(f"{path}: {exc}") from exc


def _parses(cell: str, discrete: bool) -> bool:
    try:
        int(cell) if discrete else float(cell)
    except ValueError:
        return False
    return True


def write_dataset_csv(path, data: Dataset) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(data.column_names)
        for row in data.values:
            writer.writerow([repr(float(v)) for v in row])


def write_weights_tsv(path, w: WeightMatrix) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
        writer.writerow(["", *w.labels])
        for label, row in zip(w.labels, w.w):
            writer.writerow([label, *(repr(float(v)) for v in row)])


def read_weights_tsv(path) -> WeightMatrix:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh, delimiter="\t"))
    labels = rows[0][1:]
    try:
        w = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from exc
    return WeightMatrix(w, labels)


def write_edges_tsv(path, forest: Forest, labels: Sequence[str], weights=None) -> None:
    w = None if weights is None else np.asarray(getattr(weights, "w", weights))
    with open(path, "w", newline="") as fh:
        fh.write("# vertices\t" + ",".join(labels) + "\n")
        writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
        writer.writerow(["i", "j", "weight"])
        for i, j in forest.sorted_edges():
            writer.writerow([labels[i], labels[j], "" if w is None else repr(float(w[i, j]))])


def read_edges_tsv(path, labels: Sequence[str] | None = None) -> tuple[list[str], Forest]:
    """Parse an edge list; returns the vertex labels and the forest over them.

    Vertex labels come from the ``# vertices`` line, else from ``labels``.
    """
    path = Path(path)
    vertices = list(labels) if labels is not None else None
    pairs = []
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror}") from exc
    with fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if line.startswith("# vertices"):
                _, _, rest = line.partition("\t")
                vertices = [v for v in rest.split(",") if v]
                continue
            if not line.strip() or line.startswith("#"):
                continue
            fields = line.split("\t")
            if fields[:2] == ["i", "j"]:
                continue
            if len(fields) < 2:
                raise DataError(f"{path}:{lineno}: expected at least 2 tab-separated fields")
            pairs.append((lineno, fields[0], fields[1]))
    if vertices is None:
        raise DataError(f"{path}: no '# vertices' line and no labels supplied")
    index = {v: k for k, v in enumerate(vertices)}
    edges = []
    for lineno, a, b in pairs:
        for v in (a, b):
            if v not in index:
                raise DataError(f"{path}:{lineno}: unknown vertex {v!r}")
        edges.append((index[a], index[b]))
    try:
        return vertices, Forest.from_edges(len(vertices), edges)
    except ForestPriorError as exc:
        raise DataError(f"{path}: {exc}") from exc


def write_dot(path, forest: Forest, labels: Sequence[str], colors: Mapping[str, str] | None = None,
              highlight=frozenset()) -> None:
    """Undirected DOT graph; ``colors`` maps vertex labels to fill colors, ``highlight`` edges draw red."""
    lines = ["graph forest {", "  node [shape=circle, style=filled, fillcolor=white];"]
    for k, label in enumerate(labels):
        attrs = f'label="{label}"'
        if colors and label in colors:
            attrs += f', fillcolor="{colors[label]}"'
        lines.append(f"  v{k + 1} [{attrs}];")
    for i, j in forest.sorted_edges():
        style = ' [color="red"]' if (i, j) in highlight else ""
        lines.append(f"  v{i + 1} -- v{j + 1}{style};")
    lines.append("}")
    Path(path).write_text("\n".join(lines) + "\n")


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def ensure_dir(path) -> Path:
    path = Path(path)
    os.makedirs(path, exist_ok=True)
    return path
