"""File formats: edge lists, multiplex edge lists, coordinates, partitions, manifests.

Every writer goes through :func:`atomic_write`, which writes to a temporary
file in the destination directory and renames it into place. Numbers are
written with ``repr`` so values round-trip exactly and output never depends
on locale.
"""

from __future__ import annotations

import csv
import hashlib
import io as _io
import json
import os
import tempfile
import warnings
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError
from .graph import UGraph


@contextmanager
def atomic_write(path, mode: str = "w"):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        newline = "" if "b" not in mode else None
        with os.fdopen(fd, mode, encoding=None if "b" in mode else "utf-8", newline=newline) as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _num(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


@dataclass
class EdgeListData:
    graph: UGraph
    labels: list[str]
    duplicates: int = 0
    self_loops: int = 0

    def index(self) -> dict[str, int]:
        return {lab: i for i, lab in enumerate(self.labels)}


def _lines(path):
    try:
        with open(path, encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                yield lineno, line.split()
    except FileNotFoundError as exc:
        raise DataError(f"no such file: {path}") from exc
    except UnicodeDecodeError as exc:
        raise DataError(f"{path}: not valid UTF-8") from exc


class _LabelMap:
    def __init__(self, labels=()):
        self.ids: dict[str, int] = {}
        self.labels: list[str] = []
        for lab in labels:
            self(lab)

    def __call__(self, label: str) -> int:
        i = self.ids.get(label)
        if i is None:
            i = self.ids[label] = len(self.labels)
            self.labels.append(label)
        return i


def _dedup(pairs):
    seen = set()
    kept, dups, loops = [], 0, 0
    for u, v in pairs:
        if u == v:
            loops += 1
            continue
        key = (u, v) if u < v else (v, u)
        if key in seen:
            dups += 1
            continue
        seen.add(key)
        kept.append(key)
    return kept, dups, loops


def load_edge_list(path) -> EdgeListData:
    """Read ``u v`` lines; labels become dense ids in order of first appearance."""
    lab = _LabelMap()
    pairs = []
    for lineno, tok in _lines(path):
        if len(tok) < 2:
            raise DataError(f"{path}:{lineno}: expected 'u v', got {' '.join(tok)!r}")
        if len(tok) > 2:
            raise DataError(f"{path}:{lineno}: too many fields")
        pairs.append((lab(tok[0]), lab(tok[1])))
    kept, dups, loops = _dedup(pairs)
    if not kept:
        raise DataError(f"{path}: graph has no edges")
    if dups or loops:
        warnings.warn(f"{path}: dropped {dups} duplicate edges and {loops} self-loops", stacklevel=2)
    return EdgeListData(UGraph(len(lab.labels), kept), lab.labels, dups, loops)


def write_edge_list(path, g: UGraph, labels=None) -> None:
    with atomic_write(path) as fh:
        for u, v in g.edges().tolist():
            a, b = (labels[u], labels[v]) if labels is not None else (u, v)
            fh.write(f"{a} {b}\n")


def write_labels(path, labels) -> None:
    with atomic_write(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node_id", "label"])
        for i, lab in enumerate(labels):
            w.writerow([i, lab])


@dataclass
class MultiplexData:
    layers: list[UGraph]
    labels: list[str]
    layer_names: list[str]
    weighted_lines: int = 0
    dropped: dict = field(default_factory=dict)


def load_multiplex(path) -> MultiplexData:
    """Read ``layer u v [w]`` lines over a shared node universe.

    Weights are ignored (with a warning). Layer ids are remapped densely in
    order of first appearance.
    """
    nodes = _LabelMap()
    layers = _LabelMap()
    per_layer: list[list] = []
    weighted = 0
    for lineno, tok in _lines(path):
        if len(tok) not in (3, 4):
            raise DataError(f"{path}:{lineno}: expected 'layer u v [w]'")
        if len(tok) == 4:
            try:
                float(tok[3])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: bad weight {tok[3]!r}") from exc
            weighted += 1
        li = layers(tok[0])
        if li == len(per_layer):
            per_layer.append([])
        per_layer[li].append((nodes(tok[1]), nodes(tok[2])))
    if not per_layer:
        raise DataError(f"{path}: no edges")
    if weighted:
        warnings.warn(f"{path}: ignoring weights on {weighted} lines", stacklevel=2)
    n = len(nodes.labels)
    graphs, dropped = [], {}
    for name, pairs in zip(layers.labels, per_layer):
        kept, dups, loops = _dedup(pairs)
        dropped[name] = (dups, loops)
        graphs.append(UGraph(n, kept))
    return MultiplexData(graphs, nodes.labels, layers.labels, weighted, dropped)


def write_multiplex(path, layers, labels=None, layer_names=None) -> None:
    with atomic_write(path) as fh:
        for li, g in enumerate(layers):
            name = layer_names[li] if layer_names is not None else str(li + 1)
            for u, v in g.edges().tolist():
                a, b = (labels[u], labels[v]) if labels is not None else (u, v)
                fh.write(f"{name} {a} {b}\n")


def write_coordinates(path, r, theta, labels=None) -> None:
    with atomic_write(path) as fh:
        fh.write("node_id,r,theta\n")
        for i, (a, b) in enumerate(zip(r, theta)):
            fh.write(f"{labels[i] if labels is not None else i},{_num(a)},{_num(b)}\n")


def read_coordinates(path) -> tuple[list[str], np.ndarray, np.ndarray]:
    ids, rs, ts = [], [], []
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or not {"node_id", "r", "theta"} <= set(reader.fieldnames):
                raise DataError(f"{path}: expected header node_id,r,theta")
            for row in reader:
                ids.append(row["node_id"])
                rs.append(float(row["r"]))
                ts.append(float(row["theta"]))
    except FileNotFoundError as exc:
        raise DataError(f"no such file: {path}") from exc
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from exc
    return ids, np.array(rs), np.array(ts)


def write_layer_coordinates(path, rows) -> None:
    """Rows of ``(node_label, layer_name, r, theta)``."""
    with atomic_write(path) as fh:
        fh.write("node_id,layer,r,theta\n")
        for lab, layer, a, b in rows:
            fh.write(f"{lab},{layer},{_num(a)},{_num(b)}\n")


def read_layer_coordinates(path):
    """Returns ``{layer: {node_label: (r, theta)}}``."""
    out: dict[str, dict[str, tuple[float, float]]] = {}
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or not {"node_id", "layer", "r", "theta"} <= set(reader.fieldnames):
                raise DataError(f"{path}: expected header node_id,layer,r,theta")
            for row in reader:
                out.setdefault(row["layer"], {})[row["node_id"]] = (float(row["r"]), float(row["theta"]))
    except FileNotFoundError as exc:
        raise DataError(f"no such file: {path}") from exc
    return out


def write_partition(path, assignment, labels=None) -> None:
    with atomic_write(path) as fh:
        for i, mod in enumerate(np.asarray(assignment).tolist()):
            fh.write(f"{labels[i] if labels is not None else i} {mod}\n")


def read_partition(path, index: dict[str, int] | None = None, n: int | None = None) -> np.ndarray:
    """Parse ``node_id module_id`` pairs (also accepts external tree-style exports).

    With ``index`` the node labels are mapped through it; otherwise they must
    be integers. Lines starting with ``#`` or ``*`` are skipped.
    """
    pairs = []
    for lineno, tok in _lines(path):
        if tok[0].startswith("*"):
            continue
        if len(tok) < 2:
            raise DataError(f"{path}:{lineno}: expected 'node_id module_id'")
        node = index[tok[0]] if index is not None else int(tok[0])
        pairs.append((node, tok[1]))
    size = n if n is not None else max(p[0] for p in pairs) + 1
    mods = [None] * size
    for node, mod in pairs:
        mods[node] = mod
    if any(m is None for m in mods):
        raise DataError(f"{path}: some nodes have no module")
    from .mapeq import relabel_dense

    return relabel_dense(np.array(mods))[0]


def write_rows_csv(path, header, rows) -> None:
    with atomic_write(path) as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_num(x) if isinstance(x, (int, float, np.number)) else str(x) for x in row) + "\n")


def write_json(path, obj) -> None:
    with atomic_write(path) as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


def dumps_csv(header, rows) -> str:
    buf = _io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(_num(x) if isinstance(x, (int, float, np.number)) else str(x) for x in row) + "\n")
    return buf.getvalue()
