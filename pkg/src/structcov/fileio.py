"""CSV and JSON ingestion for data, covariate structures, and model configs.

Numeric CSV output uses 17 significant digits so matrices round-trip
bit-identically through text.  A model config is a JSON document:

    {
      "components": [
        {"name": "comcol", "kind": "cluster", "source": "comcol.csv"},
        {"name": "region", "kind": "cluster", "source": "region.csv"},
        {"name": "global", "kind": "global"},
        {"name": "custom", "kind": "matrix", "source": "custom.csv"},
        {"name": "comcolxspatial", "kind": "interaction",
         "parents": ["comcol", "spatial"]}
      ],
      "spatial": {"adjacency": "edges.csv"},
      "beta_grid": "0.02:0.98:25",
      "mode": "known",
      "bootstrap": {"b": 100, "seed": 0}
    }

Cluster label files have one row per variable (columns id,label); an
adjacency file is either an `i,j` edge list or a dense 0/1 matrix,
distinguished by shape.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .car import SpatialGraph
from .components import (CovariateSet, build_cluster_matrix, build_global_matrix,
                         build_identity, build_matrix_component, hadamard_interaction)

FLOAT_FMT = "%.17g"


class InputError(ValueError):
    """Missing or malformed input file."""


def save_matrix_csv(path, matrix):
    np.savetxt(path, np.asarray(matrix, dtype=float), delimiter=",", fmt=FLOAT_FMT)


def load_matrix_csv(path):
    path = Path(path)
    if not path.exists():
        raise InputError("file not found: %s" % path)
    try:
        data = np.loadtxt(path, delimiter=",", ndmin=2)
    except ValueError as exc:
        raise InputError("could not parse %s: %s" % (path, exc)) from exc
    return data


def load_vector_or_matrix(path, t, d):
    """A T x d array, broadcasting a single row/vector over time."""
    arr = load_matrix_csv(path)
    if arr.shape == (t, d):
        return arr
    if arr.shape in ((1, d), (d, 1)):
        return np.broadcast_to(arr.reshape(1, d), (t, d)).copy()
    raise InputError("%s: expected shape (%d, %d) or a length-%d vector, got %s"
                     % (path, t, d, d, arr.shape))


def load_cluster_labels(path):
    """`id,label` rows (header optional); returns labels ordered by id."""
    path = Path(path)
    if not path.exists():
        raise InputError("file not found: %s" % path)
    rows = []
    with open(path, newline="") as handle:
        for rec in csv.reader(handle):
            if not rec or not "".join(rec).strip():
                continue
            rows.append(rec)
    if rows and not rows[0][0].strip().lstrip("-").isdigit():
        rows = rows[1:]  # header
    try:
        pairs = [(int(r[0]), int(r[1])) for r in rows]
    except (ValueError, IndexError) as exc:
        raise InputError("%s: expected integer id,label rows" % path) from exc
    pairs.sort()
    ids = [i for i, _ in pairs]
    if ids != list(range(len(ids))):
        raise InputError("%s: variable ids must be 0..d-1 without gaps" % path)
    labels = np.array([lab for _, lab in pairs])
    # normalize arbitrary label values to 0..m-1
    _, labels = np.unique(labels, return_inverse=True)
    return labels


def load_adjacency(path, d=None):
    """Dense 0/1 matrix or `i,j` edge list, auto-detected by shape."""
    arr = load_matrix_csv(path)
    rows, cols = arr.shape
    looks_dense = (rows == cols and rows > 2
                   and np.all(np.isin(arr, (0.0, 1.0)))
                   and np.all(np.diag(arr) == 0)
                   and np.array_equal(arr, arr.T))
    if cols == 2 and not looks_dense:
        if d is None:
            d = int(arr.max()) + 1
        edges = [(int(i), int(j)) for i, j in arr]
        return SpatialGraph.from_edges(d, edges)
    if rows == cols:
        return SpatialGraph(arr)
    raise InputError("%s: adjacency must be a dense square matrix or an i,j edge list"
                     % path)


def load_model_config(path):
    path = Path(path)
    if not path.exists():
        raise InputError("model config not found: %s" % path)
    with open(path) as handle:
        try:
            cfg = json.load(handle)
        except json.JSONDecodeError as exc:
            raise InputError("invalid JSON in %s: %s" % (path, exc)) from exc
    if "components" not in cfg or not isinstance(cfg["components"], list):
        raise InputError("%s: a 'components' list is required" % path)
    return cfg


def parse_beta_grid(spec):
    """`start:stop:count` string or an explicit list of values."""
    if spec is None:
        return None
    if isinstance(spec, (list, tuple)):
        return np.asarray(spec, dtype=float)
    parts = str(spec).split(":")
    if len(parts) != 3:
        raise InputError("beta grid must be 'start:stop:count'")
    try:
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError as exc:
        raise InputError("beta grid must be 'start:stop:count'") from exc
    if count < 1:
        raise InputError("beta grid needs at least one point")
    return np.linspace(start, stop, count)


def build_covariate_set(cfg, base_dir, d=None):
    """Construct the covariate set described by a parsed model config."""
    base = Path(base_dir)

    def resolve(name):
        p = Path(name)
        return p if p.is_absolute() else base / p

    graph = None
    spatial_cfg = cfg.get("spatial")
    if spatial_cfg:
        graph = load_adjacency(resolve(spatial_cfg["adjacency"]), d=d)
        d = graph.d if d is None else d
        if graph.d != d:
            raise InputError("adjacency dimension %d does not match d=%d" % (graph.d, d))

    static = {}
    interactions = []
    for entry in cfg["components"]:
        kind = entry.get("kind")
        name = entry.get("name")
        if not name or not kind:
            raise InputError("every component needs a 'name' and a 'kind'")
        if kind == "cluster":
            labels = load_cluster_labels(resolve(entry["source"]))
            comp = build_cluster_matrix(labels, name)
        elif kind == "global":
            if d is None:
                raise InputError("global component needs the dimension; "
                                 "list a cluster/matrix component or spatial first")
            comp = build_global_matrix(d, name)
        elif kind == "matrix":
            comp = build_matrix_component(load_matrix_csv(resolve(entry["source"])), name)
        elif kind == "interaction":
            interactions.append((name, tuple(entry["parents"])))
            continue
        else:
            raise InputError("unknown component kind %r" % kind)
        if d is None:
            d = comp.d
        if comp.d != d:
            raise InputError("component %r has dimension %d, expected %d"
                             % (name, comp.d, d))
        static[name] = comp

    comps = [build_identity(d)] + list(static.values())
    from .car import decompose
    cache = decompose(graph) if graph is not None else None
    spatial_comp = None
    for name, parents in interactions:
        resolved = []
        for p in parents:
            if p == "spatial":
                if graph is None:
                    raise InputError("interaction %r needs a spatial section" % name)
                if spatial_comp is None:
                    from .components import ComponentMatrix
                    spatial_comp = ComponentMatrix(kind="spatial", name="spatial", d=d)
                resolved.append(spatial_comp)
            elif p in static:
                resolved.append(static[p])
            else:
                raise InputError("interaction %r references unknown parent %r" % (name, p))
        comps.append(hadamard_interaction(resolved[0], resolved[1], name))
    return CovariateSet(d=d, components=tuple(comps), spatial=graph, cache=cache)


def write_json(path, payload):
    with open(path, "w") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")
