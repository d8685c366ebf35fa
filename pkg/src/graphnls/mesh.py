"""Piecewise-linear discretization of H^1 on a metric graph.

Every vertex owns exactly one global degree of freedom, so continuity at the
vertices holds by construction.  External edges are truncated to ``[0, L]`` and
the node at ``x = L`` is flagged for a homogeneous Dirichlet condition.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .graph import Edge, GraphError, GraphPoint, MetricGraph

_GAUSS_X, _GAUSS_W = np.polynomial.legendre.leggauss(8)
_GAUSS_X = 0.5 * (_GAUSS_X + 1.0)
_GAUSS_W = 0.5 * _GAUSS_W


@dataclass(frozen=True, eq=False)
class EdgeGrid:
    edge: Edge
    nodes: np.ndarray
    x: np.ndarray
    truncated: bool

    @property
    def length(self) -> float:
        return float(self.x[-1])

    @property
    def spacing(self) -> float:
        return float(self.x[1] - self.x[0])


@dataclass(frozen=True, eq=False)
class Mesh:
    """Per-edge uniform grids glued at shared vertex nodes."""

    graph: MetricGraph
    h: float
    L: float
    grids: tuple[EdgeGrid, ...]
    n_nodes: int

    @cached_property
    def grid_map(self) -> dict[str, EdgeGrid]:
        return {gr.edge.id: gr for gr in self.grids}

    @cached_property
    def truncated(self) -> np.ndarray:
        mask = np.zeros(self.n_nodes, dtype=bool)
        for gr in self.grids:
            if gr.truncated:
                mask[gr.nodes[-1]] = True
        return mask

    @property
    def free(self) -> np.ndarray:
        return ~self.truncated

    @cached_property
    def cells(self) -> dict[str, np.ndarray]:
        """Flat cell arrays: endpoints ``a``/``b``, length ``h``, ``edge`` index, left coordinate ``x0``."""
        a, b, hh, ei, x0 = [], [], [], [], []
        for k, gr in enumerate(self.grids):
            a.append(gr.nodes[:-1])
            b.append(gr.nodes[1:])
            hh.append(np.diff(gr.x))
            ei.append(np.full(len(gr.x) - 1, k))
            x0.append(gr.x[:-1])
        return {name: np.concatenate(arr) for name, arr in
                zip(("a", "b", "h", "edge", "x0"), (a, b, hh, ei, x0))}

    @cached_property
    def node_position(self) -> tuple[np.ndarray, np.ndarray]:
        """``(edge index, coordinate)`` of each node; a vertex node uses its first incident edge."""
        edge = np.full(self.n_nodes, -1)
        x = np.zeros(self.n_nodes)
        for k, gr in reversed(list(enumerate(self.grids))):
            edge[gr.nodes] = k
            x[gr.nodes] = gr.x
        return edge, x

    @cached_property
    def lumped_mass(self) -> np.ndarray:
        c = self.cells
        w = np.zeros(self.n_nodes)
        np.add.at(w, c["a"], 0.5 * c["h"])
        np.add.at(w, c["b"], 0.5 * c["h"])
        return w


def build_mesh(g: MetricGraph, h: float, L: float) -> Mesh:
    """Uniform grids of spacing at most ``h``; external edges truncated at ``L``.

    Solvers ask for ``L >= 10 h``; the mesh itself only needs one cell.

    Examples
    --------
    >>> from graphnls.graph import half_line
    >>> m = build_mesh(half_line(), 0.5, 2.0)
    >>> m.grids[0].x.tolist(), m.truncated.tolist()
    ([0.0, 0.5, 1.0, 1.5, 2.0], [False, False, False, False, True])
    """
    if not (h > 0 and math.isfinite(h)):
        raise ValueError(f"mesh spacing h must be positive, got {h}")
    if not (L > 0 and math.isfinite(L)):
        raise ValueError(f"truncation length L must be positive, got {L}")
    if L < h:
        raise ValueError(f"truncation length L={L} is shorter than one cell h={h}")
    used = {e.start for e in g.edges} | {e.end for e in g.edges if e.end is not None}
    for v in g.vertices:
        if v.id not in used:
            raise GraphError(f"vertex {v.id!r} has no incident edge")
    n = len(g.vertices)
    grids = []
    for e in g.edges:
        length = L if e.external else e.length
        ncell = max(1, math.ceil(length / h - 1e-9))
        x = np.linspace(0.0, length, ncell + 1)
        nodes = np.empty(ncell + 1, dtype=np.int64)
        nodes[0] = g.vertex_index[e.start]
        nodes[1:ncell] = np.arange(n, n + ncell - 1)
        n += ncell - 1
        if e.external:
            nodes[-1] = n
            n += 1
        else:
            nodes[-1] = g.vertex_index[e.end]
        grids.append(EdgeGrid(e, nodes, x, e.external))
    return Mesh(g, float(h), float(L), tuple(grids), n)


@dataclass(eq=False)
class GraphFunction:
    """Continuous piecewise-linear function given by its nodal coefficients."""

    mesh: Mesh
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.shape != (self.mesh.n_nodes,):
            raise ValueError(
                f"coefficient vector has shape {self.values.shape}, mesh has {self.mesh.n_nodes} nodes"
            )

    def copy(self) -> "GraphFunction":
        return GraphFunction(self.mesh, self.values.copy())

    def __mul__(self, c) -> "GraphFunction":
        return GraphFunction(self.mesh, self.values * c)

    __rmul__ = __mul__

    @property
    def mass(self) -> float:
        return norm(self, 2) ** 2

    def on_edge(self, eid: str) -> tuple[np.ndarray, np.ndarray]:
        gr = self.mesh.grid_map[eid]
        return gr.x, self.values[gr.nodes]


def _vals(f) -> np.ndarray:
    return f.values if isinstance(f, GraphFunction) else np.asarray(f)


def sample(mesh: Mesh, func, dirichlet: bool = True) -> GraphFunction:
    """Interpolate ``func(edge, x)`` at the nodes.

    Vertex values come from the first incident edge, so ``func`` must be
    continuous on the graph.  Truncated end nodes are zeroed when ``dirichlet``.
    """
    per_edge = [np.broadcast_to(np.asarray(func(gr.edge, gr.x)), gr.x.shape) for gr in mesh.grids]
    out = np.zeros(mesh.n_nodes, dtype=np.result_type(float, *per_edge))
    for gr, vals in reversed(list(zip(mesh.grids, per_edge))):
        out[gr.nodes] = vals
    if dirichlet:
        out[mesh.truncated] = 0.0
    return GraphFunction(mesh, out)


def norm(f: GraphFunction, p: float = 2) -> float:
    """Composite L^p norm of the interpolant, ``p`` in ``[2, inf]``.

    Per-interval 8-point Gauss-Legendre quadrature integrates ``|f|^p`` exactly
    for even integer ``p <= 14``; ``p = inf`` is the largest nodal modulus.
    """
    if not p >= 2:
        raise ValueError(f"norm exponent must be in [2, inf], got {p}")
    v = _vals(f)
    if math.isinf(p):
        return float(np.max(np.abs(v))) if v.size else 0.0
    return float(_power_integral(f.mesh, v, p) ** (1.0 / p))


def _power_integral(mesh: Mesh, v: np.ndarray, p: float) -> float:
    c = mesh.cells
    va, vb = v[c["a"]], v[c["b"]]
    if p == 2:
        return float(np.sum(c["h"] / 3.0 * (np.abs(va) ** 2 + np.real(va * np.conj(vb)) + np.abs(vb) ** 2)))
    q = va[:, None] * (1.0 - _GAUSS_X) + vb[:, None] * _GAUSS_X
    return float(np.sum(c["h"] * (np.abs(q) ** p @ _GAUSS_W)))


def power_integral(f: GraphFunction, p: float) -> float:
    """``||f||_p^p`` with the same quadrature as :func:`norm`."""
    return _power_integral(f.mesh, _vals(f), p)


def kinetic(f: GraphFunction) -> float:
    """``||f'||^2`` of the piecewise-linear interpolant."""
    c = f.mesh.cells
    v = _vals(f)
    return float(np.sum(np.abs(v[c["b"]] - v[c["a"]]) ** 2 / c["h"]))


def vertex_value(f: GraphFunction, vid: str):
    """Value at a vertex, well defined because the vertex owns one coefficient."""
    idx = f.mesh.graph.vertex_index.get(vid)
    if idx is None:
        raise GraphError(f"unknown vertex {vid!r}")
    return f.values[idx]


def edge_masses(f: GraphFunction) -> np.ndarray:
    """``int_e |f|^2`` for each edge, in mesh edge order."""
    mesh = f.mesh
    c = mesh.cells
    v = _vals(f)
    va, vb = v[c["a"]], v[c["b"]]
    cell = c["h"] / 3.0 * (np.abs(va) ** 2 + np.real(va * np.conj(vb)) + np.abs(vb) ** 2)
    return np.bincount(c["edge"], weights=cell, minlength=len(mesh.grids))


def edge_centroids(f: GraphFunction) -> np.ndarray:
    """Mass-weighted mean coordinate on each edge (nodal quadrature)."""
    mesh = f.mesh
    dens = np.abs(_vals(f)) ** 2 * mesh.lumped_mass
    out = np.zeros(len(mesh.grids))
    for k, gr in enumerate(mesh.grids):
        w = dens[gr.nodes[1:-1]]
        tot = w.sum()
        out[k] = float(w @ gr.x[1:-1] / tot) if tot > 0 else 0.0
    return out


def distances_from(mesh: Mesh, point: GraphPoint) -> np.ndarray:
    """Path distance from ``point`` to every mesh node."""
    g = mesh.graph
    e0 = g.check_point(point)
    dv = np.full(len(g.vertices), math.inf)
    for a, da in g.endpoints(e0, point.x):
        dv = np.minimum(dv, da + g.vertex_distances[a])
    return _node_distances(mesh, dv, point)


def distances_from_vertex(mesh: Mesh, vid: str) -> np.ndarray:
    g = mesh.graph
    return _node_distances(mesh, g.vertex_distances[g.vertex_index[vid]], None)


def _node_distances(mesh, dv, point):
    g = mesh.graph
    out = np.full(mesh.n_nodes, math.inf)
    for gr in mesh.grids:
        d = dv[g.vertex_index[gr.edge.start]] + gr.x
        if not gr.edge.external:
            d = np.minimum(d, dv[g.vertex_index[gr.edge.end]] + gr.edge.length - gr.x)
        if point is not None and point.edge == gr.edge.id:
            d = np.minimum(d, np.abs(gr.x - point.x))
        out[gr.nodes] = np.minimum(out[gr.nodes], d)
    return out


# ------------------------------------------------------------------- CSV io


def write_csv(f: GraphFunction, path) -> None:
    """One row per (edge, node): ``edge_id, x, re, im``; vertex values repeat per edge."""
    v = _vals(f)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["edge_id", "x", "re", "im"])
        for gr in f.mesh.grids:
            for x, val in zip(gr.x, v[gr.nodes]):
                w.writerow([gr.edge.id, f"{x:.17g}", f"{np.real(val):.17g}", f"{np.imag(val):.17g}"])


def read_csv(mesh: Mesh, path) -> GraphFunction:
    """Inverse of :func:`write_csv`; the file must match ``mesh`` node for node."""
    rows: dict[str, list] = {}
    with open(Path(path), newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["edge_id", "x", "re", "im"]:
            raise GraphError(f"{path}: expected header edge_id,x,re,im")
        for r in reader:
            rows.setdefault(r["edge_id"], []).append((float(r["x"]), float(r["re"]), float(r["im"])))
    if set(rows) != set(mesh.grid_map):
        raise GraphError(f"{path}: edge ids do not match the mesh")
    vals = np.zeros(mesh.n_nodes, dtype=complex)
    seen = np.zeros(mesh.n_nodes, dtype=bool)
    for eid, data in rows.items():
        gr = mesh.grid_map[eid]
        arr = np.array(data)
        if arr.shape[0] != len(gr.x) or not np.allclose(arr[:, 0], gr.x, rtol=0, atol=1e-9 * max(1.0, gr.length)):
            raise GraphError(f"{path}: nodes on edge {eid!r} do not match the mesh")
        z = arr[:, 1] + 1j * arr[:, 2]
        clash = seen[gr.nodes] & ~np.isclose(vals[gr.nodes], z, rtol=1e-12, atol=1e-14)
        if clash.any():
            raise GraphError(f"{path}: discontinuous vertex value on edge {eid!r}")
        vals[gr.nodes] = z
        seen[gr.nodes] = True
    if not np.any(vals.imag):
        vals = vals.real.copy()
    return GraphFunction(mesh, vals)
