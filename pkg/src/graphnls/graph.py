"""Metric graphs: vertices with delta couplings, finite and external edges.

Edges are parametrized from their ``start`` vertex (coordinate 0) towards their
``end`` vertex (coordinate ``length``).  External edges have ``end = None`` and
``length = inf``; they are copies of the half-line attached to ``start``.
Loops (``start == end``) and parallel edges are allowed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Optional

import jsonschema
import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, dijkstra
from scipy.special import erf

INF = math.inf

POTENTIAL_KINDS = ("none", "constant", "square_well", "gaussian_well", "sech2_well")
_POTENTIAL_PARAMS = {
    "none": (),
    "constant": ("c",),
    "square_well": ("depth", "left", "right"),
    "gaussian_well": ("depth", "width", "center"),
    "sech2_well": ("depth", "scale", "center"),
}


class GraphError(ValueError):
    """Malformed graph input (bad file, unknown ids, points off the graph)."""


@dataclass(frozen=True)
class Potential:
    """Edge potential W_e from a closed family of named forms.

    Wells are attractive for positive ``depth``: ``square_well`` is ``-depth`` on
    ``[left, right]``, ``gaussian_well`` is ``-depth*exp(-(x-center)^2/(2 width^2))``
    and ``sech2_well`` is ``-depth*sech^2((x-center)/scale)``.
    """

    kind: str = "none"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in POTENTIAL_KINDS:
            raise GraphError(f"unknown potential kind {self.kind!r}")
        expected = set(_POTENTIAL_PARAMS[self.kind])
        if set(self.params) != expected:
            raise GraphError(
                f"potential {self.kind!r} needs parameters {sorted(expected)}, "
                f"got {sorted(self.params)}"
            )

    @classmethod
    def none(cls) -> "Potential":
        return cls("none", {})

    @classmethod
    def constant(cls, c: float) -> "Potential":
        return cls("constant", {"c": float(c)})

    @classmethod
    def square_well(cls, depth: float, left: float, right: float) -> "Potential":
        return cls("square_well", {"depth": float(depth), "left": float(left), "right": float(right)})

    @classmethod
    def gaussian_well(cls, depth: float, width: float, center: float) -> "Potential":
        return cls("gaussian_well", {"depth": float(depth), "width": float(width), "center": float(center)})

    @classmethod
    def sech2_well(cls, depth: float, scale: float, center: float) -> "Potential":
        return cls("sech2_well", {"depth": float(depth), "scale": float(scale), "center": float(center)})

    @property
    def is_zero(self) -> bool:
        if self.kind == "none":
            return True
        if self.kind == "constant":
            return self.params["c"] == 0.0
        return self.params["depth"] == 0.0

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        p = self.params
        if self.kind == "none":
            return np.zeros_like(x)
        if self.kind == "constant":
            return np.full_like(x, p["c"])
        if self.kind == "square_well":
            inside = (x >= p["left"]) & (x <= p["right"])
            return np.where(inside, -p["depth"], 0.0)
        if self.kind == "gaussian_well":
            return -p["depth"] * np.exp(-0.5 * ((x - p["center"]) / p["width"]) ** 2)
        return -p["depth"] / np.cosh((x - p["center"]) / p["scale"]) ** 2

    def violations(self, length: float) -> list[str]:
        p = self.params
        out = []
        if self.kind == "square_well":
            if not p["left"] < p["right"]:
                out.append("square well needs left < right")
            if p["left"] < 0 or p["right"] > length:
                out.append("square well support leaves the edge")
        elif self.kind == "gaussian_well":
            if p["width"] <= 0:
                out.append("gaussian well width must be positive")
            if not 0 <= p["center"] <= length:
                out.append("gaussian well center outside the edge")
        elif self.kind == "sech2_well":
            if p["scale"] <= 0:
                out.append("sech2 well scale must be positive")
            if not 0 <= p["center"] <= length:
                out.append("sech2 well center outside the edge")
        for name, value in p.items():
            if not math.isfinite(value):
                out.append(f"potential parameter {name} is not finite")
        return out

    def negative_part_norms(self, length: float) -> tuple[float, float]:
        """Return ``(||W_-||_1, ||W_-||_inf)`` over ``[0, length]``."""
        p = self.params
        if self.kind == "none":
            return 0.0, 0.0
        if self.kind == "constant":
            neg = max(-p["c"], 0.0)
            return (neg * length if neg > 0 else 0.0), neg
        depth = max(p["depth"], 0.0)
        if depth == 0.0:
            return 0.0, 0.0
        if self.kind == "square_well":
            lo, hi = max(p["left"], 0.0), min(p["right"], length)
            return depth * max(hi - lo, 0.0), depth
        if self.kind == "gaussian_well":
            s = p["width"] * math.sqrt(2.0)
            upper = 1.0 if math.isinf(length) else erf((length - p["center"]) / s)
            l1 = depth * p["width"] * math.sqrt(math.pi / 2) * (upper - erf(-p["center"] / s))
            return l1, depth
        upper = 1.0 if math.isinf(length) else math.tanh((length - p["center"]) / p["scale"])
        l1 = depth * p["scale"] * (upper - math.tanh(-p["center"] / p["scale"]))
        return l1, depth

    def to_dict(self) -> dict:
        return {"kind": self.kind, **self.params}


@dataclass(frozen=True)
class Vertex:
    id: str
    alpha: float = 0.0


@dataclass(frozen=True)
class Edge:
    id: str
    start: str
    end: Optional[str]
    length: float
    potential: Potential = field(default_factory=Potential.none)

    @property
    def external(self) -> bool:
        return self.end is None

    @property
    def is_loop(self) -> bool:
        return self.end is not None and self.end == self.start

    def flipped(self) -> "Edge":
        """Same edge with reversed parametrization (finite edges only)."""
        if self.external:
            raise GraphError(f"external edge {self.id!r} has a fixed orientation")
        return Edge(self.id, self.end, self.start, self.length, _flip_potential(self.potential, self.length))


def _flip_potential(pot: Potential, length: float) -> Potential:
    p = dict(pot.params)
    if pot.kind == "square_well":
        p["left"], p["right"] = length - pot.params["right"], length - pot.params["left"]
    elif pot.kind in ("gaussian_well", "sech2_well"):
        p["center"] = length - pot.params["center"]
    return Potential(pot.kind, p)


@dataclass(frozen=True)
class GraphPoint:
    edge: str
    x: float


@dataclass(frozen=True)
class MetricGraph:
    """A finite metric graph.

    Construction never fails on semantic problems (dangling references, missing
    external edge, disconnection); call :func:`validate` for those.
    """

    vertices: tuple[Vertex, ...]
    edges: tuple[Edge, ...]

    def __post_init__(self):
        object.__setattr__(self, "vertices", tuple(self.vertices))
        object.__setattr__(self, "edges", tuple(self.edges))

    @cached_property
    def vertex_index(self) -> dict[str, int]:
        return {v.id: i for i, v in enumerate(self.vertices)}

    @cached_property
    def edge_map(self) -> dict[str, Edge]:
        return {e.id: e for e in self.edges}

    def vertex(self, vid: str) -> Vertex:
        try:
            return self.vertices[self.vertex_index[vid]]
        except KeyError:
            raise GraphError(f"unknown vertex {vid!r}") from None

    def edge(self, eid: str) -> Edge:
        try:
            return self.edge_map[eid]
        except KeyError:
            raise GraphError(f"unknown edge {eid!r}") from None

    @property
    def external_edges(self) -> list[Edge]:
        return [e for e in self.edges if e.external]

    @property
    def internal_edges(self) -> list[Edge]:
        return [e for e in self.edges if not e.external]

    def degree(self, vid: str) -> int:
        """Number of edge ends at ``vid``; a loop counts twice."""
        return sum((e.start == vid) + (e.end == vid) for e in self.edges)

    @cached_property
    def vertex_distances(self) -> np.ndarray:
        """All-pairs shortest path lengths between vertices (Dijkstra)."""
        n = len(self.vertices)
        best: dict[tuple[int, int], float] = {}
        for e in self.edges:
            if e.external or e.is_loop:
                continue
            i, j = self.vertex_index[e.start], self.vertex_index[e.end]
            key = (min(i, j), max(i, j))
            best[key] = min(best.get(key, INF), e.length)
        if not best:
            out = np.full((n, n), INF)
            np.fill_diagonal(out, 0.0)
            return out
        rows, cols = zip(*best)
        w = csr_matrix((list(best.values()), (rows, cols)), shape=(n, n))
        d = dijkstra(w, directed=False)
        return np.minimum(d, d.T)

    def endpoints(self, edge: Edge, x) -> list[tuple[int, object]]:
        """Pairs ``(vertex index, distance along the edge to it)`` for coordinate(s) ``x``."""
        out = [(self.vertex_index[edge.start], x)]
        if not edge.external:
            out.append((self.vertex_index[edge.end], edge.length - x))
        return out

    def check_point(self, p: GraphPoint) -> Edge:
        e = self.edge(p.edge)
        if not (0.0 <= p.x <= e.length) or math.isnan(p.x):
            raise GraphError(f"coordinate {p.x} outside edge {e.id!r} of length {e.length}")
        return e

    def with_edges(self, edges) -> "MetricGraph":
        return MetricGraph(self.vertices, tuple(edges))

    def scaled(self, factor: float) -> "MetricGraph":
        """Graph with every edge length multiplied by ``factor``; couplings are kept."""
        if any(not e.potential.is_zero for e in self.edges):
            raise GraphError("scaling is only defined for potential-free graphs")
        es = tuple(Edge(e.id, e.start, e.end, e.length * factor) for e in self.edges)
        return MetricGraph(self.vertices, es)


def validate(g: MetricGraph) -> list[str]:
    """List the ways ``g`` fails to be a finite connected graph with an external edge.

    An empty list means the graph is usable.  Nothing is raised.
    """
    out = []
    ids = [v.id for v in g.vertices]
    if len(set(ids)) != len(ids):
        out.append("duplicate vertex id")
    eids = [e.id for e in g.edges]
    if len(set(eids)) != len(eids):
        out.append("duplicate edge id")
    for v in g.vertices:
        if not math.isfinite(v.alpha):
            out.append(f"vertex {v.id!r}: alpha is not finite")
    known = set(ids)
    for e in g.edges:
        if e.start not in known:
            out.append(f"edge {e.id!r}: unknown vertex {e.start!r}")
        if e.end is not None and e.end not in known:
            out.append(f"edge {e.id!r}: unknown vertex {e.end!r}")
        if e.external:
            if not math.isinf(e.length):
                out.append(f"edge {e.id!r}: external edge must have infinite length")
        elif not (math.isfinite(e.length) and e.length > 0):
            out.append(f"edge {e.id!r}: finite edge needs a positive finite length")
        out.extend(f"edge {e.id!r}: {msg}" for msg in e.potential.violations(e.length))
    if not g.external_edges:
        out.append("no external edge")
    if not g.vertices:
        out.append("graph has no vertices")
    elif not any("unknown vertex" in m for m in out):
        n = len(g.vertices)
        idx = {vid: i for i, vid in enumerate(ids)}
        pairs = [(idx[e.start], idx[e.end]) for e in g.edges if e.end is not None]
        if pairs:
            r, c = zip(*pairs)
            adj = csr_matrix((np.ones(len(pairs)), (r, c)), shape=(n, n))
        else:
            adj = csr_matrix((n, n))
        ncomp, _ = connected_components(adj, directed=False)
        if ncomp > 1:
            out.append("graph is not connected")
    return out


def distance(g: MetricGraph, p: GraphPoint, q: GraphPoint) -> float:
    """Path distance between two points of ``g``."""
    ep, eq = g.check_point(p), g.check_point(q)
    d = g.vertex_distances
    best = abs(p.x - q.x) if ep.id == eq.id else INF
    for a, da in g.endpoints(ep, p.x):
        for b, db in g.endpoints(eq, q.x):
            best = min(best, (da + db) + d[a, b])  # grouped so that swapping p, q is exact
    return float(best)


# ---------------------------------------------------------------- JSON format


def _schema() -> dict:
    text = resources.files("graphnls").joinpath("data/graph.schema.json").read_text("utf-8")
    return json.loads(text)


SCHEMA = _schema()


def parse_graph(data: dict) -> MetricGraph:
    """Build a graph from the JSON document structure; raises :class:`GraphError`."""
    try:
        jsonschema.validate(data, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(k) for k in exc.absolute_path) or "<root>"
        raise GraphError(f"invalid graph file at {where}: {exc.message}") from None
    vertices = [Vertex(v["id"], float(v.get("alpha", 0.0))) for v in data["vertices"]]
    edges = []
    for e in data["edges"]:
        length = INF if e["length"] == "inf" else float(e["length"])
        pot = dict(e.get("potential", {"kind": "none"}))
        kind = pot.pop("kind")
        edges.append(Edge(e["id"], e["from"], e.get("to"), length,
                          Potential(kind, {k: float(v) for k, v in pot.items()})))
    return MetricGraph(tuple(vertices), tuple(edges))


def graph_to_dict(g: MetricGraph) -> dict:
    edges = []
    for e in g.edges:
        item = {"id": e.id, "from": e.start}
        if e.end is not None:
            item["to"] = e.end
        item["length"] = "inf" if math.isinf(e.length) else e.length
        item["potential"] = e.potential.to_dict()
        edges.append(item)
    return {"vertices": [{"id": v.id, "alpha": v.alpha} for v in g.vertices], "edges": edges}


def load_graph(path) -> MetricGraph:
    try:
        data = json.loads(Path(path).read_text("utf-8"))
    except json.JSONDecodeError as exc:
        raise GraphError(f"{path}: malformed JSON ({exc.msg}, line {exc.lineno})") from None
    except OSError as exc:
        raise GraphError(f"{path}: {exc.strerror}") from None
    return parse_graph(data)


def dump_graph(g: MetricGraph, path) -> None:
    Path(path).write_text(json.dumps(graph_to_dict(g), indent=2) + "\n", "utf-8")


# ------------------------------------------------------------ common graphs


def half_line(alpha: float = 0.0, potential: Potential | None = None) -> MetricGraph:
    return star(1, alpha, potentials=[potential] if potential else None)


def line(alpha: float = 0.0) -> MetricGraph:
    """The real line as two half-lines glued at ``v`` (Kirchhoff when ``alpha == 0``)."""
    return star(2, alpha)


def star(n: int, alpha: float = 0.0, potentials=None) -> MetricGraph:
    """``n`` half-lines joined at vertex ``v``."""
    pots = list(potentials) if potentials is not None else [None] * n
    edges = tuple(Edge(f"e{k}", "v", None, INF, pots[k] or Potential.none()) for k in range(n))
    return MetricGraph((Vertex("v", alpha),), edges)


def tadpole(loop_length: float = 2 * math.pi, alpha: float = 0.0) -> MetricGraph:
    """A loop of length ``loop_length`` with a half-line attached at the same vertex."""
    return MetricGraph(
        (Vertex("v", alpha),),
        (Edge("loop", "v", "v", loop_length), Edge("tail", "v", None, INF)),
    )


def figure_one_graph() -> MetricGraph:
    """Seven vertices, fourteen edges: three external, one loop, parallel pairs, one terminal edge."""
    vs = tuple(Vertex(f"v{k}") for k in range(1, 8))
    layout = [
        ("loop1", "v1", "v1", 1.5), ("a", "v5", "v2", 2.0), ("b", "v5", "v2", 2.6),
        ("c", "v5", "v4", 2.0), ("d", "v5", "v4", 2.4), ("f", "v5", "v3", 2.8),
        ("g", "v1", "v2", 1.8), ("k", "v2", "v3", 2.0), ("m", "v3", "v6", 2.0),
        ("n", "v4", "v3", 2.0), ("p", "v3", "v7", 1.5),
        ("x5", "v5", None, INF), ("x6", "v6", None, INF), ("x4", "v4", None, INF),
    ]
    return MetricGraph(vs, tuple(Edge(i, a, b, ell) for i, a, b, ell in layout))
