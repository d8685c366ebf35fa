"""Per-edge grids, norms of the piecewise-linear interpolant and the CSV format."""

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from graphnls.graph import (Edge, GraphError, GraphPoint, MetricGraph, Vertex, figure_one_graph,
                            half_line, star, tadpole)
from graphnls.mesh import (GraphFunction, build_mesh, distances_from, edge_masses, kinetic, norm,
                           read_csv, sample, vertex_value, write_csv)
from graphnls.soliton import soliton


def _segment(length=1.0):
    return MetricGraph((Vertex("a"), Vertex("b")),
                       (Edge("s", "a", "b", length), Edge("x", "a", None, math.inf)))


def test_segment_node_count():
    mesh = build_mesh(_segment(), 0.25, 10.0)
    assert len(mesh.grid_map["s"].x) == 5


def test_half_line_nodes():
    mesh = build_mesh(half_line(), 0.5, 2.0)
    gr = mesh.grids[0]
    assert gr.x.tolist() == [0.0, 0.5, 1.0, 1.5, 2.0]
    assert mesh.truncated[gr.nodes].tolist() == [False] * 4 + [True]


def test_star_node_count():
    # one shared vertex node, 399 interior nodes per edge, one truncated end per edge
    mesh = build_mesh(star(3), 0.1, 40.0)
    assert mesh.n_nodes == 1 + 3 * 399 + 3
    assert int(mesh.truncated.sum()) == 3
    assert all(len(gr.x) == 401 for gr in mesh.grids)


@pytest.mark.parametrize("h,L", [(0.0, 1.0), (-1.0, 5.0), (0.1, 0.0), (1.0, 0.5)])
def test_bad_mesh_parameters(h, L):
    with pytest.raises(ValueError):
        build_mesh(half_line(), h, L)


def test_every_vertex_has_one_index():
    g = figure_one_graph()
    mesh = build_mesh(g, 0.1, 5.0)
    for k, v in enumerate(g.vertices):
        ends = [gr.nodes[0] for gr in mesh.grids if gr.edge.start == v.id]
        ends += [gr.nodes[-1] for gr in mesh.grids if gr.edge.end == v.id]
        assert set(ends) == {k}
    assert all(len(gr.x) >= 2 for gr in mesh.grids)


def test_constant_on_segment():
    mesh = build_mesh(_segment(2.0), 0.1, 10.0)
    f = sample(mesh, lambda e, x: np.where(e.id == "s", 1.0, 0.0) + 0 * x)
    f.values[mesh.grid_map["x"].nodes[1:]] = 0.0
    assert norm(f, 2) ** 2 == pytest.approx(2.0 + 0.1 / 3, rel=1e-13)


def test_zero_function_norms():
    mesh = build_mesh(star(3), 0.1, 5.0)
    f = GraphFunction(mesh, np.zeros(mesh.n_nodes))
    for p in (2, 3.5, 6, math.inf):
        assert norm(f, p) == 0.0


def test_norm_rejects_small_exponent():
    mesh = build_mesh(half_line(), 0.1, 5.0)
    with pytest.raises(ValueError):
        norm(GraphFunction(mesh, np.ones(mesh.n_nodes)), 1.5)


def test_ramp_kinetic():
    mesh = build_mesh(_segment(), 0.1, 10.0)
    gr = mesh.grid_map["s"]
    v = np.zeros(mesh.n_nodes)
    v[gr.nodes] = gr.x
    assert kinetic(GraphFunction(mesh, v)) == pytest.approx(1.0, rel=1e-13)
    assert kinetic(GraphFunction(mesh, np.ones(mesh.n_nodes))) == 0.0


def test_soliton_mass_and_kinetic(line_fine):
    mesh, _ = line_fine
    s = soliton(2.0, 1.0)
    f = sample(mesh, lambda e, x: s(x))
    assert norm(f, 2) ** 2 == pytest.approx(2.0, abs=10 * mesh.h ** 2)
    assert kinetic(f) == pytest.approx(4.0 / 3.0 * 0.25 ** 1.5, abs=10 * mesh.h ** 2)


def test_lp_norm_exact_for_polynomials():
    # |f|^4 of a linear function is a quartic: Gauss quadrature must be exact
    mesh = build_mesh(_segment(), 0.1, 10.0)
    gr = mesh.grid_map["s"]
    v = np.zeros(mesh.n_nodes)
    v[gr.nodes] = 1.0 + gr.x
    x_gr = mesh.grid_map["x"]
    v[x_gr.nodes] = np.maximum(1.0 - x_gr.x / 0.1, 0.0)
    exact_seg = (2 ** 5 - 1) / 5
    exact_tail = 0.1 / 5
    assert norm(GraphFunction(mesh, v), 4) ** 4 == pytest.approx(exact_seg + exact_tail, rel=1e-13)


def test_vertex_value():
    mesh = build_mesh(star(3), 0.1, 5.0)
    f = sample(mesh, lambda e, x: np.cos(x))
    assert vertex_value(f, "v") == 1.0
    with pytest.raises(GraphError):
        vertex_value(f, "nope")


def test_csv_roundtrip(tmp_path):
    mesh = build_mesh(figure_one_graph(), 0.2, 4.0)
    f = sample(mesh, lambda e, x: np.exp(-x) * (1 + 0.5j))
    path = tmp_path / "f.csv"
    write_csv(f, path)
    g = read_csv(mesh, path)
    assert np.array_equal(g.values, f.values)
    real = sample(mesh, lambda e, x: np.exp(-x))
    write_csv(real, path)
    assert not np.iscomplexobj(read_csv(mesh, path).values)


def test_csv_rejects_other_mesh(tmp_path):
    f = sample(build_mesh(star(3), 0.1, 5.0), lambda e, x: np.exp(-x))
    path = tmp_path / "f.csv"
    write_csv(f, path)
    with pytest.raises(GraphError):
        read_csv(build_mesh(star(3), 0.2, 5.0), path)


@given(st.floats(-3, 3).filter(lambda t: t == 0 or abs(t) > 1e-100), st.floats(-3, 3).filter(lambda t: t == 0 or abs(t) > 1e-100), st.sampled_from([2, 3, 4.5, 6, math.inf]))
def test_norm_homogeneous(a, b, p):
    mesh = build_mesh(tadpole(), 0.2, 4.0)
    f = sample(mesh, lambda e, x: np.sin(x) + 0.3)
    c = complex(a, b)
    assert norm(c * f, p) == pytest.approx(abs(c) * norm(f, p), rel=1e-12, abs=1e-300)


def _bump(mesh, point, lam=1.0):
    d = distances_from(mesh, point)
    return GraphFunction(mesh, math.sqrt(lam) * np.exp(-((lam * d) ** 2)))


@pytest.mark.parametrize("lam", [2.0, 4.0])
def test_scaling_law(lam):
    """``sqrt(lam) f(lam x)`` on the graph shrunk by ``1/lam``: kinetic x lam^2, ||.||_{2mu+2}^{2mu+2} x lam^mu."""
    h, mu = 0.01, 1.0
    g = MetricGraph((Vertex("a"), Vertex("b")),
                    (Edge("s", "a", "b", 3.0), Edge("x", "a", None, math.inf),
                     Edge("y", "b", None, math.inf)))
    gs = g.scaled(1.0 / lam)
    f = _bump(build_mesh(g, h, 12.0), GraphPoint("s", 1.0))
    fs = _bump(build_mesh(gs, h, 12.0 / lam), GraphPoint("s", 1.0 / lam), lam)
    assert kinetic(fs) / kinetic(f) == pytest.approx(lam ** 2, rel=5 * h)
    p = 2 * mu + 2
    assert norm(fs, p) ** p / norm(f, p) ** p == pytest.approx(lam ** mu, rel=5 * h)


def test_edge_masses_sum_to_mass():
    mesh = build_mesh(figure_one_graph(), 0.05, 6.0)
    f = sample(mesh, lambda e, x: np.exp(-0.3 * x) * (1 + 0 * x))
    assert edge_masses(f).sum() == pytest.approx(f.mass, rel=1e-13)
