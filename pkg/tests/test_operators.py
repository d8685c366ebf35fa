"""Assembled forms, the energy and the stationarity residual."""

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from graphnls.graph import (Edge, MetricGraph, Potential, Vertex, figure_one_graph, half_line,
                            star)
from graphnls.mesh import GraphFunction, build_mesh, sample
from graphnls.operators import (apply_H, assemble, energy, energy_gradient, energy_lin,
                                export_triplets, multiplier, nonlinear_term, stationary_residual)
from graphnls.soliton import soliton
from graphnls.spectral import ground_eigenpair


def _segment_graph(alpha=0.0):
    return MetricGraph((Vertex("a", alpha), Vertex("b")),
                       (Edge("s", "a", "b", 1.0), Edge("x", "b", None, math.inf)))


def test_ramp_stiffness():
    mesh = build_mesh(_segment_graph(), 0.1, 5.0)
    forms = assemble(mesh)
    v = np.zeros(mesh.n_nodes)
    gr = mesh.grid_map["s"]
    v[gr.nodes] = gr.x
    v[mesh.grid_map["x"].nodes] = 1.0
    v[mesh.truncated] = 0.0
    # ramp on the segment plus the last cell of the tail dropping to zero
    assert v @ (forms.A @ v) == pytest.approx(1.0 + 1.0 / 0.1, rel=1e-13)


def test_delta_term():
    mesh = build_mesh(_segment_graph(alpha=-2.0), 0.1, 5.0)
    forms = assemble(mesh)
    v = np.zeros(mesh.n_nodes)
    v[mesh.graph.vertex_index["a"]] = 1.0
    assert v @ (forms.D @ v) == -2.0


def test_forms_exact_on_polynomials():
    g = MetricGraph((Vertex("a"), Vertex("b")),
                    (Edge("s", "a", "b", 2.0, Potential.constant(0.7)), Edge("x", "b", None, math.inf)))
    mesh = build_mesh(g, 0.1, 5.0)
    forms = assemble(mesh)
    v = np.zeros(mesh.n_nodes)
    gr = mesh.grid_map["s"]
    v[gr.nodes] = 1.0 + 2.0 * gr.x
    # restrict to the segment: zero the tail except its vertex value
    tail = mesh.grid_map["x"].nodes[1:]
    v[tail] = 0.0
    int_sq = ((1 + 4.0) ** 3 - 1) / 6.0  # int_0^2 (1+2x)^2 dx
    tail_sq = 25.0 * 0.1 / 3.0
    assert v @ (forms.M @ v) == pytest.approx(int_sq + tail_sq, rel=1e-13)
    assert v @ (forms.P @ v) == pytest.approx(0.7 * int_sq, rel=1e-13)
    assert v @ (forms.A @ v) == pytest.approx(4.0 * 2.0 + 25.0 / 0.1, rel=1e-13)


def test_half_line_delta_form():
    mesh = build_mesh(half_line(alpha=-1.0), 0.01, 40.0)
    forms = assemble(mesh)
    f = sample(mesh, lambda e, x: math.sqrt(2.0) * np.exp(-x))
    assert energy_lin(f, forms) == pytest.approx(-1.0, abs=10 * mesh.h ** 2)


def test_mesh_graph_mismatch():
    mesh = build_mesh(star(3), 0.1, 5.0)
    with pytest.raises(ValueError):
        assemble(mesh, star(3))


def test_zero_energy():
    mesh = build_mesh(star(3), 0.1, 5.0)
    assert energy(GraphFunction(mesh, np.zeros(mesh.n_nodes)), assemble(mesh), 1.0) == 0.0


@pytest.mark.parametrize("mu", [0.0, -1.0, 2.5])
def test_energy_rejects_mu(mu):
    mesh = build_mesh(star(3), 0.1, 5.0)
    with pytest.raises(ValueError):
        energy(GraphFunction(mesh, np.ones(mesh.n_nodes)), assemble(mesh), mu)


def test_soliton_energy(line_fine):
    mesh, forms = line_fine
    s2, s1 = soliton(2.0, 1.0), soliton(1.0, 1.0)
    assert energy(sample(mesh, lambda e, x: s2(x)), forms, 1.0) == pytest.approx(-1 / 6, abs=1e-3)
    assert energy(sample(mesh, lambda e, x: s1(x)), forms, 1.0) == pytest.approx(-1 / 48, abs=1e-3)


def test_energy_identity(star_delta):
    _, mesh, forms = star_delta
    f = sample(mesh, lambda e, x: np.exp(-x / 3))
    assert energy(f, forms, 0.7) == energy_lin(f, forms) - nonlinear_term(f, forms, 0.7)


def test_soliton_residual(line_fine):
    mesh, forms = line_fine
    s = soliton(2.0, 1.0)
    f = sample(mesh, lambda e, x: s(x))
    assert stationary_residual(f, forms, 0.25, 1.0) <= 10 * mesh.h ** 2
    assert stationary_residual(f, forms, 0.5, 1.0) >= 0.1
    assert multiplier(f, forms, 1.0) == pytest.approx(0.25, abs=1e-4)


def test_eigen_residual_hook(star_delta):
    _, mesh, forms = star_delta
    pair = ground_eigenpair(forms)
    assert stationary_residual(pair.vector, forms, -pair.value, 1.0, include_nonlinear=False) <= 1e-8


def test_residual_rejects_zero(star_delta):
    _, mesh, forms = star_delta
    with pytest.raises(ValueError):
        stationary_residual(GraphFunction(mesh, np.zeros(mesh.n_nodes)), forms, 1.0, 1.0)


def test_apply_H_on_eigenvector(star_delta):
    _, mesh, forms = star_delta
    pair = ground_eigenpair(forms)
    Hv = apply_H(pair.vector, forms)
    free = forms.free_index
    assert np.allclose(Hv.values[free], pair.value * pair.vector.values[free], atol=1e-7)


def test_matrices_symmetric():
    g = star(3, alpha=-0.5, potentials=[Potential.gaussian_well(1.0, 0.5, 1.0), None, None])
    forms = assemble(build_mesh(g, 0.05, 6.0))
    for mat in (forms.A, forms.M, forms.P, forms.D):
        assert abs(mat - mat.T).max() == 0.0


@given(st.integers(0, 2 ** 31))
def test_bilinear_symmetry(seed):
    rng = np.random.default_rng(seed)
    forms = assemble(build_mesh(figure_one_graph(), 0.1, 3.0))
    K = forms.K
    f, g = rng.standard_normal((2, K.shape[0]))
    assert f @ (K @ g) == pytest.approx(g @ (K @ f), rel=1e-12, abs=1e-12)


def _gradient_graph():
    return star(3, alpha=-1.0, potentials=[Potential.sech2_well(0.5, 1.0, 1.0), None, None])


@given(st.integers(0, 2 ** 31), st.sampled_from([0.5, 1.0, 1.7, 2.0]))
def test_gradient_matches_finite_differences(seed, mu):
    rng = np.random.default_rng(seed)
    mesh = build_mesh(_gradient_graph(), 0.1, 3.0)
    forms = assemble(mesh)
    v = sample(mesh, lambda e, x: np.exp(-x)).values + 0.1 * rng.standard_normal(mesh.n_nodes)
    d = rng.standard_normal(mesh.n_nodes)
    grad = energy_gradient(v, forms, mu)
    eps = 1e-6
    fd = (energy(v + eps * d, forms, mu) - energy(v - eps * d, forms, mu)) / (2 * eps)
    assert grad @ d == pytest.approx(fd, rel=1e-6, abs=1e-9)


@given(st.integers(0, 2 ** 31))
def test_nonlinearity_lowers_energy(seed):
    rng = np.random.default_rng(seed)
    forms = assemble(build_mesh(figure_one_graph(), 0.1, 3.0))
    v = rng.standard_normal(forms.K.shape[0])
    assert energy(v, forms, 1.0) < energy_lin(v, forms)


def test_phase_invariance(star_delta):
    _, mesh, forms = star_delta
    f = sample(mesh, lambda e, x: np.exp(-x / 3) * (1 + 0.1 * np.cos(x)))
    base = energy(f, forms, 1.0)
    for theta in (0.3, 1.0, 2.5):
        assert energy(f * np.exp(1j * theta), forms, 1.0) == pytest.approx(base, abs=1e-12)


def _flip(g, ids):
    return g.with_edges([e.flipped() if e.id in ids else e for e in g.edges])


def test_orientation_invariance():
    g = figure_one_graph()
    g = g.with_edges([Edge(e.id, e.start, e.end, e.length,
                           Potential.gaussian_well(0.8, 0.2, e.length / 3) if not e.external and not e.is_loop else e.potential)
                      for e in g.edges])
    flipped = _flip(g, {e.id for e in g.internal_edges})
    vals = {v.id: 0.3 + 0.1 * k for k, v in enumerate(g.vertices)}

    def func_for(graph):
        def func(e, x):
            orig = g.edge(e.id)
            s = x if (e.start == orig.start) else orig.length - x
            va, vb = vals[orig.start], vals[orig.end] if orig.end else 0.0
            if orig.external:
                return va * np.exp(-x)
            t = s / orig.length
            return va * (1 - t) + vb * t + 0.2 * np.sin(math.pi * t)
        return func

    out = []
    for graph in (g, flipped):
        mesh = build_mesh(graph, 0.05, 4.0)
        forms = assemble(mesh)
        f = sample(mesh, func_for(graph))
        out.append((energy_lin(f, forms), energy(f, forms, 1.3), f.mass))
    for a, b in zip(*out):
        assert a == pytest.approx(b, abs=1e-12)


def test_triplet_export(tmp_path):
    forms = assemble(build_mesh(star(3), 0.5, 5.0))
    path = tmp_path / "K.txt"
    export_triplets(forms.K, path)
    lines = path.read_text().splitlines()
    n, m, nnz = (int(t) for t in lines[0][1:].split())
    assert (n, m) == forms.K.shape and nnz == len(lines) - 1
