"""Normalized gradient flow, seeding, outcome labels and mass continuation."""

import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from graphnls import diagnostics as diag
from graphnls.graph import GraphError, MetricGraph, Edge, Vertex, line, star, tadpole
from graphnls.mesh import GraphFunction, build_mesh, sample
from graphnls.operators import assemble, energy
from graphnls.solver import (SolverConfig, default_shift, flow_step, mass_sweep,
                             solve_ground_state)
from graphnls.soliton import soliton
from graphnls.spectral import ground_eigenpair

COARSE = SolverConfig(h=0.05, L=20.0)


@pytest.fixture(scope="module")
def coarse_star():
    g = star(3, alpha=-1.0)
    mesh = build_mesh(g, 0.05, 20.0)
    forms = assemble(mesh)
    return g, mesh, forms, default_shift(forms)


def _on_sphere(forms, v, m):
    v = np.asarray(v, dtype=float).copy()
    v[forms.mesh.truncated] = 0.0
    return GraphFunction(forms.mesh, v * math.sqrt(m / (v @ (forms.M @ v))))


def test_stationary_state_is_fixed_point(coarse_star):
    g, mesh, forms, shift = coarse_star
    cfg = dataclasses.replace(COARSE, tol_residual=1e-12, seeds=("eigen",))
    rep = solve_ground_state(g, 1.0, 1.0, cfg)
    assert rep.status == "CONVERGED"
    for dt in (0.1, 1.0, 100.0):
        out = flow_step(rep.profile, forms, 1.0, 1.0, dt, shift=shift)
        assert np.max(np.abs(out.values - rep.profile.values)) <= 1e-10


def test_step_from_eigenvector_descends(coarse_star):
    _, mesh, forms, shift = coarse_star
    f = _on_sphere(forms, ground_eigenpair(forms).vector.values, 1.0)
    out = flow_step(f, forms, 1.0, 1.0, 0.5, shift=shift)
    assert energy(out, forms, 1.0) < energy(f, forms, 1.0)


def test_noisy_soliton_moves_toward_minimum(line_fine, rng):
    mesh, forms = line_fine
    s = soliton(2.0, 1.0)
    clean = sample(mesh, lambda e, x: s(x)).values
    f = _on_sphere(forms, clean * (1 + 0.01 * rng.standard_normal(mesh.n_nodes)), 2.0)
    out = flow_step(f, forms, 2.0, 1.0, 0.5, shift=0.05)
    assert abs(energy(out, forms, 1.0) + 1 / 6) < abs(energy(f, forms, 1.0) + 1 / 6)


def test_flow_step_rejects_dt(coarse_star):
    _, mesh, forms, shift = coarse_star
    with pytest.raises(ValueError):
        flow_step(GraphFunction(mesh, np.ones(mesh.n_nodes)), forms, 1.0, 1.0, 0.0)


@settings(max_examples=20)
@given(st.integers(0, 2 ** 31), st.floats(0.2, 3.0), st.sampled_from([0.5, 1.0, 2.0]))
def test_mass_projection(seed, m, mu):
    forms = assemble(build_mesh(tadpole(alpha=-0.5), 0.1, 10.0))
    rng = np.random.default_rng(seed)
    f = _on_sphere(forms, rng.random(forms.mesh.n_nodes), m)
    out = flow_step(f, forms, m, mu, 0.1, shift=1.0)
    assert out.values @ (forms.M @ out.values) == pytest.approx(m, abs=1e-10)


@settings(max_examples=10)
@given(st.integers(0, 2 ** 31), st.floats(0.5, 2.5), st.sampled_from([0.01, 0.05, 0.2]))
def test_energy_monotone_along_flow(seed, m, dt):
    forms = assemble(build_mesh(star(3, alpha=-1.0), 0.05, 15.0))
    rng = np.random.default_rng(seed)
    x = rng.random(forms.mesh.n_nodes)
    f = _on_sphere(forms, np.convolve(x, np.ones(9) / 9, mode="same"), m)
    E = energy(f, forms, 1.0)
    for _ in range(25):
        f = flow_step(f, forms, m, 1.0, dt, shift=0.2)
        E_new = energy(f, forms, 1.0)
        assert E_new <= E + 1e-10
        E = E_new


def test_line_solve_coarse():
    rep = solve_ground_state(line(), 2.0, 1.0, COARSE)
    assert rep.status == "CONVERGED"
    assert rep.energy == pytest.approx(-1 / 6, abs=1e-3)
    assert rep.omega == pytest.approx(0.25, abs=1e-3)
    assert rep.profile.values @ (assemble(rep.profile.mesh).M @ rep.profile.values) == pytest.approx(2.0, abs=1e-10)
    assert rep.residual <= COARSE.tol_residual


def test_kirchhoff_star_runaway():
    rep = solve_ground_state(star(3), 1.0, 1.0, COARSE)
    assert rep.status == "RUNAWAY"
    assert rep.diagnostics.classification == "RUNAWAY"


def test_delta_star_below_threshold():
    rep = solve_ground_state(star(3, alpha=-1.0), 1.0, 1.0, COARSE)
    assert rep.status == "CONVERGED"
    E0 = rep.thresholds["E0"]
    assert rep.energy <= -E0 + 1e-6
    x0, v0 = rep.profile.on_edge("e0")
    for eid in ("e1", "e2"):
        assert np.max(np.abs(rep.profile.on_edge(eid)[1] - v0)) <= 1e-6
    checks = rep.diagnostics.bound_checks
    assert checks["upper_ok"]["ok"] and checks["sufficient_ok"]["ok"] and checks["lower_ok"]["ok"]
    assert rep.diagnostics.classification == "COMPACT"


def test_phase_invariance_of_converged_profile():
    rep = solve_ground_state(star(3, alpha=-1.0), 1.0, 1.0, COARSE)
    forms = assemble(rep.profile.mesh)
    for theta in (0.7, 2.0):
        assert energy(rep.profile * np.exp(1j * theta), forms, 1.0) == pytest.approx(rep.energy, abs=1e-12)


def test_report_fields():
    rep = solve_ground_state(star(3, alpha=-1.0), 0.5, 1.0, COARSE)
    d = rep.to_dict()
    assert set(d["thresholds"]) >= {"E0", "gamma_mu", "t_mu", "m_star"}
    assert d["status"] in ("CONVERGED", "RUNAWAY", "VANISHING", "MAXITER", "BLOWUP")
    assert 0 <= d["diagnostics"]["tau_estimate"] <= 0.5 + 1e-10
    rho = d["diagnostics"]["rho_curve"]["rho"]
    assert all(b >= a - 1e-12 for a, b in zip(rho, rho[1:]))
    assert len(d["runs"]) == 5  # eigen, three edge solitons, one vertex bump


def test_sweep_line_energies():
    reps = mass_sweep(line(), 1.0, [1.0, 2.0, 3.0], COARSE)
    assert [r.status for r in reps] == ["CONVERGED"] * 3
    for r, m in zip(reps, (1.0, 2.0, 3.0)):
        assert r.energy == pytest.approx(-m ** 3 / 48, abs=1e-3)
    assert any(run.seed == "continuation" for run in reps[1].runs)


def test_sweep_across_threshold():
    reps = mass_sweep(star(3, alpha=-1.0), 1.0, [1.5, 2.0, 2.6], COARSE)
    assert reps[0].status == "CONVERGED" and reps[1].status == "CONVERGED"
    assert reps[2].status in ("CONVERGED", "RUNAWAY", "VANISHING", "MAXITER")


def test_sweep_requires_ascending():
    with pytest.raises(ValueError):
        mass_sweep(line(), 1.0, [2.0, 1.0], COARSE)


def test_sweep_continues_after_error():
    reps = mass_sweep(line(), 1.0, [-1.0, 1.0], COARSE)
    assert reps[0].status == "ERROR" and reps[0].error
    assert reps[1].status == "CONVERGED"


def test_critical_power_outcomes():
    cfg = dataclasses.replace(COARSE, L=40.0)
    low = solve_ground_state(line(), 2.5, 2.0, cfg)
    assert low.status in ("VANISHING", "RUNAWAY") and low.energy >= -1e-2
    high = solve_ground_state(line(), 3.0, 2.0, cfg)
    assert high.status == "BLOWUP"


@pytest.mark.parametrize("m", [0.0, -1.0])
def test_rejects_mass(m):
    with pytest.raises(ValueError):
        solve_ground_state(line(), m, 1.0, COARSE)


def test_rejects_invalid_graph():
    g = MetricGraph((Vertex("a"), Vertex("b")), (Edge("s", "a", "b", 1.0),))
    with pytest.raises(GraphError):
        solve_ground_state(g, 1.0, 1.0, COARSE)


@pytest.mark.parametrize("change", [{"dt": 0.0}, {"tol_residual": -1.0}, {"tol_energy": 0.0},
                                    {"L": 0.1}, {"seeds": ("moon",)}, {"blowup_cap": 1.0},
                                    {"max_iter": 0}])
def test_rejects_config(change):
    with pytest.raises(ValueError):
        solve_ground_state(line(), 1.0, 1.0, dataclasses.replace(COARSE, **change))


def test_threads_do_not_change_result(monkeypatch):
    a = solve_ground_state(star(3, alpha=-1.0), 1.0, 1.0, dataclasses.replace(COARSE, workers=1))
    monkeypatch.setenv("GRAPHNLS_THREADS", "3")
    b = solve_ground_state(star(3, alpha=-1.0), 1.0, 1.0, COARSE)
    assert a.energy == b.energy and a.seed == b.seed
    assert np.array_equal(a.profile.values, b.profile.values)


def test_doctests():
    import doctest
    import graphnls.mesh
    import graphnls.soliton
    import graphnls.solver
    for mod in (graphnls.mesh, graphnls.soliton, graphnls.solver):
        assert doctest.testmod(mod).failed == 0


@pytest.mark.parametrize("g,m,mu", [
    (star(3, alpha=-1.0), 1.0, 1.0),
    (star(3, alpha=-1.0), 2.0, 0.5),
    (tadpole(alpha=-0.5), 1.0, 1.0),
    (line(), 2.0, 1.0),
    (line(), 0.5, 2.0),
], ids=["star-mu1", "star-mu0.5", "tadpole", "line", "line-critical"])
def test_certificate_floor_on_all_runs(g, m, mu):
    """Every seed's final energy stays above the floor built from inflated GN estimates."""
    rep = solve_ground_state(g, m, mu, COARSE)
    infl = COARSE.gn_inflation
    alphas, W = diag.graph_negative_data(g)
    K = infl * diag.gn_constant_lower_bound(g, 2 * mu + 2, 2)
    Kinf = infl * diag.gn_constant_lower_bound(g, math.inf, 2)
    beta = diag.lower_bound_certificate(mu, m, K, Kinf, alphas, W)
    assert all(run.energy >= -beta - 1e-6 for run in rep.runs)
    assert rep.diagnostics.bound_checks["lower_ok"]["ok"]
