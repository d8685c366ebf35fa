"""Ground states by normalized gradient flow on the mass sphere.

Each run starts from one seed and iterates a linearly implicit, preconditioned
gradient step followed by renormalization to the prescribed mass.  Several seeds
are tried and the lowest energy wins.  Runs that do not settle into a bound
state are labelled by the signature they leave: mass escaping along an
external edge (``RUNAWAY``), mass spreading out (``VANISHING``) or, for the
critical power, collapse onto the grid scale (``BLOWUP``).
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.sparse.linalg import splu

from . import diagnostics as diag
from .graph import GraphError, GraphPoint, MetricGraph, validate
from .mesh import (GraphFunction, Mesh, _vals, build_mesh, distances_from,
                   distances_from_vertex, edge_centroids, edge_masses)
from .operators import (AssembledForms, assemble, energy, multiplier,
                        nonlinear_force, stationary_residual)
from .soliton import gamma_mu, mass_threshold, soliton, soliton_profile, t_mu
from .spectral import EigenSolverError, ground_eigenpair

STATUSES = ("CONVERGED", "RUNAWAY", "VANISHING", "MAXITER", "BLOWUP")
SEED_KINDS = ("eigen", "soliton", "bump")


@dataclass
class SolverConfig:
    """Numerical parameters of :func:`solve_ground_state`.

    ``dt`` is the initial step; it doubles after ``grow_after`` accepted steps
    up to ``dt_max`` and halves whenever a step would raise the energy.
    A run stops when the stationarity residual drops below ``tol_residual``,
    or when the relative energy decrease stays below ``tol_energy`` for
    ``patience`` consecutive steps at the largest step size.
    """

    h: float = 0.01
    L: float = 40.0
    dt: float = 1.0
    dt_max: float = 1e4
    max_iter: int = 4000
    tol_energy: float = 1e-12
    tol_residual: float = 1e-8
    seeds: tuple = SEED_KINDS
    blowup_cap: float = -1e6
    grow_after: int = 5
    patience: int = 100
    tie_tol: float = 1e-6
    certificate: bool = True
    gn_inflation: float = 1.5
    workers: int | None = None

    def check(self) -> None:
        if not (self.h > 0 and self.L > 0):
            raise ValueError("mesh parameters h and L must be positive")
        if self.L < 10 * self.h:
            raise ValueError(f"truncation L={self.L} must be at least 10*h")
        if not (self.dt > 0 and self.dt_max >= self.dt):
            raise ValueError("need 0 < dt <= dt_max")
        if not (self.tol_energy > 0 and self.tol_residual > 0 and self.tie_tol > 0):
            raise ValueError("tolerances must be positive")
        if int(self.max_iter) < 1 or int(self.patience) < 1 or int(self.grow_after) < 1:
            raise ValueError("max_iter, patience and grow_after must be positive integers")
        if not self.blowup_cap < 0:
            raise ValueError("blowup_cap must be negative")
        if not self.gn_inflation >= 1:
            raise ValueError("gn_inflation must be at least 1")
        unknown = [s for s in self.seeds if s not in SEED_KINDS]
        if unknown or not self.seeds:
            raise ValueError(f"seeds must be a nonempty subset of {SEED_KINDS}, got {list(self.seeds)}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["seeds"] = list(self.seeds)
        return d


@dataclass(eq=False)
class RunSummary:
    seed: str
    status: str
    energy: float
    residual: float
    iterations: int
    converged: bool

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(eq=False)
class GroundStateReport:
    status: str
    energy: float
    omega: float
    profile: GraphFunction | None
    residual: float
    iterations: int
    diagnostics: diag.DiagnosticsRecord | None
    mass: float = math.nan
    mu: float = math.nan
    seed: str = ""
    thresholds: dict = field(default_factory=dict)
    runs: list = field(default_factory=list)
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "energy": self.energy,
            "omega": self.omega,
            "residual": self.residual,
            "iterations": self.iterations,
            "mass": self.mass,
            "mu": self.mu,
            "seed": self.seed,
            "thresholds": self.thresholds,
            "diagnostics": None if self.diagnostics is None else self.diagnostics.to_dict(),
            "runs": [r.to_dict() for r in self.runs],
            "error": self.error,
        }


# ------------------------------------------------------------------ flow step


def _mass(forms: AssembledForms, v: np.ndarray) -> float:
    return float(np.real(np.vdot(v, forms.M @ v)))


def _normalize(forms: AssembledForms, v: np.ndarray, m: float) -> np.ndarray:
    mass = _mass(forms, v)
    if not mass > 0:
        raise FloatingPointError("flow produced the zero function")
    return v * math.sqrt(m / mass)


class _Stepper:
    """Holds the factorization of ``M + dt (K + shift M)`` for the current ``dt``."""

    def __init__(self, forms: AssembledForms, m: float, mu: float, shift: float):
        self.forms, self.m, self.mu, self.shift = forms, m, mu, shift
        self.dt = None
        self.lu = None

    def factor(self, dt: float) -> None:
        f = self.forms
        mat = f.M_free + dt * (f.K_free + self.shift * f.M_free)
        try:
            self.lu = splu(mat.tocsc())
        except RuntimeError as exc:
            raise np.linalg.LinAlgError(f"flow matrix is singular at dt={dt}: {exc}") from exc
        self.dt = dt

    def step(self, v: np.ndarray, dt: float) -> np.ndarray:
        if dt != self.dt:
            self.factor(dt)
        f = self.forms
        idx = f.free_index
        lam = -multiplier(v, f, self.mu)
        Mv = f.M @ v
        rhs = Mv + dt * (nonlinear_force(v, f, self.mu) + (lam + self.shift) * Mv)
        rhs = rhs[idx]
        if np.iscomplexobj(rhs):
            sol = self.lu.solve(rhs.real) + 1j * self.lu.solve(rhs.imag)
        else:
            sol = self.lu.solve(rhs)
        u = np.zeros_like(v, dtype=sol.dtype)
        u[idx] = sol
        return _normalize(f, u, self.m)


def default_shift(forms: AssembledForms, lam_min: float | None = None) -> float:
    """Shift making ``K + shift M`` positive definite with a small margin."""
    if lam_min is None:
        lam_min = ground_eigenpair(forms).value
    return max(0.0, -lam_min) + 0.05


def flow_step(f, forms: AssembledForms, m: float, mu: float, dt: float, shift: float | None = None) -> GraphFunction:
    """One normalized gradient-flow step.

    Solves ``(M + dt (K + s M)) u = M f + dt (N(f) + (lambda_f + s) M f)`` with
    ``N`` the lumped nonlinear load and ``lambda_f`` the Rayleigh multiplier,
    then rescales ``u`` to mass ``m``.  Discrete stationary states are fixed
    points for every ``dt``.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if shift is None:
        shift = default_shift(forms)
    v = _vals(f)
    st = _Stepper(forms, m, mu, shift)
    return GraphFunction(forms.mesh, st.step(np.asarray(v), dt))


# ------------------------------------------------------------------- seeds


def _rescaled(forms: AssembledForms, vals: np.ndarray, m: float) -> np.ndarray:
    vals = np.asarray(vals, dtype=float).copy()
    vals[forms.mesh.truncated] = 0.0
    return _normalize(forms, vals, m)


def _seed_functions(problem: "_Problem", m: float, mu: float, kinds) -> list[tuple[str, np.ndarray]]:
    mesh, forms, g = problem.mesh, problem.forms, problem.graph
    seeds = []
    if "eigen" in kinds and problem.eig is not None:
        seeds.append(("eigen", _rescaled(forms, np.abs(problem.eig.vector.values), m)))
    if "soliton" in kinds:
        if mu == 2:
            prof = lambda d: soliton_profile(d, 1.0, 2.0)
        else:
            sol = soliton(m, mu)
            prof = sol
        for e in g.edges:
            ell = mesh.L if e.external else e.length
            d = distances_from(mesh, GraphPoint(e.id, ell / 2))
            seeds.append((f"soliton:{e.id}", _rescaled(forms, prof(d), m)))
    if "bump" in kinds:
        for vtx in g.vertices:
            if vtx.alpha < 0:
                d = distances_from_vertex(mesh, vtx.id)
                seeds.append((f"bump:{vtx.id}", _rescaled(forms, np.exp(-(d / 2.0) ** 4), m)))
    return seeds


# --------------------------------------------------------------- single run


@dataclass(eq=False)
class _Run:
    seed: str
    values: np.ndarray
    energy: float
    residual: float
    iterations: int
    converged: bool
    blowup: bool
    snapshots: list
    status: str = "MAXITER"


def _run_flow(problem: "_Problem", seed: str, v0: np.ndarray, m: float, mu: float, cfg: SolverConfig) -> _Run:
    forms = problem.forms
    mesh = forms.mesh
    shift = problem.shift
    st = _Stepper(forms, m, mu, shift)
    v = v0
    E = energy(v, forms, mu)
    dt = cfg.dt
    dt_cap = cfg.dt_max
    accepted_streak = 0
    quiet = 0
    snaps, every = [], 1
    amp_cap = m / (4.0 * mesh.h)
    res = math.inf
    converged = blowup = False
    it = 0
    while it < cfg.max_iter:
        it += 1
        try:
            u = st.step(v, dt)
        except (FloatingPointError, np.linalg.LinAlgError):
            dt *= 0.5
            dt_cap = dt
            accepted_streak = 0
            if dt < 1e-14:
                break
            continue
        Eu = energy(u, forms, mu)
        if not math.isfinite(Eu) or Eu > E + 1e-10 * max(1.0, abs(E)):
            # a rejected step size is never tried again in this run
            dt *= 0.5
            dt_cap = dt
            accepted_streak = 0
            if dt < 1e-14:
                break
            continue
        dE = E - Eu
        v, E = u, Eu
        if it % every == 0:
            snaps.append(v)
            if len(snaps) > 64:
                snaps = snaps[1::2]
                every *= 2
        if mu == 2 and (E < cfg.blowup_cap or float(np.max(np.abs(v))) ** 2 >= amp_cap):
            blowup = True
            break
        omega = multiplier(v, forms, mu)
        res = stationary_residual(v, forms, omega, mu)
        if res <= cfg.tol_residual:
            converged = True
            break
        accepted_streak += 1
        if accepted_streak >= cfg.grow_after and dt < dt_cap:
            dt = min(2 * dt, dt_cap)
            accepted_streak = 0
        if dt >= dt_cap and dE <= cfg.tol_energy * max(1.0, abs(E)):
            quiet += 1
            if quiet >= cfg.patience:
                break
        else:
            quiet = 0
    if not snaps or snaps[-1] is not v:
        snaps.append(v)
    if not math.isfinite(res):
        res = stationary_residual(v, forms, multiplier(v, forms, mu), mu)
    return _Run(seed, v, E, res, it, converged, blowup, snaps)


def _runaway_static(run: _Run, problem: "_Problem", m: float, mu: float) -> bool:
    """Nearly all mass sits far out on one external edge and the energy does not beat the line."""
    mesh = problem.mesh
    ext = problem.ext_index
    if not ext or mu == 2:
        return False
    f = GraphFunction(mesh, run.values)
    masses = edge_masses(f)
    cents = edge_centroids(f)
    k = max(ext, key=lambda i: masses[i])
    if not (masses[k] >= 0.9 * m and cents[k] >= mesh.L / 4):
        return False
    return bool(run.energy >= problem.line_energy(m, mu) - 1e-9 * max(1.0, abs(run.energy)))


def _runaway_dynamic(run: _Run, problem: "_Problem", m: float) -> bool:
    """Centroid on one external edge increasing over the tail with everything else negligible."""
    mesh = problem.mesh
    ext = problem.ext_index
    tail = run.snapshots[len(run.snapshots) - max(3, len(run.snapshots) // 4):]
    if not ext or len(tail) < 3:
        return False
    nv = len(mesh.graph.vertices)
    last = GraphFunction(mesh, tail[-1])
    masses = edge_masses(last)
    k = max(ext, key=lambda i: masses[i])
    cents = [edge_centroids(GraphFunction(mesh, s))[k] for s in tail]
    if np.any(np.diff(cents) < 0):
        return False
    for s in tail[-1:]:
        if np.any(np.abs(s[:nv]) ** 2 >= 1e-4 * m):
            return False
    others = np.delete(masses, k)
    return bool(np.all(others < 1e-4 * m))


def _vanishing(run: _Run, problem: "_Problem", m: float) -> bool:
    return bool(run.energy >= -1e-6 and float(np.max(np.abs(run.values))) <= 2.0 * math.sqrt(m / problem.mesh.L))


def _classify_run(run: _Run, problem: "_Problem", m: float, mu: float) -> str:
    if run.blowup:
        return "BLOWUP"
    if _runaway_static(run, problem, m, mu):
        return "RUNAWAY"
    if _vanishing(run, problem, m):
        return "VANISHING"
    if run.converged:
        return "CONVERGED"
    if _runaway_dynamic(run, problem, m):
        return "RUNAWAY"
    return "MAXITER"


def _select(runs: list[_Run], tie_tol: float) -> _Run:
    """Lowest energy; near-ties prefer a converged flow, then a bound state, then the smallest residual."""
    best = min(r.energy for r in runs)
    close = [(i, r) for i, r in enumerate(runs) if r.energy <= best + tie_tol]
    return min(close, key=lambda ir: (not ir[1].converged, ir[1].status != "CONVERGED", ir[1].residual, ir[0]))[1]


# ---------------------------------------------------------------- problem


class _Problem:
    """Mesh, forms and linear data shared by every run on one graph."""

    def __init__(self, g: MetricGraph, cfg: SolverConfig):
        issues = validate(g)
        if issues:
            raise GraphError("invalid graph: " + "; ".join(issues))
        cfg.check()
        self.graph = g
        self.cfg = cfg
        self.mesh: Mesh = build_mesh(g, cfg.h, cfg.L)
        self.forms = assemble(self.mesh)
        try:
            self.eig = ground_eigenpair(self.forms)
            lam = self.eig.value
        except EigenSolverError:
            self.eig = None
            alphas, (w1, winf) = diag.graph_negative_data(g)
            lam = -(sum(max(-a, 0.0) for a in alphas) + w1) ** 2 - winf
        self.E0 = None if self.eig is None else self.eig.E0
        self.shift = default_shift(self.forms, lam)
        self.ext_index = [k for k, gr in enumerate(self.mesh.grids) if gr.edge.external]
        self._gn = {}
        self._line = {}

    def line_energy(self, m: float, mu: float) -> float:
        """Discrete minimum on the truncated line with the same ``h`` and ``L``.

        This is ``-t_mu(m)`` up to the discretization error, and is the
        level a soliton escaping along an external edge settles at.
        """
        key = (m, mu)
        if key not in self._line:
            from .graph import line
            ref = object.__new__(_Problem)
            ref.mesh = build_mesh(line(), self.cfg.h, self.cfg.L)
            ref.forms = assemble(ref.mesh)
            ref.shift = 0.05
            sol = soliton(m, mu)
            d = distances_from_vertex(ref.mesh, "v")
            run = _run_flow(ref, "line", _rescaled(ref.forms, sol(d), m), m, mu, self.cfg)
            self._line[key] = run.energy
        return self._line[key]

    def gn(self, p: float) -> float:
        if p not in self._gn:
            self._gn[p] = diag.gn_constant_lower_bound(self.graph, p, 2.0, L=min(self.cfg.L, 40.0))
        return self._gn[p]


def thresholds(problem: _Problem, m: float, mu: float) -> dict:
    """Linear and line benchmarks for one mass: ``E0``, ``gamma_mu``, ``t_mu(m)``, ``m*``."""
    E0 = problem.E0
    out = {"E0": E0, "gamma_mu": None, "t_mu": t_mu(m, mu), "m_star": None}
    if mu < 2:
        out["gamma_mu"] = gamma_mu(mu)
        if E0 is not None and E0 > 0:
            out["m_star"] = mass_threshold(mu, E0=E0)
    else:
        k62 = problem.gn(6.0)
        out["K62_estimate"] = k62
        out["m_star"] = mass_threshold(2, K62_graph=k62)
    return out


def _bound_checks(problem: _Problem, run: _Run, m: float, mu: float, thr: dict) -> dict:
    E = run.energy
    checks = {}
    E0 = problem.E0
    if E0 is not None and E0 > 0:
        margin = -m * E0 - E
        checks["upper_ok"] = {"ok": bool(margin >= -1e-6), "margin": margin}
    else:
        checks["upper_ok"] = {"ok": None, "margin": None}
    if mu < 2 and thr["m_star"] is not None and m < thr["m_star"]:
        margin = -thr["t_mu"] - E
        checks["sufficient_ok"] = {"ok": bool(margin > -1e-6), "margin": margin}
    else:
        checks["sufficient_ok"] = {"ok": None, "margin": None}
    if problem.cfg.certificate:
        infl = problem.cfg.gn_inflation
        alphas, wn = diag.graph_negative_data(problem.graph)
        beta = diag.lower_bound_certificate(mu, m, infl * problem.gn(2 * mu + 2), infl * problem.gn(math.inf), alphas, wn)
        margin = E + beta
        checks["lower_ok"] = {"ok": bool(margin >= -1e-6), "margin": margin if math.isfinite(beta) else None,
                              "beta": beta if math.isfinite(beta) else "UNBOUNDED", "gn_inflation": infl}
    else:
        checks["lower_ok"] = {"ok": None, "margin": None}
    return checks


def _rho_grid(mesh: Mesh) -> np.ndarray:
    D = mesh.graph.vertex_distances
    diam = float(np.max(D[np.isfinite(D)])) if D.size else 0.0
    ts = [t for t in (0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0) if t < diam + 2 * mesh.L]
    return np.array(ts + [diam + 2 * mesh.L])


def _solve(problem: _Problem, m: float, mu: float, extra_seeds=()) -> GroundStateReport:
    if not m > 0:
        raise ValueError(f"mass must be positive, got {m}")
    if not 0 < mu <= 2:
        raise ValueError(f"mu must lie in (0, 2], got {mu}")
    cfg = problem.cfg
    seeds = _seed_functions(problem, m, mu, cfg.seeds) + list(extra_seeds)
    if not seeds:
        raise ValueError("no seed applies to this graph")
    workers = _workers(cfg)
    if workers > 1 and len(seeds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(lambda s: _run_flow(problem, s[0], s[1], m, mu, cfg), seeds))
    else:
        runs = [_run_flow(problem, s, v, m, mu, cfg) for s, v in seeds]
    for r in runs:
        r.status = _classify_run(r, problem, m, mu)
    best = _select(runs, cfg.tie_tol)
    forms = problem.forms
    omega = multiplier(best.values, forms, mu)
    profile = GraphFunction(problem.mesh, best.values)
    thr = thresholds(problem, m, mu)
    seq = [GraphFunction(problem.mesh, s) for s in best.snapshots]
    ts = _rho_grid(problem.mesh)
    tau = min(diag.concentrated_mass(seq, ts), m)
    record = diag.DiagnosticsRecord(ts, diag.rho_curve(profile, ts), tau,
                                    diag.classify(tau, m, best.status),
                                    _bound_checks(problem, best, m, mu, thr))
    summaries = [RunSummary(r.seed, r.status, r.energy, r.residual, r.iterations, r.converged) for r in runs]
    return GroundStateReport(best.status, best.energy, omega, profile, best.residual, best.iterations,
                             record, float(m), float(mu), best.seed, thr, summaries)


def _workers(cfg: SolverConfig) -> int:
    if cfg.workers is not None:
        return max(1, int(cfg.workers))
    env = os.environ.get("GRAPHNLS_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValueError(f"GRAPHNLS_THREADS must be an integer, got {env!r}") from None
    return 1


def solve_ground_state(g: MetricGraph, m: float, mu: float, cfg: SolverConfig | None = None) -> GroundStateReport:
    """Lowest-energy state of mass ``m`` found by the flow from every seed.

    Seeds: the ground eigenvector of the linear form, a soliton planted at the
    midpoint of each edge, a flat bump at each attractive vertex.

    >>> from graphnls.graph import line
    >>> rep = solve_ground_state(line(), 2.0, 1.0, SolverConfig(h=0.05))
    >>> rep.status, round(rep.energy, 3), round(rep.omega, 3)
    ('CONVERGED', -0.167, 0.25)
    """
    cfg = cfg or SolverConfig()
    if not m > 0:
        raise ValueError(f"mass must be positive, got {m}")
    return _solve(_Problem(g, cfg), m, mu)


def mass_sweep(g: MetricGraph, mu: float, masses, cfg: SolverConfig | None = None) -> list[GroundStateReport]:
    """Solve for ascending ``masses``, seeding each solve with the previous converged profile.

    A failing mass yields a report with status ``ERROR`` and the message; the
    sweep continues.
    """
    cfg = cfg or SolverConfig()
    masses = [float(x) for x in masses]
    if any(b < a for a, b in zip(masses, masses[1:])):
        raise ValueError("masses must be sorted ascending")
    problem = _Problem(g, cfg)
    out = []
    prev = None
    for m in masses:
        extra = []
        if prev is not None:
            extra.append(("continuation", prev.profile.values * math.sqrt(m / prev.mass)))
        try:
            rep = _solve(problem, m, mu, extra)
        except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
            rep = GroundStateReport("ERROR", math.nan, math.nan, None, math.nan, 0, None,
                                    m, float(mu), error=str(exc))
        out.append(rep)
        if rep.status == "CONVERGED":
            prev = rep
    return out


def config_hash(payload: dict) -> str:
    return hashlib.sha256(json.dumps(payload, sort_keys=True, default=str).encode()).hexdigest()
