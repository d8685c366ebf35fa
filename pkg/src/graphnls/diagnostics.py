"""Concentration diagnostics, Gagliardo-Nirenberg estimates and energy certificates."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import minimize, minimize_scalar

from .graph import GraphError, GraphPoint, MetricGraph
from .mesh import (_GAUSS_W, _GAUSS_X, GraphFunction, Mesh, _vals, build_mesh,
                   distances_from, kinetic, norm, sample)
from .operators import assemble, energy
from .soliton import soliton, soliton_profile

CLASSIFICATIONS = ("COMPACT", "RUNAWAY", "VANISHING", "DICHOTOMY-SUSPECT")


# ------------------------------------------------------- concentration function


def _cumulative(mesh: Mesh, v: np.ndarray):
    """Per edge: node coordinates, cumulative ``int_0^x |f|^2`` at nodes, nodal values."""
    out = []
    for gr in mesh.grids:
        fv = v[gr.nodes]
        fa, fb = fv[:-1], fv[1:]
        h = np.diff(gr.x)
        cell = h / 3.0 * (np.abs(fa) ** 2 + np.real(fa * np.conj(fb)) + np.abs(fb) ** 2)
        out.append((gr.x, np.concatenate([[0.0], np.cumsum(cell)]), fv))
    return out


def _cum_at(x, cum, fv, pts):
    """Exact ``int_0^pts |f|^2`` for the piecewise-linear interpolant."""
    pts = np.clip(pts, x[0], x[-1])
    j = np.clip(np.searchsorted(x, pts, side="right") - 1, 0, len(x) - 2)
    h = x[j + 1] - x[j]
    u = pts - x[j]
    fa = fv[j]
    d = fv[j + 1] - fa
    part = np.abs(fa) ** 2 * u + np.real(np.conj(fa) * d) * u ** 2 / h + np.abs(d) ** 2 * u ** 3 / (3 * h ** 2)
    return cum[j] + part


def concentration_function(f: GraphFunction, t: float) -> float:
    """Largest mass of ``f`` inside a ball ``B(y, t)``, over centers ``y`` at mesh nodes."""
    return float(np.max(_ball_masses(f, t)))


def _ball_masses(f: GraphFunction, t: float) -> np.ndarray:
    if not t > 0:
        raise ValueError(f"ball radius must be positive, got {t}")
    mesh = f.mesh
    g = mesh.graph
    v = _vals(f)
    node_edge, node_x = mesh.node_position
    D = g.vertex_distances
    # distance from every center node to every vertex
    n_v = len(g.vertices)
    dc = np.full((mesh.n_nodes, n_v), math.inf)
    for k, gr in enumerate(mesh.grids):
        sel = node_edge == k
        if not sel.any():
            continue
        s = node_x[sel]
        a = g.vertex_index[gr.edge.start]
        d = s[:, None] + D[a][None, :]
        if not gr.edge.external:
            b = g.vertex_index[gr.edge.end]
            d = np.minimum(d, (gr.edge.length - s)[:, None] + D[b][None, :])
        dc[sel] = d
    total = np.zeros(mesh.n_nodes)
    for k, (gr, (x, cum, fv)) in enumerate(zip(mesh.grids, _cumulative(mesh, v))):
        ell = x[-1]
        full = cum[-1]
        A = np.clip(t - dc[:, g.vertex_index[gr.edge.start]], 0.0, ell)
        if gr.edge.external:
            B = np.full(mesh.n_nodes, ell)
        else:
            B = np.clip(ell - (t - dc[:, g.vertex_index[gr.edge.end]]), 0.0, ell)
        covered = A >= B
        ends = np.where(covered, full, _cum_at(x, cum, fv, A) + full - _cum_at(x, cum, fv, B))
        own = node_edge == k
        if own.any():
            s = node_x[own]
            c = np.clip(s - t, 0.0, ell)
            d = np.clip(s + t, 0.0, ell)
            Ao, Bo = A[own], B[own]
            mid = _cum_at(x, cum, fv, d) - _cum_at(x, cum, fv, c)
            lo = np.minimum(d, Ao)
            ov1 = np.where(lo > c, _cum_at(x, cum, fv, lo) - _cum_at(x, cum, fv, c), 0.0)
            hi = np.maximum(c, Bo)
            ov2 = np.where(d > hi, _cum_at(x, cum, fv, d) - _cum_at(x, cum, fv, hi), 0.0)
            extra = np.where(covered[own], 0.0, mid - ov1 - ov2)
            ends[own] = ends[own] + np.maximum(extra, 0.0)
        total += ends
    return total


def rho_curve(f: GraphFunction, t_grid) -> np.ndarray:
    return np.array([concentration_function(f, t) for t in t_grid])


def concentrated_mass(sequence, t_grid) -> float:
    """Proxy for the concentrated mass: smallest ``rho(f_n, t_max)`` over the last quarter of ``sequence``."""
    seq = list(sequence)
    if not seq:
        raise ValueError("empty sequence")
    t_max = float(np.max(np.asarray(t_grid, dtype=float)))
    tail = seq[len(seq) - max(1, math.ceil(len(seq) / 4)):]
    return min(concentration_function(f, t_max) for f in tail)


# -------------------------------------------------- Gagliardo-Nirenberg ratios


def gn_exponent(p: float, q: float) -> float:
    if math.isinf(p):
        return 2.0 / (2.0 + q)
    return 2.0 / (2.0 + q) * (1.0 - q / p)


def gn_ratio(f: GraphFunction, p: float, q: float) -> float:
    """``||f||_p / (||f'||^a ||f||_q^(1-a))`` with ``a = 2/(2+q) (1 - q/p)``."""
    a = gn_exponent(p, q)
    return norm(f, p) / (kinetic(f) ** (a / 2) * norm(f, q) ** (1 - a))


@dataclass(eq=False)
class GNEstimate:
    value: float
    ratios: np.ndarray
    labels: list
    best: GraphFunction
    p: float
    q: float


def _gauss_interp(mesh: Mesh) -> tuple[sp.csr_matrix, np.ndarray]:
    c = mesh.cells
    ncell = len(c["h"])
    ng = len(_GAUSS_X)
    rows = np.arange(ncell * ng)
    B = sp.csr_matrix(
        (np.concatenate([np.repeat(1 - _GAUSS_X[None, :], ncell, 0).ravel(),
                         np.repeat(_GAUSS_X[None, :], ncell, 0).ravel()]),
         (np.concatenate([rows, rows]),
          np.concatenate([np.repeat(c["a"], ng), np.repeat(c["b"], ng)]))),
        shape=(ncell * ng, mesh.n_nodes))
    w = (c["h"][:, None] * _GAUSS_W[None, :]).ravel()
    return B, w


def _refine(f: GraphFunction, p: float, q: float, forms, maxiter: int) -> GraphFunction:
    """Local ascent of the log GN ratio over the free nodal values (real functions)."""
    mesh = f.mesh
    free = forms.free_index
    B, w = _gauss_interp(mesh)
    A = forms.A
    a = gn_exponent(p, q)
    ps = 32.0 if math.isinf(p) else p

    def power(v, r):
        z = B @ v
        val = w @ np.abs(z) ** r
        grad = B.T @ (w * r * np.abs(z) ** (r - 2) * z)
        return val, grad

    def obj(x):
        v = np.zeros(mesh.n_nodes)
        v[free] = x
        ip, gp = power(v, ps)
        iq, gq = power(v, q)
        kin = v @ (A @ v)
        gk = 2 * (A @ v)
        val = np.log(ip) / ps - a / 2 * np.log(kin) - (1 - a) / q * np.log(iq)
        grad = gp / (ps * ip) - a / 2 * gk / kin - (1 - a) / q * gq / iq
        return -val, -grad[free]

    x0 = np.real(f.values[free]).astype(float)
    x0 = x0 / np.max(np.abs(x0))
    res = minimize(obj, x0, jac=True, method="L-BFGS-B", options={"maxiter": maxiter})
    v = np.zeros(mesh.n_nodes)
    v[free] = res.x
    return GraphFunction(mesh, v)


def gn_estimate(g: MetricGraph, p: float, q: float, trials: int = 8, seed: int = 0,
                h: float = 0.05, L: float = 40.0, refine: int = 2, maxiter: int = 150) -> GNEstimate:
    """Sampled lower bound for the Gagliardo-Nirenberg constant ``K_{p,q}`` of ``g``.

    Trial functions are exact H^1 functions on the graph (piecewise linear,
    vanishing beyond the truncation), so every ratio is a true lower bound.
    Candidates: optimizer-shaped profiles planted at vertices and edge
    midpoints, the ground eigenvector, ``trials`` random bumps; the best
    ``refine`` of them are improved by local ascent.  Ties keep the lower index.
    """
    if not (q >= 2 and p >= q):
        raise ValueError(f"need p >= q >= 2, got p={p}, q={q}")
    if not g.external_edges:
        raise GraphError("the estimate needs at least one external edge")
    mesh = build_mesh(g, h, L)
    if p == q:
        f = sample(mesh, lambda e, x: np.exp(-x))
        return GNEstimate(1.0, np.array([1.0]), ["p == q"], f, p, q)
    forms = assemble(mesh)
    rng = np.random.default_rng(seed)

    if math.isinf(p):
        def shape(d, width):
            return np.exp(-d / width)
    else:
        mu_eff = (p - 2.0) / 2.0 if q == 2 else 1.0

        def shape(d, width):
            return soliton_profile(d / width, 1.0, mu_eff)

    def planted(point, width):
        d = distances_from(mesh, point)
        vals = shape(d, width)
        vals[mesh.truncated] = 0.0
        return GraphFunction(mesh, vals)

    points = []
    for vtx in g.vertices:
        e = next(e for e in g.edges if e.start == vtx.id or e.end == vtx.id)
        points.append((f"vertex {vtx.id}", GraphPoint(e.id, 0.0 if e.start == vtx.id else e.length)))
    for e in g.edges:
        ell = L if e.external else e.length
        points.append((f"mid {e.id}", GraphPoint(e.id, ell / 2)))

    cands: list[tuple[str, GraphFunction]] = []
    for label, pt in points:
        for width in (0.5, 1.0, 2.0, 4.0):
            cands.append((f"{label} w={width}", planted(pt, width)))
    try:
        from .spectral import ground_eigenpair
        cands.append(("eigenvector", ground_eigenpair(forms).vector))
    except Exception:  # eigen-solve failure only removes one candidate
        pass
    for k in range(trials):
        e = g.edges[rng.integers(len(g.edges))]
        ell = L if e.external else e.length
        pt = GraphPoint(e.id, float(rng.uniform(0, ell)))
        width = float(np.exp(rng.uniform(np.log(0.3), np.log(5.0))))
        cands.append((f"random {k}", planted(pt, width)))

    ratios = [gn_ratio(f, p, q) for _, f in cands]
    order = np.argsort(-np.asarray(ratios), kind="stable")
    for idx in order[:refine]:
        label, f = cands[idx]
        try:
            better = _refine(f, p, q, forms, maxiter)
        except (FloatingPointError, ValueError):
            continue
        cands.append((label + " +ascent", better))
        ratios.append(gn_ratio(better, p, q))
    ratios = np.asarray(ratios)
    best = int(np.argmax(ratios))
    return GNEstimate(float(ratios[best]), ratios, [c[0] for c in cands], cands[best][1], p, q)


def gn_constant_lower_bound(g: MetricGraph, p: float, q: float, trials: int = 8, seed: int = 0, **kw) -> float:
    return gn_estimate(g, p, q, trials=trials, seed=seed, **kw).value


# --------------------------------------------------- lower-bound certificate


def graph_negative_data(g: MetricGraph) -> tuple[list[float], tuple[float, float]]:
    """Couplings and ``(||W_{-,1}||_1, ||W_{-,inf}||_inf)`` with integrable wells put in the L^1 part."""
    alphas = [v.alpha for v in g.vertices]
    w1, winf = 0.0, 0.0
    for e in g.edges:
        l1, linf = e.potential.negative_part_norms(e.length)
        if math.isfinite(l1):
            w1 += l1
        else:
            winf = max(winf, linf)
    return alphas, (w1, winf)


@dataclass(frozen=True)
class Certificate:
    beta: float
    a: float
    b: float
    c: float


def certificate_terms(mu, m, K_2mu2, K_inf2, alphas, W_norms) -> Certificate:
    """Energy floor ``-beta`` for every mass-``m`` function, from upper bounds on GN constants.

    ``b`` uses ``K_inf2**2`` because ``|f(v)|^2 <= K_inf2^2 ||f'|| ||f||``.
    """
    if not 0 < mu <= 2:
        raise ValueError(f"mu must lie in (0, 2], got {mu}")
    if not (m > 0 and K_2mu2 > 0 and K_inf2 > 0):
        raise ValueError("mass and constants must be positive")
    w1, winf = W_norms
    a = K_2mu2 ** (2 * mu + 2) / (mu + 1)
    b = K_inf2 ** 2 * (sum(max(-al, 0.0) for al in alphas) + w1)
    c = winf
    if mu == 2:
        gap = 1.0 - a * m * m
        beta = math.inf if gap <= 0 else b * b * m / (4 * gap) + c * m
        return Certificate(beta, a, b, c)
    A = a * m ** ((2 + mu) / 2)
    Bc = b * math.sqrt(m)
    C = c * m

    def fn(x):
        return x * x - A * x ** mu - Bc * x - C

    X = 1.0
    while fn(X) <= 0 or 2 * X - A * mu * X ** (mu - 1) - Bc <= 0:
        X *= 2.0
    res = minimize_scalar(fn, bounds=(0.0, X), method="bounded", options={"xatol": 1e-13 * X})
    low = min(res.fun, fn(0.0))
    return Certificate(-low, a, b, c)


def lower_bound_certificate(mu, m, K_2mu2, K_inf2, alphas, W_norms) -> float:
    """``beta`` with ``E[f] >= -beta`` on the mass sphere; ``inf`` when no bound is available (``mu = 2``, ``a m^2 >= 1``)."""
    return certificate_terms(mu, m, K_2mu2, K_inf2, alphas, W_norms).beta


# ----------------------------------------------------------- runaway witness


def smooth_ramp(x):
    """Quintic ramp: 0 at 0, 1 beyond 1, C^2 in between."""
    s = np.clip(x, 0.0, 1.0)
    return s ** 3 * (10 - 15 * s + 6 * s * s)


def witness_functions(g: MetricGraph, mu: float, m: float, offsets, h: float = 0.01,
                      L: float | None = None, edge: str | None = None):
    sol = soliton(m, mu)
    offsets = [float(n) for n in offsets]
    reach = 20.0 / math.sqrt(sol.omega)
    if L is None:
        L = max(offsets) + reach + 1.0
    if max(offsets) + reach > L:
        raise ValueError(f"offsets up to {max(offsets)} exceed the truncation L={L}")
    if edge is None:
        ext = g.external_edges
        if not ext:
            raise GraphError("the witness needs an external edge")
        quiet = [e for e in ext if e.potential.is_zero]
        edge = (quiet or ext)[0].id
    elif not g.edge(edge).external:
        raise GraphError(f"edge {edge!r} is not external")
    mesh = build_mesh(g, h, L)
    fs = []
    for n in offsets:
        fs.append(sample(mesh, lambda e, x, n=n: smooth_ramp(x) * sol(x - n) if e.id == edge else 0.0 * x))
    return mesh, fs


def runaway_witness(g: MetricGraph, mu: float, m: float, offsets, h: float = 0.01,
                    L: float | None = None, edge: str | None = None) -> list[float]:
    """Energies of ramp-cut solitons pushed out along an external edge.

    For decaying potentials they approach the line value ``-t_mu(m)`` from above.
    """
    mesh, fs = witness_functions(g, mu, m, offsets, h=h, L=L, edge=edge)
    forms = assemble(mesh)
    return [energy(f, forms, mu) for f in fs]


# -------------------------------------------------------------------- record


@dataclass(eq=False)
class DiagnosticsRecord:
    rho_t: np.ndarray
    rho: np.ndarray
    tau_estimate: float
    classification: str
    bound_checks: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "rho_curve": {"t": self.rho_t.tolist(), "rho": self.rho.tolist()},
            "tau_estimate": self.tau_estimate,
            "classification": self.classification,
            "bound_checks": self.bound_checks,
        }


def classify(tau: float, m: float, status: str | None = None, compact_tol: float = 1e-2) -> str:
    """Map a solver status and the concentrated mass proxy to a label."""
    if status == "RUNAWAY":
        return "RUNAWAY"
    if status == "VANISHING":
        return "VANISHING"
    if tau >= (1 - compact_tol) * m:
        return "COMPACT"
    if tau <= compact_tol * m:
        return "VANISHING"
    return "DICHOTOMY-SUSPECT"


def write_rho_csv(t, rho, path) -> None:
    with open(path, "w") as fh:
        fh.write("t,rho\n")
        for a, b in zip(t, rho):
            fh.write(f"{a:.17g},{b:.17g}\n")
