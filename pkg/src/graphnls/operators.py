"""Sparse assembly of the quadratic form and the NLS energy on a mesh.

The vertex coupling enters only through the form (``alpha_v |f(v)|^2``), so the
derivative-jump condition at a vertex is the natural condition of the weak
problem and Kirchhoff (``alpha_v = 0``) needs no bookkeeping at all.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .mesh import GraphFunction, Mesh, _vals


@dataclass(frozen=True, eq=False)
class AssembledForms:
    """Stiffness ``A``, mass ``M``, potential ``P`` and vertex ``D`` matrices (CSR)."""

    mesh: Mesh
    A: sp.csr_matrix
    M: sp.csr_matrix
    P: sp.csr_matrix
    D: sp.csr_matrix

    @cached_property
    def K(self) -> sp.csr_matrix:
        """Matrix of the full quadratic form, ``A + P + D``."""
        return (self.A + self.P + self.D).tocsr()

    @property
    def free(self) -> np.ndarray:
        return self.mesh.free

    @cached_property
    def free_index(self) -> np.ndarray:
        return np.flatnonzero(self.mesh.free)

    def restrict(self, mat) -> sp.csc_matrix:
        idx = self.free_index
        return mat[idx][:, idx].tocsc()

    @cached_property
    def K_free(self) -> sp.csc_matrix:
        return self.restrict(self.K)

    @cached_property
    def M_free(self) -> sp.csc_matrix:
        return self.restrict(self.M)

    @cached_property
    def _mass_lu(self):
        return splu(self.M_free)

    def solve_mass(self, r: np.ndarray) -> np.ndarray:
        """``M^{-1} r`` on the free nodes."""
        if np.iscomplexobj(r):
            return self._mass_lu.solve(r.real) + 1j * self._mass_lu.solve(r.imag)
        return self._mass_lu.solve(r)

    @property
    def lumped(self) -> np.ndarray:
        return self.mesh.lumped_mass


def assemble(mesh: Mesh, g=None) -> AssembledForms:
    """Assemble the P1 forms of ``mesh``.

    ``W`` is interpolated linearly from its nodal samples on each edge, so the
    potential form is exact for that interpolant.
    """
    if g is not None and g is not mesh.graph:
        raise ValueError("mesh was built from a different graph")
    graph = mesh.graph
    c = mesh.cells
    a, b, h = c["a"], c["b"], c["h"]
    n = mesh.n_nodes

    def local(d_aa, d_ab, d_bb):
        rows = np.concatenate([a, a, b, b])
        cols = np.concatenate([a, b, a, b])
        data = np.concatenate([d_aa, d_ab, d_ab, d_bb])
        return sp.csr_matrix((data, (rows, cols)), shape=(n, n))

    A = local(1.0 / h, -1.0 / h, 1.0 / h)
    M = local(h / 3.0, h / 6.0, h / 3.0)

    w0 = np.empty_like(h)
    w1 = np.empty_like(h)
    start = 0
    for gr in mesh.grids:
        ncell = len(gr.x) - 1
        wv = gr.edge.potential(gr.x)
        w0[start:start + ncell] = wv[:-1]
        w1[start:start + ncell] = wv[1:]
        start += ncell
    P = local(h / 12.0 * (3 * w0 + w1), h / 12.0 * (w0 + w1), h / 12.0 * (w0 + 3 * w1))
    P.eliminate_zeros()

    alpha = np.zeros(n)
    for i, v in enumerate(graph.vertices):
        alpha[i] = v.alpha
    D = sp.diags(alpha, format="csr")
    return AssembledForms(mesh, A, M, P, D)


def energy_lin(f, forms: AssembledForms) -> float:
    """Quadratic part ``||f'||^2 + (f, W f) + sum_v alpha_v |f(v)|^2``."""
    v = _vals(f)
    return float(np.real(np.vdot(v, forms.K @ v)))


def _check_mu(mu):
    if not 0 < mu <= 2:
        raise ValueError(f"nonlinearity power mu must lie in (0, 2], got {mu}")


def nonlinear_term(f, forms: AssembledForms, mu: float) -> float:
    """``||f||_{2mu+2}^{2mu+2} / (mu+1)`` with nodal (mass-lumped) quadrature."""
    _check_mu(mu)
    v = _vals(f)
    return float(forms.lumped @ np.abs(v) ** (2 * mu + 2) / (mu + 1))


def energy(f, forms: AssembledForms, mu: float) -> float:
    """NLS energy ``E^lin[f] - ||f||_{2mu+2}^{2mu+2}/(mu+1)``."""
    return energy_lin(f, forms) - nonlinear_term(f, forms, mu)


def nonlinear_force(f, forms: AssembledForms, mu: float) -> np.ndarray:
    """Weak form of ``|f|^{2mu} f`` (lumped), as a nodal load vector."""
    v = _vals(f)
    return forms.lumped * np.abs(v) ** (2 * mu) * v


def energy_gradient(f, forms: AssembledForms, mu: float) -> np.ndarray:
    """Gradient of :func:`energy` with respect to real nodal values."""
    v = _vals(f)
    return 2.0 * (forms.K @ v - nonlinear_force(v, forms, mu))


def apply_H(f: GraphFunction, forms: AssembledForms) -> GraphFunction:
    """Discrete operator action ``M^{-1} (A + P + D) f`` (zero on truncated nodes)."""
    v = _vals(f)
    out = np.zeros_like(v, dtype=np.result_type(v, float))
    out[forms.free_index] = forms.solve_mass((forms.K @ v)[forms.free_index])
    return GraphFunction(forms.mesh, out)


def multiplier(f, forms: AssembledForms, mu: float) -> float:
    """Frequency ``omega`` obtained by pairing the stationary equation with ``f``."""
    v = _vals(f)
    m = float(np.real(np.vdot(v, forms.M @ v)))
    nl = float(forms.lumped @ np.abs(v) ** (2 * mu + 2))
    return (nl - energy_lin(v, forms)) / m


def stationary_residual(f, forms: AssembledForms, omega: float, mu: float,
                        include_nonlinear: bool = True) -> float:
    """Relative residual of ``H f - |f|^{2mu} f = -omega f``.

    Returns ``||K f - N(f) + omega M f||_{M^{-1}} / ||f||`` over the free nodes.
    With ``include_nonlinear=False`` this is the eigen-residual of ``(f, -omega)``.
    """
    v = _vals(f)
    if not np.any(v):
        raise ValueError("residual is undefined for the zero function")
    r = forms.K @ v + omega * (forms.M @ v)
    if include_nonlinear:
        _check_mu(mu)
        r = r - nonlinear_force(v, forms, mu)
    r = r[forms.free_index]
    num = float(np.real(np.vdot(r, forms.solve_mass(r))))
    den = float(np.real(np.vdot(v, forms.M @ v)))
    return float(np.sqrt(max(num, 0.0) / den))


def export_triplets(mat, path) -> None:
    """Write ``mat`` as ``# rows cols nnz`` header plus one ``i j value`` line per entry."""
    coo = sp.coo_matrix(mat)
    with open(path, "w") as fh:
        fh.write(f"# {coo.shape[0]} {coo.shape[1]} {coo.nnz}\n")
        for i, j, x in zip(coo.row, coo.col, coo.data):
            fh.write(f"{i} {j} {x:.17g}\n")
