"""Bottom of the spectrum of the linear form by shift-and-invert."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
from scipy.sparse.linalg import eigsh, splu

from .mesh import GraphFunction, build_mesh
from .operators import AssembledForms, assemble

_DENSE_LIMIT = 800


class EigenSolverError(RuntimeError):
    pass


@dataclass(eq=False)
class EigenPair:
    """Lowest generalized eigenpair; ``value`` approximates ``-E0``."""

    value: float
    vector: GraphFunction
    residual: float

    @property
    def E0(self) -> float:
        return -self.value


def _eigen_residual(Kf, Mf, lam, v, mass_lu) -> float:
    r = Kf @ v - lam * (Mf @ v)
    return float(np.sqrt(max(r @ mass_lu.solve(r), 0.0) / (v @ (Mf @ v))))


def _coarse_estimate(forms: AssembledForms) -> float:
    n = len(forms.free_index)
    if n <= _DENSE_LIMIT:
        target = forms
    else:
        mesh = forms.mesh
        h = mesh.h * math.ceil(n / _DENSE_LIMIT)
        h = min(h, mesh.L / 10.0)
        target = assemble(build_mesh(mesh.graph, h, mesh.L))
    K = target.K_free.toarray()
    M = target.M_free.toarray()
    return float(la.eigh(K, M, eigvals_only=True, subset_by_index=[0, 0])[0])


def ground_eigenpair(forms: AssembledForms, tol: float = 1e-10, max_restarts: int = 5) -> EigenPair:
    """Smallest ``lambda`` with ``(A+P+D) v = lambda M v`` on the free nodes.

    The shift is placed below a coarse-mesh estimate of the bottom eigenvalue, so
    the eigenvalue nearest the shift is the lowest one.  The vector is
    M-normalized and made nonnegative on average.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    Kf, Mf = forms.K_free, forms.M_free
    n = Kf.shape[0]
    lam0 = _coarse_estimate(forms)
    gap = 0.5 * abs(lam0) + 0.05
    v0 = np.ones(n)
    mass_lu = splu(Mf)
    last_err = None
    for attempt in range(max_restarts):
        sigma = lam0 - gap * (1.0 + 0.37 * attempt)
        try:
            lu = splu((Kf - sigma * Mf).tocsc())
        except RuntimeError as exc:
            last_err = exc
            continue
        try:
            vals, vecs = eigsh(Kf, k=1, M=Mf, sigma=sigma, which="LM", v0=v0, tol=1e-14, maxiter=5000)
        except Exception as exc:  # ARPACK non-convergence or singular factor
            last_err = exc
            continue
        lam, v = float(vals[0]), vecs[:, 0].real
        for _ in range(50):
            res = _eigen_residual(Kf, Mf, lam, v, mass_lu)
            if res <= tol:
                break
            v = lu.solve(Mf @ v)
            v /= math.sqrt(v @ (Mf @ v))
            lam = float(v @ (Kf @ v))
        else:
            last_err = EigenSolverError(f"eigen-residual {res:.3e} above tol {tol:.1e}")
            continue
        v /= math.sqrt(v @ (Mf @ v))
        if v.sum() < 0:
            v = -v
        full = np.zeros(forms.mesh.n_nodes)
        full[forms.free_index] = v
        return EigenPair(lam, GraphFunction(forms.mesh, full), res)
    raise EigenSolverError(f"no convergence after {max_restarts} shifts: {last_err}")


def check_assumption_E0(pair: EigenPair, margin: float = 1e-6) -> bool:
    """True when the bottom eigenvalue is at most ``-margin``.

    Values in ``(-margin, inf)`` cannot be told apart from the essential-spectrum
    edge at this resolution and count as not verified.
    """
    return pair.value <= -margin
