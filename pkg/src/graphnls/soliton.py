"""Closed-form quantities of the focusing NLS on the real line."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.special import beta

#: Largest power for which :func:`gamma_mu` is evaluated; the exponent
#: ``2mu/(2-mu)`` diverges at ``mu = 2``.
MU_MAX_SUBCRITICAL = 2.0 - 1e-3

#: Best Gagliardo-Nirenberg constant ``K_{6,2}`` of the line.
K62_LINE = (2.0 / math.pi) ** (1.0 / 3.0)

#: Critical mass of the quintic problem on the line, ``sqrt(3) / K62_LINE**3``.
CRITICAL_MASS_LINE = math.pi * math.sqrt(3.0) / 2.0


def _check_subcritical(mu):
    if not 0 < mu < 2:
        raise ValueError(f"mu must lie in (0, 2), got {mu}")
    if mu > MU_MAX_SUBCRITICAL:
        raise ValueError(f"mu={mu} is too close to the critical power 2 for a finite evaluation")


def I_mu(mu: float) -> float:
    """``int_0^1 (1 - t^2)^(1/mu - 1) dt`` by adaptive quadrature.

    The factor ``(1 - t)^(1/mu - 1)`` is passed as an algebraic weight, so the
    endpoint singularity for ``mu > 1`` is integrated exactly.
    """
    a = 1.0 / mu - 1.0
    val, _ = quad(lambda t: (1.0 + t) ** a, 0.0, 1.0, weight="alg", wvar=(0.0, a),
                  epsabs=1e-14, epsrel=1e-12, limit=200)
    return val


def I_mu_beta(mu: float) -> float:
    """Same integral through ``B(1/2, 1/mu) / 2``."""
    return 0.5 * beta(0.5, 1.0 / mu)


def gamma_mu(mu: float) -> float:
    """Coefficient of ``t_mu(m) = gamma_mu * m^(1 + 2mu/(2-mu))``.

    >>> round(gamma_mu(1.0) * 48, 12)
    1.0
    """
    _check_subcritical(mu)
    inner = 2.0 * (mu + 1.0) ** (1.0 / mu) / mu * I_mu(mu)
    return (2.0 - mu) / (2.0 + mu) * inner ** (-2.0 * mu / (2.0 - mu))


def t_mu(m: float, mu: float) -> float:
    """Negative of the constrained infimum on the line; ``inf`` when unbounded.

    For ``mu = 2`` this is 0 up to the critical mass ``pi*sqrt(3)/2`` and
    ``inf`` above it.
    """
    if not m > 0:
        raise ValueError(f"mass must be positive, got {m}")
    if mu == 2:
        return 0.0 if m <= CRITICAL_MASS_LINE else math.inf
    return gamma_mu(mu) * m ** (1.0 + 2.0 * mu / (2.0 - mu))


def line_infimum_attained(m: float, mu: float) -> bool:
    """Whether the line infimum is attained (always for ``mu < 2``, only at the critical mass for ``mu = 2``)."""
    if mu == 2:
        return math.isclose(m, CRITICAL_MASS_LINE, rel_tol=1e-12)
    return True


def soliton_profile(x, omega: float, mu: float):
    """``[(mu+1) omega]^(1/(2mu)) sech^(1/mu)(mu sqrt(omega) x)``, valid for ``0 < mu <= 2``."""
    x = np.asarray(x, dtype=float)
    amp = ((mu + 1.0) * omega) ** (1.0 / (2.0 * mu))
    arg = np.minimum(np.abs(mu * math.sqrt(omega) * x), 700.0)
    return amp / np.cosh(arg) ** (1.0 / mu)


def soliton_frequency(m: float, mu: float) -> float:
    _check_subcritical(mu)
    if not m > 0:
        raise ValueError(f"mass must be positive, got {m}")
    base = m * mu / (2.0 * (mu + 1.0) ** (1.0 / mu) * I_mu(mu))
    return base ** (2.0 * mu / (2.0 - mu))


@dataclass(frozen=True)
class Soliton:
    m: float
    mu: float
    omega: float

    def __call__(self, x):
        return soliton_profile(x, self.omega, self.mu)

    @property
    def amplitude(self) -> float:
        return float(self(0.0))


def soliton(m: float, mu: float) -> Soliton:
    """Line minimizer of mass ``m``: frequency ``omega`` and profile ``phi_omega``.

    >>> s = soliton(2.0, 1.0)
    >>> round(s.omega, 12), round(s.amplitude, 5)
    (0.25, 0.70711)
    """
    return Soliton(float(m), float(mu), soliton_frequency(m, mu))


def mass_threshold(mu: float, E0: float | None = None, K62_graph: float | None = None) -> float:
    """Mass below which a ground state exists.

    ``(E0 / gamma_mu)^(1/mu - 1/2)`` for ``mu < 2`` and ``sqrt(3) / K62_graph^3``
    for ``mu = 2``.
    """
    if mu == 2:
        if K62_graph is None or not K62_graph > 0:
            raise ValueError("mu = 2 needs a positive K62_graph")
        return math.sqrt(3.0) / K62_graph ** 3
    if E0 is None or not E0 > 0:
        raise ValueError("mu < 2 needs a positive E0")
    return (E0 / gamma_mu(mu)) ** (1.0 / mu - 0.5)


@dataclass(frozen=True)
class LineThresholds:
    mu: float
    gamma_mu: float | None
    critical_mass_line: float = CRITICAL_MASS_LINE
    K62_line: float = K62_LINE


def line_thresholds(mu: float) -> LineThresholds:
    return LineThresholds(mu, None if mu == 2 else gamma_mu(mu))
