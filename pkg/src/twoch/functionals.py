"""Conserved functionals, their gradients, and localized energies.

    E = 1/2 int (u^2 + u_x^2 + eta^2)
    F = 1/2 int (u^3 + u u_x^2 + 2 u eta + u eta^2)

Gradients are taken in the ``L^2 x L^2`` pairing.  A :class:`Partition`
splits the line into pieces around the wave centres using copies of the
weight ``Psi_K`` placed at the midpoints between neighbouring centres.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .grid import Field, Grid, State, deriv, helmholtz, helmholtz_inverse
from .weights import RATIO_BOUND, WeightPsi

K_MIN = 5.0


def energy_density(s: State) -> np.ndarray:
    ux = deriv(s.u).values
    u, eta = s.u.values, s.eta.values
    return 0.5 * (u * u + ux * ux + eta * eta)


def momentum_density(s: State) -> np.ndarray:
    ux = deriv(s.u).values
    u, eta = s.u.values, s.eta.values
    return 0.5 * (u**3 + u * ux * ux + 2.0 * u * eta + u * eta * eta)


def energy_E(s: State) -> float:
    return s.grid.integrate(energy_density(s))


def energy_F(s: State) -> float:
    return s.grid.integrate(momentum_density(s))


@dataclass(frozen=True)
class Gradients:
    """Variational derivatives of ``E`` and ``F``."""

    E_u: Field
    E_eta: Field
    F_u: Field
    F_eta: Field

    @property
    def E(self) -> State:
        return State(self.E_u, self.E_eta)

    @property
    def F(self) -> State:
        return State(self.F_u, self.F_eta)


def variational_derivatives(s: State) -> Gradients:
    """``E' = ((1 - d^2) u, eta)`` and

    ``F'_u = 3/2 u^2 - 1/2 u_x^2 - u u_xx + eta + 1/2 eta^2``,
    ``F'_eta = u + u eta``.
    """
    g = s.grid
    u, eta = s.u.values, s.eta.values
    ux = deriv(s.u).values
    uxx = deriv(s.u, 2).values
    Fu = 1.5 * u * u - 0.5 * ux * ux - u * uxx + eta + 0.5 * eta * eta
    Fe = u + u * eta
    return Gradients(helmholtz(s.u), s.eta, Field(g, Fu), Field(g, Fe))


def default_K(L: float) -> float:
    """``max(5, round(sqrt(L)))``."""
    return float(max(5, round(math.sqrt(L)))) if math.isfinite(L) else K_MIN


class Partition:
    """Weights ``Psi_{j,K}`` at the midpoints and the partition ``Phi_i``.

    Parameters
    ----------
    grid : Grid
    centers : sequence of float
        Increasing wave centres ``x_1 < ... < x_N``.
    K : float
        Weight scale.
    """

    def __init__(self, grid: Grid, centers: Sequence[float], K: float, kind: str = "smooth"):
        c = np.asarray(centers, dtype=float)
        if c.ndim != 1 or c.size == 0:
            raise ValueError("need at least one center")
        if np.any(np.diff(c) <= 0):
            raise ValueError("centers must be strictly increasing")
        self.grid = grid
        self.centers = c
        self.K = float(K)
        self.weight = WeightPsi(self.K, kind)
        self.midpoints = 0.5 * (c[1:] + c[:-1])
        for y in self.midpoints:
            if not grid.contains(y):
                raise ValueError(f"midpoint {y} lies outside the grid")

    @property
    def n_waves(self) -> int:
        return self.centers.size

    def psi(self, j: int, order: int = 0) -> np.ndarray:
        """``Psi_{j,K}`` (or a derivative) on the grid for ``j = 2..N``."""
        if not 2 <= j <= self.n_waves:
            raise IndexError(f"j must lie in 2..{self.n_waves}")
        return self.weight(self.grid.x - self.midpoints[j - 2], order)

    def phi(self, i: int, order: int = 0) -> np.ndarray:
        """``Phi_{i,K}`` (or a derivative) for ``i = 1..N``."""
        N = self.n_waves
        if not 1 <= i <= N:
            raise IndexError(f"i must lie in 1..{N}")
        if N == 1:
            return np.ones(self.grid.n) if order == 0 else np.zeros(self.grid.n)
        out = np.zeros(self.grid.n) if i == 1 else self.psi(i, order)
        if i == 1 and order == 0:
            out = out + 1.0
        if i < N:
            out = out - self.psi(i + 1, order)
        return out

    @cached_property
    def phis(self) -> np.ndarray:
        return np.array([self.phi(i) for i in range(1, self.n_waves + 1)])

    def localization(self, L: float) -> "LocalizationReport":
        """Check ``|1 - Phi_i| <= 4 exp(-L/(4K))`` on the own window and
        ``|Phi_i| <= 4 exp(-L/(4K))`` on the other windows."""
        x = self.grid.x
        bound = 4.0 * math.exp(-L / (4.0 * self.K))
        own = other = 0.0
        for i in range(self.n_waves):
            for j in range(self.n_waves):
                win = np.abs(x - self.centers[j]) <= L / 4.0
                if not np.any(win):
                    continue
                if i == j:
                    own = max(own, float(np.max(np.abs(1.0 - self.phis[i][win]))))
                else:
                    other = max(other, float(np.max(np.abs(self.phis[i][win]))))
        return LocalizationReport(bound, own, other)


@dataclass(frozen=True)
class LocalizationReport:
    bound: float
    max_own_defect: float
    max_leak: float

    @property
    def passed(self) -> bool:
        return self.max_own_defect <= self.bound and self.max_leak <= self.bound


@dataclass(frozen=True)
class LocalizedEnergies:
    E: np.ndarray
    F: np.ndarray
    I: np.ndarray  # I[j-2] = I_{j,K}, j = 2..N

    def I_from_E(self) -> np.ndarray:
        """``I_{j,K}`` as the tail sums ``sum_{i >= j} E_i``."""
        return np.cumsum(self.E[::-1])[::-1][1:]


def localized_energies(s: State, part: Partition) -> LocalizedEnergies:
    if s.grid != part.grid:
        raise ValueError("state and partition live on different grids")
    g = s.grid
    e = energy_density(s)
    f = momentum_density(s)
    Ei = np.array([g.integrate(p * e) for p in part.phis])
    Fi = np.array([g.integrate(p * f) for p in part.phis])
    I = np.array([g.integrate(part.psi(j) * e) for j in range(2, part.n_waves + 1)])
    return LocalizedEnergies(Ei, Fi, I)


@dataclass(frozen=True)
class MultiplierReport:
    K: float
    max_violation: float
    min_relative_margin: float
    n: int
    length: float

    @property
    def passed(self) -> bool:
        return self.max_violation <= 1e-10


def multiplier_bound_check(part: Partition | float, span: float = 80.0,
                           points_per_K: int = 256) -> MultiplierReport:
    """Compare ``(1 - d^2)^{-1} Psi_K'`` with ``(1 - 10/K^2)^{-1} Psi_K'``.

    Every ``Psi_{j,K}'`` is a translate of ``Psi_K'``, so the check runs once
    on a dedicated periodic grid of length ``span*K`` centred on the weight;
    the exponential tails of ``Psi_K'`` are then below ``1e-17`` at the box
    edge and wrap-around is negligible.
    """
    K = part.K if isinstance(part, Partition) else float(part)
    if K < K_MIN:
        raise ValueError(f"multiplier bound requires K >= {K_MIN}, got K={K}")
    kind = part.weight.kind if isinstance(part, Partition) else "smooth"
    w = WeightPsi(K, kind)
    n = 1 << int(math.ceil(math.log2(span * points_per_K)))
    g = Grid(n, span * K)
    f = w(g.x, 1)
    lhs = np.fft.irfft(np.fft.rfft(f) * g.helmholtz_symbol, n)
    rhs = f / (1.0 - RATIO_BOUND / K**2)
    viol = float(np.max(lhs - rhs))
    live = f > 1e-12 * np.max(f)
    margin = float(np.min((rhs - lhs)[live] / rhs[live]))
    return MultiplierReport(K, viol, margin, n, g.length)


@dataclass(frozen=True)
class ConvolutionReport:
    factor: float
    max_violation: float
    scale: float

    def passed(self, tol: float = 1e-10) -> bool:
        return self.max_violation <= tol


def convolution_bound_check(eta: Field, factor: float = 1.0) -> ConvolutionReport:
    """Largest value of ``(p*eta)^2 - factor (p*eta^2)`` with ``p = exp(-|x|)/2``.

    Since ``int p = 1``, Cauchy-Schwarz gives the bound with ``factor = 1``,
    attained by constants; smaller factors fail for near-constant ``eta``.
    """
    pe = helmholtz_inverse(eta).values
    pe2 = helmholtz_inverse(eta * eta).values
    diff = pe * pe - factor * pe2
    return ConvolutionReport(float(factor), float(np.max(diff)), float(np.max(pe2)))
