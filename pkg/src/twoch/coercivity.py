"""Hessian of ``cE - F`` at a solitary wave and its constrained spectrum.

    H_c = [[ L_c,           -c/(c - phi) ],
           [ -c/(c - phi),   c - phi     ]],
    L_c = -d((c - phi) d) - 3 phi + phi'' + c.

The divergence term is assembled as ``D^T diag(c - phi) D`` with ``D`` the
real skew spectral derivative, so the discrete operator is symmetric.
Eigenvalues are computed in the metric of ``X = H^1 x L^2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .grid import Field, Grid, State, deriv, helmholtz
from .solitary import SolitaryWave

RESOLUTION_TOL = 1e-10


class CoercivityError(RuntimeError):
    """Eigen-solve failure or unresolved wave."""


def derivative_matrix(grid: Grid) -> np.ndarray:
    """Dense skew-symmetric spectral derivative (Nyquist mode removed)."""
    n = grid.n
    D = np.fft.irfft(np.fft.rfft(np.eye(n), axis=0) * np.asarray(grid.ik)[:, None], n, axis=0)
    return 0.5 * (D - D.T)


@dataclass(frozen=True)
class HessianOperator:
    """``H_c`` at the wave ``w``; acts on pairs ``(psi, omega)``."""

    wave: SolitaryWave

    @property
    def grid(self) -> Grid:
        return self.wave.grid

    @property
    def c(self) -> float:
        return self.wave.c

    def coefficients(self) -> dict[str, np.ndarray]:
        c = self.c
        phi = self.wave.phi.values
        phixx = deriv(self.wave.phi, 2).values
        return {
            "a": c - phi,                       # divergence-form coefficient and lower-right block
            "V": -3.0 * phi + phixx + c,        # potential of L_c
            "b": -c / (c - phi),                # off-diagonal block
        }

    def apply(self, psi: Field, omega: Field) -> State:
        co = self.coefficients()
        g = self.grid
        dpsi = deriv(psi)
        flux = Field(g, co["a"] * dpsi.values)
        Lpsi = -deriv(flux).values + co["V"] * psi.values
        top = Lpsi + co["b"] * omega.values
        bottom = co["b"] * psi.values + co["a"] * omega.values
        return State(Field(g, top), Field(g, bottom))

    def form(self, psi: Field, omega: Field) -> float:
        """``<H_c (psi, omega), (psi, omega)>`` in ``L^2 x L^2``."""
        Hv = self.apply(psi, omega)
        return self.grid.integrate(Hv.u.values * psi.values + Hv.eta.values * omega.values)

    def matrix(self, D: np.ndarray | None = None) -> np.ndarray:
        co = self.coefficients()
        D = derivative_matrix(self.grid) if D is None else D
        L = D.T @ (co["a"][:, None] * D) + np.diag(co["V"])
        B = np.diag(co["b"])
        return np.block([[L, B], [B, np.diag(co["a"])]])


def assemble_hessian(w: SolitaryWave) -> HessianOperator:
    return HessianOperator(w)


def x_gram(grid: Grid, D: np.ndarray | None = None) -> np.ndarray:
    """Matrix ``G`` with ``||(psi, omega)||_X^2 = h * y^T G y``."""
    n = grid.n
    D = derivative_matrix(grid) if D is None else D
    G = np.zeros((2 * n, 2 * n))
    G[:n, :n] = np.eye(n) + D.T @ D
    G[n:, n:] = np.eye(n)
    return G


def constraint_vectors(w: SolitaryWave) -> np.ndarray:
    """Columns ``((1 - d^2) phi, xi)`` and ``((1 - d^2) phi', xi')``, stacked."""
    dphi = deriv(w.phi)
    v1 = np.concatenate([helmholtz(w.phi).values, w.xi.values])
    v2 = np.concatenate([helmholtz(dphi).values, deriv(w.xi).values])
    return np.column_stack([v1, v2])


def quadratic_form_lambda(w: SolitaryWave, theta: Field, psi: Field, omega: Field,
                          theta_prime: np.ndarray | None = None) -> float:
    """Weighted quadratic form

    ``int Theta((c-phi) psi_x^2 + (-3 phi + phi'' + c) psi^2) + phi' Theta' psi^2
    - 2 Theta c/(c-phi) psi omega + Theta (c-phi) omega^2``.

    ``theta_prime`` defaults to the spectral derivative of ``theta``.
    """
    th = theta.values
    if np.any(th <= 0):
        raise ValueError("weight must be positive")
    c = w.c
    g = w.grid
    phi = w.phi.values
    phix = deriv(w.phi).values
    phixx = deriv(w.phi, 2).values
    tp = deriv(theta).values if theta_prime is None else np.asarray(theta_prime)
    p, px, om = psi.values, deriv(psi).values, omega.values
    integrand = (
        th * ((c - phi) * px**2 + (-3.0 * phi + phixx + c) * p**2)
        + phix * tp * p**2
        - 2.0 * th * c / (c - phi) * p * om
        + th * (c - phi) * om**2
    )
    return g.integrate(integrand)


@dataclass(frozen=True)
class IdentityCheck:
    lhs_hessian: float
    rhs_hessian: float
    lhs_norm: float
    rhs_norm: float

    @property
    def hessian_residual(self) -> float:
        return abs(self.lhs_hessian - self.rhs_hessian) / max(abs(self.lhs_hessian), 1e-300)

    @property
    def norm_residual(self) -> float:
        return abs(self.lhs_norm - self.rhs_norm) / max(abs(self.lhs_norm), 1e-300)


def weighted_identities(w: SolitaryWave, theta: np.ndarray, theta_p: np.ndarray,
                        theta_pp: np.ndarray, psi: Field, omega: Field) -> IdentityCheck:
    """Evaluate both sides of the weighted Hessian and weighted-norm identities.

    Left sides apply the operator (or the ``X`` norm) to ``sqrt(Theta) (psi, omega)``;
    right sides use the analytic derivatives of ``Theta``.
    """
    g = w.grid
    c = w.c
    phi = w.phi.values
    phix = deriv(w.phi).values
    sq = np.sqrt(theta)
    sp = Field(g, sq * psi.values)
    so = Field(g, sq * omega.values)
    H = HessianOperator(w)
    lhs_h = H.form(sp, so)
    corr = theta_p**2 / (4.0 * theta) - 0.5 * theta_pp
    rhs_h = quadratic_form_lambda(w, Field(g, theta), psi, omega, theta_p) + g.integrate(
        ((c - phi) * corr - 0.5 * phix * theta_p) * psi.values**2)
    dsp = deriv(sp).values
    lhs_n = g.integrate(sp.values**2 + dsp**2 + so.values**2)
    px = deriv(psi).values
    rhs_n = g.integrate(theta * (psi.values**2 + px**2 + omega.values**2)) + g.integrate(
        corr * psi.values**2)
    return IdentityCheck(lhs_h, rhs_h, lhs_n, rhs_n)


@dataclass(frozen=True)
class WeightConditionReport:
    max_ratio: float
    threshold: float

    @property
    def satisfied(self) -> bool:
        return self.max_ratio <= 1.0


def weight_condition_check(theta: np.ndarray, theta_p: np.ndarray, theta_pp: np.ndarray,
                           c: float, C_delta: float) -> WeightConditionReport:
    """Ratio of ``|Theta'^2/(4 Theta)| + c|Theta'| + |Theta''/2|`` to
    ``min(1/4, C_delta/(4c)) Theta``; at most 1 means the condition holds."""
    theta = np.asarray(theta, dtype=float)
    if np.any(theta <= 0):
        raise ValueError("weight must be positive")
    lhs = np.abs(theta_p**2 / (4.0 * theta)) + c * np.abs(theta_p) + np.abs(0.5 * theta_pp)
    thr = min(0.25, C_delta / (4.0 * c))
    return WeightConditionReport(float(np.max(lhs / (thr * theta))), thr)


def resolution_defect(w: SolitaryWave) -> float:
    """Largest Fourier coefficient of ``phi`` in the top third of the band, relative."""
    ph = np.abs(np.fft.rfft(w.phi.values))
    top = ph[2 * ph.size // 3:]
    return float(np.max(top) / np.max(ph))


@dataclass
class CoercivityReport:
    c: float
    n: int
    length: float
    lambda_min: float
    projector_rank: int
    zero_mode_residual: float
    unconstrained: np.ndarray
    translation_eigenvalue: float
    eigen_residual: float
    relaxed: dict = field(default_factory=dict)
    constrained: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def C_delta(self) -> float:
        return self.lambda_min

    def to_text(self) -> str:
        lines = [
            f"c: {self.c!r}",
            f"n: {self.n}",
            f"length: {self.length!r}",
            f"lambda_min: {self.lambda_min:.17g}",
            f"C_delta: {self.C_delta:.17g}",
            f"projector_rank: {self.projector_rank}",
            f"zero_mode_residual: {self.zero_mode_residual:.17g}",
            f"translation_eigenvalue: {self.translation_eigenvalue:.17g}",
            f"negative_eigenvalue: {self.unconstrained[0]:.17g}",
            f"eigen_residual: {self.eigen_residual:.17g}",
        ]
        for d, v in sorted(self.relaxed.items()):
            lines.append(f"relaxed_lambda_delta_{d:g}: {v:.17g}")
        return "\n".join(lines) + "\n"

    def eigen_csv(self) -> str:
        rows = ["index,constrained,unconstrained"]
        m = max(self.constrained.size, self.unconstrained.size)
        for i in range(m):
            a = f"{self.constrained[i]:.17g}" if i < self.constrained.size else ""
            b = f"{self.unconstrained[i]:.17g}" if i < self.unconstrained.size else ""
            rows.append(f"{i},{a},{b}")
        return "\n".join(rows) + "\n"


def constrained_spectrum(w: SolitaryWave, n_eig: int = 6,
                         deltas: tuple[float, ...] = (1e-3, 1e-2)) -> CoercivityReport:
    """Smallest eigenvalues of ``H_c`` in the ``X`` metric, with and without the
    two orthogonality constraints.

    Raises
    ------
    CoercivityError
        If the grid does not resolve the wave or the eigen-solve is inaccurate.
    """
    defect = resolution_defect(w)
    if defect > RESOLUTION_TOL:
        raise CoercivityError(
            f"grid does not resolve the wave (top-band spectrum {defect:.2e} > {RESOLUTION_TOL})")
    g = w.grid
    n = g.n
    D = derivative_matrix(g)
    Hop = HessianOperator(w)
    H = Hop.matrix(D)
    G = x_gram(g, D)

    # unconstrained: one negative direction and the translation mode
    lo, lo_vec = sla.eigh(H, G, subset_by_index=[0, n_eig - 1])
    trans = float(lo[np.argmin(np.abs(lo))])

    V = constraint_vectors(w)
    Q, _ = np.linalg.qr(V, mode="complete")
    Q = Q[:, 2:]
    A = Q.T @ H @ Q
    B = Q.T @ G @ Q
    A = 0.5 * (A + A.T)
    B = 0.5 * (B + B.T)
    lam, Y = sla.eigh(A, B, subset_by_index=[0, n_eig - 1])
    y0 = Y[:, 0]
    resid = float(np.linalg.norm(A @ y0 - lam[0] * (B @ y0)) / max(np.linalg.norm(A @ y0), 1e-300))
    if not np.isfinite(lam[0]) or resid > 1e-6:
        raise CoercivityError(f"eigen-solve inaccurate: residual {resid:.2e}")

    # translation mode residual, relative to the operator scale
    t = np.concatenate([deriv(w.phi).values, deriv(w.xi).values])
    Ht = H @ t
    # the infinity norm bounds the spectral norm of the symmetric matrix
    scale = np.abs(H).sum(axis=1).max() * np.linalg.norm(t)
    zres = float(np.linalg.norm(Ht) / scale)

    # relaxed constraints: tilt the constrained minimiser towards the negative direction
    relaxed = {}
    neg = lo_vec[:, 0]
    psi0 = Q @ y0
    vn = V / np.sqrt(np.einsum("ij,ij->j", V, np.linalg.solve(G, V)))[None, :]
    for d in deltas:
        # find the mixing s with max constraint cosine equal to d
        def cos_of(s):
            z = psi0 + s * neg
            nz = math.sqrt(z @ G @ z)
            return np.max(np.abs(vn.T @ z)) / nz
        s_lo, s_hi = 0.0, 1.0
        while cos_of(s_hi) < d and s_hi < 1e6:
            s_hi *= 2
        for _ in range(80):
            mid = 0.5 * (s_lo + s_hi)
            if cos_of(mid) < d:
                s_lo = mid
            else:
                s_hi = mid
        z = psi0 + s_lo * neg
        relaxed[d] = float((z @ H @ z) / (z @ G @ z))

    return CoercivityReport(
        c=w.c, n=n, length=g.length, lambda_min=float(lam[0]),
        projector_rank=Q.shape[1], zero_mode_residual=zres,
        unconstrained=np.asarray(lo), translation_eigenvalue=trans,
        eigen_residual=resid, relaxed=relaxed, constrained=np.asarray(lam),
    )
