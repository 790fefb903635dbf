"""The monotone weight ``Psi`` and its scaled copies.

``Psi(x) = exp(-|x|)`` for ``x < -1`` and ``1 - exp(-|x|)`` for ``x > 1``.
On ``[-1, 1]`` the default construction prescribes the ratio
``q = Psi'''/Psi'`` and recovers ``h = log Psi'`` from the Riccati equation
``h'' = q - h'^2`` in ``t = 1 - |x|``.  ``q`` equals 1 near ``t = 0``
(so the pieces join to all orders), rises to ``Q_TOP`` and dips briefly
to a large negative value.  The two free parameters of the dip are fixed
so that ``h'(t=1) = 0`` (``Psi'`` even) and ``Psi(0) = 1/2`` (``Psi`` odd
about ``(0, 1/2)``).

Any smooth ``Psi`` of this form has ``max |Psi'''|/Psi' > 10`` on
``[-1, 1]`` (see ``two_sided_lower_bound``), so only the one-sided bound
``Psi''' <= 10 Psi'`` is enforced.  That side alone gives the
multiplier bound ``(1 - d^2)^{-1} Psi_K' <= (1 - 10/K^2)^{-1} Psi_K'``
through the maximum principle.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import solve_ivp

Q_TOP = 9.5
WIDTH = 0.02
DIP_START = 0.034084304288610666
DIP_DEPTH = 118.02991553423914
RATIO_BOUND = 10.0
AUDIT_POINTS = 10_000

_E1 = math.exp(-1.0)
_HALF_MASS = 0.5 - _E1


class WeightAuditError(ValueError):
    """The constructed weight violates a required inequality."""


def _smoothstep(z: np.ndarray) -> np.ndarray:
    """C-infinity step: 0 for z <= 0, 1 for z >= 1."""
    z = np.asarray(z, dtype=float)
    out = np.where(z >= 1.0, 1.0, 0.0)
    inner = (z > 0.0) & (z < 1.0)
    zi = z[inner]
    a = np.exp(-1.0 / zi)
    b = np.exp(-1.0 / (1.0 - zi))
    out[inner] = a / (a + b)
    return out


def ratio_profile(t, q_top: float = Q_TOP, width: float = WIDTH,
                  t1: float = DIP_START, depth: float = DIP_DEPTH) -> np.ndarray:
    """Prescribed ``Psi'''/Psi'`` as a function of ``t = 1 - |x|``."""
    t = np.asarray(t, dtype=float)
    rise = _smoothstep(t / width)
    dip = 1.0 - _smoothstep((t - t1) / width)
    return 1.0 + rise * ((q_top - 1.0) - (q_top - 1.0 + depth) * dip)


def _integrate(q_top, width, t1, depth, rtol=1e-13):
    def f(t, y):
        q = float(ratio_profile(np.array([t]), q_top, width, t1, depth)[0])
        return [y[1], q - y[1] ** 2, math.exp(y[0])]

    return solve_ivp(f, (0.0, 1.0), [-1.0, 1.0, 0.0], method="DOP853", rtol=rtol,
                     atol=1e-15, dense_output=True, max_step=width / 8)


@lru_cache(maxsize=4)
def _solution(q_top, width, t1, depth):
    sol = _integrate(q_top, width, t1, depth)
    if sol.status != 0:
        raise WeightAuditError(f"weight construction failed: {sol.message}")
    return sol


@dataclass(frozen=True)
class WeightPsi:
    """Smooth monotone step from 0 to 1 with exponential tails.

    Parameters
    ----------
    K : float
        Scale; ``Psi_K(x) = Psi(x / K)``.  Must be at least 5 for the
        monotonicity estimates (checked by callers that need it).
    kind : {"smooth", "quintic"}
        ``"smooth"`` is the default Riccati construction.  ``"quintic"``
        is the degree-5 Hermite blend; it fails the audit and raises.
    """

    K: float = 1.0
    kind: str = "smooth"

    def __post_init__(self) -> None:
        if not self.K > 0:
            raise ValueError("K must be positive")
        if self.kind not in ("smooth", "quintic"):
            raise ValueError(f"unknown weight kind {self.kind!r}")
        audit_weight(self.kind)

    # unscaled Psi and derivatives ---------------------------------------
    def base(self, x, order: int = 0) -> np.ndarray:
        """``d^order Psi / dx^order`` of the unscaled weight, ``order <= 3``."""
        return _base(self.kind, np.asarray(x, dtype=float), order)

    def __call__(self, x, order: int = 0) -> np.ndarray:
        """Derivative of ``Psi_K``: ``K^-order Psi^(order)(x/K)``."""
        x = np.asarray(x, dtype=float)
        return self.base(x / self.K, order) / self.K**order


def _quintic_coeffs() -> np.ndarray:
    rows, rhs = [], []
    for x0, vals in ((-1.0, (_E1, _E1, _E1)), (1.0, (1.0 - _E1, _E1, -_E1))):
        for d, v in enumerate(vals):
            row = []
            for p in range(6):
                if p < d:
                    row.append(0.0)
                else:
                    row.append(math.perm(p, d) * x0 ** (p - d))
            rows.append(row)
            rhs.append(v)
    return np.linalg.solve(np.array(rows), np.array(rhs))


def _inner(kind: str, x: np.ndarray, order: int) -> np.ndarray:
    if kind == "quintic":
        c = np.polynomial.Polynomial(_quintic_coeffs()).deriv(order) if order else \
            np.polynomial.Polynomial(_quintic_coeffs())
        return c(x)
    sol = _solution(Q_TOP, WIDTH, DIP_START, DIP_DEPTH)
    scale = _HALF_MASS / sol.y[2, -1]
    t = 1.0 - np.abs(x)
    h, ht, G = sol.sol(t) if t.size else np.zeros((3, 0))
    sign = np.where(x > 0, -1.0, 1.0)
    if order == 0:
        return np.where(x > 0, 1.0 - (_E1 + scale * G), _E1 + scale * G)
    fp = scale * np.exp(h)
    if order == 1:
        return fp
    if order == 2:
        return sign * ht * fp
    return ratio_profile(t) * fp


def _base(kind: str, x: np.ndarray, order: int) -> np.ndarray:
    if order not in (0, 1, 2, 3):
        raise ValueError("order must be 0..3")
    out = np.empty_like(x)
    left, right = x <= -1.0, x >= 1.0
    mid = ~(left | right)
    ex = np.exp(-np.abs(x[left]))
    out[left] = ex
    ex = np.exp(-np.abs(x[right]))
    out[right] = (1.0 - ex) if order == 0 else ((-1.0) ** (order + 1)) * ex
    out[mid] = _inner(kind, x[mid], order)
    return out


@dataclass(frozen=True)
class WeightAudit:
    min_derivative: float
    max_ratio: float
    max_abs_ratio: float
    jump: float
    points: int

    @property
    def passed(self) -> bool:
        return self.min_derivative > 0 and self.max_ratio <= RATIO_BOUND and self.jump < 1e-10


@lru_cache(maxsize=4)
def audit_weight(kind: str = "smooth", points: int = AUDIT_POINTS, strict: bool = True) -> WeightAudit:
    """Check ``Psi' > 0``, ``Psi''' <= 10 Psi'`` and continuity at ``+-1``."""
    x = np.linspace(-1.0, 1.0, points)
    d1 = _inner(kind, x, 1)
    d3 = _inner(kind, x, 3)
    jump = 0.0
    for x0 in (-1.0, 1.0):
        s = np.sign(x0)
        outer = [math.exp(-1.0), math.exp(-1.0), -s * math.exp(-1.0)]
        outer[0] = math.exp(-1.0) if x0 < 0 else 1.0 - math.exp(-1.0)
        outer[2] = math.exp(-1.0) if x0 < 0 else -math.exp(-1.0)
        for order in range(3):
            jump = max(jump, abs(float(_inner(kind, np.array([x0]), order)[0]) - outer[order]))
    rep = WeightAudit(
        min_derivative=float(np.min(d1)),
        max_ratio=float(np.max(d3 / d1)) if np.all(d1 > 0) else math.inf,
        max_abs_ratio=float(np.max(np.abs(d3) / np.abs(d1))),
        jump=jump,
        points=points,
    )
    if strict and not rep.passed:
        raise WeightAuditError(
            f"weight {kind!r} fails audit: min Psi'={rep.min_derivative:.3g}, "
            f"max Psi'''/Psi'={rep.max_ratio:.3g}, jump={rep.jump:.2e}"
        )
    return rep


def two_sided_lower_bound(beta: float = RATIO_BOUND, m: int = 400) -> float:
    """Smallest ``int_0^1 f`` over ``f > 0`` with ``|f''| <= beta f`` and edge data.

    ``f`` stands for ``Psi'`` on ``[-1, 0]`` (even about 0): ``f(0) = e^-1``,
    ``f'(0) = e^-1``, ``f'(1) = 0``.  The discretised linear programme
    returns a lower estimate of the mass a two-sided ratio bound allows;
    a value above ``1/2 - e^-1`` shows that ``|Psi'''| <= beta Psi'`` cannot
    hold together with the tail conditions.
    """
    from scipy.optimize import linprog

    hgrid = 1.0 / m
    n = m + 1
    A, b = [], []
    for j in range(1, m):
        row = np.zeros(n)
        row[j - 1], row[j], row[j + 1] = 1 / hgrid**2, -2 / hgrid**2, 1 / hgrid**2
        r1 = row.copy()
        r1[j] -= beta
        A.append(r1)
        b.append(0.0)
        r2 = -row
        r2[j] -= beta
        A.append(r2)
        b.append(0.0)
    Aeq = np.zeros((3, n))
    beq = np.array([_E1, _E1, 0.0])
    Aeq[0, 0] = 1.0
    Aeq[1, 0], Aeq[1, 1], Aeq[1, 2] = -1.5 / hgrid, 2 / hgrid, -0.5 / hgrid
    Aeq[2, -1], Aeq[2, -2], Aeq[2, -3] = 1.5 / hgrid, -2 / hgrid, 0.5 / hgrid
    w = np.full(n, hgrid)
    w[0] = w[-1] = hgrid / 2
    res = linprog(w, A_ub=np.array(A), b_ub=np.array(b), A_eq=Aeq, b_eq=beq,
                  bounds=[(0, None)] * n, method="highs")
    if res.status != 0:
        raise RuntimeError(res.message)
    return float(res.fun)
