"""Smooth solitary waves and superposed wave trains.

A travelling wave ``u = phi(x - ct)``, ``eta = xi(x - ct)`` with decay at
infinity satisfies, after one integration,

    (c - phi) phi'' = c phi - 3/2 phi^2 + 1/2 phi'^2 - xi - 1/2 xi^2,
    xi = phi / (c - phi),

and a second integration gives the quadrature form

    phi'^2 = phi^2 ((c - phi)^2 - 1) / (c - phi)^2.

Writing ``a = sqrt((c-1)/(c+1))`` the substitution
``phi = (c-1) y (2-y) / (1 - a^2 (1-y)^2)`` with ``y in (0, 1]`` integrates
``dx = (c - phi) dphi / (phi sqrt((c-phi)^2 - 1))`` in closed form:

    |x| = -2 artanh(a (1-y)) + c / sqrt(c^2 - 1) * log((2-y)/y).

The crest is ``y = 1`` where ``dx/dy = -2/sqrt(c^2-1)`` is regular, so the
map ``x -> y`` is inverted by a safeguarded Newton iteration in ``log y``.
``stationary_residual`` checks the result against the first relation
above using spectral derivatives.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .grid import Field, Grid, State, deriv

TAIL_TOL = 1e-10
ZERO_TAIL = 1e-14


class ProfileError(ValueError):
    """No admissible solitary wave for the requested parameters."""


class OverlapWarning(UserWarning):
    """Neighbouring waves of a train overlap noticeably."""


def decay_rate(c: float) -> float:
    """Exponential decay rate ``sqrt(c^2 - 1)/c`` of the profile tails."""
    return math.sqrt(c * c - 1.0) / c


def _check_speed(c: float) -> float:
    c = float(c)
    if not (np.isfinite(c) and c > 1.0):
        raise ProfileError(f"no solitary wave for speed c={c} (need c > 1)")
    return c


def _x_of_y(c: float, y: np.ndarray) -> np.ndarray:
    a = math.sqrt((c - 1.0) / (c + 1.0))
    return -2.0 * np.arctanh(a * (1.0 - y)) + c / math.sqrt(c * c - 1.0) * np.log((2.0 - y) / y)


def _phi_of_y(c: float, y: np.ndarray) -> np.ndarray:
    a2 = (c - 1.0) / (c + 1.0)
    return (c - 1.0) * y * (2.0 - y) / (1.0 - a2 * (1.0 - y) ** 2)


def _solve_y(c: float, r: np.ndarray, tol: float = 1e-15, maxiter: int = 100) -> np.ndarray:
    """Invert ``|x|(y) = r`` for ``y`` by bracketed Newton in ``q = log y``."""
    a = math.sqrt((c - 1.0) / (c + 1.0))
    s = math.sqrt(c * c - 1.0)
    # far-field and near-crest asymptotics for the starting guess
    q_far = math.log(2.0) - (r + 2.0 * math.atanh(a)) * s / c
    q_near = np.log(np.clip(1.0 - 0.5 * s * r, 1e-300, 1.0))
    q = np.minimum(np.maximum(q_far, q_near), 0.0)
    lo = np.full_like(r, -800.0)
    hi = np.zeros_like(r)
    for _ in range(maxiter):
        y = np.exp(q)
        g = _x_of_y(c, y) - r
        # x decreases with q: g > 0 means q is too small
        lo = np.where(g > 0, q, lo)
        hi = np.where(g <= 0, q, hi)
        dxdy = 2.0 * a / (1.0 - a * a * (1.0 - y) ** 2) - c / s * (1.0 / (2.0 - y) + 1.0 / y)
        step = g / (y * dxdy)
        qn = q - step
        bad = (qn <= lo) | (qn >= hi) | ~np.isfinite(qn)
        qn = np.where(bad, 0.5 * (lo + hi), qn)
        done = np.abs(qn - q) <= tol * np.maximum(1.0, np.abs(q))
        q = qn
        if np.all(done):
            break
    else:  # pragma: no cover - safeguarded iteration always terminates
        raise ProfileError("profile inversion did not converge")
    return np.exp(q)


def profile_values(c: float, r) -> np.ndarray:
    """Evaluate ``phi_c`` at signed distances ``r`` from the crest."""
    c = _check_speed(c)
    r = np.abs(np.asarray(r, dtype=float))
    y = _solve_y(c, r.ravel()).reshape(r.shape)
    phi = _phi_of_y(c, y)
    phi[r == 0.0] = c - 1.0
    phi[phi < ZERO_TAIL * (c - 1.0)] = 0.0
    return phi


def tail_value(c: float, r: float) -> float:
    """Profile value at distance ``r``; used for tail-truncation checks."""
    return float(profile_values(c, np.array([r]))[0])


def required_length(c: float, tol: float = TAIL_TOL, margin: float = 1.0) -> float:
    """Shortest box length whose half-width puts the tail below ``tol`` of the amplitude."""
    c = _check_speed(c)
    lo, hi = 0.0, 1.0
    while tail_value(c, hi) > tol * (c - 1.0):
        hi *= 2.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if tail_value(c, mid) > tol * (c - 1.0):
            lo = mid
        else:
            hi = mid
    return 2.0 * hi + margin


def _wrapped_offset(grid: Grid, center: float) -> np.ndarray:
    L = grid.length
    return np.mod(grid.x - center + 0.5 * L, L) - 0.5 * L


@dataclass(frozen=True)
class SolitaryWave:
    """Solitary wave of speed ``c`` sampled on a grid."""

    c: float
    center: float
    phi: Field
    xi: Field

    @property
    def grid(self) -> Grid:
        return self.phi.grid

    @property
    def amplitude(self) -> float:
        return self.c - 1.0

    @property
    def decay_rate(self) -> float:
        return decay_rate(self.c)

    def state(self) -> State:
        return State(self.phi, self.xi)

    def table(self) -> str:
        """Three-column text table ``x phi xi``."""
        rows = np.column_stack([self.grid.x, self.phi.values, self.xi.values])
        lines = ["# x phi xi"]
        lines += [" ".join(f"{v:.17g}" for v in row) for row in rows]
        return "\n".join(lines) + "\n"


def profile(c: float, center: float, grid: Grid) -> SolitaryWave:
    """Construct the solitary wave of speed ``c`` centred at ``center``.

    Raises
    ------
    ProfileError
        If ``c <= 1`` or the box is too short for the tails to fall below
        ``1e-10`` of the amplitude.
    """
    c = _check_speed(c)
    if not grid.contains(center):
        raise ProfileError(f"center {center} outside the grid")
    edge = tail_value(c, 0.5 * grid.length)
    if edge > TAIL_TOL * (c - 1.0):
        raise ProfileError(
            f"grid length {grid.length} too short for c={c}: tail {edge:.2e} at the box edge"
        )
    phi = profile_values(c, _wrapped_offset(grid, center))
    xi = phi / (c - phi)
    return SolitaryWave(c, float(center), Field(grid, phi), Field(grid, xi))


def stationary_residual(w: SolitaryWave) -> float:
    """Max-norm of the once-integrated travelling-wave equations, divided by ``c**2``.

    Both the second-order relation for ``phi`` and the algebraic relation
    ``c xi = phi (1 + xi)`` are included.
    """
    c = w.c
    phi, xi = w.phi.values, w.xi.values
    p1 = deriv(w.phi).values
    p2 = deriv(w.phi, 2).values
    r1 = (c - phi) * p2 - (c * phi - 1.5 * phi**2 + 0.5 * p1**2 - xi - 0.5 * xi**2)
    r2 = c * xi - phi * (1.0 + xi)
    return float(max(np.max(np.abs(r1)), np.max(np.abs(r2))) / c**2)


@dataclass(frozen=True)
class TrainSpec:
    """Speeds and initial centres of an ``N``-wave train."""

    speeds: tuple[float, ...]
    centers: tuple[float, ...]

    def __post_init__(self) -> None:
        sp = tuple(float(c) for c in self.speeds)
        ce = tuple(float(x) for x in self.centers)
        if len(sp) == 0 or len(sp) != len(ce):
            raise ValueError("speeds and centers must be non-empty and of equal length")
        if any(c <= 1.0 for c in sp):
            raise ProfileError("all speeds must exceed 1")
        if any(b <= a for a, b in zip(sp, sp[1:])):
            raise ValueError("speeds must be strictly increasing")
        if any(b <= a for a, b in zip(ce, ce[1:])):
            raise ValueError("centers must be strictly increasing")
        object.__setattr__(self, "speeds", sp)
        object.__setattr__(self, "centers", ce)

    @property
    def n_waves(self) -> int:
        return len(self.speeds)

    @property
    def sigma0(self) -> float:
        c = self.speeds
        gaps = [c[0]] + [b - a for a, b in zip(c, c[1:])]
        return 0.25 * min(gaps)

    @property
    def separation(self) -> float:
        """Smallest distance between neighbouring centres (``inf`` for one wave)."""
        x = self.centers
        return min((b - a for a, b in zip(x, x[1:])), default=math.inf)


@dataclass(frozen=True, eq=False)
class TrainState(State):
    """Superposition of solitary waves, with the individual waves kept."""

    waves: tuple[SolitaryWave, ...] = field(default=())
    overlap: bool = False


def default_min_separation(speeds: Sequence[float]) -> float:
    """Ten decay lengths of the widest wave in the train."""
    return 10.0 / min(decay_rate(c) for c in speeds)


def train(spec: TrainSpec, grid: Grid, min_separation: float | None = None) -> TrainState:
    """Sum of the waves ``phi_{c_i}(. - x_i)``, ``xi_{c_i}(. - x_i)``.

    Separations below ``min_separation`` do not raise; they set
    ``overlap`` on the result and emit an :class:`OverlapWarning`.
    """
    if min_separation is None:
        min_separation = default_min_separation(spec.speeds)
    waves = tuple(profile(c, x, grid) for c, x in zip(spec.speeds, spec.centers))
    u = np.sum([w.phi.values for w in waves], axis=0)
    eta = np.sum([w.xi.values for w in waves], axis=0)
    overlap = spec.separation < min_separation
    if overlap:
        warnings.warn(
            f"train separation {spec.separation:.3g} below {min_separation:.3g}",
            OverlapWarning,
            stacklevel=2,
        )
    return TrainState(Field(grid, u), Field(grid, eta), waves=waves, overlap=overlap)
