"""Periodic grid, fields, states and the spectral operators on them.

The real line is replaced by a periodic box of length ``length`` sampled at
``n`` equispaced points.  Derivatives and the Helmholtz inverse are Fourier
multipliers; every integral is the periodic trapezoid rule.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Union

import numpy as np

Scalar = Union[int, float, np.floating]


class GridMismatchError(ValueError):
    """Raised when fields living on different grids are combined."""


@dataclass(frozen=True)
class Grid:
    """Periodic 1-D grid with ``n`` points on ``[-length/2, length/2)``.

    Parameters
    ----------
    n : int
        Number of sample points, even and at least 16.
    length : float
        Period of the domain.
    """

    n: int
    length: float

    def __post_init__(self) -> None:
        if int(self.n) != self.n or self.n < 16 or self.n % 2:
            raise ValueError(f"grid size must be an even integer >= 16, got {self.n}")
        if not (np.isfinite(self.length) and self.length > 0):
            raise ValueError(f"grid length must be positive, got {self.length}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "length", float(self.length))

    @property
    def spacing(self) -> float:
        return self.length / self.n

    @cached_property
    def x(self) -> np.ndarray:
        # (j - n/2)*h keeps mirrored points exact negatives of each other
        x = (np.arange(self.n) - self.n // 2) * self.spacing
        x.setflags(write=False)
        return x

    @cached_property
    def k(self) -> np.ndarray:
        """Non-negative wavenumbers of the real transform, ``2*pi*m/length``."""
        k = 2.0 * np.pi / self.length * np.arange(self.n // 2 + 1)
        k.setflags(write=False)
        return k

    @cached_property
    def ik(self) -> np.ndarray:
        """First-derivative multiplier with the Nyquist mode removed."""
        ik = 1j * np.asarray(self.k)
        ik[-1] = 0.0
        ik.setflags(write=False)
        return ik

    @cached_property
    def helmholtz_symbol(self) -> np.ndarray:
        s = 1.0 / (1.0 + np.asarray(self.k) ** 2)
        s.setflags(write=False)
        return s

    def field(self, values) -> "Field":
        return Field(self, values)

    def zeros(self) -> "Field":
        return Field(self, np.zeros(self.n))

    def integrate(self, values: np.ndarray) -> float:
        """Periodic trapezoid rule."""
        return float(self.spacing * np.sum(values))

    def contains(self, x: float) -> bool:
        return -0.5 * self.length <= x < 0.5 * self.length


def _check_same(a: Grid, b: Grid) -> None:
    if a != b:
        raise GridMismatchError(f"grids differ: {a} vs {b}")


class Field:
    """Real samples on a :class:`Grid`.  Immutable.

    Arithmetic with another Field requires an identical grid; scalars
    broadcast.
    """

    __slots__ = ("grid", "values")

    def __init__(self, grid: Grid, values) -> None:
        v = np.array(values, dtype=float, copy=True)
        if v.shape != (grid.n,):
            raise ValueError(f"expected {grid.n} samples, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", v)

    def __setattr__(self, name, value):
        raise AttributeError("Field is immutable")

    @classmethod
    def _raw(cls, grid: Grid, values: np.ndarray) -> "Field":
        # trusted constructor for internally produced arrays
        obj = cls.__new__(cls)
        values = np.ascontiguousarray(values, dtype=float)
        values.setflags(write=False)
        object.__setattr__(obj, "grid", grid)
        object.__setattr__(obj, "values", values)
        return obj

    def _other(self, other) -> np.ndarray | Scalar:
        if isinstance(other, Field):
            _check_same(self.grid, other.grid)
            return other.values
        if np.isscalar(other):
            return other
        return NotImplemented

    def __add__(self, other):
        o = self._other(other)
        if o is NotImplemented:
            return o
        return Field(self.grid, self.values + o)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._other(other)
        if o is NotImplemented:
            return o
        return Field(self.grid, self.values - o)

    def __rsub__(self, other):
        o = self._other(other)
        if o is NotImplemented:
            return o
        return Field(self.grid, o - self.values)

    def __mul__(self, other):
        o = self._other(other)
        if o is NotImplemented:
            return o
        return Field(self.grid, self.values * o)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._other(other)
        if o is NotImplemented:
            return o
        return Field(self.grid, self.values / o)

    def __neg__(self):
        return Field._raw(self.grid, -self.values)

    def __len__(self) -> int:
        return self.grid.n

    def __repr__(self) -> str:
        return f"Field(n={self.grid.n}, length={self.grid.length}, max|f|={np.max(np.abs(self.values)):.3g})"

    def integral(self) -> float:
        return self.grid.integrate(self.values)


@dataclass(frozen=True)
class State:
    """The pair ``(u, eta)`` on a common grid."""

    u: Field
    eta: Field

    def __post_init__(self) -> None:
        _check_same(self.u.grid, self.eta.grid)

    @classmethod
    def from_arrays(cls, grid: Grid, u, eta) -> "State":
        return cls(Field(grid, u), Field(grid, eta))

    @classmethod
    def zeros(cls, grid: Grid) -> "State":
        return cls(grid.zeros(), grid.zeros())

    @property
    def grid(self) -> Grid:
        return self.u.grid

    def min_one_plus_eta(self) -> float:
        return float(1.0 + np.min(self.eta.values))

    def __add__(self, other: "State") -> "State":
        if not isinstance(other, State):
            return NotImplemented
        return State(self.u + other.u, self.eta + other.eta)

    def __sub__(self, other: "State") -> "State":
        if not isinstance(other, State):
            return NotImplemented
        return State(self.u - other.u, self.eta - other.eta)

    def __mul__(self, a: Scalar) -> "State":
        if not np.isscalar(a):
            return NotImplemented
        return State(self.u * a, self.eta * a)

    __rmul__ = __mul__

    def __neg__(self) -> "State":
        return State(-self.u, -self.eta)

    def shifted(self, dx: float) -> "State":
        """Translate both components by ``dx`` (spectral phase shift)."""
        return State(shift(self.u, dx), shift(self.eta, dx))


def _require_finite(f: Field) -> None:
    if not np.all(np.isfinite(f.values)):
        raise ValueError("non-finite field")


def deriv(f: Field, order: int = 1) -> Field:
    """Spectral derivative of order ``order``.

    Odd orders drop the Nyquist mode so the discrete operator is
    skew-symmetric.
    """
    g = f.grid
    fh = np.fft.rfft(f.values)
    if order % 2:
        mult = g.ik ** order
    else:
        mult = (-(np.asarray(g.k) ** 2)) ** (order // 2)
    return Field._raw(g, np.fft.irfft(fh * mult, g.n))


def helmholtz_inverse(f: Field) -> Field:
    """Apply ``(1 - d^2/dx^2)^{-1}``, i.e. convolution with ``exp(-|x|)/2``."""
    g = f.grid
    return Field._raw(g, np.fft.irfft(np.fft.rfft(f.values) * g.helmholtz_symbol, g.n))


def helmholtz(f: Field) -> Field:
    """Apply ``1 - d^2/dx^2``."""
    g = f.grid
    return Field._raw(g, np.fft.irfft(np.fft.rfft(f.values) * (1.0 + np.asarray(g.k) ** 2), g.n))


def shift(f: Field, dx: float) -> Field:
    """Return ``f(x - dx)`` for the trigonometric interpolant of ``f``."""
    g = f.grid
    fh = np.fft.rfft(f.values) * np.exp(-1j * np.asarray(g.k) * dx)
    fh[-1] = 0.0
    return Field._raw(g, np.fft.irfft(fh, g.n))


def x_inner(a: State, b: State) -> float:
    """Inner product of ``X = H^1 x L^2``: ``int(a_u b_u + a_u' b_u' + a_eta b_eta)``."""
    _check_same(a.grid, b.grid)
    g = a.grid
    au, bu = np.fft.rfft(a.u.values), np.fft.rfft(b.u.values)
    dau = np.fft.irfft(au * g.ik, g.n)
    dbu = np.fft.irfft(bu * g.ik, g.n)
    return g.integrate(a.u.values * b.u.values + dau * dbu + a.eta.values * b.eta.values)


def x_norm(s: State) -> float:
    return float(np.sqrt(max(x_inner(s, s), 0.0)))


def l2_inner(a: State, b: State) -> float:
    """The ``L^2 x L^2`` pairing used for variational derivatives."""
    _check_same(a.grid, b.grid)
    return a.grid.integrate(a.u.values * b.u.values + a.eta.values * b.eta.values)


def green_kernel(x: np.ndarray, length: float | None = None) -> np.ndarray:
    """Green function ``exp(-|x|)/2`` of ``1 - d^2``; periodized when ``length`` is given."""
    x = np.asarray(x, dtype=float)
    if length is None:
        return 0.5 * np.exp(-np.abs(x))
    r = np.abs(np.mod(x + 0.5 * length, length) - 0.5 * length)
    # sum over images of exp(-|x + mL|)/2 in closed form
    return 0.5 * np.cosh(0.5 * length - r) / np.sinh(0.5 * length)
