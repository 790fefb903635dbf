"""Pseudospectral RK4 evolution of the two-component system.

    u_t   = -1/2 (u^2)_x - (1 - d^2)^{-1} d/dx (u^2 + 1/2 u_x^2 + eta + 1/2 eta^2)
    eta_t = -(u + u eta)_x

Quadratic products are evaluated on a 3/2-padded grid when ``dealias`` is
on.  The state is kept in Fourier space between checkpoints, so the
trajectory does not depend on the checkpoint stride.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from . import backend as _backend
from ._kernels_py import STATUS_CFL, STATUS_FLOOR, STATUS_NONFINITE, STATUS_OK
from .grid import Field, Grid, State

BREAKDOWN_FLOOR = 1e-8

Observer = Callable[[float, State], None]


class CFLError(ValueError):
    """Time step too large for the current velocity."""

    def __init__(self, message: str, suggested_dt: float):
        super().__init__(message)
        self.suggested_dt = suggested_dt


class BreakdownError(RuntimeError):
    """``1 + eta`` reached the floor or the fields became non-finite."""


@dataclass(frozen=True)
class StepperConfig:
    """Fixed-step RK4 settings.

    Attributes
    ----------
    dt : float
        Time step, positive.
    t_end : float
        Final time measured from the initial state.
    dealias : bool
        3/2-rule padding of quadratic products.
    cfl_guard : float
        Largest allowed ``max|u| dt / spacing``, below 1.
    checkpoint_stride : int
        Steps between observer calls and stored states.
    store_every : int
        Keep every ``store_every``-th checkpoint state (0 keeps none).
    backend : str or None
        Kernel name passed to :func:`twoch.backend.resolve`.
    """

    dt: float
    t_end: float
    dealias: bool = True
    cfl_guard: float = 0.5
    checkpoint_stride: int = 100
    store_every: int = 1
    backend: str | None = None

    def __post_init__(self) -> None:
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not (0 < self.cfl_guard < 1):
            raise ValueError(f"cfl_guard must lie in (0, 1), got {self.cfl_guard}")
        if not self.t_end >= 0:
            raise ValueError(f"t_end must be non-negative, got {self.t_end}")
        if int(self.checkpoint_stride) < 1:
            raise ValueError("checkpoint_stride must be >= 1")
        if int(self.store_every) < 0:
            raise ValueError("store_every must be >= 0")
        steps = round(self.t_end / self.dt)
        if abs(steps * self.dt - self.t_end) > 1e-9 * max(1.0, self.t_end):
            raise ValueError(f"t_end={self.t_end} is not a multiple of dt={self.dt}")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))


@dataclass
class Trajectory:
    """Checkpoint times and states of one evolution."""

    grid: Grid
    times: np.ndarray
    states: list[State]
    state_times: np.ndarray
    breakdown_flag: bool = False
    breakdown_reason: str | None = None
    breakdown_time: float | None = None
    steps: int = 0
    backend: str = ""
    min_one_plus_eta: np.ndarray = field(default_factory=lambda: np.zeros(0))


def _spectral(core, s: State):
    return core.forward(s.u.values), core.forward(s.eta.values)


def _physical(core, grid: Grid, uh, eh) -> State:
    return State(Field._raw(grid, core.backward(uh)), Field._raw(grid, core.backward(eh)))


def rhs(s: State, dealias: bool = True, backend: str | None = None) -> State:
    """Time derivative ``(u_t, eta_t)`` at the state ``s``."""
    g = s.grid
    core = _backend.core(g.n, g.length, dealias, backend)
    du, de = core.rhs(*_spectral(core, s))
    out_u, out_e = core.backward(du), core.backward(de)
    if not (np.all(np.isfinite(out_u)) and np.all(np.isfinite(out_e))):
        raise BreakdownError("non-finite right-hand side")
    return State(Field._raw(g, out_u), Field._raw(g, out_e))


def max_stable_dt(s: State, cfl_guard: float) -> float:
    umax = float(np.max(np.abs(s.u.values)))
    return math.inf if umax == 0 else cfl_guard * s.grid.spacing / umax


def _raise_status(status: int, core, dt: float, cfl_guard: float, t: float) -> None:
    if status == STATUS_CFL:
        suggested = 0.9 * cfl_guard * core.h / max(core.last_umax, 1e-300)
        raise CFLError(
            f"CFL number {core.last_umax * abs(dt) / core.h:.3g} exceeds {cfl_guard} at t={t:.6g}; "
            f"use dt <= {suggested:.3g}",
            suggested,
        )
    if status == STATUS_FLOOR:
        raise BreakdownError(f"min(1+eta) = {core.last_floor:.3g} <= {BREAKDOWN_FLOOR} at t={t:.6g}")
    if status == STATUS_NONFINITE:
        raise BreakdownError(f"non-finite field at t={t:.6g}")


def advance(
    s: State,
    dt: float,
    nsteps: int = 1,
    cfl_guard: float = 0.5,
    dealias: bool = True,
    backend: str | None = None,
) -> State:
    """Take ``nsteps`` RK4 steps of size ``dt`` (negative ``dt`` runs backwards).

    Raises
    ------
    CFLError
        Before any step whose CFL number exceeds ``cfl_guard``; the input is
        never modified.
    BreakdownError
        If ``min(1+eta)`` falls to the floor or a value is non-finite.
    """
    if dt == 0 or not math.isfinite(dt):
        raise ValueError("dt must be finite and non-zero")
    g = s.grid
    core = _backend.core(g.n, g.length, dealias, backend)
    uh, eh = _spectral(core, s)
    uh, eh, done, status = core.advance(uh, eh, dt, int(nsteps), cfl_guard, BREAKDOWN_FLOOR)
    if status != STATUS_OK:
        _raise_status(status, core, dt, cfl_guard, done * dt)
    return _physical(core, g, uh, eh)


def step_rk4(s: State, dt: float, cfl_guard: float = 0.5, dealias: bool = True,
             backend: str | None = None) -> State:
    """One classical RK4 step."""
    return advance(s, dt, 1, cfl_guard, dealias, backend)


def evolve(
    s0: State,
    cfg: StepperConfig,
    observers: Iterable[Observer] = (),
    t0: float = 0.0,
) -> Trajectory:
    """Integrate ``s0`` to ``t0 + cfg.t_end``.

    Observers are called as ``obs(t, state)`` at ``t0`` and every
    ``checkpoint_stride`` steps, plus at the final time.  A breakdown ends
    the run early with ``breakdown_flag`` set; the trajectory keeps every
    checkpoint reached before it.
    """
    if not s0.min_one_plus_eta() > 0:
        raise ValueError("initial state violates 1 + eta > 0")
    observers = list(observers)
    g = s0.grid
    name = _backend.resolve(cfg.backend)
    core = _backend.core_class(name)(g.n, g.length, cfg.dealias)
    uh, eh = _spectral(core, s0)
    stride = int(cfg.checkpoint_stride)
    total = cfg.n_steps

    times: list[float] = []
    floors: list[float] = []
    states: list[State] = []
    state_times: list[float] = []
    traj = Trajectory(g, np.zeros(0), states, np.zeros(0), backend=name)

    def checkpoint(k: int, s: State) -> None:
        t = t0 + k * cfg.dt
        idx = len(times)
        times.append(t)
        floors.append(s.min_one_plus_eta())
        if cfg.store_every and idx % cfg.store_every == 0:
            states.append(s)
            state_times.append(t)
        for obs in observers:
            obs(t, s)

    checkpoint(0, s0)
    k = 0
    while k < total:
        todo = min(stride, total - k)
        uh, eh, done, status = core.advance(uh, eh, cfg.dt, todo, cfg.cfl_guard, BREAKDOWN_FLOOR)
        k += done
        if status == STATUS_CFL:
            _raise_status(status, core, cfg.dt, cfg.cfl_guard, t0 + k * cfg.dt)
        if status != STATUS_OK:
            traj.breakdown_flag = True
            traj.breakdown_time = t0 + k * cfg.dt
            traj.breakdown_reason = (
                "non-finite field" if status == STATUS_NONFINITE
                else f"min(1+eta) = {core.last_floor:.3g} reached the floor {BREAKDOWN_FLOOR}"
            )
            break
        checkpoint(k, _physical(core, g, uh, eh))

    traj.times = np.asarray(times)
    traj.state_times = np.asarray(state_times)
    traj.min_one_plus_eta = np.asarray(floors)
    traj.steps = k
    return traj
