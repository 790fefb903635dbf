"""Modulation of an N-wave train: centre fitting, tracking, decomposition.

For centres ``x_1 < ... < x_N`` write ``R_i = phi_{c_i}(. - x_i)``,
``S_i = xi_{c_i}(. - x_i)``, ``R = sum R_i``, ``S = sum S_i`` and
``v = u - R``, ``zeta = eta - S``.  The centres are fitted by Newton's
method on

    Y^i = int v (1 - d^2) d R_i + int zeta d S_i = 0,   i = 1..N,

with the analytic Jacobian.  Shifted profiles are produced by a Fourier
phase shift of profiles computed once at the origin.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dynamics import Trajectory
from .functionals import Partition, default_K
from .grid import Field, Grid, State, x_norm
from .solitary import TrainSpec, profile

FIT_TOL = 1e-10
MAX_ITER = 50
CREST_RADIUS = 1.0
CREST_FRACTION = 0.5


class ModulationError(RuntimeError):
    """Fitting failed; carries the best iterate when one exists."""

    def __init__(self, message: str, best_centers=None, residual: float = math.nan):
        super().__init__(message)
        self.best_centers = None if best_centers is None else np.asarray(best_centers)
        self.residual = residual


@dataclass(frozen=True)
class ModulationFit:
    centers: np.ndarray
    Y: np.ndarray
    iterations: int
    remainder: State
    remainder_norm: float
    jacobian: np.ndarray

    @property
    def residual(self) -> float:
        return float(np.max(np.abs(self.Y)))

    @property
    def v(self) -> Field:
        return self.remainder.u

    @property
    def zeta(self) -> Field:
        return self.remainder.eta


def diagonally_dominant(J: np.ndarray) -> bool:
    d = np.abs(np.diag(J))
    off = np.sum(np.abs(J), axis=1) - d
    return bool(np.all(d > off))


class ModulationModel:
    """Profiles of the given speeds on a grid, ready to be shifted.

    Parameters
    ----------
    grid : Grid
    speeds : sequence of float
        Increasing speeds ``c_1 < ... < c_N``.
    """

    def __init__(self, grid: Grid, speeds: Sequence[float]):
        self.grid = grid
        self.speeds = np.asarray(speeds, dtype=float)
        if np.any(np.diff(self.speeds) <= 0):
            raise ValueError("speeds must be strictly increasing")
        self.waves = [profile(c, 0.0, grid) for c in self.speeds]
        self._phi_hat = np.array([np.fft.rfft(w.phi.values) for w in self.waves])
        self._xi_hat = np.array([np.fft.rfft(w.xi.values) for w in self.waves])
        self._phi_hat[:, -1] = 0.0
        self._xi_hat[:, -1] = 0.0
        k = np.asarray(grid.k)
        ik = np.asarray(grid.ik)
        self._k2 = k * k
        self._ik = ik
        # norms of the centred profiles
        self.profile_norms = np.array([x_norm(w.state()) for w in self.waves])
        # ||phi'||_{H^1}^2 + ||xi'||^2, the diagonal of the Jacobian at an exact train
        self.translation_norms = np.array(
            [grid.integrate(self._bt(ph * ik) ** 2 + self._bt(ph * ik * ik) ** 2 + self._bt(xh * ik) ** 2)
             for ph, xh in zip(self._phi_hat, self._xi_hat)]
        )

    @property
    def n_waves(self) -> int:
        return self.speeds.size

    def _bt(self, fh: np.ndarray) -> np.ndarray:
        return np.fft.irfft(fh, self.grid.n)

    def _phase(self, x: float) -> np.ndarray:
        return np.exp(-1j * np.asarray(self.grid.k) * x)

    def pieces(self, centers: Sequence[float]) -> dict[str, np.ndarray]:
        """Shifted profiles and the derivative combinations used by Newton."""
        ik, k2 = self._ik, self._k2
        out = {name: [] for name in ("R", "S", "Rx", "Sx", "A", "Ax", "Sxx")}
        for i, x in enumerate(centers):
            ph = self._phase(x)
            r = self._phi_hat[i] * ph
            s = self._xi_hat[i] * ph
            out["R"].append(self._bt(r))
            out["S"].append(self._bt(s))
            out["Rx"].append(self._bt(ik * r))
            out["Sx"].append(self._bt(ik * s))
            out["A"].append(self._bt(ik * (1.0 + k2) * r))          # (1-d^2) d R
            out["Ax"].append(self._bt(ik * ik * (1.0 + k2) * r))    # (1-d^2) d^2 R
            out["Sxx"].append(self._bt(ik * ik * s))
        return {k_: np.array(v) for k_, v in out.items()}

    def train_arrays(self, centers: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
        R = np.zeros(self.grid.n)
        S = np.zeros(self.grid.n)
        for i, x in enumerate(centers):
            ph = self._phase(x)
            R += self._bt(self._phi_hat[i] * ph)
            S += self._bt(self._xi_hat[i] * ph)
        return R, S

    def train_state(self, centers: Sequence[float]) -> State:
        R, S = self.train_arrays(centers)
        return State(Field(self.grid, R), Field(self.grid, S))

    def remainder(self, s: State, centers: Sequence[float]) -> State:
        return s - self.train_state(centers)

    def distance(self, s: State, centers: Sequence[float]) -> float:
        """``|| u - sum phi_{c_i}(. - x_i) ||_X``."""
        return x_norm(self.remainder(s, centers))

    def _check_centers(self, centers) -> np.ndarray:
        c = np.asarray(centers, dtype=float)
        if c.shape != (self.n_waves,):
            raise ValueError(f"expected {self.n_waves} centers, got shape {c.shape}")
        for x in c:
            if not self.grid.contains(x):
                raise ModulationError(f"center {x} outside the grid", c)
        if np.any(np.diff(c) <= 0):
            raise ModulationError("bump ordering lost", c)
        return c

    def residual(self, s: State, centers: Sequence[float]) -> np.ndarray:
        """The vector ``Y`` at the given centres."""
        c = self._check_centers(centers)
        p = self.pieces(c)
        v = s.u.values - p["R"].sum(axis=0)
        z = s.eta.values - p["S"].sum(axis=0)
        g = self.grid
        return np.array([g.integrate(v * p["A"][i] + z * p["Sx"][i]) for i in range(self.n_waves)])

    def _system(self, s: State, c: np.ndarray):
        g = self.grid
        p = self.pieces(c)
        v = s.u.values - p["R"].sum(axis=0)
        z = s.eta.values - p["S"].sum(axis=0)
        N = self.n_waves
        Y = np.empty(N)
        J = np.empty((N, N))
        for i in range(N):
            Y[i] = g.integrate(v * p["A"][i] + z * p["Sx"][i])
            for j in range(N):
                J[i, j] = g.integrate(p["Rx"][j] * p["A"][i] + p["Sx"][j] * p["Sx"][i])
            J[i, i] -= g.integrate(v * p["Ax"][i] + z * p["Sxx"][i])
        return Y, J, v, z

    def check_basin(self, s: State, guess: np.ndarray) -> None:
        """Each guess must sit within one unit of a crest of ``u`` of at least
        half the expected amplitude."""
        x = self.grid.x
        L = self.grid.length
        u = s.u.values
        for xi, c in zip(guess, self.speeds):
            d = np.abs(np.mod(x - xi + 0.5 * L, L) - 0.5 * L)
            near = d <= CREST_RADIUS
            if not np.any(near) or np.max(u[near]) < CREST_FRACTION * (c - 1.0):
                raise ModulationError(
                    f"no crest of height >= {CREST_FRACTION * (c - 1.0):.3g} within "
                    f"{CREST_RADIUS} of guess {xi:.6g}", guess)

    def fit(self, s: State, guess: Sequence[float], tol: float = FIT_TOL,
            max_iter: int = MAX_ITER, check_basin: bool = True) -> ModulationFit:
        """Newton iteration on ``Y`` from ``guess``.

        Raises
        ------
        ModulationError
            On a guess outside the basin, loss of ordering, a singular
            Jacobian, or no convergence within ``max_iter`` updates.
        """
        if s.grid != self.grid:
            raise ValueError("state lives on a different grid")
        c = self._check_centers(guess)
        if check_basin:
            self.check_basin(s, c)
        best, best_res = c.copy(), math.inf
        it = 0
        while True:
            Y, J, v, z = self._system(s, c)
            res = float(np.max(np.abs(Y)))
            if res < best_res:
                best, best_res = c.copy(), res
            if res < tol:
                rem = State(Field(self.grid, v), Field(self.grid, z))
                return ModulationFit(c, Y, it, rem, x_norm(rem), J)
            if it >= max_iter:
                raise ModulationError(
                    f"no convergence in {max_iter} iterations (residual {best_res:.3g})",
                    best, best_res)
            try:
                step = np.linalg.solve(J, Y)
            except np.linalg.LinAlgError:
                raise ModulationError("singular Jacobian", best, best_res) from None
            c = c - step
            it += 1
            if not np.all(np.isfinite(c)):
                raise ModulationError("non-finite iterate", best, best_res)
            if np.any(np.diff(c) <= 0):
                raise ModulationError("bump ordering lost", best, best_res)
            for x in c:
                if not self.grid.contains(x):
                    raise ModulationError(f"center {x} left the grid", best, best_res)


def orthogonality_residual(s: State, speeds: Sequence[float], centers: Sequence[float]) -> np.ndarray:
    return ModulationModel(s.grid, speeds).residual(s, centers)


def fit_modulation(s: State, speeds: Sequence[float], guess: Sequence[float], **kw) -> ModulationFit:
    return ModulationModel(s.grid, speeds).fit(s, guess, **kw)


def crest_guess(s: State, n_waves: int, min_gap: float = 2.0) -> np.ndarray:
    """Positions of the ``n_waves`` highest well-separated local maxima of ``u``.

    Maxima are refined by parabolic interpolation and returned in
    increasing order.
    """
    u = s.u.values
    x = s.grid.x
    h = s.grid.spacing
    n = u.size
    left, right = np.roll(u, 1), np.roll(u, -1)
    idx = np.nonzero((u >= left) & (u > right))[0]
    idx = idx[np.argsort(-u[idx], kind="stable")]
    chosen: list[int] = []
    L = s.grid.length
    for j in idx:
        if all(abs(((x[j] - x[k] + 0.5 * L) % L) - 0.5 * L) > min_gap for k in chosen):
            chosen.append(int(j))
        if len(chosen) == n_waves:
            break
    if len(chosen) < n_waves:
        raise ModulationError(f"found {len(chosen)} crests, need {n_waves}")
    out = []
    for j in chosen:
        a, b, c = u[(j - 1) % n], u[j], u[(j + 1) % n]
        den = a - 2 * b + c
        off = 0.5 * (a - c) / den if den != 0 else 0.0
        out.append(x[j] + off * h)
    return np.sort(np.array(out))


@dataclass(frozen=True)
class Decomposition:
    a: np.ndarray
    psi: tuple[State, ...]
    constraint_residual: np.ndarray
    denominators: np.ndarray


def decompose_a(s: State, fit: ModulationFit, part: Partition, model: ModulationModel) -> Decomposition:
    """Scalars ``a_i`` with ``u = (1 + a_i) R + psi_i`` and
    ``<E_i'(R), psi_i> = 0``, where ``E_i' (R) = (Phi_i R - (Phi_i R_x)_x, Phi_i S)``.

    Raises
    ------
    ModulationError
        If ``<E_i'(R), R>`` falls below half of ``||phi_{c_i}||_X^2``.
    """
    g = s.grid
    R, S = model.train_arrays(fit.centers)
    Rh = np.fft.rfft(R)
    Rx = np.fft.irfft(Rh * g.ik, g.n)
    Rxx = np.fft.irfft(-Rh * np.asarray(g.k) ** 2, g.n)
    v = s.u.values - R
    z = s.eta.values - S
    a = np.empty(part.n_waves)
    dens = np.empty(part.n_waves)
    res = np.empty(part.n_waves)
    psis = []
    for i in range(part.n_waves):
        Phi = part.phi(i + 1)
        dPhi = part.phi(i + 1, 1)
        Gu = Phi * R - dPhi * Rx - Phi * Rxx
        Ge = Phi * S
        den = g.integrate(Gu * R + Ge * S)
        floor = 0.5 * model.profile_norms[i] ** 2
        if not den > floor:
            raise ModulationError(f"degenerate train: <E_{i + 1}'(R), R> = {den:.3g} <= {floor:.3g}")
        a[i] = g.integrate(Gu * v + Ge * z) / den
        pu = s.u.values - (1.0 + a[i]) * R
        pe = s.eta.values - (1.0 + a[i]) * S
        res[i] = g.integrate(Gu * pu + Ge * pe)
        dens[i] = den
        psis.append(State(Field(g, pu), Field(g, pe)))
    return Decomposition(a, tuple(psis), res, dens)


@dataclass
class ModulationTrack:
    """Fitted modulation parameters at the checkpoints of a trajectory."""

    times: np.ndarray
    centers: np.ndarray            # (T, N)
    speeds_est: np.ndarray         # (T, N); one-sided at the two ends
    interior: np.ndarray           # (T,) mask of centred-difference points
    separations: np.ndarray        # (T, N-1)
    remainder_norms: np.ndarray    # (T,)
    residuals: np.ndarray          # (T,) max |Y|
    iterations: np.ndarray         # (T,)
    a: np.ndarray                  # (T, N)
    fits: list = field(default_factory=list)
    failure: str | None = None
    failed_at: float | None = None

    @property
    def truncated(self) -> bool:
        return self.failure is not None


def finite_difference_speeds(times: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Second-order differences on a possibly uneven time grid."""
    t = np.asarray(times, dtype=float)
    x = np.asarray(x, dtype=float)
    out = np.full_like(x, np.nan)
    if t.size < 2:
        return out
    if t.size == 2:
        out[:] = (x[1] - x[0]) / (t[1] - t[0])
        return out
    h0 = t[1:-1] - t[:-2]
    h1 = t[2:] - t[1:-1]
    out[1:-1] = (
        -h1[:, None] / (h0 * (h0 + h1))[:, None] * x[:-2]
        + ((h1 - h0) / (h0 * h1))[:, None] * x[1:-1]
        + h0[:, None] / (h1 * (h0 + h1))[:, None] * x[2:]
    )
    for end, (i0, i1, i2) in ((0, (0, 1, 2)), (-1, (-1, -2, -3))):
        a_, b_ = t[i1] - t[i0], t[i2] - t[i0]
        # derivative at t[i0] of the quadratic through three points
        w1 = b_ / (a_ * (b_ - a_))
        w2 = -a_ / (b_ * (b_ - a_))
        out[end] = -(w1 + w2) * x[i0] + w1 * x[i1] + w2 * x[i2]
    return out


def track(
    traj: Trajectory,
    spec: TrainSpec | Sequence[float],
    K: float | None = None,
    tol: float = FIT_TOL,
    model: ModulationModel | None = None,
    keep_fits: bool = False,
) -> ModulationTrack:
    """Fit every stored checkpoint, warm-starting from the previous one.

    The first guess comes from :func:`crest_guess`; later guesses move the
    previous centres by ``c_i * dt``.  A failed fit truncates the track and
    records the reason.
    """
    speeds = spec.speeds if isinstance(spec, TrainSpec) else tuple(spec)
    g = traj.grid
    model = model or ModulationModel(g, speeds)
    N = model.n_waves
    times = np.asarray(traj.state_times, dtype=float)
    C, D, RES, IT, A = [], [], [], [], []
    fits = []
    failure = failed_at = None
    guess = None
    if K is None and isinstance(spec, TrainSpec):
        K = default_K(spec.separation)
    for k, (t, s) in enumerate(zip(times, traj.states)):
        try:
            if guess is None:
                guess = crest_guess(s, N)
            else:
                guess = C[-1] + model.speeds * (t - times[k - 1])
            fit = model.fit(s, guess, tol=tol)
            part = Partition(g, fit.centers, K if K is not None else 5.0)
            dec = decompose_a(s, fit, part, model)
        except (ModulationError, ValueError) as exc:
            failure, failed_at = str(exc), float(t)
            break
        C.append(fit.centers)
        D.append(fit.remainder_norm)
        RES.append(fit.residual)
        IT.append(fit.iterations)
        A.append(dec.a)
        if keep_fits:
            fits.append(fit)
    T = len(C)
    times = times[:T]
    centers = np.array(C).reshape(T, N)
    speeds_est = finite_difference_speeds(times, centers) if T else np.zeros((0, N))
    interior = np.zeros(T, dtype=bool)
    interior[1:-1] = True
    return ModulationTrack(
        times=times,
        centers=centers,
        speeds_est=speeds_est,
        interior=interior,
        separations=np.diff(centers, axis=1),
        remainder_norms=np.array(D),
        residuals=np.array(RES),
        iterations=np.array(IT, dtype=int),
        a=np.array(A).reshape(T, N),
        fits=fits,
        failure=failure,
        failed_at=failed_at,
    )
