"""Experiment drivers: propagation, monotonicity, stability and coercivity.

Every train run evolves a (perturbed) superposition of solitary waves and,
at each checkpoint, fits the centres, measures the modulated distance
``d = || u - sum phi_{c_i}(. - x_i) ||_X``, the localized energies and the
scalars ``a_i``.  Results go to one directory per run; sweeps aggregate
their members in a summary record.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from . import io
from .coercivity import CoercivityReport, constrained_spectrum
from .config import RunConfig
from .dynamics import BreakdownError, CFLError, evolve
from .functionals import Partition, energy_E, energy_F, localized_energies
from .grid import Grid, State, shift, x_norm
from .modulation import (
    ModulationError,
    ModulationModel,
    crest_guess,
    decompose_a,
    finite_difference_speeds,
)
from .solitary import ProfileError, TrainSpec, profile, required_length, train

log = logging.getLogger(__name__)

STATUS_OK = "ok"
STATUS_BREAKDOWN = "breakdown"
STATUS_FIT = "fit-failure"


class ExperimentError(RuntimeError):
    """A run could not be set up."""


# perturbations ------------------------------------------------------------

def _band_limited(grid: Grid, rng: np.random.Generator, kmax: float) -> np.ndarray:
    m = np.asarray(grid.k)
    live = (m > 0) & (m <= kmax)
    coef = np.zeros(m.size, dtype=complex)
    coef[live] = rng.standard_normal(live.sum()) + 1j * rng.standard_normal(live.sum())
    return np.fft.irfft(coef, grid.n)


def localized_gradients(R: np.ndarray, S: np.ndarray, part: Partition) -> list[np.ndarray]:
    """``E_i'`` and ``F_i'`` of the localized functionals at ``(R, S)``, stacked ``(u, eta)``."""
    g = part.grid
    Rh = np.fft.rfft(R)
    Rx = np.fft.irfft(Rh * g.ik, g.n)
    Rxx = np.fft.irfft(-Rh * np.asarray(g.k) ** 2, g.n)
    out = []
    for i in range(1, part.n_waves + 1):
        P, dP = part.phi(i), part.phi(i, 1)
        Eu = P * R - dP * Rx - P * Rxx
        flux = P * R * Rx
        dflux = np.fft.irfft(np.fft.rfft(flux) * g.ik, g.n)
        Fu = P * (1.5 * R**2 + 0.5 * Rx**2 + S + 0.5 * S**2) - dflux
        Fe = P * (R + R * S)
        out.append(np.concatenate([Eu, P * S]))
        out.append(np.concatenate([Fu, Fe]))
    return out


def modulation_directions(model: ModulationModel, centers: Sequence[float]) -> list[np.ndarray]:
    """``((1 - d^2) d R_i, d S_i)``: a perturbation orthogonal to these leaves the fitted centres unchanged."""
    p = model.pieces(centers)
    return [np.concatenate([p["A"][i], p["Sx"][i]]) for i in range(model.n_waves)]


def perturbation(cfg: RunConfig, base: State, spec: TrainSpec, eps: float, K: float) -> State:
    """Perturbation of X-norm ``eps`` of the requested kind (zero for ``eps = 0``)."""
    g = base.grid
    kind = cfg.perturb_kind
    if eps == 0 or kind == "none":
        return State.zeros(g)
    rng = np.random.default_rng(cfg.seed)
    if kind == "scaled-profile":
        h = base
    elif kind == "localized-bump":
        x0 = 0.5 * (spec.centers[0] + spec.centers[1]) if spec.n_waves > 1 else \
            spec.centers[0] - 0.25 * g.length
        u = np.exp(-(((g.x - x0) / cfg.bump_width) ** 2))
        h = State.from_arrays(g, u, np.zeros(g.n))
    elif kind in ("random-smooth", "energy-neutral"):
        u = _band_limited(g, rng, cfg.kmax)
        e = _band_limited(g, rng, cfg.kmax)
        if kind == "energy-neutral":
            win = sum(np.exp(-(((g.x - x) / (2.0 * cfg.bump_width)) ** 2)) for x in spec.centers)
            u, e = u * win, e * win
            # orthogonal to the localized E_i', F_i' and the modulation equations,
            # so the initial fit returns the nominal centres and every a_i(0) vanishes
            part = Partition(g, spec.centers, K)
            model = ModulationModel(g, spec.speeds)
            B = np.array(localized_gradients(base.u.values, base.eta.values, part)
                         + modulation_directions(model, spec.centers)).T
            v = np.concatenate([u, e])
            v = v - B @ np.linalg.lstsq(B, v, rcond=None)[0]
            u, e = v[: g.n], v[g.n:]
        h = State.from_arrays(g, u, e)
    else:
        raise ExperimentError(f"unknown perturbation kind {kind!r}")
    return h * (eps / x_norm(h))


# a single train run -------------------------------------------------------

@dataclass
class RunResult:
    """Diagnostics of one evolution at its checkpoints."""

    name: str
    speeds: tuple[float, ...]
    L: float
    eps: float
    K: float
    status: str = STATUS_OK
    message: str = ""
    times: np.ndarray = field(default_factory=lambda: np.zeros(0))
    E: np.ndarray = field(default_factory=lambda: np.zeros(0))
    F: np.ndarray = field(default_factory=lambda: np.zeros(0))
    floor: np.ndarray = field(default_factory=lambda: np.zeros(0))
    d: np.ndarray = field(default_factory=lambda: np.zeros(0))
    centers: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    xdot: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    I: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    a: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    I_train: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    residuals: np.ndarray = field(default_factory=lambda: np.zeros(0))
    extra: dict = field(default_factory=dict)
    initial_state: State | None = field(default=None, repr=False)
    final_state: State | None = field(default=None, repr=False)

    @property
    def n_waves(self) -> int:
        return len(self.speeds)

    @property
    def ok(self) -> bool:
        return self.status == STATUS_OK

    @property
    def sup_d(self) -> np.ndarray:
        """Running supremum of ``d``."""
        return np.maximum.accumulate(self.d) if self.d.size else self.d

    @property
    def E0(self) -> float:
        return float(self.E[0])

    @property
    def E_drift(self) -> float:
        return float(np.max(np.abs(self.E - self.E[0])) / abs(self.E[0]))

    @property
    def F_drift(self) -> float:
        return float(np.max(np.abs(self.F - self.F[0])) / abs(self.F[0]))

    @property
    def separations(self) -> np.ndarray:
        return np.diff(self.centers, axis=1)

    @property
    def interior(self) -> np.ndarray:
        m = np.zeros(self.times.size, dtype=bool)
        m[1:-1] = True
        return m

    def I_excess(self) -> np.ndarray:
        """``max_t (I_j(t) - I_j(0))`` for ``j = 2..N``."""
        if self.I.size == 0:
            return np.zeros(0)
        return np.max(self.I - self.I[0], axis=0)

    def I_excess_beyond_train(self) -> np.ndarray:
        """Excess of ``I_j`` over that of the exact superposition at the fitted centres."""
        if self.I.size == 0:
            return np.zeros(0)
        return np.max((self.I - self.I[0]) - (self.I_train - self.I_train[0]), axis=0)

    def rows(self) -> list[list[float]]:
        out = []
        for k, t in enumerate(self.times):
            out.append(
                [t, self.E[k], self.F[k], self.floor[k], self.d[k]]
                + list(self.centers[k]) + list(self.xdot[k]) + list(self.separations[k])
                + list(self.I[k]) + list(self.a[k])
            )
        return out

    def summary(self) -> dict:
        rec = {
            "name": self.name,
            "status": self.status,
            "message": self.message or "none",
            "speeds": self.speeds,
            "L": self.L,
            "eps": self.eps,
            "K": self.K,
            "checkpoints": int(self.times.size),
        }
        if self.times.size:
            rec.update({
                "t_last": float(self.times[-1]),
                "E0": self.E0,
                "E_drift": self.E_drift,
                "F_drift": self.F_drift,
                "sup_d": float(self.sup_d[-1]),
                "max_residual": float(np.max(self.residuals)),
                "max_abs_a": float(np.max(np.abs(self.a))),
                "I_excess": self.I_excess(),
                "I_excess_beyond_train": self.I_excess_beyond_train(),
            })
        rec.update(self.extra)
        return rec

    def write(self, directory: str | Path) -> Path:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        io.write_diagnostics(d / "diagnostics.csv", self.n_waves, self.rows())
        io.write_record(d / "summary.txt", self.summary())
        return d


class _FitStop(Exception):
    pass


def run_train(cfg: RunConfig, L: float | None = None, eps: float | None = None,
              name: str = "run", out_dir: str | Path | None = None,
              initial: Callable[[Grid], State] | None = None) -> RunResult:
    """Evolve the configured train and fit it at every checkpoint.

    ``L`` and ``eps`` override the configured separation and amplitude.
    Breakdown and fit failures end the run early with ``status`` set; the
    checkpoints reached so far are kept.
    """
    eps = cfg.eps if eps is None else float(eps)
    spec = cfg.train_spec(L)
    K = cfg.weight_K(L)
    g = Grid(cfg.grid_n, cfg.grid_length)
    base = train(spec, g)
    s0 = initial(g) if initial is not None else base + perturbation(cfg, base, spec, eps, K)
    model = ModulationModel(g, spec.speeds)
    res = RunResult(name, spec.speeds, spec.separation, eps, K, initial_state=s0)
    dump_dir = None
    if out_dir is not None and cfg.dump_fields:
        dump_dir = Path(out_dir) / "fields"
        dump_dir.mkdir(parents=True, exist_ok=True)

    T, E, F, FL, D, C, I, IT, A, RES = ([] for _ in range(10))
    prev: dict = {}

    def observe(t: float, s: State) -> None:
        try:
            if not C:
                guess = np.asarray(spec.centers) if initial is None else crest_guess(s, spec.n_waves)
            else:
                guess = C[-1] + model.speeds * (t - prev["t"])
            fit = model.fit(s, guess)
            part = Partition(g, fit.centers, K)
            dec = decompose_a(s, fit, part, model)
        except (ModulationError, ValueError) as exc:
            res.status, res.message = STATUS_FIT, f"t={t:.6g}: {exc}"
            raise _FitStop from None
        prev["t"] = t
        res.final_state = s
        T.append(t)
        E.append(energy_E(s))
        F.append(energy_F(s))
        FL.append(s.min_one_plus_eta())
        D.append(fit.remainder_norm)
        C.append(fit.centers)
        I.append(localized_energies(s, part).I)
        IT.append(localized_energies(model.train_state(fit.centers), part).I)
        A.append(dec.a)
        RES.append(fit.residual)
        if dump_dir is not None and (len(T) - 1) % cfg.dump_every == 0:
            io.dump_fields(dump_dir / f"t_{len(T) - 1:05d}.txt", t, s)

    stepper = cfg.stepper()
    try:
        if not s0.min_one_plus_eta() > 0:
            raise BreakdownError(f"t=0: initial min(1+eta) = {s0.min_one_plus_eta():.3g}")
        traj = evolve(s0, _replace_store(stepper), [observe])
        if traj.breakdown_flag:
            res.status, res.message = STATUS_BREAKDOWN, (
                f"t={traj.breakdown_time:.6g}: {traj.breakdown_reason}")
    except _FitStop:
        pass
    except (BreakdownError, CFLError) as exc:
        res.status, res.message = STATUS_BREAKDOWN, str(exc)

    N = spec.n_waves
    n = len(T)
    res.times = np.array(T)
    res.E, res.F, res.floor, res.d = map(np.array, (E, F, FL, D))
    res.centers = np.array(C).reshape(n, N)
    res.xdot = finite_difference_speeds(res.times, res.centers) if n > 1 else np.zeros((n, N))
    res.I = np.array(I).reshape(n, N - 1)
    res.I_train = np.array(IT).reshape(n, N - 1)
    res.a = np.array(A).reshape(n, N)
    res.residuals = np.array(RES)
    log.info("%s: %s, %d checkpoints, sup d = %.3g", name, res.status, n,
             float(res.sup_d[-1]) if n else math.nan)
    if out_dir is not None:
        res.write(out_dir)
    return res


def _replace_store(stepper):
    return replace(stepper, store_every=0)


# propagation ---------------------------------------------------------------

def shape_error(s: State, ref: State, guess: float) -> float:
    """``min_shift ||s - ref(. - shift)||_X / ||ref||_X`` near ``guess``."""
    h = s.grid.spacing
    ref_norm = x_norm(ref)

    def err(dx: float) -> float:
        sh = State(shift(ref.u, dx), shift(ref.eta, dx))
        return x_norm(s - sh)

    best = minimize_scalar(err, bounds=(guess - 2 * h, guess + 2 * h), method="bounded",
                           options={"xatol": 1e-12})
    return float(min(best.fun, err(guess)) / ref_norm)


def run_propagation(cfg: RunConfig, out_dir: str | Path | None = None) -> RunResult:
    """Single-wave run; adds shape error, measured speed and drifts to the summary."""
    spec = cfg.train_spec()
    if spec.n_waves != 1:
        raise ExperimentError("propagation needs exactly one wave")
    res = run_train(cfg, name="propagate", out_dir=out_dir)
    c = spec.speeds[0]
    last = float(res.times[-1]) if res.times.size else 0.0
    if last > 0:
        moved = float(res.centers[-1, 0] - res.centers[0, 0])
        speed = moved / last
        interior = res.xdot[res.interior, 0]
        res.extra.update({
            "shape_error": shape_error(res.final_state, res.initial_state, moved),
            "measured_speed": speed,
            "speed_error": abs(speed - c) / c,
            "max_interior_speed_error":
                float(np.max(np.abs(interior - c)) / c) if interior.size else math.nan,
        })
    if out_dir is not None:
        res.write(out_dir)
    return res


# sweeps ---------------------------------------------------------------------

A0_DEFAULT = 10.0
MONOTONE_BOUND = 1e-3


def _train_job(args) -> RunResult:
    cfg, L, eps, name, out_dir = args
    res = run_train(cfg, L=L, eps=eps, name=name, out_dir=out_dir)
    # states stay in the worker; only diagnostics travel back
    res.initial_state = res.final_state = None
    return res


def _map(fn, jobs: list, workers: int) -> list:
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as ex:
        return list(ex.map(fn, jobs))


def _tag(v: float) -> str:
    return f"{v:g}".replace("+", "")


def _sub(out_dir, name):
    return None if out_dir is None else Path(out_dir) / name


def loglog_slope(x: Sequence[float], y: Sequence[float]) -> tuple[float, float]:
    """Least-squares slope and intercept of ``log y`` against ``log x``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ok = (x > 0) & (y > 0)
    if ok.sum() < 2:
        return math.nan, math.nan
    slope, icpt = np.polyfit(np.log(x[ok]), np.log(y[ok]), 1)
    return float(slope), float(icpt)


@dataclass
class SweepResult:
    """Members of a sweep and the aggregate record written to ``summary.txt``."""

    experiment: str
    runs: list[RunResult]
    summary: dict

    @property
    def statuses(self) -> list[str]:
        return [r.status for r in self.runs]

    def write(self, out_dir: str | Path | None) -> None:
        if out_dir is None:
            return
        d = Path(out_dir)
        d.mkdir(parents=True, exist_ok=True)
        io.write_record(d / "summary.txt", self.summary)


def run_monotonicity(cfg: RunConfig, out_dir: str | Path | None = None) -> SweepResult:
    """Excess ``max_t (I_j(t) - I_j(0))`` for each separation in ``sweep.L``.

    The noise level for the monotonicity-in-``L`` check is the largest
    absolute energy drift among the runs plus ``1e-12 E``.
    """
    Ls = cfg.sweep_L or (cfg.L,)
    jobs = [(cfg, L, cfg.eps, f"L_{_tag(L)}", _sub(out_dir, f"L_{_tag(L)}")) for L in Ls]
    runs = _map(_train_job, jobs, cfg.workers)
    ok = [r for r in runs if r.ok]
    rec: dict = {"experiment": "monotonicity", "L": Ls, "statuses": [r.status for r in runs]}
    if ok:
        E0 = max(r.E0 for r in ok)
        ex = np.array([r.I_excess()[0] for r in ok])
        beyond = np.array([r.I_excess_beyond_train()[0] for r in ok])
        noise = max(r.E_drift * r.E0 for r in ok) + 1e-12 * E0
        monotone = bool(np.all(np.diff(ex) <= noise)) if ex.size > 1 else True
        sigma0 = cfg.train_spec().sigma0
        Lv = np.array([r.L for r in ok])
        pos = ex > 0
        slope = float(np.polyfit(Lv[pos], np.log(ex[pos]), 1)[0]) if pos.sum() > 1 else math.nan
        rec.update({
            "E0": E0,
            "K": [r.K for r in ok],
            "excess": ex,
            "excess_relative": ex / E0,
            "excess_beyond_train": beyond,
            "noise": noise,
            "monotone_in_L": monotone,
            "bound": MONOTONE_BOUND,
            "within_bound": bool(np.all(ex <= MONOTONE_BOUND * E0)),
            "sigma0": sigma0,
            "log_slope_in_L": slope,
            "C_fit": float(np.max(ex * np.exp(sigma0 * Lv))),
        })
    res = SweepResult("monotonicity", runs, rec)
    res.write(out_dir)
    return res


def run_stability(cfg: RunConfig, out_dir: str | Path | None = None) -> SweepResult:
    """``sup_t d`` over an ``eps`` sweep plus an ``eps = 0`` floor run.

    Reports the exponent of ``sup d - floor`` against ``eps``, the smallest
    ``A_0`` with ``sup d <= A_0 (sqrt(eps) + floor)``, and the slope of
    ``max |a_i|`` against ``sup d``.
    """
    eps_list = tuple(e for e in (cfg.sweep_eps or (cfg.eps,)) if e > 0)
    if not eps_list:
        raise ExperimentError("stability sweep needs at least one positive eps")
    jobs = [(cfg, None, 0.0, "eps_0", _sub(out_dir, "eps_0"))]
    jobs += [(cfg, None, e, f"eps_{_tag(e)}", _sub(out_dir, f"eps_{_tag(e)}")) for e in eps_list]
    runs = _map(_train_job, jobs, cfg.workers)
    base, members = runs[0], runs[1:]
    rec: dict = {"experiment": "stability", "eps": eps_list, "statuses": [r.status for r in runs]}
    floor = float(base.sup_d[-1]) if base.ok and base.d.size else math.nan
    ok = [r for r in members if r.ok]
    sup = np.array([r.sup_d[-1] for r in ok])
    eps = np.array([r.eps for r in ok])
    amax = np.array([np.max(np.abs(r.a)) for r in ok])
    expo, icpt = loglog_slope(eps, sup - (floor if math.isfinite(floor) else 0.0))
    a_slope, _ = loglog_slope(sup, amax)
    A0 = sup / (np.sqrt(eps) + floor) if ok else np.zeros(0)
    rec.update({
        "floor": floor,
        "floor_relative": floor / math.sqrt(base.E0) if base.d.size else math.nan,
        "excluded": [r.name for r in members if not r.ok],
        "sup_d": sup,
        "exponent": expo,
        "A0_fit": math.exp(icpt) if math.isfinite(icpt) else math.nan,
        "A0_min": float(np.max(A0)) if A0.size else math.nan,
        "A0_default": A0_DEFAULT,
        "within_bound": bool(np.all(A0 <= A0_DEFAULT)) if A0.size else False,
        "max_abs_a": amax,
        "a_slope": a_slope,
    })
    res = SweepResult("stability", runs, rec)
    res.write(out_dir)
    return res


# coercivity -------------------------------------------------------------------

@dataclass
class CoercivitySweep:
    reports: list[CoercivityReport]
    refined: list[CoercivityReport | None]

    @property
    def lambda_min(self) -> np.ndarray:
        return np.array([r.lambda_min for r in self.reports])

    @property
    def refinement_change(self) -> np.ndarray:
        return np.array([abs(f.lambda_min - r.lambda_min) / abs(r.lambda_min) if f else math.nan
                         for r, f in zip(self.reports, self.refined)])

    @property
    def all_positive(self) -> bool:
        return bool(np.all(self.lambda_min > 0))

    def summary(self) -> dict:
        return {
            "experiment": "coercivity",
            "speeds": [r.c for r in self.reports],
            "n": [r.n for r in self.reports],
            "length": [r.length for r in self.reports],
            "lambda_min": self.lambda_min,
            "translation_eigenvalue": [r.translation_eigenvalue for r in self.reports],
            "refinement_change": self.refinement_change,
            "all_positive": self.all_positive,
        }


def coercivity_length(c: float, override: float | None = None) -> float:
    """Box length that keeps the wave's tails below the truncation tolerance."""
    return override if override is not None else float(math.ceil(required_length(c)))


def _coercivity_job(args) -> CoercivityReport:
    c, n, length = args
    return constrained_spectrum(profile(c, 0.0, Grid(n, length)))


def run_coercivity(cfg: RunConfig, out_dir: str | Path | None = None) -> CoercivitySweep:
    """Constrained spectra for ``coercivity.speeds``, optionally repeated at ``2n``.

    Raises
    ------
    ProfileError
        For a speed ``c <= 1``, before any eigen-solve.
    CoercivityError
        If a grid does not resolve its wave or a solve is inaccurate.
    """
    for c in cfg.coercivity_speeds:
        if not c > 1.0:
            raise ProfileError(f"no solitary wave for speed c={c}")
    n = cfg.coercivity_n
    jobs = [(c, n, coercivity_length(c, cfg.coercivity_length)) for c in cfg.coercivity_speeds]
    if cfg.coercivity_refine:
        jobs += [(c, 2 * n, L) for c, _, L in jobs]
    reps = _map(_coercivity_job, jobs, cfg.workers)
    m = len(cfg.coercivity_speeds)
    sweep = CoercivitySweep(reps[:m], reps[m:] if cfg.coercivity_refine else [None] * m)
    if out_dir is not None:
        d = Path(out_dir)
        d.mkdir(parents=True, exist_ok=True)
        for r in reps:
            stem = f"c_{_tag(r.c)}_n{r.n}"
            (d / f"{stem}.txt").write_text(r.to_text())
            (d / f"{stem}_eigen.csv").write_text(r.eigen_csv())
        io.write_record(d / "summary.txt", sweep.summary())
    return sweep


def profile_dump(cfg: RunConfig, out_dir: str | Path | None = None):
    """Tabulate ``phi_c`` and ``xi_c`` for ``profile.c`` on the configured grid."""
    from .solitary import stationary_residual
    w = profile(cfg.profile_c, 0.0, Grid(cfg.grid_n, cfg.grid_length))
    if out_dir is not None:
        d = Path(out_dir)
        d.mkdir(parents=True, exist_ok=True)
        (d / "profile.txt").write_text(w.table())
        io.write_record(d / "summary.txt", {
            "c": w.c, "amplitude": float(np.max(w.phi.values)),
            "stationary_residual": stationary_residual(w),
            "n": w.grid.n, "length": w.grid.length,
        })
    return w
