"""Flat ``key=value`` run configuration with dotted keys.

Example::

    experiment = stability
    grid.n = 4096
    grid.length = 204.8
    train.speeds = 2, 3
    train.L = 40
    perturb.kind = random-smooth
    perturb.eps = 1e-3
    stepper.dt = 1e-3

Blank lines and ``#`` comments are ignored.  Unknown keys, malformed values
and inconsistent combinations raise :class:`ConfigError`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Callable, Iterable

from .functionals import K_MIN, default_K
from .solitary import TrainSpec

EXPERIMENTS = ("propagate", "monotonicity", "stability", "coercivity", "profile-dump")
PERTURBATIONS = ("none", "scaled-profile", "localized-bump", "random-smooth", "energy-neutral")
BACKENDS = ("auto", "compiled", "python")
SEED_MAX = 2**64 - 1

# experiment-specific defaults, applied before the file and overrides
EXPERIMENT_DEFAULTS: dict[str, dict[str, Any]] = {
    "propagate": {"speeds": (2.0,), "first_center": 0.0, "grid_n": 2048, "grid_length": 200.0,
                  "t_end": 20.0, "perturb_kind": "none", "eps": 0.0},
    "profile-dump": {"grid_n": 2048, "grid_length": 100.0},
}


class ConfigError(ValueError):
    """Invalid configuration file, override or combination of values."""


def _float(s: str) -> float:
    v = float(s)
    if not math.isfinite(v):
        raise ValueError("not finite")
    return v


def _int(s: str) -> int:
    f = float(s)
    if not f.is_integer():
        raise ValueError("not an integer")
    return int(f)


def _bool(s: str) -> bool:
    t = s.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError("not a boolean")


def _floats(s: str) -> tuple[float, ...]:
    parts = [p for p in s.replace(";", ",").split(",") if p.strip()]
    if not parts:
        raise ValueError("empty list")
    return tuple(_float(p) for p in parts)


def _optional(conv: Callable[[str], Any]) -> Callable[[str], Any]:
    def parse(s: str):
        return None if s.strip().lower() in ("", "auto", "none") else conv(s)
    return parse


def _choice(options: Iterable[str]) -> Callable[[str], str]:
    opts = tuple(options)

    def parse(s: str) -> str:
        t = s.strip()
        if t not in opts:
            raise ValueError(f"expected one of {', '.join(opts)}")
        return t
    return parse


def _seed(s: str) -> int:
    v = int(s, 0)
    if not 0 <= v <= SEED_MAX:
        raise ValueError("seed must fit in an unsigned 64-bit integer")
    return v


# key -> (attribute path, parser)
_SCHEMA: dict[str, tuple[str, Callable[[str], Any]]] = {
    "experiment": ("experiment", _choice(EXPERIMENTS)),
    "workers": ("workers", _int),
    "grid.n": ("grid_n", _int),
    "grid.length": ("grid_length", _float),
    "train.speeds": ("speeds", _floats),
    "train.centers": ("centers", _optional(_floats)),
    "train.first_center": ("first_center", _float),
    "train.L": ("L", _float),
    "perturb.kind": ("perturb_kind", _choice(PERTURBATIONS)),
    "perturb.eps": ("eps", _float),
    "perturb.seed": ("seed", _seed),
    "perturb.kmax": ("kmax", _float),
    "perturb.width": ("bump_width", _float),
    "stepper.dt": ("dt", _float),
    "stepper.t_end": ("t_end", _float),
    "stepper.checkpoint_stride": ("checkpoint_stride", _int),
    "stepper.dealias": ("dealias", _bool),
    "stepper.cfl_guard": ("cfl_guard", _float),
    "stepper.backend": ("backend", _choice(BACKENDS)),
    "weights.K": ("K", _optional(_float)),
    "output.dir": ("out_dir", str),
    "output.dump_fields": ("dump_fields", _bool),
    "output.dump_every": ("dump_every", _int),
    "sweep.eps": ("sweep_eps", _optional(_floats)),
    "sweep.L": ("sweep_L", _optional(_floats)),
    "coercivity.speeds": ("coercivity_speeds", _floats),
    "coercivity.n": ("coercivity_n", _int),
    "coercivity.length": ("coercivity_length", _optional(_float)),
    "coercivity.refine": ("coercivity_refine", _bool),
    "profile.c": ("profile_c", _float),
}


@dataclass(frozen=True)
class RunConfig:
    """Validated run configuration; see the module docstring for the file format."""

    experiment: str = "stability"
    workers: int = 1
    grid_n: int = 4096
    grid_length: float = 204.8
    speeds: tuple[float, ...] = (2.0, 3.0)
    centers: tuple[float, ...] | None = None
    first_center: float = -70.0
    L: float = 40.0
    perturb_kind: str = "random-smooth"
    eps: float = 1e-3
    seed: int = 0
    kmax: float = 2.0
    bump_width: float = 2.0
    dt: float = 1e-3
    t_end: float = 30.0
    checkpoint_stride: int = 500
    dealias: bool = True
    cfl_guard: float = 0.5
    backend: str = "auto"
    K: float | None = None
    out_dir: str = "out"
    dump_fields: bool = False
    dump_every: int = 1
    sweep_eps: tuple[float, ...] | None = None
    sweep_L: tuple[float, ...] | None = None
    coercivity_speeds: tuple[float, ...] = (1.5, 2.0, 3.0)
    coercivity_n: int = 1024
    coercivity_length: float | None = None
    coercivity_refine: bool = True
    profile_c: float = 2.0

    def __post_init__(self) -> None:
        try:
            self._validate()
        except (ValueError, ArithmeticError) as exc:
            raise ConfigError(str(exc)) from None

    def _validate(self) -> None:
        if self.grid_n < 16 or self.grid_n % 2:
            raise ValueError("grid.n must be an even integer >= 16")
        if not self.grid_length > 0:
            raise ValueError("grid.length must be positive")
        if self.eps < 0:
            raise ValueError("perturb.eps must be non-negative")
        if self.sweep_eps is not None and any(e < 0 for e in self.sweep_eps):
            raise ValueError("sweep.eps values must be non-negative")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.dump_every < 1:
            raise ValueError("output.dump_every must be >= 1")
        if self.kmax <= 0 or self.bump_width <= 0:
            raise ValueError("perturb.kmax and perturb.width must be positive")
        if any(c <= 1.0 for c in self.coercivity_speeds):
            raise ValueError("coercivity.speeds must all exceed 1 (no solitary wave otherwise)")
        if self.profile_c <= 1.0:
            raise ValueError("profile.c must exceed 1")
        spec = self.train_spec()  # speeds/centres consistency
        if self.experiment in ("monotonicity", "stability") and spec.n_waves < 2:
            raise ValueError(f"{self.experiment} needs at least two waves")
        if self.experiment == "propagate" and spec.n_waves != 1:
            raise ValueError("propagate needs exactly one wave")
        if self.experiment in ("monotonicity", "stability", "propagate"):
            self.stepper()
            if self.weight_K() < K_MIN:
                raise ValueError(f"weights.K must be at least {K_MIN}")

    # derived quantities ---------------------------------------------------
    def train_spec(self, L: float | None = None) -> TrainSpec:
        """Speeds and centres; explicit ``train.centers`` win over ``first_center`` + ``L``."""
        if self.centers is not None and L is None:
            if len(self.centers) != len(self.speeds):
                raise ValueError("train.centers and train.speeds differ in length")
            return TrainSpec(self.speeds, self.centers)
        gap = self.L if L is None else L
        if not gap > 0:
            raise ValueError("train.L must be positive")
        return TrainSpec(self.speeds, tuple(self.first_center + i * gap for i in range(len(self.speeds))))

    def weight_K(self, L: float | None = None) -> float:
        if self.K is not None:
            return self.K
        sep = self.train_spec(L).separation
        return default_K(sep)

    def stepper(self):
        from .dynamics import StepperConfig
        return StepperConfig(
            dt=self.dt, t_end=self.t_end, dealias=self.dealias, cfl_guard=self.cfl_guard,
            checkpoint_stride=self.checkpoint_stride,
            backend=None if self.backend == "auto" else self.backend,
        )

    def with_values(self, **kw) -> "RunConfig":
        try:
            return replace(self, **kw)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def to_text(self) -> str:
        """Round-trippable ``key = value`` listing of every setting."""
        lines = []
        for key, (attr, _) in _SCHEMA.items():
            lines.append(f"{key} = {_format(getattr(self, attr))}")
        return "\n".join(lines) + "\n"


def _format(v) -> str:
    if v is None:
        return "auto"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ", ".join(repr(float(x)) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def parse_pairs(pairs: Iterable[tuple[str, str, str]]) -> dict[str, Any]:
    """Convert ``(key, raw value, origin)`` triples into attribute values."""
    out: dict[str, Any] = {}
    for key, raw, origin in pairs:
        if key not in _SCHEMA:
            raise ConfigError(f"{origin}: unknown key {key!r}")
        attr, conv = _SCHEMA[key]
        try:
            out[attr] = conv(raw)
        except ValueError as exc:
            raise ConfigError(f"{origin}: bad value {raw!r} for {key}: {exc}") from None
    return out


def split_line(line: str, origin: str) -> tuple[str, str] | None:
    text = line.split("#", 1)[0].strip()
    if not text:
        return None
    if "=" not in text:
        raise ConfigError(f"{origin}: expected key=value, got {line.strip()!r}")
    k, v = text.split("=", 1)
    return k.strip(), v.strip()


def parse_text(text: str, source: str = "<config>") -> dict[str, Any]:
    pairs = []
    for i, line in enumerate(text.splitlines(), 1):
        kv = split_line(line, f"{source}:{i}")
        if kv is not None:
            pairs.append((*kv, f"{source}:{i}"))
    return parse_pairs(pairs)


def load_config(path: str | Path | None = None, overrides: Iterable[str] = (),
                experiment: str | None = None) -> RunConfig:
    """Read ``path`` (optional), then apply ``key=value`` overrides in order.

    A non-``None`` ``experiment`` selects its defaults first and wins over
    any ``experiment`` key in the file.
    """
    values: dict[str, Any] = {}
    if experiment is not None:
        if experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {experiment!r}")
        values.update(EXPERIMENT_DEFAULTS.get(experiment, {}))
    if path is not None:
        p = Path(path)
        try:
            text = p.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {p}: {exc}") from None
        values.update(parse_text(text, str(p)))
    for ov in overrides:
        kv = split_line(ov, "--override")
        if kv is None:
            raise ConfigError(f"--override: empty value {ov!r}")
        values.update(parse_pairs([(*kv, "--override")]))
    if experiment is not None:
        values["experiment"] = experiment
    return RunConfig(**values)
