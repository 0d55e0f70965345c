"""Run configuration: flat key = value sections, canonical serialization.

The config grammar is INI-style: ``[section]`` headers, ``key = value``
pairs, ``#`` comments, UTF-8.  Section/key names are case-sensitive and
validated against the schema below; unknown keys are rejected rather than
ignored so that sweep definitions stay reviewable.  The content digest is
a SHA-256 prefix over the canonical serialization (defaults filled in,
keys sorted), and is embedded in the header line of every artifact the
run emits.

All frequencies are expressed in units of the elimination detuning scale
``Delta0``; times in its inverse.
"""

from __future__ import annotations

import configparser
import hashlib
import io
import math
from dataclasses import dataclass, fields

from .errors import ConfigParseError, UnknownKeyError, ValidationError

EXPERIMENTS = ("zero-modes", "braid", "sweep", "chiral", "check-passage")

_TRUE = {"true", "yes", "on", "1"}
_FALSE = {"false", "no", "off", "0"}


def _parse_bool(s: str) -> bool:
    v = s.strip().lower()
    if v in _TRUE:
        return True
    if v in _FALSE:
        return False
    raise ConfigParseError(f"expected a boolean, got {s!r}")


def _parse_floats(s: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in s.replace(",", " ").split())
    except ValueError as exc:
        raise ConfigParseError(f"expected numbers, got {s!r}") from exc


def _parse_optional_float(s: str):
    if s.strip().lower() in ("auto", "none"):
        return None
    try:
        return float(s)
    except ValueError as exc:
        raise ConfigParseError(f"expected a number or 'auto', got {s!r}") from exc


def _parse_ints(s: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in s.replace(",", " ").split())
    except ValueError as exc:
        raise ConfigParseError(f"expected integers, got {s!r}") from exc


@dataclass(frozen=True)
class RunConfig:
    """Validated parameters of one CLI run (defaults = documented values)."""

    experiment: str = "braid"
    # [physics] braiding defaults; loop-phase slope lam selects the
    # error-correcting schedule family
    Delta0: float = 1.0
    Omega1_peak: float = 0.01
    Delta_l: float = 2.0
    omega: float = 20.0
    lam: float = 0.0
    pair: tuple[int, ...] = (1, 2)
    M: int = 3
    counter_rotating: bool = True
    T: float = 0.0                     # 0 -> derived from Omega1_peak
    # [sweep] the sweep carries its own defect splitting and rotating-wave
    # setting: the reported error-robustness figures probe the systematic
    # defect-frequency channel, which needs omega a few Delta0 and no
    # counter-rotating ladder competing with it
    sweep_kind: str = "omega"
    eps_min: float | None = None       # None -> per-kind default
    eps_max: float | None = None
    eps_points: int = 21
    lambdas: tuple[float, ...] = (0.0, 2.0, 5.0)
    sweep_omega: float = 4.5
    sweep_counter_rotating: bool = False
    # [chiral]
    direction: str = "clockwise"
    n_loops: int = 2
    T_stage: float = 1000.0
    # [zero_modes]
    zm_mu: float = 0.0
    zm_J: float = -1.0
    zm_g: float = 1.0
    zm_N: int = 100
    zm_tol: float = 1e-10
    # [integrator] tol gates refinement of recorded fidelities; sweeps use
    # the looser sweep_tol (their acceptance bands sit at the 1e-2 scale)
    tol: float = 1e-6
    sweep_tol: float = 1e-4
    steps_per_stage: int = 1500
    workers: int = 1
    # [output]
    precision: int = 12
    allow_strong_drive: bool = False

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValidationError(f"unknown experiment {self.experiment!r}")
        for name in ("Delta0", "Omega1_peak", "Delta_l", "omega", "sweep_omega"):
            if getattr(self, name) <= 0:
                raise ValidationError(f"{name} must be positive")
        if self.Omega1_peak / self.Delta0 > 0.05 and not self.allow_strong_drive:
            raise ValidationError(
                "Omega1_peak/Delta0 exceeds 0.05; pass allow_strong_drive to override")
        if len(self.pair) != 2 or self.pair[0] == self.pair[1] \
                or not all(1 <= p <= self.M for p in self.pair):
            raise ValidationError(f"invalid mode pair {self.pair} for M={self.M}")
        if self.M < 3:
            raise ValidationError("M must be >= 3")
        if self.direction not in ("clockwise", "counterclockwise"):
            raise ValidationError(f"unknown direction {self.direction!r}")
        if self.sweep_kind not in ("omega", "rabi"):
            raise ValidationError(f"unknown sweep kind {self.sweep_kind!r}")
        if self.n_loops < 1 or self.eps_points < 2 or self.workers < 1:
            raise ValidationError("n_loops, eps_points, workers must be positive")
        if not (self.T >= 0 and self.T_stage > 0):
            raise ValidationError("durations must be positive")

    # -- derived quantities ---------------------------------------------------
    @property
    def braid_T(self) -> float:
        """Stage duration: ramp rate matched to the two-photon coupling scale."""
        if self.T > 0:
            return self.T
        return math.pi * self.Delta0 / (2.0 * self.Omega1_peak ** 2)

    @property
    def eps_range(self) -> tuple[float, float]:
        lo, hi = self.eps_min, self.eps_max
        if lo is None:
            lo = -0.05 if self.sweep_kind == "omega" else -0.1
        if hi is None:
            hi = 0.05 if self.sweep_kind == "omega" else 0.1
        if not (-0.1 - 1e-12 <= lo < hi <= 0.1 + 1e-12):
            raise ValidationError("epsilon grid must satisfy -0.1 <= lo < hi <= 0.1")
        return lo, hi


_SCHEMA = {
    "run": {"experiment": str},
    "physics": {"Delta0": float, "Omega1_peak": float, "Delta_l": float,
                "omega": float, "lambda": float, "pair": _parse_ints,
                "M": int, "counter_rotating": _parse_bool, "T": float},
    "sweep": {"kind": str, "eps_min": _parse_optional_float,
              "eps_max": _parse_optional_float,
              "eps_points": int, "lambdas": _parse_floats,
              "omega": float, "counter_rotating": _parse_bool},
    "chiral": {"direction": str, "n_loops": int, "T_stage": float},
    "zero_modes": {"mu": float, "J": float, "g": float, "N": int, "tol": float},
    "integrator": {"tol": float, "sweep_tol": float,
                   "steps_per_stage": int, "workers": int},
    "output": {"precision": int, "allow_strong_drive": _parse_bool},
}

_FIELD_OF = {
    ("run", "experiment"): "experiment",
    ("physics", "Delta0"): "Delta0",
    ("physics", "Omega1_peak"): "Omega1_peak",
    ("physics", "Delta_l"): "Delta_l",
    ("physics", "omega"): "omega",
    ("physics", "lambda"): "lam",
    ("physics", "pair"): "pair",
    ("physics", "M"): "M",
    ("physics", "counter_rotating"): "counter_rotating",
    ("physics", "T"): "T",
    ("sweep", "kind"): "sweep_kind",
    ("sweep", "eps_min"): "eps_min",
    ("sweep", "eps_max"): "eps_max",
    ("sweep", "eps_points"): "eps_points",
    ("sweep", "lambdas"): "lambdas",
    ("sweep", "omega"): "sweep_omega",
    ("sweep", "counter_rotating"): "sweep_counter_rotating",
    ("chiral", "direction"): "direction",
    ("chiral", "n_loops"): "n_loops",
    ("chiral", "T_stage"): "T_stage",
    ("zero_modes", "mu"): "zm_mu",
    ("zero_modes", "J"): "zm_J",
    ("zero_modes", "g"): "zm_g",
    ("zero_modes", "N"): "zm_N",
    ("zero_modes", "tol"): "zm_tol",
    ("integrator", "tol"): "tol",
    ("integrator", "sweep_tol"): "sweep_tol",
    ("integrator", "steps_per_stage"): "steps_per_stage",
    ("integrator", "workers"): "workers",
    ("output", "precision"): "precision",
    ("output", "allow_strong_drive"): "allow_strong_drive",
}
_KEY_OF = {v: k for k, v in _FIELD_OF.items()}


def parse_config(document: str, overrides: dict | None = None) -> RunConfig:
    """Parse a key = value document into a validated RunConfig.

    ``overrides`` maps dataclass field names to already-typed values (CLI
    flags beat file keys).  Unknown sections or keys raise
    :class:`UnknownKeyError`; malformed values raise
    :class:`ConfigParseError`; range violations surface as
    :class:`ValidationError` from the dataclass.
    """
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",),
                                   interpolation=None, strict=True)
    cp.optionxform = str
    try:
        cp.read_string(document)
    except configparser.Error as exc:
        raise ConfigParseError(f"malformed config: {exc}") from exc
    kwargs = {}
    for section in cp.sections():
        if section not in _SCHEMA:
            raise UnknownKeyError(f"unknown section [{section}]")
        for key, raw in cp.items(section):
            if key not in _SCHEMA[section]:
                raise UnknownKeyError(f"unknown key {key!r} in [{section}]")
            conv = _SCHEMA[section][key]
            try:
                val = conv(raw)
            except ConfigParseError:
                raise
            except Exception as exc:
                raise ConfigParseError(
                    f"bad value for {section}.{key}: {raw!r}") from exc
            kwargs[_FIELD_OF[(section, key)]] = val
    if overrides:
        valid = {f.name for f in fields(RunConfig)}
        for k in overrides:
            if k not in valid:
                raise UnknownKeyError(f"unknown override {k!r}")
        kwargs.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig(**kwargs)


def _fmt(value) -> str:
    if value is None:
        return "auto"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.12g}"
    if isinstance(value, tuple):
        return ",".join(_fmt(v) for v in value)
    return str(value)


def serialize_config(config: RunConfig) -> str:
    """Canonical text form: every key explicit, sections and keys sorted."""
    by_section: dict[str, list[tuple[str, str]]] = {}
    for f in fields(RunConfig):
        section, key = _KEY_OF[f.name]
        by_section.setdefault(section, []).append((key, _fmt(getattr(config, f.name))))
    buf = io.StringIO()
    for section in sorted(by_section):
        buf.write(f"[{section}]\n")
        for key, val in sorted(by_section[section]):
            buf.write(f"{key} = {val}\n")
        buf.write("\n")
    return buf.getvalue()


def config_digest(config: RunConfig) -> str:
    return hashlib.sha256(serialize_config(config).encode()).hexdigest()[:16]
