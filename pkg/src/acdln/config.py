"""Run configuration: INI files validated into a :class:`RunConfig`.

Example::

    [run]
    command = run
    scenario = spinodal
    seed = 7

    [mesh]
    h = 1/32

    [time]
    k = 0.01
    T = 0.5

Numbers may be written as fractions (``1/64``).  Unknown sections or keys
are rejected so that a typo never silently falls back to a default.
"""
from __future__ import annotations

import configparser
from dataclasses import asdict, dataclass, field, replace
from fractions import Fraction
from pathlib import Path

from .adapt import ControllerConfig
from .solver import PhysParams, SolverConfig
from .verify.scenarios import SCENARIOS, scenario_library

COMMANDS = ("converge", "run", "adapt")


class ConfigError(ValueError):
    pass


def _num(text: str) -> float:
    try:
        return float(Fraction(text.strip()))
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"not a number: {text!r}") from None


def _int(text: str) -> int:
    try:
        return int(text.strip())
    except ValueError:
        raise ConfigError(f"not an integer: {text!r}") from None


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _list(text: str) -> tuple[float, ...]:
    return tuple(_num(v) for v in text.replace(";", ",").split(",") if v.strip())


def _str(text: str) -> str:
    return text.strip()


SCHEMA = {
    "run": {"command": _str, "scenario": _str, "axis": _str, "seed": _int, "theta": _num},
    "physics": {"mu": _num, "re": _num, "gamma": _num, "nu": _num, "rho": _num, "lambda": _num,
                "sigma": _num, "kappa": _num, "eta": _num},
    "mesh": {"h": _num},
    "time": {"k": _num, "t": _num, "levels": _list, "fixed": _num, "full_scale": _bool},
    "solver": {"newton_tol": _num, "newton_rtol": _num, "newton_max_iter": _int, "linear_solver": _str,
               "linear_tol": _num, "picard_warmup_iters": _int, "reuse_jacobian": _bool,
               "reuse_contraction": _num, "lu_cache": _int},
    "controller": {"k_min": _num, "k_max": _num, "delta": _num, "k_0": _num, "strict_retry": _bool},
    "output": {"dir": _str, "snapshot_stride": _int, "snapshots": _bool},
}


@dataclass(frozen=True)
class RunConfig:
    command: str
    scenario: str | None = None
    axis: str | None = None
    params: PhysParams = PhysParams()
    h: float | None = None
    k: float | None = None
    T: float | None = None
    levels: tuple[float, ...] = ()
    fixed: float | None = None
    theta: float = 0.3
    solver: SolverConfig = SolverConfig(reuse_jacobian=True)
    controller: ControllerConfig = ControllerConfig()
    output_dir: str | None = None
    snapshots: bool = True
    snapshot_stride: int = 0  # 0: write at the scenario's figure times
    seed: int = 0
    raw: dict = field(default_factory=dict, compare=False)

    def as_dict(self) -> dict:
        d = asdict(self)
        d.pop("raw")
        return d


def read_ini(path: str | Path | None) -> dict:
    """Sections and typed values of an INI file, checked against the schema."""
    if path is None:
        return {}
    cp = configparser.ConfigParser(interpolation=None)
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    out: dict = {}
    for section in cp.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        out[section] = {}
        for key, text in cp.items(section):
            conv = SCHEMA[section].get(key)
            if conv is None:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            out[section][key] = conv(text)
    return out


def parse_config(path: str | Path | None = None, **flags) -> RunConfig:
    """Build a validated RunConfig from an INI file and command-line overrides.

    ``flags`` may set command, scenario, axis and output_dir; ``None`` values
    are ignored.
    """
    raw = read_ini(path)
    run = dict(raw.get("run", {}))
    for key in ("command", "scenario", "axis"):
        if flags.get(key) is not None:
            run[key] = flags[key]
    command = run.get("command")
    if command is None:
        raise ConfigError("missing required key 'command' in [run]")
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}; expected one of {COMMANDS}")

    scenario = run.get("scenario")
    axis = run.get("axis")
    time = raw.get("time", {})
    mesh = raw.get("mesh", {})
    if command == "converge":
        if scenario is not None:
            raise ConfigError("converge runs the manufactured solution; do not set a scenario")
        axis = axis or "time"
        if axis not in ("time", "space"):
            raise ConfigError(f"axis must be 'time' or 'space', got {axis!r}")
        params = PhysParams()
        full = time.get("full_scale", False)
        if axis == "time":
            levels = time.get("levels", (1 / 4, 1 / 8, 1 / 16, 1 / 32))
            fixed = time.get("fixed", mesh.get("h", 1 / 64 if full else 1 / 32))
        else:
            levels = time.get("levels", (1 / 4, 1 / 8, 1 / 16, 1 / 32) if full else (1 / 8, 1 / 16, 1 / 32))
            fixed = time.get("fixed", time.get("k", 1e-5 if full else 1e-4))
        h, k, T = None, None, time.get("t", 1.0)
    else:
        if scenario is None:
            raise ConfigError(f"command {command!r} needs a scenario")
        if scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {scenario!r}; expected one of {SCENARIOS}")
        sc = scenario_library(scenario)
        params = sc.params
        levels, fixed = (), None
        h = mesh.get("h", sc.h)
        k = time.get("k", sc.k)
        T = time.get("t", sc.T)
        if axis is not None:
            raise ConfigError("axis only applies to the converge command")

    phys = dict(raw.get("physics", {}))
    if "re" in phys:
        if "mu" in phys:
            raise ConfigError("set either mu or re, not both")
        re = phys.pop("re")
        if re <= 0:
            raise ConfigError("re must be positive")
        phys["mu"] = 1.0 / re
    if "lambda" in phys:
        phys["lam"] = phys.pop("lambda")
    try:
        params = replace(params, **phys)
        solver = SolverConfig(**{"reuse_jacobian": True, **raw.get("solver", {})})
        controller = ControllerConfig(**raw.get("controller", {}))
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc

    theta = run.get("theta", 0.3)
    if not 0.0 <= theta <= 1.0:
        raise ConfigError(f"theta must lie in [0, 1], got {theta}")
    for name, val in (("h", h), ("k", k), ("T", T), ("fixed", fixed)):
        if val is not None and not val > 0:
            raise ConfigError(f"{name} must be positive, got {val}")
    if any(v <= 0 for v in levels) or (command == "converge" and len(levels) < 2):
        raise ConfigError("levels must be at least two positive values")

    out = raw.get("output", {})
    stride = out.get("snapshot_stride", 0)
    if stride < 0:
        raise ConfigError("snapshot_stride must be nonnegative")
    return RunConfig(
        command=command,
        scenario=scenario,
        axis=axis,
        params=params,
        h=h,
        k=k,
        T=T,
        levels=tuple(levels),
        fixed=fixed,
        theta=theta,
        solver=solver,
        controller=controller,
        output_dir=flags.get("output_dir") or out.get("dir"),
        snapshots=out.get("snapshots", True),
        snapshot_stride=stride,
        seed=run.get("seed", 0),
        raw=raw,
    )
