"""Run configuration: an INI file with problem/solver/sweep/output sections.

Example::

    [problem]
    kernel = gaussian
    kernel.alpha = 0.2
    birth = nicholson
    birth.p = 9
    h = 1
    c = 1.7

With ``D_m`` (and optionally ``B``) in ``[problem]`` the kernel is implied
(gaussian with ``alpha = 1/D_m``) and ``c`` is the speed of the advective
model; ``eps = D_m / (c - B)^2``.
"""

from __future__ import annotations

import configparser
import math
import os
import re
from dataclasses import dataclass, field
from typing import Optional

from .birth import birth_from_config
from .errors import ConfigError
from .kernels import Gaussian, kernel_from_config
from .problem import ProblemSpec
from .waveform import SolverConfig

__all__ = ["RunConfig", "load_config", "parse_config", "build_problem", "SWEEP_PARAMETERS"]

_PROBLEM_KEYS = {"kernel", "birth", "h", "q", "c", "eps", "D_m", "B"}
_SOLVER_KEYS = {"t_left", "t_right", "dt", "tol", "max_iter", "delta", "damping"}
_SWEEP_KEYS = {"parameter", "start", "stop", "points", "mode"}
_OUTPUT_KEYS = {"dir", "plots"}
SWEEP_PARAMETERS = ("c", "eps", "h", "q", "p")
MAX_SWEEP_POINTS = 1_000_000


@dataclass
class RunConfig:
    problem: dict
    solver: SolverConfig
    sweep: Optional[dict] = None
    out_dir: str = "."
    plots: bool = False
    source: str = "<string>"
    advection: Optional[tuple] = field(default=None)

    def spec(self, **override) -> ProblemSpec:
        return build_problem(self.problem, **override)


def _line_of(text: str, section: str, key: str) -> Optional[int]:
    current = None
    for n, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        m = re.match(r"\[(.+)\]", s)
        if m:
            current = m.group(1).strip()
        elif current == section and re.match(rf"{re.escape(key)}\s*[=:]", s):
            return n
    return None


def _where(text, source, section, key):
    n = _line_of(text, section, key)
    return f"{source}:{n}" if n else f"{source} [{section}]"


def _num(text, source, section, key, value, kind=float):
    try:
        return kind(value)
    except ValueError:
        raise ConfigError(f"{_where(text, source, section, key)}: {key} = {value!r} is not a valid number") from None


def parse_config(text: str, source: str = "<string>", base_dir: Optional[str] = None) -> RunConfig:
    """Parse config text; relative kernel file paths resolve against ``base_dir``."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    known = {"problem", "solver", "sweep", "output"}
    for sec in cp.sections():
        if sec not in known:
            raise ConfigError(f"{_where(text, source, sec, '')}: unknown section [{sec}]")
    if "problem" not in cp:
        raise ConfigError(f"{source}: missing [problem] section")

    prob = dict(cp["problem"])
    for key in prob:
        head = key.split(".", 1)[0]
        if key not in _PROBLEM_KEYS and head not in ("kernel", "birth"):
            raise ConfigError(f"{_where(text, source, 'problem', key)}: unknown key {key!r}")
        if "." in key and head not in ("kernel", "birth"):
            raise ConfigError(f"{_where(text, source, 'problem', key)}: unknown key {key!r}")

    problem = {"kernel": {}, "birth": {}}
    for key, value in prob.items():
        if key.startswith("kernel."):
            sub = key.split(".", 1)[1]
            if sub == "path":
                if base_dir and not os.path.isabs(value):
                    value = os.path.join(base_dir, value)
                problem["kernel"][sub] = value
            else:
                problem["kernel"][sub] = _num(text, source, "problem", key, value)
        elif key.startswith("birth."):
            sub = key.split(".", 1)[1]
            if sub == "expr":
                problem["birth"][sub] = value
            elif sub == "truncate_n":
                problem["birth"][sub] = _num(text, source, "problem", key, value, int)
            else:
                problem["birth"][sub] = _num(text, source, "problem", key, value)
        elif key in ("kernel", "birth"):
            problem[key + "_family"] = value.strip().lower()
        else:
            problem[key] = _num(text, source, "problem", key, value)

    if "D_m" in problem:
        if "kernel_family" in problem or problem["kernel"]:
            raise ConfigError(f"{_where(text, source, 'problem', 'D_m')}: D_m implies the kernel; drop kernel keys")
        problem.setdefault("B", 0.0)
    elif "B" in problem:
        raise ConfigError(f"{_where(text, source, 'problem', 'B')}: B needs D_m")
    elif "kernel_family" not in problem:
        raise ConfigError(f"{source}: [problem] needs kernel (or D_m)")
    if "birth_family" not in problem:
        raise ConfigError(f"{source}: [problem] needs birth")
    if "h" not in problem:
        raise ConfigError(f"{source}: [problem] needs h")

    solver_kw = {}
    if "solver" in cp:
        for key, value in cp["solver"].items():
            if key not in _SOLVER_KEYS:
                raise ConfigError(f"{_where(text, source, 'solver', key)}: unknown key {key!r}")
            solver_kw[key] = _num(text, source, "solver", key, value, int if key == "max_iter" else float)
    solver = SolverConfig(**solver_kw)

    sweep = None
    if "sweep" in cp:
        raw = dict(cp["sweep"])
        for key in raw:
            if key not in _SWEEP_KEYS:
                raise ConfigError(f"{_where(text, source, 'sweep', key)}: unknown key {key!r}")
        for key in ("parameter", "start", "stop", "points"):
            if key not in raw:
                raise ConfigError(f"{source} [sweep]: missing {key}")
        param = raw["parameter"].strip()
        if param not in SWEEP_PARAMETERS:
            raise ConfigError(
                f"{_where(text, source, 'sweep', 'parameter')}: parameter must be one of {', '.join(SWEEP_PARAMETERS)}"
            )
        points = _num(text, source, "sweep", "points", raw["points"], int)
        if not 1 <= points <= MAX_SWEEP_POINTS:
            raise ConfigError(f"{_where(text, source, 'sweep', 'points')}: points must lie in [1, {MAX_SWEEP_POINTS}]")
        mode = raw.get("mode", "speeds").strip()
        if mode not in ("speeds", "certify"):
            raise ConfigError(f"{_where(text, source, 'sweep', 'mode')}: mode must be speeds or certify")
        sweep = {
            "parameter": param,
            "start": _num(text, source, "sweep", "start", raw["start"]),
            "stop": _num(text, source, "sweep", "stop", raw["stop"]),
            "points": points,
            "mode": mode,
        }

    out_dir, plots = ".", False
    if "output" in cp:
        for key in cp["output"]:
            if key not in _OUTPUT_KEYS:
                raise ConfigError(f"{_where(text, source, 'output', key)}: unknown key {key!r}")
        out_dir = cp["output"].get("dir", ".")
        try:
            plots = cp["output"].getboolean("plots", fallback=False)
        except ValueError:
            raise ConfigError(f"{_where(text, source, 'output', 'plots')}: plots must be true or false") from None

    cfg = RunConfig(problem=problem, solver=solver, sweep=sweep, out_dir=out_dir, plots=plots, source=source)
    if "D_m" in problem:
        cfg.advection = (problem["D_m"], problem["B"])
    # fail early on bad physics rather than inside a worker
    try:
        build_problem(problem)
    except ConfigError:
        raise
    except KeyError as exc:
        raise ConfigError(f"{source}: missing parameter {exc.args[0]!r} in [problem]") from None
    except (ValueError, TypeError, OSError) as exc:
        raise ConfigError(f"{source}: {exc}") from None
    return cfg


def load_config(path: str) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, source=path, base_dir=os.path.dirname(os.path.abspath(path)))


def build_problem(problem: dict, **override) -> ProblemSpec:
    """ProblemSpec from parsed ``[problem]`` values; ``override`` replaces scalars.

    ``p`` in ``override`` replaces the birth parameter ``p``.
    """
    pr = dict(problem)
    birth = dict(pr["birth"])
    if "p" in override:
        birth["p"] = override.pop("p")
    pr.update(override)
    g = birth_from_config(pr["birth_family"], birth)
    h = float(pr["h"])
    q = float(pr.get("q", 1.0))
    if "D_m" in pr:
        D_m, B = float(pr["D_m"]), float(pr["B"])
        if not D_m > 0:
            raise ConfigError(f"D_m must be positive, got {D_m}")
        kernel = Gaussian(alpha=1.0 / D_m)
        c, eps = pr.get("c"), pr.get("eps")
        if c is not None and "eps" not in override:
            if not c > B:
                raise ConfigError(f"speed c={c} must exceed B={B}")
            return ProblemSpec(kernel, g, h, q, eps=D_m / (c - B) ** 2, speed_offset=B)
        if eps is not None:
            return ProblemSpec(kernel, g, h, q, eps=eps, speed_offset=B)
        return ProblemSpec(kernel, g, h, q, speed_offset=B)
    kernel = kernel_from_config(pr["kernel_family"], pr["kernel"])
    c, eps = pr.get("c"), pr.get("eps")
    if "eps" in override:
        c = None
    elif "c" in override:
        eps = None
    return ProblemSpec(kernel, g, h, q, c=c, eps=eps)


def physical_speed(cfg: RunConfig, scaled: float) -> float:
    """Speed of the advective model for scaled speed ``1/sqrt(eps)``."""
    if cfg.advection is None:
        return scaled
    D_m, B = cfg.advection
    return B + math.sqrt(D_m) * scaled
