"""Run configuration: ``[section]`` / ``key = value`` text parsed with configparser."""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field, replace
from typing import Any

from .core import SpatialGrid, UncertaintySet, validate_times
from .errors import ConfigError
from .expectation import Numerics
from .payoff_expr import PayoffExpression, parse_payoff
from .utility import Utility, make_utility

# allowed keys per section
SCHEMA: dict[str, tuple[str, ...]] = {
    "uncertainty": ("lower_variance", "upper_variance", "variances"),
    "grid": ("x_min", "x_max", "n_points", "cfl_fraction", "span_sigmas"),
    "times": ("monitoring", "horizon", "conditioning"),
    "payoff": ("expression", "suite"),
    "utility": ("kind", "alpha", "eta", "shift", "breakpoints", "values"),
    "pricing": ("endowment", "wealth"),
    "run": ("mode", "method", "seed"),
    "lattice": ("n_steps",),
    "mc": ("n_paths", "n_controls"),
    "compare": ("lower_variance", "upper_variance", "variances",
                "kind", "alpha", "eta", "shift", "breakpoints", "values",
                "bid_order", "ask_order"),
    "sweep": ("parameter", "values", "start", "stop", "count", "command"),
    "output": ("path",),
}

SWEEPABLE = (
    "uncertainty.lower_variance", "uncertainty.upper_variance",
    "grid.n_points", "grid.cfl_fraction", "grid.span_sigmas",
    "utility.alpha", "utility.eta", "utility.shift",
    "pricing.endowment", "pricing.wealth", "lattice.n_steps",
)


@dataclass(frozen=True)
class CompareConfig:
    theta: UncertaintySet | None
    utility: Utility | None
    bid_order: str
    ask_order: str


@dataclass(frozen=True)
class SweepConfig:
    parameter: str
    values: tuple[float, ...]
    command: str


@dataclass(frozen=True)
class RunConfig:
    """Validated run description; ``defaults`` lists every value filled in."""

    theta: UncertaintySet
    numerics: Numerics
    times: tuple[float, ...]
    payoff: PayoffExpression | None
    suite: tuple[PayoffExpression, ...]
    utility: Utility | None
    endowment: float
    wealth: float
    mode: str
    method: str
    seed: int
    conditioning: float
    lattice_steps: int
    mc_paths: int
    mc_controls: int
    compare: CompareConfig | None
    sweep: SweepConfig | None
    output_path: str | None
    defaults: tuple[str, ...] = ()
    raw: dict = field(default_factory=dict, repr=False)


def _line_map(text: str) -> dict[tuple[str, str], int]:
    """1-based line of every ``key`` in every section."""
    where = {}
    section = None
    for no, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        m = re.fullmatch(r"\[([^\]]+)\]", s.split("#", 1)[0].strip())
        if m:
            section = m.group(1).strip().lower()
            continue
        if "=" in s and section is not None:
            where[(section, s.split("=", 1)[0].strip().lower())] = no
    return where


class _Reader:
    def __init__(self, data: dict, lines: dict, defaults: list):
        self.data = data
        self.lines = lines
        self.defaults = defaults

    def err(self, section, key, msg):
        line = self.lines.get((section, key))
        at = f" (line {line})" if line else ""
        return ConfigError(f"{section}.{key}: {msg}{at}")

    def has(self, section, key):
        return key in self.data.get(section, {})

    def raw(self, section, key):
        return self.data.get(section, {}).get(key)

    def get(self, section, key, conv, default=None, check=None, constraint="",
            echo=True):
        text = self.raw(section, key)
        if text is None:
            if default is not None and echo:
                self.defaults.append(f"{section}.{key}={default}")
            return default
        try:
            value = conv(text)
        except (ValueError, TypeError) as exc:
            raise self.err(section, key, f"cannot parse {text!r}: {exc}") from None
        if check is not None and not check(value):
            raise self.err(section, key, f"must be {constraint}, got {text!r}")
        return value


def _float(s: str) -> float:
    v = float(s)
    if not math.isfinite(v):
        raise ValueError("not finite")
    return v


def _int(s: str) -> int:
    return int(s.strip())


def _floats(s: str) -> tuple[float, ...]:
    parts = [p for p in re.split(r"[,\s]+", s.strip()) if p]
    if not parts:
        raise ValueError("empty list")
    return tuple(_float(p) for p in parts)


def _read_theta(r: _Reader, section: str, required: bool) -> UncertaintySet | None:
    if r.has(section, "variances"):
        if r.has(section, "lower_variance") or r.has(section, "upper_variance"):
            raise r.err(section, "variances", "give either a list or lower/upper bounds")
        vs = r.get(section, "variances", _floats)
        try:
            return UncertaintySet.from_list(vs)
        except ConfigError as exc:
            raise r.err(section, "variances", str(exc)) from None
    if not (r.has(section, "lower_variance") or r.has(section, "upper_variance")):
        if required:
            raise ConfigError(f"{section}: lower_variance and upper_variance are required")
        return None
    lo = r.get(section, "lower_variance", _float, check=lambda v: v >= 0,
               constraint=">= 0")
    up = r.get(section, "upper_variance", _float, check=lambda v: v >= 0,
               constraint=">= 0")
    if lo is None or up is None:
        missing = "lower_variance" if lo is None else "upper_variance"
        raise ConfigError(f"{section}.{missing}: required")
    if lo > up:
        raise r.err(section, "lower_variance", f"must not exceed upper_variance ({up})")
    return UncertaintySet.interval(lo, up)


def _read_utility(r: _Reader, section: str) -> Utility | None:
    if not r.has(section, "kind"):
        for k in ("alpha", "eta", "shift", "breakpoints", "values"):
            if r.has(section, k):
                raise r.err(section, "kind", "required when utility parameters are given")
        return None
    kind = r.raw(section, "kind").strip().lower()
    params: dict[str, Any] = {}
    for k in ("alpha", "eta", "shift"):
        if r.has(section, k):
            params[k] = r.get(section, k, _float)
    for k in ("breakpoints", "values"):
        if r.has(section, k):
            params[k] = r.get(section, k, _floats)
    try:
        return make_utility(kind, **params)
    except KeyError as exc:
        raise r.err(section, exc.args[0], f"required for {kind} utility") from None
    except ConfigError as exc:
        raise r.err(section, "kind", str(exc)) from None


def parse_config(text: str) -> RunConfig:
    """Parse and validate configuration text.

    Raises
    ------
    ConfigError
        With a line number for syntax problems and the dotted key name for
        validation problems.
    """
    cp = configparser.ConfigParser(
        delimiters=("=",), comment_prefixes=("#",), inline_comment_prefixes=("#",),
        interpolation=None, strict=True, empty_lines_in_values=False,
    )
    try:
        cp.read_string(text)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError(f"line {exc.lineno}: key outside of any [section]") from None
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"line {exc.lineno}: duplicate section [{exc.section}]") from None
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(
            f"line {exc.lineno}: duplicate key {exc.section}.{exc.option}") from None
    except configparser.ParsingError as exc:
        lineno = exc.errors[0][0] if exc.errors else "?"
        raise ConfigError(f"line {lineno}: expected 'key = value'") from None
    lines = _line_map(text)
    data: dict[str, dict[str, str]] = {}
    for section in cp.sections():
        name = section.strip().lower()
        if name not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        for key, value in cp.items(section):
            if key not in SCHEMA[name]:
                line = lines.get((name, key))
                at = f" (line {line})" if line else ""
                raise ConfigError(f"unknown key {name}.{key}{at}")
        data[name] = dict(cp.items(section))
    return build_config(data, lines)


def build_config(data: dict, lines: dict | None = None) -> RunConfig:
    defaults: list[str] = []
    r = _Reader(data, lines or {}, defaults)

    theta = _read_theta(r, "uncertainty", required=True)

    # times
    monitoring = r.get("times", "monitoring", _floats)
    horizon = r.get("times", "horizon", _float, check=lambda v: v > 0, constraint="> 0")
    if monitoring is None and horizon is None:
        raise ConfigError("times.monitoring: required (or times.horizon)")
    if monitoring is None:
        monitoring = (horizon,)
    try:
        times = validate_times(monitoring)
    except ConfigError as exc:
        raise r.err("times", "monitoring", str(exc)) from None
    if horizon is not None and abs(horizon - times[-1]) > 1e-12:
        raise r.err("times", "horizon", f"must equal the last monitoring time {times[-1]}")
    conditioning = r.get("times", "conditioning", _float, 0.0,
                         check=lambda v: v >= 0, constraint=">= 0")
    if conditioning != 0.0 and not any(abs(conditioning - t) <= 1e-12 for t in times):
        raise r.err("times", "conditioning", f"must be 0 or one of the monitoring times {times}")

    # grid
    n_points = r.get("grid", "n_points", _int, check=lambda v: v >= 3,
                     constraint="an integer >= 3", echo=False)
    cfl = r.get("grid", "cfl_fraction", _float, check=lambda v: 0 < v <= 1,
                constraint="in (0, 1]", echo=False)
    span = r.get("grid", "span_sigmas", _float, check=lambda v: v > 0,
                 constraint="> 0", echo=False)
    x_min = r.get("grid", "x_min", _float)
    x_max = r.get("grid", "x_max", _float)
    grid = None
    if (x_min is None) != (x_max is None):
        raise r.err("grid", "x_min" if x_min is None else "x_max",
                    "x_min and x_max must be given together")
    if x_min is not None:
        if span is not None:
            raise r.err("grid", "span_sigmas", "conflicts with explicit x_min/x_max")
        if not x_min < 0.0 < x_max:
            raise r.err("grid", "x_min", "grid must satisfy x_min < 0 < x_max")
        if n_points is None:
            n_points = 401
            defaults.append("grid.n_points=401")
        grid = SpatialGrid(x_min, x_max, n_points)
    numerics = Numerics(n_points=n_points if grid is None else None,
                        cfl_fraction=cfl, span_sigmas=span, grid=grid)

    # payoff
    payoff = None
    if r.has("payoff", "expression"):
        try:
            payoff = parse_payoff(r.raw("payoff", "expression"), times)
        except ConfigError as exc:
            raise r.err("payoff", "expression", str(exc)) from None
    suite: tuple[PayoffExpression, ...] = ()
    if r.has("payoff", "suite"):
        items = [s.strip() for s in r.raw("payoff", "suite").split(";") if s.strip()]
        if not items:
            raise r.err("payoff", "suite", "empty suite")
        try:
            suite = tuple(parse_payoff(s, times) for s in items)
        except ConfigError as exc:
            raise r.err("payoff", "suite", str(exc)) from None

    utility = _read_utility(r, "utility")
    endowment = r.get("pricing", "endowment", _float, 0.0)
    wealth = r.get("pricing", "wealth", _float, 0.0)

    mode = r.get("run", "mode", lambda s: s.strip().lower(), "upper",
                 check=lambda v: v in ("upper", "lower"), constraint="'upper' or 'lower'")
    method = r.get("run", "method", lambda s: s.strip().lower(), "pde",
                   check=lambda v: v in ("pde", "lattice", "mc"),
                   constraint="one of pde, lattice, mc")
    seed = r.get("run", "seed", _int, 0, check=lambda v: v >= 0, constraint=">= 0")

    # echoed by the method that uses them, since --method may override run.method
    lattice_steps = r.get("lattice", "n_steps", _int, 64, check=lambda v: v >= 1,
                          constraint=">= 1", echo=False)
    mc_paths = r.get("mc", "n_paths", _int, 20000, check=lambda v: v >= 100,
                     constraint=">= 100", echo=False)
    mc_controls = r.get("mc", "n_controls", _int, 20, check=lambda v: v >= 1,
                        constraint=">= 1", echo=False)

    compare = None
    if "compare" in data:
        ctheta = _read_theta(r, "compare", required=False)
        cutil = _read_utility(r, "compare")
        order = dict(check=lambda v: v in ("le", "ge"), constraint="'le' or 'ge'")
        bid_order = r.get("compare", "bid_order", str.strip, "le", **order)
        ask_order = r.get("compare", "ask_order", str.strip, "ge", **order)
        compare = CompareConfig(ctheta, cutil, bid_order, ask_order)

    sweep = None
    if "sweep" in data:
        param = r.get("sweep", "parameter", lambda s: s.strip().lower())
        if param is None:
            raise ConfigError("sweep.parameter: required")
        if param not in SWEEPABLE:
            raise r.err("sweep", "parameter", f"must be one of {', '.join(SWEEPABLE)}")
        if r.has("sweep", "values"):
            values = r.get("sweep", "values", _floats)
        else:
            start = r.get("sweep", "start", _float)
            stop = r.get("sweep", "stop", _float)
            count = r.get("sweep", "count", _int, 5, check=lambda v: v >= 1,
                          constraint=">= 1")
            if start is None or stop is None:
                raise ConfigError("sweep: give values, or start and stop")
            values = tuple(start + (stop - start) * i / max(count - 1, 1)
                           for i in range(count))
        command = r.get("sweep", "command", lambda s: s.strip().lower(), "expect",
                        check=lambda v: v in ("expect", "ce", "premium", "bid", "ask"),
                        constraint="one of expect, ce, premium, bid, ask")
        sweep = SweepConfig(param, tuple(values), command)

    output_path = r.get("output", "path", str.strip)

    return RunConfig(theta, numerics, times, payoff, suite, utility, endowment, wealth,
                     mode, method, seed, conditioning, lattice_steps, mc_paths,
                     mc_controls, compare, sweep, output_path, tuple(defaults),
                     {s: dict(v) for s, v in data.items()})


def method_defaults(cfg: RunConfig, method: str) -> list[str]:
    """Defaults applied to the settings of ``method`` (lattice or mc)."""
    keys = {"lattice": (("lattice", "n_steps", cfg.lattice_steps),),
            "mc": (("mc", "n_paths", cfg.mc_paths), ("mc", "n_controls", cfg.mc_controls))}
    return [f"{s}.{k}={v}" for s, k, v in keys.get(method, ())
            if k not in cfg.raw.get(s, {})]


def with_override(cfg: RunConfig, dotted: str, value: float) -> RunConfig:
    """Rebuild ``cfg`` with one key replaced (used by ``sweep``)."""
    section, key = dotted.split(".", 1)
    data = {s: dict(v) for s, v in cfg.raw.items()}
    data.setdefault(section, {})[key] = repr(int(value)) if key in ("n_points", "n_steps") \
        else repr(float(value))
    data.pop("sweep", None)
    new = build_config(data)
    return replace(new, sweep=None)


def load_config(path: str) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text)
