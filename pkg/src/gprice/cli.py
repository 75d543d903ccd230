"""``gprice`` command-line front end."""

from __future__ import annotations

import argparse
import csv
import io
import os
import sys
import tempfile
from dataclasses import replace

import numpy as np

from .config import RunConfig, load_config, method_defaults, with_override
from .core import CylinderPayoff
from .errors import AlignmentError, ConfigError, GPriceError
from .expectation import ConditionalResult, expectation
from .lattice import LatticeSpec, lattice_dpp_expectation, monte_carlo_prior_bound
from .pricing import (
    PricingContext,
    ambiguity_premium_exact,
    ambiguity_premium_pratt,
    ask_price,
    bid_price,
    certainty_equivalent,
    compare_uncertainty_aversion,
)
from .verify import run_all

COMMANDS = ("expect", "cond-expect", "ce", "premium", "bid", "ask", "compare", "verify", "sweep")
META = ("grid", "steps", "mode", "seed", "defaults")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_PROPERTY = 0, 2, 3, 4


def fmt(v) -> str:
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


class Table:
    """Rows collected in memory and written once at the end."""

    def __init__(self, header):
        self.header = list(header)
        self.rows = []

    def add(self, *row):
        if len(row) != len(self.header):
            raise ValueError("row does not match header")
        self.rows.append([fmt(v) for v in row])

    def render(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header)
        w.writerows(self.rows)
        return buf.getvalue()


def _meta(cfg: RunConfig, md: dict, mode: str | None = None) -> list:
    defaults = list(cfg.defaults)
    if md.get("defaults"):
        defaults.extend(md["defaults"].split(";"))
    return [md.get("grid", ""), md.get("steps", ""), mode or md.get("mode", cfg.mode),
            cfg.seed, ";".join(defaults)]


def _need_payoff(cfg: RunConfig) -> CylinderPayoff:
    if cfg.payoff is None:
        raise ConfigError("payoff.expression: required for this command")
    return cfg.payoff.to_payoff()


def _context(cfg: RunConfig) -> PricingContext:
    if cfg.utility is None:
        raise ConfigError("utility.kind: required for this command")
    return PricingContext(cfg.utility, cfg.theta, cfg.endowment, cfg.numerics)


def _emit_result(cfg, name, res: ConditionalResult, mode=None) -> Table:
    """Scalar results give one row; grid results give one row per node."""
    if res.is_scalar:
        t = Table(("name", "value") + META)
        t.add(name, res.scalar, *_meta(cfg, res.metadata, mode))
        return t
    k = len(res.times)
    t = Table(tuple(f"x{i + 1}" for i in range(k)) + ("value",) + META)
    meta = _meta(cfg, res.metadata, mode)
    pts = res.grid.points
    vals = res.values
    mesh = np.meshgrid(*([np.arange(len(pts))] * k), indexing="ij")
    for idx in zip(*(a.ravel() for a in mesh)):
        t.add(*(float(pts[i]) for i in idx), float(vals[idx]), *meta)
    return t


def cmd_expect(cfg: RunConfig) -> Table:
    payoff = _need_payoff(cfg)
    sign = 1.0 if cfg.mode == "upper" else -1.0
    table = Table(("name", "value") + META)
    if cfg.method == "pde":
        res = expectation(payoff, cfg.theta, 0.0, cfg.mode, cfg.numerics)
        return _emit_result(cfg, "expectation", res)
    target = payoff if sign > 0 else -payoff
    extra = ";".join(method_defaults(cfg, cfg.method))
    if cfg.method == "lattice":
        spec = LatticeSpec.from_theta(cfg.theta, payoff.horizon, cfg.lattice_steps)
        v = sign * lattice_dpp_expectation(target, spec)
        md = {"grid": f"lattice[dt={spec.dt:.17g}]", "steps": str(spec.n_steps),
              "defaults": extra}
        table.add("expectation", v, *_meta(cfg, md))
        return table
    mc = monte_carlo_prior_bound(target, cfg.theta, cfg.mc_paths, cfg.mc_controls, cfg.seed)
    md = {"grid": f"mc[paths={mc.n_paths},controls={mc.n_controls}]",
          "steps": f"{mc.steps_per_unit}/unit", "defaults": extra}
    table.add("expectation", sign * mc.estimate, *_meta(cfg, md))
    table.add("std_error", mc.std_error, *_meta(cfg, md))
    return table


def cmd_cond_expect(cfg: RunConfig) -> Table:
    payoff = _need_payoff(cfg)
    if cfg.conditioning == 0.0:
        raise ConfigError("times.conditioning: cond-expect needs a positive monitoring time")
    res = expectation(payoff, cfg.theta, cfg.conditioning, cfg.mode, cfg.numerics)
    return _emit_result(cfg, "conditional_expectation", res)


def _priced(fn, name):
    def run(cfg: RunConfig) -> Table:
        res = fn(_need_payoff(cfg), cfg.conditioning, _context(cfg))
        return _emit_result(cfg, name, res, mode="lower")
    return run


def cmd_premium(cfg: RunConfig) -> Table:
    payoff = _need_payoff(cfg)
    ctx = _context(cfg)
    table = Table(("name", "value") + META)
    grid, defaults = cfg.numerics.resolve(cfg.theta, payoff)
    md = {"grid": grid.describe(), "steps": "", "defaults": ";".join(defaults)}
    table.add("premium_exact", ambiguity_premium_exact(cfg.wealth, payoff, ctx),
              *_meta(cfg, md, "lower"))
    table.add("premium_pratt", ambiguity_premium_pratt(cfg.wealth, ctx.utility, cfg.theta),
              *_meta(cfg, {"grid": "", "steps": ""}, "lower"))
    return table


def cmd_compare(cfg: RunConfig) -> Table:
    if cfg.compare is None:
        raise ConfigError("[compare] section required")
    ctx1 = _context(cfg)
    ctx2 = ctx1
    if cfg.compare.theta is not None:
        ctx2 = ctx2.with_theta(cfg.compare.theta)
    if cfg.compare.utility is not None:
        ctx2 = ctx2.with_utility(cfg.compare.utility)
    suite = [p.to_payoff() for p in (cfg.suite or ((cfg.payoff,) if cfg.payoff else ()))]
    if not suite:
        raise ConfigError("payoff.suite: required for compare")
    rep = compare_uncertainty_aversion(ctx1, ctx2, suite, cfg.conditioning)
    table = Table(("name", "value") + META)
    meta = _meta(cfg, {"grid": "", "steps": ""}, "lower")
    # per-payoff rows only for scalar prices
    for i, n in enumerate(rep.names if cfg.conditioning == 0.0 else ()):
        table.add(f"bid1[{n}]", float(rep.bids1[i]), *meta)
        table.add(f"bid2[{n}]", float(rep.bids2[i]), *meta)
        table.add(f"ask1[{n}]", float(rep.asks1[i]), *meta)
        table.add(f"ask2[{n}]", float(rep.asks2[i]), *meta)
    bv, av = rep.violation(cfg.compare.bid_order, cfg.compare.ask_order)
    table.add(f"bid_{cfg.compare.bid_order}_violation", bv, *meta)
    table.add(f"ask_{cfg.compare.ask_order}_violation", av, *meta)
    return table


def cmd_verify(cfg: RunConfig | None) -> tuple[Table, int]:
    table = Table(("property_id", "status", "max_violation", "tolerance"))
    results = run_all()
    for r in results:
        table.add(r.property_id, r.status, r.max_violation, r.tolerance)
    code = EXIT_OK if all(r.passed for r in results) else EXIT_PROPERTY
    return table, code


SCALAR_COMMANDS = {
    "expect": cmd_expect,
    "cond-expect": cmd_cond_expect,
    "ce": _priced(certainty_equivalent, "certainty_equivalent"),
    "bid": _priced(bid_price, "bid"),
    "ask": _priced(ask_price, "ask"),
    "premium": cmd_premium,
    "compare": cmd_compare,
}


def cmd_sweep(cfg: RunConfig) -> Table:
    if cfg.sweep is None:
        raise ConfigError("[sweep] section required")
    sw = cfg.sweep
    run = SCALAR_COMMANDS[sw.command]
    table = Table(("parameter", "setting", "name", "value") + META)
    for v in sw.values:
        sub = with_override(cfg, sw.parameter, v)
        sub = replace(sub, seed=cfg.seed, method=cfg.method)
        inner = run(sub)
        if inner.header[:2] != ["name", "value"]:
            raise ConfigError("sweep supports scalar results only (times.conditioning = 0)")
        for row in inner.rows:
            table.rows.append([sw.parameter, fmt(float(v))] + row)
    return table


def write_atomic(text: str, path: str | None) -> None:
    """Write the whole text or nothing: temp file in the target dir, then rename."""
    if path is None or path == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".gprice-", suffix=".csv", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def apply_overrides(cfg: RunConfig, method: str | None, seed: int | None) -> RunConfig:
    """Command-line values win; their keys drop out of the echoed defaults."""
    drop = set()
    if method is not None:
        cfg = replace(cfg, method=method)
        drop.add("run.method")
    if seed is not None:
        if seed < 0:
            raise ConfigError("--seed must be >= 0")
        cfg = replace(cfg, seed=seed)
        drop.add("run.seed")
    kept = tuple(d for d in cfg.defaults if d.split("=", 1)[0] not in drop)
    return replace(cfg, defaults=kept)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gprice",
                                description="Pricing under volatility uncertainty.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="run configuration file (optional for verify)")
    p.add_argument("--out", help="CSV output path (default: config output.path or stdout)")
    p.add_argument("--method", choices=("pde", "lattice", "mc"))
    p.add_argument("--seed", type=int)
    return p


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = None
        if args.config is not None:
            cfg = load_config(args.config)
            cfg = apply_overrides(cfg, args.method, args.seed)
        elif args.command != "verify":
            raise ConfigError("--config is required for this command")
        if args.method is not None and args.command not in ("expect", "sweep"):
            raise ConfigError(f"--method applies to expect only, not {args.command}")
        code = EXIT_OK
        if args.command == "verify":
            table, code = cmd_verify(cfg)
        elif args.command == "sweep":
            table = cmd_sweep(cfg)
        else:
            table = SCALAR_COMMANDS[args.command](cfg)
        out = args.out or (cfg.output_path if cfg else None)
        write_atomic(table.render(), out)
        return code
    except (ConfigError, AlignmentError) as exc:
        _error(exc)
        return EXIT_CONFIG
    except (GPriceError, ArithmeticError, MemoryError) as exc:
        _error(exc)
        return EXIT_NUMERIC
    except OSError as exc:
        _error(exc)
        return EXIT_CONFIG


def _error(exc: BaseException) -> None:
    msg = " ".join(str(exc).split()) or type(exc).__name__
    print(f"gprice: error: {msg}", file=sys.stderr)


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
