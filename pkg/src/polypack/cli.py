"""Command-line front end.

Every subcommand is a thin wrapper over the library. Settings come from an
optional INI file (``--config``) whose sections are named after the
subcommands, with a shared ``[defaults]`` section; command-line flags use
the same key names and override file values.

    polypack limit --deltas 0.9068996821,0.9068996821
    polypack density --generator hex --size 1
    polypack converge --base hex --ref hex --radii 1/8,1/16,1/32,1/64 --levels 3,4,5,6 --csv out.csv
"""
from __future__ import annotations

import argparse
import configparser
import logging
import sys
import warnings
from dataclasses import dataclass, field, fields
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

from . import fileio, generators, hierarchy, packing, render

log = logging.getLogger(__name__)

COMMANDS = ("validate", "density", "fill", "iterate", "converge", "limit")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_UNKNOWN_COMMAND = 3
EXIT_BAD_SCHEDULE = 4
EXIT_BAD_PACKING = 5
EXIT_VIOLATIONS = 6


class ScheduleError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    input: Optional[str] = None
    generator: Optional[str] = None
    size: float = 1.0
    base: Optional[str] = None
    ref: str = "hex"
    m: Optional[int] = None
    scale: Optional[float] = None
    radii: list = field(default_factory=list)
    levels: list = field(default_factory=list)
    deltas: list = field(default_factory=list)
    csv: Optional[str] = None
    svg: Optional[str] = None
    output: Optional[str] = None
    samples: int = 0
    seed: int = 0


def _floats(text: str, name: str) -> list[float]:
    try:
        vals = [float(Fraction(t.strip())) for t in str(text).split(",") if t.strip()]
    except (ValueError, ZeroDivisionError) as exc:
        raise ScheduleError(f"malformed {name} list {text!r}: {exc}") from None
    if not vals:
        raise ScheduleError(f"empty {name} list")
    return vals


def _ints(text: str, name: str) -> list[int]:
    try:
        return [int(t) for t in str(text).split(",") if t.strip()]
    except ValueError:
        raise ScheduleError(f"malformed {name} list {text!r}") from None


_CONVERT = {
    "size": float, "m": int, "scale": lambda v: float(Fraction(v)), "samples": int, "seed": int,
    "radii": lambda v: _floats(v, "radii"), "deltas": lambda v: _floats(v, "deltas"),
    "levels": lambda v: _ints(v, "levels"),
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="polypack", description=__doc__.split("\n\n")[0])
    ap.add_argument("--config", help="INI file with [defaults] and per-command sections")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", metavar="COMMAND")

    def add(name, help_, *opts):
        p = sub.add_parser(name, help=help_)
        for o in opts:
            p.add_argument(f"--{o}", default=None)
        return p

    src = ("input", "generator", "size")
    add("validate", "check a packing for overlaps", *src, "csv", "svg")
    add("density", "exact density, optionally with a Monte Carlo estimate",
        *src, "samples", "seed", "svg")
    add("fill", "fill the free grid cubes of a packing once",
        *src, "base", "ref", "m", "scale", "output", "csv", "svg", "samples", "seed")
    add("iterate", "apply several fills in turn",
        *src, "base", "ref", "radii", "levels", "output", "csv", "svg", "samples", "seed")
    add("converge", "fill one base at a sequence of scales",
        *src, "base", "ref", "radii", "levels", "csv", "samples", "seed")
    add("limit", "limiting density 1 - prod(1 - delta_i)", "deltas")
    return ap


def make_config(command: str, file_values: dict, flag_values: dict) -> RunConfig:
    """Merge file values and flags (flags win) into a typed :class:`RunConfig`."""
    known = {f.name for f in fields(RunConfig)}
    merged = {k: v for k, v in file_values.items() if k in known}
    merged.update({k: v for k, v in flag_values.items() if v is not None and k in known})
    cfg = RunConfig(command)
    for k, v in merged.items():
        if k == "command":
            continue
        conv = _CONVERT.get(k)
        if conv is not None and isinstance(v, str):
            try:
                v = conv(v)
            except ScheduleError:
                raise
            except ValueError as exc:
                raise ScheduleError(f"bad value for {k}: {v!r}") from exc
        setattr(cfg, k, v)
    return cfg


def read_config_file(path: str, command: str) -> dict:
    cp = configparser.ConfigParser()
    if not cp.read(path):
        raise FileNotFoundError(f"config file {path} not found")
    out = dict(cp["defaults"]) if cp.has_section("defaults") else {}
    if cp.has_section(command):
        out.update(cp[command])
    return out


def _generator_packing(label: str, size: float, n: int = 2) -> packing.PeriodicPacking:
    if label == "empty":
        return packing.PeriodicPacking.empty((size,) * n)
    if label == "square":
        return generators.square_tiling(size, n).packing
    return generators.by_name(label, size).packing


def load_source(cfg: RunConfig, label: Optional[str] = None) -> packing.PeriodicPacking:
    """The packing named by ``--input``, else by the generator label."""
    if cfg.input:
        return fileio.read_packing(cfg.input)
    label = label or cfg.generator or cfg.base
    if not label:
        raise ScheduleError("give --input or a generator label")
    return _generator_packing(label, cfg.size)


def _schedule(cfg: RunConfig) -> list[hierarchy.FillPlan]:
    if not cfg.radii or not cfg.levels:
        raise ScheduleError("--radii and --levels are both required")
    if len(cfg.radii) != len(cfg.levels):
        raise ScheduleError(f"{len(cfg.radii)} radii but {len(cfg.levels)} levels")
    try:
        return [hierarchy.FillPlan(int(m), float(r), cfg.ref) for r, m in zip(cfg.radii, cfg.levels)]
    except ValueError as exc:
        raise ScheduleError(str(exc)) from None


def _write(path: Optional[str], text: str) -> None:
    if path:
        Path(path).write_text(text)


def _mc_suffix(pk, cfg: RunConfig) -> str:
    if not cfg.samples:
        return ""
    est = packing.density_monte_carlo(pk, cfg.samples, cfg.seed)
    return f" mc={est.estimate:.10f} mc_stderr={est.stderr:.3g}"


def _cmd_validate(cfg: RunConfig) -> int:
    pk = load_source(cfg)
    bad = packing.validate(pk)
    _write(cfg.csv, fileio.violations_csv(bad))
    if cfg.svg:
        render.write_svg(pk, cfg.svg)
    state = "valid" if not bad else "invalid"
    print(f"{state} placements={len(pk)} violations={len(bad)}"
          + ("" if bad.certain else " (sampled)"))
    return EXIT_OK if not bad else EXIT_VIOLATIONS


def _cmd_density(cfg: RunConfig) -> int:
    pk = load_source(cfg)
    rho = packing.density(pk)
    if cfg.svg:
        render.write_svg(pk, cfg.svg)
    head = f"{rho.lower:.10f}" if rho.exact else f"{rho.lower:.10f}..{rho.upper:.10f}"
    print(head + _mc_suffix(pk, cfg))
    return EXIT_OK


def _cmd_fill(cfg: RunConfig) -> int:
    if cfg.m is None or cfg.scale is None:
        raise ScheduleError("fill needs --m and --scale")
    base = load_source(cfg)
    plan = hierarchy.FillPlan(cfg.m, cfg.scale, cfg.ref)
    out, rep = hierarchy.fill_with_report(base, plan)
    delta = plan.reference_packing(base.n).analytic_density
    lim = hierarchy.limit_density(rep.base_density, delta)
    rows = [hierarchy.ConvergenceRow(cfg.scale, cfg.m, rep.density, lim)]
    _write(cfg.csv, hierarchy.rows_to_csv(rows))
    if cfg.output:
        fileio.write_packing(out, cfg.output)
    if cfg.svg:
        render.write_svg(out, cfg.svg)
    print(f"achieved={rep.density:.10f} limit={lim:.10f} gap={lim - rep.density:.10f}"
          + _mc_suffix(out, cfg))
    return EXIT_OK


def _cmd_iterate(cfg: RunConfig) -> int:
    plans = _schedule(cfg)
    base = load_source(cfg)
    history = hierarchy.iterate_fill(base, plans)
    rows = hierarchy.level_rows(history, plans)
    _write(cfg.csv, hierarchy.levels_to_csv(rows))
    final = history[-1][0]
    if cfg.output:
        fileio.write_packing(final, cfg.output)
    if cfg.svg:
        render.write_svg(final, cfg.svg)
    deltas = [p.reference_packing(base.n).analytic_density for p in plans]
    lim = hierarchy.iterate_limit([rows[0].density] + deltas)
    rho = rows[-1].density
    print(f"achieved={rho:.10f} limit={lim:.10f} gap={lim - rho:.10f}" + _mc_suffix(final, cfg))
    return EXIT_OK


def _cmd_converge(cfg: RunConfig) -> int:
    plans = _schedule(cfg)
    base = load_source(cfg)
    ref = plans[0].reference_packing(base.n)
    try:
        rows = hierarchy.convergence_experiment(base, ref, cfg.radii, cfg.levels,
                                                mc_samples=cfg.samples, seed=cfg.seed)
    except ValueError as exc:
        raise ScheduleError(str(exc)) from None
    _write(cfg.csv, hierarchy.rows_to_csv(rows))
    last = rows[-1]
    print(f"achieved={last.achieved:.10f} limit={last.limit:.10f} gap={last.gap:.10f} "
          f"rows={len(rows)} shrinking={hierarchy.gaps_shrink(rows)}")
    return EXIT_OK


def _cmd_limit(cfg: RunConfig) -> int:
    if not cfg.deltas:
        raise ScheduleError("limit needs --deltas")
    try:
        val = hierarchy.iterate_limit(cfg.deltas)
    except ValueError as exc:
        raise ScheduleError(str(exc)) from None
    print(f"{val:.10f}")
    return EXIT_OK


HANDLERS = {
    "validate": _cmd_validate, "density": _cmd_density, "fill": _cmd_fill,
    "iterate": _cmd_iterate, "converge": _cmd_converge, "limit": _cmd_limit,
}


def run(cfg: RunConfig) -> int:
    """Execute one command; diagnostics go to stderr and map to distinct exit codes."""
    handler = HANDLERS.get(cfg.command)
    if handler is None:
        print(f"polypack: unknown command {cfg.command!r}; choose from {', '.join(COMMANDS)}",
              file=sys.stderr)
        return EXIT_UNKNOWN_COMMAND
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default", hierarchy.VacuousPlanWarning)
            return handler(cfg)
    except ScheduleError as exc:
        print(f"polypack: malformed schedule: {exc}", file=sys.stderr)
        return EXIT_BAD_SCHEDULE
    except packing.InvalidPackingError as exc:
        print(f"polypack: invalid packing file: {exc}", file=sys.stderr)
        return EXIT_BAD_PACKING
    except (ValueError, RuntimeError) as exc:
        print(f"polypack: {exc}", file=sys.stderr)
        return EXIT_FAILURE


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    ap = build_parser()
    # Reject unknown commands before argparse turns them into a generic usage error.
    rest = iter(argv)
    for tok in rest:
        if tok == "--config":
            next(rest, None)
        elif tok.startswith("--config=") or tok in ("-v", "--verbose"):
            continue
        elif tok in ("-h", "--help"):
            break
        else:
            if tok not in COMMANDS:
                print(f"polypack: unknown command {tok!r}; choose from {', '.join(COMMANDS)}",
                      file=sys.stderr)
                return EXIT_UNKNOWN_COMMAND
            break
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command is None:
        ap.print_help(sys.stderr)
        return EXIT_USAGE
    flags = {k: v for k, v in vars(args).items() if k not in ("config", "verbose", "command")}
    try:
        file_values = read_config_file(args.config, args.command) if args.config else {}
        cfg = make_config(args.command, file_values, flags)
    except (FileNotFoundError, configparser.Error) as exc:
        print(f"polypack: bad config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ScheduleError as exc:
        print(f"polypack: malformed schedule: {exc}", file=sys.stderr)
        return EXIT_BAD_SCHEDULE
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
