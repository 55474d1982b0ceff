"""Command-line front end.

Subcommands:
  analyze   structural report for a system (orders, transitivity, freeness,
            the magic property, invariant-algebra pairing, support sizes)
  average   window averages over a schedule, CSV or text, with exact or
            analytic references where they exist
  extend    build the magic extension of an ergodic system and write it as a
            loadable system file
  cube      quadruple/pair space structure, empirical box averages, and the
            product identification check
  verify    seeded property sweeps

Exit codes: 0 success; 1 configuration or I/O problem; 2 a checked property
actually failed (verification findings, identification failure, tolerance
breach, or an extension that could not be built).
"""

from __future__ import annotations

import argparse
import json
import os
import sys as _sys
import tempfile
import time
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple, Union

from .core import Observable, PreconditionError, format_fraction
from .finite import (
    FiniteMPS,
    S_GEN,
    T_GEN,
    SystemFormatError,
    diagonal_grid,
    ergodic_decomposition,
    is_ergodic,
    is_free,
    product_grid,
    system_from_dict,
    system_to_dict,
    z4_diagonal,
)
from .joinings import host_measure, is_magic, magic_extension, measurability_check, ExtensionConstructionError
from .averaging import AVERAGE_KINDS, AverageSpec, ConvergenceReport, run_average
from .cubes import cube_space, empirical_unique_ergodicity, product_cube_identification, two_sided_cube
from .torus import TorusSystem, TrigPoly, sqrt23_system, torus_report
from .verify import SUITES, run_suites

FINITE_BUILTINS = {
    "z4-diagonal": z4_diagonal,
    "product-2x3": product_grid,
    "grid-2x3": diagonal_grid,
}
TORUS_BUILTINS = {
    "torus-sqrt23": sqrt23_system,
}


class CliError(Exception):
    """Configuration or I/O problem; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on usage errors, which this interface
    # reserves for genuine property violations; remap to 1.
    def error(self, message):
        self.print_usage(_sys.stderr)
        raise CliError(message)


def _atomic_write(path: str, text: str):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(text: str, out: Optional[str]):
    if out:
        _atomic_write(out, text)
    else:
        _sys.stdout.write(text)
        if not text.endswith("\n"):
            _sys.stdout.write("\n")


def _parse_fraction(text: str) -> Fraction:
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise CliError(f"not a p/q rational: {text!r} ({exc})")


def _parse_observable(text: str, n: int) -> Observable:
    values = tuple(_parse_fraction(part) for part in text.split(","))
    if len(values) != n:
        raise CliError(f"observable has {len(values)} entries, system has {n} points")
    return Observable(values)


def _parse_trig(text: str) -> TrigPoly:
    coeffs = {}
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = chunk.split(":")
        if len(parts) != 3:
            raise CliError(f"trig term must be n:re:im, got {chunk!r}")
        try:
            n = int(parts[0])
            re, im = float(parts[1]), float(parts[2])
        except ValueError as exc:
            raise CliError(f"bad trig term {chunk!r}: {exc}")
        if n < 0:
            raise CliError(f"trig frequencies are given for n >= 0 (negatives are implied): {chunk!r}")
        if n == 0 and im != 0.0:
            raise CliError("the constant term must be real")
        coeffs[n] = coeffs.get(n, 0j) + complex(re, im)
        if n:
            coeffs[-n] = coeffs.get(-n, 0j) + complex(re, -im)
    if not coeffs:
        raise CliError("empty trigonometric polynomial")
    return TrigPoly(coeffs)


def _parse_schedule(text: str) -> Tuple[int, ...]:
    text = text.strip()
    if text.startswith("pow2:"):
        span = text[len("pow2:"):]
        if ".." not in span:
            raise CliError(f"pow2 schedule must look like pow2:4..10, got {text!r}")
        lo_s, hi_s = span.split("..", 1)
        try:
            lo, hi = int(lo_s), int(hi_s)
        except ValueError as exc:
            raise CliError(f"bad schedule bounds in {text!r}: {exc}")
        if lo < 0 or hi < lo:
            raise CliError(f"bad schedule range in {text!r}")
        return tuple(2**k for k in range(lo, hi + 1))
    try:
        values = tuple(int(part) for part in text.split(","))
    except ValueError as exc:
        raise CliError(f"bad schedule {text!r}: {exc}")
    if not values or any(v < 1 for v in values):
        raise CliError("schedule entries must be positive")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise CliError("schedule must be strictly increasing")
    return values


def _load_system(args) -> Union[FiniteMPS, TorusSystem]:
    if getattr(args, "builtin", None) and getattr(args, "system", None):
        raise CliError("give either --builtin or --system, not both")
    if getattr(args, "builtin", None):
        name = args.builtin
        if name in FINITE_BUILTINS:
            return FINITE_BUILTINS[name]()
        if name in TORUS_BUILTINS:
            return TORUS_BUILTINS[name]()
        known = ", ".join(sorted(FINITE_BUILTINS) + sorted(TORUS_BUILTINS))
        raise CliError(f"unknown builtin {name!r} (known: {known})")
    if getattr(args, "system", None):
        return _load_system_file(args.system)
    raise CliError("a system is required: --builtin NAME or --system FILE")


def _load_system_file(path: str) -> FiniteMPS:
    try:
        with open(path) as handle:
            doc = json.load(handle)
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise CliError(f"{path} is not valid JSON: {exc}")
    try:
        return system_from_dict(doc)
    except SystemFormatError as exc:
        raise CliError(f"{path}: {exc}")


def _yesno(flag: bool) -> str:
    return "yes" if flag else "no"


# -- analyze -----------------------------------------------------------------


def cmd_analyze(args) -> int:
    system = _load_system(args)
    lines: List[str] = []
    if isinstance(system, TorusSystem):
        lines.append("kind: torus rotations")
        lines.append(f"alpha: {float(system.alpha):.12f}")
        lines.append(f"beta: {float(system.beta):.12f}")
        lines.append(f"generic pair declared: {_yesno(system.generic)}")
    else:
        hm = host_measure(system)
        space = cube_space(system)
        free = is_free(system)
        magic = is_magic(system)
        lines.append(f"points: {system.n}")
        lines.append(f"uniform weights: {_yesno(len(set(system.weights)) == 1)}")
        lines.append(f"order of S: {system.order_s()}   order of T: {system.order_t()}")
        lines.append(f"ergodic: {_yesno(is_ergodic(system))}")
        lines.append(f"components: {len(ergodic_decomposition(system))}")
        if free.free:
            lines.append("free: yes")
        else:
            i, j = free.witness
            lines.append(f"free: no (witness: S^{i} T^{j} = identity)")
        if magic.is_magic:
            lines.append("magic: yes")
        else:
            lines.append(f"magic: no ({magic.direction})")
        lines.append(f"kernel dimension: {magic.seminorm_kernel_dim}   mean-zero dimension: {magic.mean_zero_dim}")
        lines.append(f"invariant pairing measurable: {_yesno(measurability_check(system))}")
        lines.append(f"pair support: {len(hm.mu_s.entries)}")
        lines.append(f"quadruple support: {len(hm.mu_st.entries)}")
        lines.append(f"cube space: {space.size}")
    _emit("\n".join(lines) + "\n", args.out)
    return 0


# -- average -----------------------------------------------------------------


def cmd_average(args) -> int:
    system = _load_system(args)
    schedule = _parse_schedule(args.schedule)
    kind = args.kind
    if isinstance(system, TorusSystem):
        if not args.trig:
            raise CliError("torus averages need at least one --trig observable")
        if args.observable:
            raise CliError("--observable is for finite systems; use --trig on the torus")
        polys = [_parse_trig(t) for t in args.trig]
        need = AVERAGE_KINDS.get(kind)
        if need is None:
            raise CliError(f"unknown kind {kind!r}")
        if len(polys) == 1 and need > 1:
            polys = polys * need
        if len(polys) != need:
            raise CliError(f"kind {kind} needs {need} observables, got {len(polys)}")
        start = _parse_fraction(args.start) if args.start else Fraction(0)
        report = torus_report(system, kind, polys, start, schedule, block_size=args.block_size)
    else:
        if not args.observable:
            raise CliError("finite averages need at least one --observable")
        if args.trig:
            raise CliError("--trig is for the torus; use --observable on finite systems")
        obs = [_parse_observable(o, system.n) for o in args.observable]
        need = AVERAGE_KINDS.get(kind)
        if need is None:
            raise CliError(f"unknown kind {kind!r}")
        if len(obs) == 1 and need > 1:
            obs = obs * need
        try:
            start = int(args.start) if args.start else 0
        except ValueError:
            raise CliError(f"finite start must be a point index, got {args.start!r}")
        try:
            spec = AverageSpec(kind=kind, observables=tuple(obs), start=start, schedule=schedule)
            report = run_average(system, spec)
        except (ValueError, PreconditionError) as exc:
            raise CliError(str(exc))
    text = report.to_csv() if args.format == "csv" else report.to_text()
    _emit(text, args.out)
    if args.tolerance is not None:
        if any(row.reference is None for row in report.rows):
            raise CliError(f"--tolerance needs a reference value, and kind {kind} has none here")
        worst = max(abs(row.abs_error) for row in report.rows)
        if worst > args.tolerance:
            _sys.stderr.write(f"tolerance breach: worst error {float(worst)} > {args.tolerance}\n")
            return 2
    return 0


# -- extend ------------------------------------------------------------------


def cmd_extend(args) -> int:
    system = _load_system(args)
    if isinstance(system, TorusSystem):
        raise CliError("extend works on finite systems")
    try:
        ext = magic_extension(system)
    except PreconditionError as exc:
        raise CliError(str(exc))
    except ExtensionConstructionError as exc:
        _sys.stderr.write(f"extension failed: {exc}\n")
        return 2
    lines = [
        f"base points: {system.n}",
        f"extension points: {ext.system.n}",
        f"component mass: {format_fraction(ext.mass)}",
        "components (size, mass, magic, free, selected):",
    ]
    for comp in ext.components:
        flags = []
        for label, value in (("magic", comp.magic), ("free", comp.free)):
            flags.append(f"{label}={'-' if value is None else _yesno(value)}")
        note = f" [{comp.rejection}]" if comp.rejection else ""
        lines.append(
            f"  size={comp.size} mass={format_fraction(comp.mass)} {' '.join(flags)} "
            f"selected={_yesno(comp.selected)}{note}"
        )
    report = is_magic(ext.system)
    lines.append(f"extension magic: {_yesno(report.is_magic)}")
    lines.append(f"extension ergodic: {_yesno(is_ergodic(ext.system))}")
    lines.append(f"extension free: {_yesno(is_free(ext.system).free)}")
    if args.out:
        doc = system_to_dict(ext.system)
        doc["factor"] = list(ext.factor)
        doc["base"] = system_to_dict(system)
        _atomic_write(args.out, json.dumps(doc, indent=2) + "\n")
        lines.append(f"wrote extension system to {args.out}")
    _sys.stdout.write("\n".join(lines) + "\n")
    return 0


# -- cube --------------------------------------------------------------------


def cmd_cube(args) -> int:
    system = _load_system(args)
    if isinstance(system, TorusSystem):
        raise CliError("cube structure reports work on finite systems")
    if args.identify_with:
        second = _load_system_file(args.identify_with)
        try:
            report = product_cube_identification(system, second)
        except PreconditionError as exc:
            raise CliError(str(exc))
        lines = [
            f"quadruples: {report.cube_size}",
            f"pair spaces: {report.first_pair_size} x {report.second_pair_size}",
            f"bijection: {_yesno(report.bijective)}",
            f"action conjugated: {_yesno(report.intertwines)}",
            f"measure identified: {_yesno(report.measure_matches)}",
            f"identified: {_yesno(report.identified)}",
        ]
        _emit("\n".join(lines) + "\n", args.out)
        return 0 if report.identified else 2
    space = cube_space(system)
    orbits = space.orbits()
    lines = [
        f"quadruples: {space.size}",
        f"transform orbits: {len(orbits)}",
        f"transitive: {_yesno(space.is_transitive())}",
        f"pair space (S): {two_sided_cube(system, S_GEN).size}",
        f"pair space (T): {two_sided_cube(system, T_GEN).size}",
    ]
    hm = host_measure(system)
    support_matches = set(hm.mu_st.entries) == set(space.points)
    lines.append(f"quadruple measure supported on cube space: {_yesno(support_matches)}")
    violation = not support_matches
    if args.schedule:
        schedule = _parse_schedule(args.schedule)
        if not space.is_transitive():
            raise CliError("empirical comparison against the uniform measure needs a transitive cube space")
        reference = space.uniform_measure()
        starts = "all" if args.starts == "all" else [int(s) for s in args.starts.split(",")]
        report = empirical_unique_ergodicity(space.transform_permutations(), reference, starts, schedule)
        lines.append("empirical deviation from uniform (worst start):")
        for row in report.rows:
            lines.append(f"  N={row.N}: {format_fraction(row.value)} (~{float(row.value):.6f})")
    _emit("\n".join(lines) + "\n", args.out)
    return 2 if violation else 0


# -- verify ------------------------------------------------------------------


def cmd_verify(args) -> int:
    names = args.suite or ["all"]
    if "all" in names:
        names = list(SUITES)
    try:
        results = run_suites(names, seed=args.seed, trials=args.trials)
    except ValueError as exc:
        raise CliError(str(exc))
    lines = []
    failures = 0
    for result in results:
        lines.append(result.line())
        failures += result.failures
        for finding in result.findings[:10]:
            lines.append(f"    {finding}")
    lines.append(f"total failures: {failures}")
    _emit("\n".join(lines) + "\n", args.out)
    return 2 if failures else 0


# -- wiring ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ergocubes", description="finite measure-preserving systems with two commuting maps")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--builtin", help="stock system: " + ", ".join(sorted(FINITE_BUILTINS) + sorted(TORUS_BUILTINS)))
        p.add_argument("--system", help="JSON system file")
        p.add_argument("--out", help="write the report to this file (atomically)")

    p = sub.add_parser("analyze", help="structural report")
    add_common(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("average", help="window averages over a schedule")
    add_common(p)
    p.add_argument("--kind", required=True, choices=sorted(AVERAGE_KINDS))
    p.add_argument("--observable", action="append", default=[],
                   help="comma-separated p/q values, one per point; repeatable")
    p.add_argument("--trig", action="append", default=[],
                   help="torus observable as n:re:im terms joined by ';' (n >= 0); repeatable")
    p.add_argument("--start", help="start point: index (finite) or p/q (torus); default 0")
    p.add_argument("--schedule", required=True, help="window sizes: '4,8,16' or 'pow2:4..10'")
    p.add_argument("--format", choices=("csv", "text"), default="csv")
    p.add_argument("--tolerance", type=float, default=None,
                   help="exit 2 if any |value - reference| exceeds this")
    p.add_argument("--block-size", type=int, default=256, help="torus evaluation block rows")
    p.set_defaults(func=cmd_average)

    p = sub.add_parser("extend", help="build the magic extension")
    add_common(p)
    p.set_defaults(func=cmd_extend)

    p = sub.add_parser("cube", help="quadruple space structure and empirical averages")
    add_common(p)
    p.add_argument("--schedule", help="run the empirical engine with these window sizes")
    p.add_argument("--starts", default="all", help="'all' or comma-separated quadruple indices")
    p.add_argument("--identify-with", metavar="FILE",
                   help="second factor file: check the product identification instead")
    p.set_defaults(func=cmd_cube)

    p = sub.add_parser("verify", help="seeded property sweeps")
    p.add_argument("--suite", action="append", choices=sorted(SUITES) + ["all"],
                   help="repeatable; default all")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=25)
    p.add_argument("--out", help="write the report to this file (atomically)")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except CliError as exc:
        _sys.stderr.write(f"error: {exc}\n")
        return 1
    except OSError as exc:
        _sys.stderr.write(f"i/o error: {exc}\n")
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
