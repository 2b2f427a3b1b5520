"""Command-line front end.

Subcommands: ``simulate``, ``bounds``, ``compare``, ``calibrate``,
``monitor``.  Options can come from a ``key = value`` config file
(``--config``); command-line flags override the file, which overrides the
defaults.  ``--out DIR`` writes ``trace.csv`` / ``meta.json`` /
``report.json`` plus an ``index.json`` that is always written last; every
file write is atomic.

Exit codes: 0 success (a reported blowup is a success), 2 monitor
violation, 3 solver diagnostic failure, 64 usage/configuration error,
65 inconsistent norm inputs.
"""

import argparse
import json
import math
import os
import sys
import tempfile
from datetime import datetime, timezone

import numpy as np

from . import __version__
from ._kernels import backend_name
from .bounds import (
    BoundCurve,
    CriterionInput,
    CriterionReport,
    DEFAULT_C_INTERP,
    DEFAULT_C_SOBOLEV,
    THRESHOLD,
    arctan_bound_free,
    arctan_bound_steady,
    arctan_bound_timedep,
    derive_constants,
    interval_comparison,
)
from .calibrate import calibrate_constants
from .errors import ConfigurationError, PoincareConsistencyError
from .monitor import run_monitor
from .solver import ForcingSpec, NormTrace, SolverConfig, kolmogorov_forcing, simulate
from .spectral import (
    SpectralVelocity,
    field_with_norms,
    make_wavegrid,
    random_divfree_field,
    shear_field,
    sobolev_norm,
)

EXIT_OK = 0
EXIT_VIOLATION = 2
EXIT_SOLVER_DIAGNOSTIC = 3
EXIT_USAGE = 64
EXIT_NORM_INCONSISTENT = 65


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _write_atomic(path, text):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json_text(obj):
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _finish_out(out_dir, written, command):
    index = {"command": command, "files": sorted(written)}
    _write_atomic(os.path.join(out_dir, "index.json"), _json_text(index))


def _emit(args, name, text, written):
    if args.out:
        _write_atomic(os.path.join(args.out, name), text)
        written.append(name)
    else:
        sys.stdout.write(text)


def _ledger_from(args):
    return derive_constants(args.nu, args.lam1, args.c_sobolev, args.c_interp)


def _add_ledger_flags(p):
    p.add_argument("--nu", type=float, default=1.0, help="kinematic viscosity")
    p.add_argument("--lam1", type=float, default=1.0,
                   help="smallest positive eigenvalue of the diffusion operator")
    p.add_argument("--c-sobolev", type=float, default=DEFAULT_C_SOBOLEV,
                   help="L6 embedding constant (default: pinned calibration)")
    p.add_argument("--c-interp", type=float, default=DEFAULT_C_INTERP,
                   help="L3 interpolation constant (default: pinned calibration)")


def _add_common(p):
    p.add_argument("--config", help="key = value config file; flags override it")
    p.add_argument("--out", help="output directory (default: print to stdout)")


def build_parser():
    parser = _Parser(prog="nsreg", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"nsreg {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("simulate", help="run a simulation and write its norm trace")
    _add_common(p)
    p.add_argument("--N", type=int, default=16, help="grid points per axis")
    p.add_argument("--L", type=float, default=2.0 * math.pi, help="domain period")
    p.add_argument("--nu", type=float, default=1.0)
    p.add_argument("--T", type=float, default=1.0, help="final time")
    p.add_argument("--dt", type=float, default=1e-3, help="time step")
    p.add_argument("--integrator", choices=("if_rk4", "if_rk2"), default="if_rk4")
    p.add_argument("--cfl", type=float, default=None,
                   help="optional CFL cap: dt <= cfl * dx / max|u|")
    p.add_argument("--init", choices=("shear", "zero", "random"), default="random")
    p.add_argument("--amplitude", type=float, default=1.0, help="initial L2 norm")
    p.add_argument("--slope", type=float, default=-2.0,
                   help="energy spectrum slope of random initial fields")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--forcing", choices=("zero", "kolmogorov"), default="zero")
    p.add_argument("--f-amp", type=float, default=1.0, help="forcing amplitude")
    p.add_argument("--blowup-ceiling", type=float, default=1e12,
                   help="h1_sq ceiling treated as numerical blowup")

    p = sub.add_parser("bounds", help="evaluate a regularity criterion from scalars")
    _add_common(p)
    kind = p.add_mutually_exclusive_group()
    kind.add_argument("--free", action="store_true", help="force-free criterion")
    kind.add_argument("--steady", action="store_true", help="steady-force criterion")
    kind.add_argument("--timedep", action="store_true",
                      help="square-integrable-force criterion")
    p.add_argument("--l2", type=float, default=0.0, help="initial L2 norm")
    p.add_argument("--h1sq", type=float, default=0.0, help="initial squared H1 norm")
    p.add_argument("--T", type=float, default=math.inf, help="time window")
    p.add_argument("--f", type=float, default=None, help="steady force L2 norm")
    p.add_argument("--intf2", type=float, default=None,
                   help="time integral of the squared force norm")
    _add_ledger_flags(p)

    p = sub.add_parser("compare", help="classical horizon vs global criterion sweep")
    _add_common(p)
    p.add_argument("--h1sq", type=float, default=1.0, help="fixed squared H1 norm")
    p.add_argument("--l2-sweep", default="1,0.1,0.01",
                   help="comma-separated initial L2 norms")
    p.add_argument("--t-star", type=float, default=None,
                   help="window for the printed square-root criterion form "
                        "(default: the classical horizon)")
    p.add_argument("--simulate", action="store_true", dest="attach_sims",
                   help="attach a monitored simulation to each sweep point")
    p.add_argument("--N", type=int, default=16)
    p.add_argument("--L", type=float, default=2.0 * math.pi)
    p.add_argument("--T", type=float, default=1.0, help="simulation length")
    p.add_argument("--dt", type=float, default=2e-3)
    p.add_argument("--seed", type=int, default=0)
    _add_ledger_flags(p)

    p = sub.add_parser("calibrate", help="empirical embedding-constant lower bounds")
    _add_common(p)
    p.add_argument("--N", type=int, default=16)
    p.add_argument("--L", type=float, default=2.0 * math.pi)
    p.add_argument("--ensemble", type=int, default=8, help="number of random fields")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--slope", type=float, default=-2.0)
    p.add_argument("--oversample", type=int, default=4,
                   help="quadrature oversampling factor (>= 2)")
    p.add_argument("--c-sobolev", type=float, default=DEFAULT_C_SOBOLEV)
    p.add_argument("--c-interp", type=float, default=DEFAULT_C_INTERP)

    p = sub.add_parser("monitor", help="verify inequality chain along a trace")
    _add_common(p)
    p.add_argument("--trace", help="trace.csv produced by simulate")
    p.add_argument("--meta", help="meta.json of the run (default: next to trace)")
    p.add_argument("--report", help="criterion report.json for bound dominance")
    p.add_argument("--h1-tol", type=float, default=None)
    p.add_argument("--energy-tol", type=float, default=None)
    p.add_argument("--solver-rel-tol", type=float, default=None)
    p.add_argument("--dominance-rel-tol", type=float, default=1e-6)
    _add_ledger_flags(p)

    return parser


def _coerce(action, raw, key):
    if isinstance(action.const, bool) or isinstance(action.default, bool):
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise UsageError(f"config key {key!r}: expected a boolean, got {raw!r}")
    if action.type is not None:
        try:
            action.type(raw)
        except ValueError as exc:
            raise UsageError(f"config key {key!r}: {exc}") from exc
    return raw


def _subparser(parser, command):
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[command]
    raise UsageError("config files require a subcommand")  # pragma: no cover


def _config_tokens(parser, command, path, user_argv):
    """Translate a config file into argv tokens placed before the user flags.

    argparse resolves repeated options last-one-wins, so command-line flags
    override the file.  Flags from a mutually exclusive group are skipped
    whenever the command line already picks a member of that group.
    """
    sub = _subparser(parser, command)
    try:
        with open(path) as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from exc

    user_tokens = set(user_argv)
    blocked = set()
    for group in sub._mutually_exclusive_groups:
        opts = set()
        for action in group._group_actions:
            opts.update(action.option_strings)
        if opts & user_tokens:
            blocked |= opts

    tokens = []
    for lineno, line in enumerate(lines, 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, raw = (part.strip() for part in body.split("=", 1))
        dest = key.replace("-", "_")
        if dest == "config":
            continue
        action = next((a for a in sub._actions if a.dest == dest), None)
        if action is None:
            raise UsageError(f"{path}:{lineno}: unknown option {key!r}")
        value = _coerce(action, raw, key)
        flag = action.option_strings[-1]
        if flag in blocked:
            continue
        if isinstance(value, bool):
            if value:
                tokens.append(flag)
        else:
            tokens.extend([flag, value])
    return tokens


def _parse(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help()
        raise UsageError("a subcommand is required")
    if getattr(args, "config", None):
        idx = argv.index(args.command)
        tokens = _config_tokens(parser, args.command, args.config, argv[idx + 1:])
        args = parser.parse_args(argv[: idx + 1] + tokens + argv[idx + 1:])
    return args


def _initial_field(args, grid):
    if args.init == "shear":
        target = args.amplitude / sobolev_norm(shear_field(grid, 1.0), 0)
        return shear_field(grid, target)
    if args.init == "zero":
        n = grid.n
        return SpectralVelocity(grid, np.zeros((3, n, n, n), dtype=np.complex128))
    return random_divfree_field(grid, args.seed, args.slope, args.amplitude)


def cmd_simulate(args):
    if not args.out:
        raise UsageError("simulate requires --out for the trace files")
    grid = make_wavegrid(args.N, args.L)
    config = SolverConfig(nu=args.nu, dt=args.dt, t_end=args.T,
                          integrator=args.integrator, cfl=args.cfl,
                          blowup_h1_sq_ceiling=args.blowup_ceiling)
    u0 = _initial_field(args, grid)
    if args.forcing == "kolmogorov":
        forcing = kolmogorov_forcing(grid, args.f_amp)
    else:
        forcing = ForcingSpec.zero()
    result = simulate(u0, forcing, config)

    written = []
    _write_atomic(os.path.join(args.out, "trace.csv"), result.trace.to_csv())
    written.append("trace.csv")
    meta = {
        "command": "simulate",
        "version": __version__,
        "kernel_backend": backend_name(),
        "created": datetime.now(timezone.utc).isoformat(),
        "wall_time_s": result.wall_time_s,
        "termination": result.termination,
        "blowup_time": result.blowup_time,
        "blowup_reason": result.blowup_reason,
        "config": {
            "N": args.N, "L": args.L, "nu": args.nu, "T": args.T,
            "dt": args.dt, "integrator": args.integrator, "cfl": args.cfl,
            "blowup_ceiling": args.blowup_ceiling,
        },
        "init": {"kind": args.init, "amplitude": args.amplitude,
                 "slope": args.slope, "seed": args.seed},
        "forcing": {"kind": args.forcing, "amplitude": args.f_amp},
    }
    _write_atomic(os.path.join(args.out, "meta.json"), _json_text(meta))
    written.append("meta.json")
    _finish_out(args.out, written, "simulate")
    print(f"simulate: {result.termination} at t={result.trace.t[-1]:g} "
          f"({len(result.trace)} samples)")
    return EXIT_OK


def cmd_bounds(args):
    ledger = _ledger_from(args)
    if not (args.free or args.steady or args.timedep):
        raise UsageError("choose one of --free, --steady, --timedep")
    inputs = CriterionInput(
        l2=args.l2, h1_sq=args.h1sq, t_end=args.T,
        f_l2=args.f, int_f_sq=args.intf2,
    )
    if args.free:
        report = arctan_bound_free(inputs, ledger)
    elif args.steady:
        if args.f is None:
            raise UsageError("--steady requires --f (force L2 norm)")
        if not math.isfinite(args.T):
            raise UsageError("--steady requires a finite --T")
        report = arctan_bound_steady(args.T, inputs, ledger)
    else:
        if args.intf2 is None:
            raise UsageError("--timedep requires --intf2")
        report = arctan_bound_timedep(args.T, inputs, ledger)

    payload = {"report": report.to_json_dict(), "ledger": ledger.to_json_dict()}
    written = []
    _emit(args, "report.json", _json_text(payload), written)
    if args.out:
        _finish_out(args.out, written, "bounds")
    return EXIT_OK


def _compare_csv(table, sims):
    cols = ["l2", "h1_sq", "classical_horizon", "criterion_lhs",
            "criterion_satisfied", "margin", "printed_lhs",
            "printed_satisfied", "extends_classical"]
    if sims:
        cols += ["sim_status", "sim_monitor_passed", "sim_max_h1_sq"]
    lines = [",".join(cols)]
    for i, row in enumerate(table.rows):
        vals = [
            "%.17g" % row.l2, "%.17g" % row.h1_sq,
            "%.17g" % row.classical_horizon,
            "%.17g" % row.criterion_lhs, "%d" % row.criterion_satisfied,
            "%.17g" % row.margin, "%.17g" % row.printed_lhs,
            "%d" % row.printed_satisfied, "%d" % row.extends_classical,
        ]
        if sims:
            s = sims[i]
            vals += [s["status"],
                     "" if s.get("monitor_passed") is None else "%d" % s["monitor_passed"],
                     "" if s.get("max_h1_sq") is None else "%.17g" % s["max_h1_sq"]]
        lines.append(",".join(vals))
    return "\n".join(lines) + "\n"


def cmd_compare(args):
    ledger = _ledger_from(args)
    try:
        sweep = [float(tok) for tok in args.l2_sweep.split(",") if tok.strip()]
    except ValueError as exc:
        raise UsageError(f"bad --l2-sweep: {exc}") from exc
    if not sweep:
        raise UsageError("--l2-sweep must contain at least one value")
    table = interval_comparison(args.h1sq, sweep, ledger, t_star=args.t_star)

    sims = []
    soundness_violations = []
    if args.attach_sims:
        grid = make_wavegrid(args.N, args.L)
        config = SolverConfig(nu=args.nu, dt=args.dt, t_end=args.T)
        for i, row in enumerate(table.rows):
            entry = {"l2": row.l2, "status": "skipped"}
            try:
                u0 = field_with_norms(grid, args.seed + i, row.l2, row.h1_sq)
            except ConfigurationError as exc:
                entry.update(status="infeasible_on_grid", detail=str(exc))
                sims.append(entry)
                continue
            result = simulate(u0, ForcingSpec.zero(), config)
            report = None
            if row.criterion_satisfied:
                report = arctan_bound_free(
                    CriterionInput(l2=row.l2, h1_sq=row.h1_sq), ledger
                )
            mon = run_monitor(result.trace, ledger, report=report)
            entry.update(
                status=result.termination,
                monitor_passed=mon.passed,
                max_h1_sq=float(result.trace.h1_sq.max()),
            )
            if row.criterion_satisfied and result.termination == "blowup":
                soundness_violations.append(
                    {"l2": row.l2, "blowup_time": result.blowup_time}
                )
            sims.append(entry)

    payload = table.to_json_dict()
    payload["simulations"] = sims
    payload["soundness_violations"] = soundness_violations
    written = []
    _emit(args, "compare.csv", _compare_csv(table, sims), written)
    _emit(args, "report.json", _json_text(payload), written)
    if args.out:
        _finish_out(args.out, written, "compare")
    return EXIT_OK


def cmd_calibrate(args):
    grid = make_wavegrid(args.N, args.L)
    result = calibrate_constants(
        grid, args.ensemble, seed=args.seed,
        energy_spectrum_slope=args.slope, oversample=args.oversample,
        c_sobolev=args.c_sobolev, c_interp=args.c_interp,
    )
    for warning in result.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    written = []
    _emit(args, "report.json", _json_text(result.to_json_dict()), written)
    if args.out:
        _finish_out(args.out, written, "calibrate")
    return EXIT_OK


def _report_from_json(payload):
    rep = payload.get("report", payload)
    horizon = rep.get("horizon")
    horizon = math.inf if horizon is None else float(horizon)
    bound = None
    if rep["satisfied"]:
        bound = BoundCurve(kind=rep["kind"], horizon=horizon,
                           params={"lhs": rep["lhs"], "t_end": horizon})
    return CriterionReport(kind=rep["kind"], lhs=rep["lhs"],
                           satisfied=rep["satisfied"], margin=rep["margin"],
                           bound=bound, threshold=rep.get("threshold", THRESHOLD))


def cmd_monitor(args):
    if not args.trace:
        raise UsageError("monitor requires --trace")
    meta_path = args.meta or os.path.join(os.path.dirname(args.trace), "meta.json")
    nu = args.nu
    if os.path.exists(meta_path):
        with open(meta_path) as fh:
            meta = json.load(fh)
        nu = meta.get("config", {}).get("nu", nu)
    trace = NormTrace.from_csv(args.trace, nu=nu)
    ledger = derive_constants(nu, args.lam1, args.c_sobolev, args.c_interp)
    report = None
    if args.report:
        with open(args.report) as fh:
            report = _report_from_json(json.load(fh))
        if not report.satisfied:
            raise UsageError("the supplied criterion report is not satisfied; "
                             "bound dominance is undefined")
    mon = run_monitor(trace, ledger, report=report,
                      h1_tol=args.h1_tol, energy_tol=args.energy_tol,
                      solver_rel_tol=args.solver_rel_tol,
                      dominance_rel_tol=args.dominance_rel_tol)
    written = []
    _emit(args, "report.json", _json_text(mon.to_json_dict()), written)
    if args.out:
        _finish_out(args.out, written, "monitor")
    if mon.solver_diagnostic_failed:
        return EXIT_SOLVER_DIAGNOSTIC
    if not mon.passed:
        return EXIT_VIOLATION
    return EXIT_OK


_COMMANDS = {
    "simulate": cmd_simulate,
    "bounds": cmd_bounds,
    "compare": cmd_compare,
    "calibrate": cmd_calibrate,
    "monitor": cmd_monitor,
}


def main(argv=None):
    try:
        args = _parse(sys.argv[1:] if argv is None else argv)
        return _COMMANDS[args.command](args)
    except SystemExit as exc:  # argparse --help/--version/errors
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    except UsageError as exc:
        print(f"nsreg: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigurationError as exc:
        print(f"nsreg: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PoincareConsistencyError as exc:
        print(f"nsreg: inconsistent norms: {exc}", file=sys.stderr)
        return EXIT_NORM_INCONSISTENT


if __name__ == "__main__":
    sys.exit(main())
