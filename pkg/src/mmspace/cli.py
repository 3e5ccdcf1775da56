"""Command line interface: ``mms <subcommand> ...``.

Exit codes: 0 success, 2 when a checked invariant was flagged (infeasible
certificate, infinite Poincare ratios, failed acceptance criterion), 1 on
any error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .constancy import KERNELS, detect_constant
from .fields import FieldRuleError, make_field
from .harness import (EXIT_ERROR, EXIT_FLAGGED, EXIT_OK, HarnessError, load_config,
                      parse_levels, reproduce, run, set_threads)
from .io import dump_json, load_field, load_space, save_space, write_csv
from .norms import besov_seminorm, commutator_besov, kappa_curve_tail, weak_norm
from .oscillation import DEFAULT_WINDOW, g_hat, lip_hat, profiles
from .poincare import macro_sweep, poincare_sweep
from .space import SpaceError, generate

log = logging.getLogger("mmspace")


def _floats(text: str) -> list:
    return [float(v) for v in text.split(",") if v.strip()]


def _out(args, default: str) -> Path:
    return Path(args.out if args.out is not None else default)


def _load_inputs(args, need_field: bool = True):
    space = load_space(args.space)
    if not need_field:
        return space, None
    if getattr(args, "field", None):
        f = load_field(args.field)
    elif getattr(args, "rule", None):
        f = make_field(space, args.rule)
    else:
        raise HarnessError("give --field FILE or --rule NAME")
    if f.shape != (space.n,):
        raise HarnessError(f"field has {f.size} values for {space.n} points")
    return space, f


def _print_json(data) -> None:
    print(json.dumps(data, indent=2, default=float))


# ---------------------------------------------------------------- commands

def cmd_gen(args) -> int:
    if args.family == "grid":
        params = {"dim": args.dim, "side": args.side}
    elif args.family == "heisenberg":
        params = {"side": args.side, "step": args.step}
    elif args.family == "snowflake":
        params = {"base": {"family": "grid", "dim": args.dim, "side": args.side},
                  "alpha": args.alpha}
    else:
        if args.edges is None:
            raise HarnessError("graph family needs --edges FILE")
        params = json.loads(Path(args.edges).read_text(encoding="utf-8"))
    space = generate(args.family, params, args.seed)
    path = save_space(space, _out(args, "space.json"))
    print(f"wrote {path} ({space.n} points, label {space.label!r})")
    return EXIT_OK


def cmd_osc(args) -> int:
    space, f = _load_inputs(args)
    prof = profiles(space, f)
    path = write_csv(_out(args, "profiles.csv"), ["point", "breakpoint", "m_value"],
                     zip(prof.point_ids().tolist(), prof.radii, prof.m))
    print(f"wrote {path}")
    if args.lip_out:
        lip = lip_hat(space, f, window=args.window, variant=args.variant)
        g = g_hat(space, f, window=args.window, variant=args.variant)
        write_csv(args.lip_out, ["point", "lip_hat", "g_hat"], zip(range(space.n), lip, g))
        print(f"wrote {args.lip_out}")
    return EXIT_OK


def cmd_norms(args) -> int:
    space, f = _load_inputs(args)
    val, curve = weak_norm(space, f, args.p)
    out = {"p": args.p, "s": args.s, "kernel": args.kernel, "weakNorm": val,
           "kappaTail": kappa_curve_tail(curve),
           "besov": besov_seminorm(space, f, args.s, args.p, args.kernel, args.d),
           "commutator": commutator_besov(space, f, args.p)}
    path = dump_json(out, _out(args, "norms.json"))
    curve_path = path.with_name(path.stem + "_kappa.csv")
    write_csv(curve_path, ["value", "level_measure", "score"],
              zip(curve.values, curve.level_measure, curve.score))
    _print_json(out)
    return EXIT_OK


def cmd_hajlasz(args) -> int:
    from .hajlasz import maximal_gradient, solve_exact

    space, f = _load_inputs(args)
    if args.method == "exact":
        cert = solve_exact(space, f, args.p, args.tol)
    else:
        g = lip_hat(space, f, window=args.window)
        cert = maximal_gradient(space, f, g, args.p, args.eps)
    data = cert.to_dict()
    dump_json(data, _out(args, "cert.json"))
    summary = {k: v for k, v in data.items() if k != "h"}
    _print_json(summary)
    return EXIT_OK if cert.feasible and cert.converged else EXIT_FLAGGED


def cmd_mollify(args) -> int:
    from .mollify import mollify, partition, verify_mollifier_bounds

    space, f = _load_inputs(args)
    part = partition(space, args.t, args.gamma, seed=args.seed)
    g = mollify(space, f, args.t, args.gamma, part)
    out = {"t": args.t, "gamma": args.gamma, "centers": int(part.centers.shape[0]),
           "partitionConstant": part.lipschitz_constant, "values": g}
    if args.verify:
        out["verify"] = verify_mollifier_bounds(space, f, args.t, args.gamma,
                                                p=args.p).to_dict()
    dump_json(out, _out(args, "mollify.json"))
    _print_json({k: v for k, v in out.items() if k != "values"})
    return EXIT_OK


def cmd_poincare(args) -> int:
    space, _ = _load_inputs(args, need_field=False)
    fam = [s.strip() for s in args.family.split(",") if s.strip()]
    rep = poincare_sweep(space, args.p, args.lam, fam, args.samples, args.seed or 0,
                         args.window)
    rows = []
    for name, q in rep.ratios.items():
        rows.extend(zip([name] * q.shape[0], rep.centers.tolist(), rep.radii, q))
    write_csv(_out(args, "poincare.csv"), ["function", "center", "radius", "ratio"], rows)
    _print_json(rep.to_dict())
    return EXIT_FLAGGED if rep.infinite else EXIT_OK


def cmd_macro(args) -> int:
    space, f = _load_inputs(args)
    rep = macro_sweep(space, f, _floats(args.ratios), None, args.samples, args.seed or 0,
                      args.lam_tilde, args.p)
    write_csv(_out(args, "macro_poincare.csv"), ["ratio", "s", "r", "max_ratio"], rep.rows)
    _print_json(rep.to_dict())
    return EXIT_FLAGGED if rep.flags else EXIT_OK


def cmd_constancy(args) -> int:
    v = detect_constant(args.rule, args.p, args.kernel, parse_levels(args.levels),
                        args.family, args.dim)
    dump_json(v.to_dict(), _out(args, "verdict.json"))
    print(f"{args.rule} p={args.p:g} {args.kernel}: {v.verdict} "
          f"(slope {v.slope:.4g}, R^2 {v.r2:.4f})")
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    report = run(cfg, args.out, args.threads, args.seed)
    for r, t in zip(report.results, report.timings):
        print(f"{r['op']:<20s} {t['seconds']:8.3f}s")
    for key, row in report.summary.items():
        print(f"{key}: weak {row['weakNorm']:.6g}  hajlasz {row['hajlaszNorm']:.6g}  "
              f"ratio {row['ratio']}")
    for flag in report.flags:
        print(f"FLAG {flag}")
    return report.exit_code


def cmd_reproduce(args) -> int:
    report = reproduce(args.suite, args.out, args.threads)
    return report.exit_code


# ---------------------------------------------------------------- parser

def _global_flags(p: argparse.ArgumentParser, suppress: bool) -> None:
    d = {"default": argparse.SUPPRESS} if suppress else {"default": None}
    p.add_argument("--threads", type=int, help="kernel threads (fallback: MMS_THREADS)", **d)
    p.add_argument("--seed", type=int, help="random seed (overrides config)", **d)
    p.add_argument("--out", help="output file or directory", **d)


def _field_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--space", required=True, help="space file (JSON or .mms)")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--field", help="field JSON file")
    g.add_argument("--rule", help="named field rule sampled on the space")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mms", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        _global_flags(p, suppress=True)
        p.set_defaults(func=func)
        return p

    p = add("gen", cmd_gen, "generate a space")
    p.add_argument("--family", required=True,
                   choices=["grid", "heisenberg", "snowflake", "graph"])
    p.add_argument("--dim", type=int, default=1)
    p.add_argument("--side", type=int, default=16)
    p.add_argument("--step", type=float, default=1.0)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--edges", help="graph JSON: {edges: [[i, j, len], ...], weights: [...]}")

    p = add("osc", cmd_osc, "mean-oscillation profiles")
    _field_flags(p)
    p.add_argument("--window", type=int, default=DEFAULT_WINDOW)
    p.add_argument("--variant", choices=["liminf", "limsup"], default="liminf")
    p.add_argument("--lip-out", help="also write lip_hat and g_hat to this CSV")

    p = add("norms", cmd_norms, "weak norm, Besov and commutator seminorms")
    _field_flags(p)
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--s", type=float, default=1.0)
    p.add_argument("--kernel", choices=["V", "power"], default="V")
    p.add_argument("--d", type=float, help="exponent of the power kernel")

    p = add("hajlasz", cmd_hajlasz, "Hajlasz gradient certificate")
    _field_flags(p)
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--method", choices=["exact", "maximal"], default="exact")
    p.add_argument("--eps", type=float)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--window", type=int, default=DEFAULT_WINDOW)

    p = add("mollify", cmd_mollify, "metric mollifier")
    _field_flags(p)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--verify", action="store_true")

    p = add("poincare", cmd_poincare, "empirical Poincare constant")
    p.add_argument("--space", required=True)
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--family", default="coords")
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--window", type=int, default=DEFAULT_WINDOW)

    p = add("macro-poincare", cmd_macro, "macroscopic Poincare sweep")
    _field_flags(p)
    p.add_argument("--ratios", default="2,4,8,16,32")
    p.add_argument("--samples", type=int)
    p.add_argument("--lambda-tilde", dest="lam_tilde", type=float, default=2.0)
    p.add_argument("--p", type=float, default=2.0)

    p = add("constancy", cmd_constancy, "constancy detection under refinement")
    p.add_argument("--family", default="grid")
    p.add_argument("--dim", type=int, default=1)
    p.add_argument("--levels", default="6:12")
    p.add_argument("--rule", default="linear")
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--kernel", choices=list(KERNELS), default="critical-V")

    p = add("run", cmd_run, "run an experiment config")
    p.add_argument("config")

    p = add("reproduce", cmd_reproduce, "run an acceptance suite")
    p.add_argument("suite")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command not in ("run", "reproduce"):
            set_threads(args.threads)
        return args.func(args)
    except (HarnessError, SpaceError, FieldRuleError, FileNotFoundError, ValueError,
            KeyError, OSError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"mms: error: {msg}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
