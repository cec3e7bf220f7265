"""Command-line entry point: ``gibbsnet <subcommand> [options]``.

Exit codes: 0 success, 1 usage error, 2 verification failure, 3 numeric error.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys

import numpy as np

from ..aggregation.losses import NumericError
from ..bounds import (
    SmoothnessSpec,
    barron_rate_bound,
    e_constant,
    risk_bound_sigmoid,
    sobolev_rate_bound,
    worstcase_rem,
)
from ..network import Activation, NetworkShape, activation_eval, maiorov_kernel
from .config import HarnessConfig, UsageError
from .experiments import (
    build_instance,
    rate_study,
    run_experiment,
    width_for,
    write_bounds,
    write_experiment,
    write_rate_study,
)
from .verify import verify_bounds

EXIT_OK, EXIT_USAGE, EXIT_VERIFY, EXIT_NUMERIC = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _common(p):
    p.add_argument("--config", metavar="PATH", help="key = value config file")
    p.add_argument("--set", metavar="KEY=VALUE", action="append", default=[],
                   help="override one config key (repeatable)")
    p.add_argument("--seed", type=int, default=0, metavar="U64")
    p.add_argument("--out", default="out", metavar="DIR")
    p.add_argument("--replications", type=int, metavar="N")
    p.add_argument("--threads", type=int, default=1, metavar="N")
    p.add_argument("--allow-large", action="store_true", help="lift the desk-scale caps")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gibbsnet", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    commands = {
        "verify-bounds": "check the analytic bounds against Monte Carlo estimates",
        "run": "replicated experiment for one problem instance",
        "rate-study": "risk against sample size with the theory-driven width",
        "activation-table": "tabulate activations and Maiorov kernels",
        "bound-eval": "evaluate the worst-case and rate bounds for a config",
    }
    for name, help_text in commands.items():
        p = sub.add_parser(name, help=help_text, description=help_text)
        _common(p)
        if name == "verify-bounds":
            # negative-control hook: shrink A1 so the suite must fail
            p.add_argument("--a1-scale", type=float, default=1.0, help=argparse.SUPPRESS)
    return parser


def _load_config(args) -> HarnessConfig:
    overrides = {}
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        overrides[key.strip()] = value.strip()
    if args.replications is not None:
        overrides["replications"] = str(args.replications)
    if args.config:
        return HarnessConfig.from_file(args.config, overrides)
    return HarnessConfig.from_mapping(overrides)


def _write_config(cfg: HarnessConfig, out: str) -> None:
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "config.txt"), "w") as fh:
        fh.write(f"# config_hash = {cfg.hash}\n")
        fh.write(cfg.to_text())


def cmd_verify(cfg, args) -> int:
    report = verify_bounds(cfg.verify_configs, args.seed, cfg.verify_n, cfg.verify_samples,
                           cfg.verify_candidates, args.a1_scale, config_hash=cfg.hash,
                           threads=args.threads)
    report.write_csv(os.path.join(args.out, "verify.csv"))
    n_fail = len(report.failures)
    print(f"verify-bounds: {len(report.rows)} checks, {n_fail} failures")
    for r in report.failures:
        print(f"  FAIL {r.regime} config {r.config} {r.check} n={r.n}: "
              f"estimate {r.estimate:.6g} > bound {r.bound:.6g} + 3*{r.std_error:.3g}")
    return EXIT_OK if report.passed else EXIT_VERIFY


def cmd_run(cfg, args) -> int:
    cfg.check_caps(args.allow_large)
    res = run_experiment(build_instance(cfg), cfg, cfg.replications, args.seed, args.threads)
    write_experiment(res, args.out)
    print(f"run: n={res.n} D1={res.hidden_units} replications={res.replications} "
          f"mean risk {res.mean:.6g} (se {res.std_error:.3g})")
    for b in res.bounds:
        print(f"  {b.name} = {b.value:.6g}")
    print(f"wall time {res.wall_time:.1f} s", file=sys.stderr)
    return EXIT_OK


def cmd_rate(cfg, args) -> int:
    base = build_instance(cfg)
    widths = [width_for(n, cfg, base.D0) for n in cfg.n_grid]
    cfg.check_caps(args.allow_large, ns=cfg.n_grid, widths=widths)
    study = rate_study(base, cfg.n_grid, cfg, cfg.replications, args.seed, args.threads)
    write_rate_study(study, args.out)
    for r, b in zip(study.results, study.rule_bounds):
        print(f"n={r.n:5d} D1={r.hidden_units:3d} mean risk {r.mean:.6g} "
              f"(se {r.std_error:.3g})  bound {b.value:.6g}")
    print(f"log-log slope {study.slope:.4f}; nonincreasing within 2 se: {study.monotone_within()}")
    return EXIT_OK


def cmd_activation_table(cfg, args) -> int:
    u = np.linspace(cfg.table_min, cfg.table_max, cfg.table_points)
    cols = {"u": u}
    for act in Activation:
        cols[act.tag] = activation_eval(act, u)
    for variant in ("gaussian", "triangle"):
        cols[f"kernel-{variant}"] = maiorov_kernel(u, variant)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "activation_table.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["config_hash"] + list(cols))
        for i in range(len(u)):
            w.writerow([cfg.hash] + [repr(float(c[i])) for c in cols.values()])
    print(f"activation-table: {len(u)} rows -> {path}")
    return EXIT_OK


def cmd_bound_eval(cfg, args) -> int:
    inst = build_instance(cfg)
    act = Activation.from_tag(cfg.activation)
    shape = NetworkShape(inst.D0, cfg.hidden_units, 1)
    moments = inst.risk_moments()
    beta = cfg.resolved_beta()
    Msigma = act.bound if act.is_bounded else None
    reports = [worstcase_rem(cfg.B1, cfg.B2, cfg.n, beta, moments, Msigma, shape, act.regime)]
    if act.is_bounded:
        E = e_constant(cfg.B1, cfg.B2, moments, Msigma, shape, act.regime)
        reports.append(risk_bound_sigmoid(cfg.n, beta, inst.D0, cfg.hidden_units, cfg.smoothness_r,
                                          E, cfg.approx_constant, cfg.C_PB))
        smooth = SmoothnessSpec(cfg.smoothness_r, approx_constant=cfg.approx_constant, C_PB=cfg.C_PB)
        reports.append(sobolev_rate_bound(cfg.n, beta, inst.D0, smooth, cfg.B1, cfg.B2, moments,
                                          Msigma))
    else:
        reports.append(barron_rate_bound(cfg.n, beta, inst.D0, cfg.barron_s, cfg.B1, cfg.B2,
                                         moments, cfg.approx_constant, cfg.C_PB))
    os.makedirs(args.out, exist_ok=True)
    write_bounds(reports, os.path.join(args.out, "bounds.csv"), cfg.hash)
    for rep in reports:
        print(rep.to_text())
    return EXIT_OK


COMMANDS = {
    "verify-bounds": cmd_verify,
    "run": cmd_run,
    "rate-study": cmd_rate,
    "activation-table": cmd_activation_table,
    "bound-eval": cmd_bound_eval,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.threads < 1:
            raise UsageError("--threads must be >= 1")
        if args.seed < 0:
            raise UsageError("--seed must be nonnegative")
        cfg = _load_config(args)
        _write_config(cfg, args.out)
        return COMMANDS[args.command](cfg, args)
    except UsageError as exc:
        print(f"gibbsnet: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericError, ArithmeticError) as exc:
        print(f"gibbsnet: numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
