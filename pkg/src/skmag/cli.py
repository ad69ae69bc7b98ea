"""Command-line entry point: ``skmag {verify,skm,friction,counterexample,simulate}``."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace

import numpy as np

from . import config as cfgmod
from .errors import InstabilityError, InvalidArgument, PreconditionViolation, RefinementRequired, UndefinedFit
from .experiments import (
    SCHEMA_VERSION,
    counterexample_variance,
    eps_sweep_first_order,
    eps_sweep_second_order,
    failure_floor,
    monotone_within,
    mu_sweep,
    rate_fit,
    write_summary,
)
from .invariants import verify_all
from .sde import simulate_first_order, simulate_second_order

log = logging.getLogger("skmag")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _outdir(cfg):
    d = cfg["output.directory"]
    os.makedirs(d, exist_ok=True)
    return d


def _fits(tables):
    out = {}
    for t in tables:
        try:
            out[t.name] = rate_fit(t)
        except UndefinedFit:
            pass
    return out


def cmd_verify(cfg) -> int:
    report = verify_all(seed=cfg["simulation.master_seed"] % 2**32)
    ok = all(r["passed"] for r in report)
    path = os.path.join(_outdir(cfg), "verify.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"schema_version": SCHEMA_VERSION, "master_seed": cfg["simulation.master_seed"],
                   "checks": report, "passed": ok}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    for r in report:
        print(f"{'PASS' if r['passed'] else 'FAIL'} {r['check']}: max defect {r['max_defect']:.3e} "
              f"(tol {r['tolerance']:.1e})")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_skm(cfg) -> int:
    ec = cfgmod.experiment_config(cfg)
    table = mu_sweep(cfg["physics.eps"], cfg["physics.mu_list"], ec)
    d = _outdir(cfg)
    table.to_csv(os.path.join(d, "skm.csv"))
    est = table.estimates
    flags = {"monotone_within_2se": monotone_within(table), "decreasing": bool(est[-1] < est[0])}
    write_summary(os.path.join(d, "skm.json"), [table], flags, _fits([table]), ec.master_seed)
    return EXIT_OK if all(flags.values()) else EXIT_FAIL


def cmd_friction(cfg) -> int:
    ec = cfgmod.experiment_config(cfg)
    d = _outdir(cfg)
    first = eps_sweep_first_order(cfg["physics.eps_list"], ec)
    second = eps_sweep_second_order(cfg["physics.mu"], cfg["physics.eps_list"], ec)
    first.to_csv(os.path.join(d, "friction_first_order.csv"))
    second.to_csv(os.path.join(d, "friction_second_order.csv"))
    flags = {
        "first_order_monotone_within_2se": monotone_within(first),
        "second_order_monotone_within_2se": monotone_within(second),
    }
    write_summary(os.path.join(d, "friction.json"), [first, second], flags, _fits([first, second]), ec.master_seed)
    return EXIT_OK if all(flags.values()) else EXIT_FAIL


def cmd_counterexample(cfg) -> int:
    seed = cfg["simulation.master_seed"]
    mu, t = cfg["counterexample.mu"], cfg["counterexample.t"]
    steps = int(np.ceil(t / (mu / 20) - 1e-9))
    var = counterexample_variance(mu, t, steps, cfg["counterexample.M"], seed)
    ec = replace(cfgmod.experiment_config(cfg), n_modes=1, noise_law="explicit",
                 noise_values=(cfg["counterexample.floor_lambda"],), drift="zero",
                 diffusion="additive_identity", T=cfg["counterexample.floor_T"],
                 M=cfg["counterexample.floor_M"], dt=None, u0=(), v0=())
    floor = failure_floor(cfg["counterexample.floor_mu_list"], ec)
    d = _outdir(cfg)
    floor.to_csv(os.path.join(d, "failure_floor.csv"))
    lowers = [r.lower for r in floor.rows]
    flags = {
        "variance_within_3se": abs(var.empirical_var - var.closed_form) <= 3 * var.stderr,
        "floor_lower_bounds_positive": all(lb is not None and lb > 0 for lb in lowers),
        "floor_not_decreasing": bool(lowers[-1] >= 0.5 * lowers[0]),
    }
    floor.meta["variance"] = {"mu": mu, "t": t, "steps": steps, "empirical_var": var.empirical_var,
                              "stderr": var.stderr, "closed_form": var.closed_form}
    write_summary(os.path.join(d, "counterexample.json"), [floor], flags, None, seed)
    return EXIT_OK if all(flags.values()) else EXIT_FAIL


def cmd_simulate(cfg) -> int:
    ec = cfgmod.experiment_config(cfg)
    mu = cfg["physics.mu"]
    grid = ec.grid(mu)
    pb = ec.problem(grid)
    u0, v0 = ec.initial()
    kw = dict(paths=[1], L=ec.L, u0=u0)
    if mu > 0:
        traj = simulate_second_order(mu, cfg["physics.eps"], pb.drift, pb.diffusion, pb.noise, grid,
                                     ec.master_seed, v0=v0, **kw)
    else:
        traj = simulate_first_order(cfg["physics.eps"], pb.drift, pb.diffusion, pb.noise, grid, ec.master_seed, **kw)
    traj.write_csv(os.path.join(_outdir(cfg), "trajectory.csv"))
    return EXIT_OK


COMMANDS = {
    "verify": cmd_verify,
    "skm": cmd_skm,
    "friction": cmd_friction,
    "counterexample": cmd_counterexample,
    "simulate": cmd_simulate,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="skmag", description=__doc__)
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="TOML configuration file")
    parser.add_argument("--seed", type=int, help="master seed (overrides simulation.master_seed)")
    parser.add_argument("--paths", type=int, help="Monte Carlo path count (overrides simulation.M)")
    parser.add_argument("--out", help="output directory (overrides output.directory)")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a configuration key; repeatable")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    overrides = list(args.set)
    if args.seed is not None:
        overrides.append(f"simulation.master_seed={args.seed}")
    if args.paths is not None:
        overrides.append(f"simulation.M={args.paths}")
    if args.out is not None:
        overrides.append(f"output.directory={args.out}")
    try:
        cfg = cfgmod.load(args.config, overrides)
    except cfgmod.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](cfg)
    except (InvalidArgument, PreconditionViolation) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InstabilityError, RefinementRequired) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
