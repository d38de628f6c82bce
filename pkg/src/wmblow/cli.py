"""Command-line front end.

    python3 -m wmblow <subcommand> [options]

Subcommands: ground-state, linop verify, profiles, bsys, simulate, verify-all.
CSV files go to the output directory (--out, else $WMBLOW_OUT, else
./wmblow_out); the JSON report is written there and echoed on stdout.
Exit codes: 0 success, 1 numerical failure or failed invariant, 2 bad
configuration.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from .numerics import ContractError, DomainError, GridRangeError, NumericalError
from .verify import _plain

ENV_OUT = "WMBLOW_OUT"


class ConfigError(ValueError):
    pass


def out_dir(args):
    d = Path(args.out or os.environ.get(ENV_OUT) or "wmblow_out")
    d.mkdir(parents=True, exist_ok=True)
    return d


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(x)) for x in row])


def write_json(path, obj):
    text = json.dumps(_plain(obj), indent=2, sort_keys=True)
    Path(path).write_text(text + "\n")
    print(text)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_ground_state(args):
    from .ground_state import solve_ground_state
    gs = solve_ground_state(args.d, y_max=args.ymax, tol=args.tol)
    od = out_dir(args)
    y = gs.grid.y
    write_csv(od / f"ground_state_d{args.d}.csv", ["y", "Q", "LamQ", "V", "Z"],
              zip(y, gs.Q.values, gs.LamQ.values, gs.V.values, gs.Z.values))
    write_json(od / f"ground_state_d{args.d}.json",
               dict(d=gs.d, gamma=gs.gamma, gamma_tilde=gs.gamma_tilde, hbar=gs.hbar,
                    delta=gs.delta, a0=gs.a0, tail_exponent=gs.tail_exponent))
    return 0


def _battery_report(results):
    return {"passed": all(r.passed for r in results),
            "checks": [r.as_dict() for r in results]}


def cmd_linop(args):
    from .verify import linop_battery
    if args.action != "verify":
        raise ConfigError("linop supports only the 'verify' action")
    res = linop_battery(args.d, args.L, seed=args.seed)
    rep = _battery_report(res)
    write_json(out_dir(args) / f"linop_verify_d{args.d}.json", rep)
    return 0 if rep["passed"] else 1


def cmd_profiles(args):
    from .bsystem import BParams, explicit_solution
    from .profiles import assemble_Qb, residual_scaling
    from .verify import profile_set
    if args.L % 2 == 0 or args.ell > args.L:
        raise ConfigError("need odd L >= ell")
    ps = profile_set(args.d, args.L, args.ell)
    params = BParams.make(args.ell, args.L, d=args.d)
    od = out_dir(args)
    y = ps.y
    cols = [y] + [p for k in range(len(ps.phi)) for p in (ps.phi[k],)]
    write_csv(od / f"profiles_phi_d{args.d}.csv",
              ["y"] + [f"phi{k}" for k in range(len(ps.phi))], zip(*cols))
    b = explicit_solution(params, args.s)
    Qb = assemble_Qb(ps, b)
    write_csv(od / f"profiles_Qb_d{args.d}_s{args.s:g}.csv", ["y", "Qb1", "Qb2"],
              zip(y, Qb.f1, Qb.f2))
    slope, b1, norms = residual_scaling(ps, params)
    slope_abl, _, norms_abl = residual_scaling(ps, params, include_S=False)
    rep = dict(d=args.d, L=args.L, ell=args.ell, s=args.s, b=b,
               S_monomials={k: [list(m) for m in S.terms] for k, S in ps.S.items()},
               residual_slope=slope, residual_slope_ablation=slope_abl,
               expected_slope=args.L + 3, b1=b1, local_norm=norms,
               local_norm_ablation=norms_abl)
    write_json(od / f"profiles_d{args.d}_L{args.L}.json", rep)
    return 0


def cmd_bsys(args):
    from .bsystem import (BParams, BState, build_A_ell, explicit_solution,
                          integrate_trajectory, remaining_time)
    from .numerics import loglog_slope
    if args.send <= args.s0:
        raise ConfigError("need send > s0")
    params = BParams.make(args.ell, args.L, d=args.d)
    tr = integrate_trajectory(params, BState(args.s0, explicit_solution(params, args.s0)),
                              args.send, n_out=args.n)
    R, T = remaining_time(params, tr)
    od = out_dir(args)
    L = params.L
    write_csv(od / f"bsys_d{args.d}_ell{args.ell}.csv",
              ["s"] + [f"b{k}" for k in range(1, L + 1)] + ["lambda", "t"],
              zip(tr.s, *tr.b, tr.lam, tr.t))
    m = tr.s >= 2 * args.s0
    spec = build_A_ell(args.ell, params.gamma).D if args.ell >= 2 else np.array([-1.0])
    rep = dict(d=args.d, ell=args.ell, L=L, s0=args.s0, send=args.send, T_est=T,
               slope_s=loglog_slope(tr.s[m], tr.lam[m]),
               slope_t=loglog_slope(R[m], tr.lam[m]),
               expected_slope_s=-args.ell / (args.ell - params.gamma),
               expected_slope_t=args.ell / params.gamma, spectrum=spec)
    write_json(od / f"bsys_d{args.d}_ell{args.ell}.json", rep)
    return 0


def cmd_simulate(args):
    from .wave import SimConfig, run_blowup_experiment
    try:
        raw = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a flat key-value object")
    cfg = SimConfig.from_dict(raw)
    kind = cfg.initial.get("kind", "localized-Qb") if isinstance(cfg.initial, dict) else None
    if kind != "localized-Qb":
        raise ConfigError("simulate runs prepared localized-Qb data; "
                          "use the wave module API for other descriptors")
    ell = int(raw.get("ell", 3))
    L = int(raw.get("L", ell if ell % 2 else ell + 1))
    track, rep = run_blowup_experiment(cfg, ell, L=L, s0=float(raw.get("s0", 50.0)),
                                       M=float(raw.get("M", 10.0)))
    od = out_dir(args)
    t, s, lam, b, _ = track.arrays()
    write_csv(od / "simulate_track.csv",
              ["t", "s", "lambda"] + [f"b{k}" for k in range(1, b.shape[1] + 1)]
              + ["energy", "sup_gradient"],
              zip(t, s, lam, *b.T, track.energy, track.grad))
    write_json(od / "simulate_report.json", rep)
    return 0


def cmd_verify_all(args):
    from . import verify as V
    res = [V.criterion_1(), V.criterion_2(), V.criterion_3(args.d, seed=args.seed),
           V.criterion_4(args.d, args.L), V.criterion_5(args.d, seed=args.seed),
           V.criterion_6(), V.criterion_7(), V.criterion_8(args.d, args.L, args.ell)]
    if args.pde:
        res += [V.criterion_9(args.d), V.criterion_10(args.d, args.ell, args.L)]
    for r in res:
        print(r.line(), file=sys.stderr)
    rep = _battery_report(res)
    write_json(out_dir(args) / "verify_all.json", rep)
    return 0 if rep["passed"] else 1


# ---------------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="wmblow", description=__doc__.split("\n")[0])
    p.add_argument("--out", help=f"output directory (default ${ENV_OUT} or ./wmblow_out)")
    p.add_argument("--seed", type=int, default=0, help="seed for randomized ensembles")
    sub = p.add_subparsers(dest="cmd", required=True)

    g = sub.add_parser("ground-state", help="solve for Q and write its tables")
    g.add_argument("--d", type=int, default=7)
    g.add_argument("--ymax", type=float, default=1e3)
    g.add_argument("--tol", type=float, default=1e-13)
    g.set_defaults(func=cmd_ground_state)

    lo = sub.add_parser("linop", help="operator invariant battery")
    lo.add_argument("action", choices=["verify"])
    lo.add_argument("--d", type=int, default=7)
    lo.add_argument("--L", type=int, default=3)
    lo.set_defaults(func=cmd_linop)

    pr = sub.add_parser("profiles", help="T_k / S_k profiles and residual scaling")
    pr.add_argument("--d", type=int, default=7)
    pr.add_argument("--L", type=int, default=3)
    pr.add_argument("--ell", type=int, default=3)
    pr.add_argument("--s", type=float, default=50.0)
    pr.set_defaults(func=cmd_profiles)

    b = sub.add_parser("bsys", help="integrate the modulation system")
    b.add_argument("--d", type=int, default=7)
    b.add_argument("--ell", type=int, default=3)
    b.add_argument("--L", type=int, default=None)
    b.add_argument("--s0", type=float, default=20.0)
    b.add_argument("--send", type=float, default=2000.0)
    b.add_argument("--n", type=int, default=400, help="number of output rows")
    b.set_defaults(func=cmd_bsys)

    si = sub.add_parser("simulate", help="prepared blowup run of the PDE")
    si.add_argument("--config", required=True, help="JSON key-value file")
    si.set_defaults(func=cmd_simulate)

    va = sub.add_parser("verify-all", help="consolidated invariant report")
    va.add_argument("--d", type=int, default=7)
    va.add_argument("--L", type=int, default=3)
    va.add_argument("--ell", type=int, default=3)
    va.add_argument("--pde", action="store_true", help="include the PDE criteria (slow)")
    va.set_defaults(func=cmd_verify_all)
    return p


def dispatch(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return int(args.func(args))
    except (ConfigError, ContractError, DomainError, GridRangeError) as exc:
        parser.print_usage(sys.stderr)
        print(f"wmblow: configuration error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        rep = {"error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(rep), file=sys.stdout)
        try:
            (out_dir(args) / "error.json").write_text(json.dumps(rep) + "\n")
        except OSError:
            pass
        return 1


def main():
    sys.exit(dispatch())
