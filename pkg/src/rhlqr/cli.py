"""Command-line interface: generate, lift, certify, synthesize, simulate, verify."""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import certificate as cert_mod
from . import closedloop, fileio, plotting, riccati
from .errors import (
    EXIT_OK,
    CertificationError,
    InputError,
    NumericalError,
    RhlqrError,
    VerificationError,
)
from .lifting import find_min_d, lift
from .scenarios import KINDS, generate_scenario
from .verify import verify_problem

D_MAX_DEFAULT = 6


def _load_lifted(args):
    pd = fileio.parse_problem(args.infile)
    d = args.d if args.d is not None else find_min_d(pd, D_MAX_DEFAULT)
    return pd, d, lift(pd, d)


def _emit(obj, path: str | None) -> None:
    if path:
        fileio.write_json(obj, path)
    else:
        import json

        print(json.dumps(obj, indent=2, sort_keys=True))


def _cmd_generate(args) -> int:
    pd = generate_scenario(
        args.kind, n=args.n, m=args.m, period=args.period, seed=args.seed
    )
    fileio.emit_problem(pd, args.out)
    print(f"wrote {args.out} ({pd.name})")
    return EXIT_OK


def _cmd_lift(args) -> int:
    pd, d, lp = _load_lifted(args)
    obj = fileio.lifted_to_dict(lp)
    obj["input_digest"] = fileio.problem_digest(pd)
    _emit(obj, args.out)
    return EXIT_OK


def _cmd_certify(args) -> int:
    pd, d, lp = _load_lifted(args)
    cert = cert_mod.build_certificate(lp, args.T)
    obj = fileio.certificate_to_dict(cert)
    obj["input_digest"] = fileio.problem_digest(pd)
    _emit(obj, args.out)
    return EXIT_OK


def _cmd_synthesize(args) -> int:
    pd, d, lp = _load_lifted(args)
    T, cert = cert_mod.horizon_for_tolerance(lp, args.beta, t_max=args.t_max)
    obj = {
        "T": T,
        "certificate": fileio.certificate_to_dict(cert),
        "input_digest": fileio.problem_digest(pd),
    }
    _emit(obj, args.out)
    return EXIT_OK


def _cmd_simulate(args) -> int:
    started = time.perf_counter()
    pd, d, lp = _load_lifted(args)
    x0 = np.asarray([float(v) for v in args.x0.split(",")], dtype=float)
    if x0.shape != (lp.n,):
        raise InputError(
            f"--x0 must supply {lp.n} comma-separated values, got {x0.shape[0]}"
        )
    cert = cert_mod.build_certificate(lp, args.T)
    pen = cert_mod.penalty_sequence(lp, args.T)
    pol = closedloop.rh_gains(lp, pen, horizon=args.T)
    rep = closedloop.simulate(lp, pol, x0, stop_tol=args.stop)
    base = closedloop.unlift_controls(lp, pol, rep)

    window = (0, lp.period) if lp.periodic else (0, max(lp.period - args.T, 0))
    loss_obj = None
    try:
        ra = riccati.solve_infinite_horizon(lp, window, tol_delta=1e-9)
        loss = closedloop.performance_loss(rep, ra, x0)
        loss_obj = {
            "beta_lower": loss.beta_lo,
            "beta_upper": loss.beta_hi,
            "beta_measured": loss.beta_mid,
            "optimal_value": loss.opt_value,
            "optimal_value_gap": loss.opt_gap,
            "beta_bound_times_x2": cert.beta_bound * float(x0 @ x0),
        }
    except CertificationError:
        pass  # window-limited data: no certified optimum available

    out = Path(args.out)
    stem = out.with_suffix("")
    paths = {
        "report": str(out),
        "trajectory_csv": f"{stem}_trajectory.csv",
        "base_csv": f"{stem}_base.csv",
        "trajectory_png": f"{stem}_trajectory.png",
        "envelope_png": f"{stem}_envelope.png",
    }
    fileio.write_trajectory_csv(paths["trajectory_csv"], rep)
    fileio.write_base_csv(paths["base_csv"], base)
    plotting.save_trajectory_figure(paths["trajectory_png"], base.x, base.u, lp.d)
    plotting.save_envelope_figure(
        paths["envelope_png"], rep.x, rep.w1, pol.env_gain, pol.env_decay
    )

    obj = {
        "input_digest": fileio.problem_digest(pd),
        "d": lp.d,
        "T": args.T,
        "certificate": fileio.certificate_to_dict(cert),
        "simulation": {
            "x0": x0.tolist(),
            "steps": rep.steps,
            "stop_reason": rep.stop_reason,
            "window_limited": rep.window_limited,
            "cost_lower": rep.cost_lo,
            "cost_upper": rep.cost_hi,
            "tail_bound": rep.tail_bound,
            "envelope_violations": rep.envelope_violations,
            "max_lyapunov_margin": float(np.max(rep.lyapunov)) if rep.lyapunov.size else 0.0,
            "base_cost": base.cost,
            "max_block_gap": base.max_block_gap,
        },
        "performance_loss": loss_obj,
        "files": paths,
        "elapsed_s": time.perf_counter() - started,
    }
    fileio.write_json(obj, out)
    print(f"wrote {out} (+ CSV and PNG files)")
    return EXIT_OK


def _cmd_verify(args) -> int:
    pd = fileio.parse_problem(args.infile)
    report = verify_problem(pd, d=args.d, n_seeds=args.seeds)
    if args.out:
        fileio.write_json(report, args.out)
    for chk in report["checks"]:
        mark = "ok" if chk["passed"] else "FAIL"
        print(f"  [{mark}] {chk['name']}: {chk['detail']}")
    if not report["passed"]:
        raise VerificationError("verification failed; see the check list above")
    print(f"all {len(report['checks'])} checks passed")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="rhlqr",
        description=(
            "Receding-horizon controller synthesis for time-varying LQR "
            "problems with certified infinite-horizon performance loss"
        ),
    )
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def add_common(sp, with_d=True):
        sp.add_argument("--in", dest="infile", required=True, help="problem JSON file")
        if with_d:
            sp.add_argument(
                "--d",
                type=int,
                default=None,
                help=f"lifting depth (default: smallest feasible, up to {D_MAX_DEFAULT})",
            )

    sp = sub.add_parser("generate", help="write a generated problem file")
    sp.add_argument("--kind", required=True, choices=KINDS)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--n", type=int, default=2)
    sp.add_argument("--m", type=int, default=1)
    sp.add_argument("--period", type=int, default=1)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=_cmd_generate)

    sp = sub.add_parser("lift", help="emit lifted problem data and margins")
    add_common(sp)
    sp.add_argument("--out", default=None, help="output JSON (default: stdout)")
    sp.set_defaults(func=_cmd_lift)

    sp = sub.add_parser("certify", help="emit the certificate for a given horizon")
    add_common(sp)
    sp.add_argument("--T", type=int, required=True, help="prediction horizon")
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=_cmd_certify)

    sp = sub.add_parser(
        "synthesize", help="pick the horizon meeting a performance-loss tolerance"
    )
    add_common(sp)
    sp.add_argument("--beta", type=float, required=True, help="loss tolerance per |x0|^2")
    sp.add_argument("--t-max", type=int, default=cert_mod.T_MAX_DEFAULT)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=_cmd_synthesize)

    sp = sub.add_parser("simulate", help="closed-loop run with report, CSV and figures")
    add_common(sp)
    sp.add_argument("--T", type=int, required=True)
    sp.add_argument("--x0", required=True, help="comma-separated initial state")
    sp.add_argument("--stop", type=float, default=1e-10, help="relative tail tolerance")
    sp.add_argument("--out", required=True, help="report JSON path")
    sp.set_defaults(func=_cmd_simulate)

    sp = sub.add_parser("verify", help="run the property suite on a problem")
    add_common(sp)
    sp.add_argument("--seeds", type=int, default=3, help="closed-loop trials per horizon")
    sp.add_argument("--out", default=None, help="write the check report as JSON")
    sp.set_defaults(func=_cmd_verify)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return exc.exit_code
    except CertificationError as exc:
        print(f"certification failure: {exc}", file=sys.stderr)
        return exc.exit_code
    except VerificationError as exc:
        print(f"verification failure: {exc}", file=sys.stderr)
        return exc.exit_code
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return exc.exit_code
    except RhlqrError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return InputError.exit_code


if __name__ == "__main__":
    sys.exit(main())
