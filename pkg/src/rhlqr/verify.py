"""Per-problem verification: runs every certified property against realized
closed-loop behavior and collects a machine-readable pass/fail report."""

from __future__ import annotations

import time

import numpy as np

from . import certificate as cert_mod
from . import closedloop, riccati
from .errors import RhlqrError
from .fileio import certificate_to_dict, problem_digest
from .lifting import ProblemData, find_min_d, lift
from .spd import lamin, norm2, riemannian_distance

DEFAULT_HORIZONS = (1, 2, 4)


def _check(checks: list, name: str, fn) -> bool:
    try:
        detail = fn()
        checks.append({"name": name, "passed": True, "detail": detail or ""})
        return True
    except AssertionError as exc:
        checks.append({"name": name, "passed": False, "detail": str(exc)})
    except RhlqrError as exc:
        checks.append(
            {"name": name, "passed": False, "detail": f"{type(exc).__name__}: {exc}"}
        )
    return False


def verify_problem(
    pd: ProblemData,
    d: int | None = None,
    horizons: tuple[int, ...] = DEFAULT_HORIZONS,
    n_seeds: int = 3,
    d_max: int = 6,
) -> dict:
    """Run the full property suite on one problem; returns a report dict."""
    start = time.perf_counter()
    checks: list[dict] = []
    rng = np.random.default_rng(0)
    report: dict = {"input_digest": problem_digest(pd), "checks": checks}

    state = {}

    def chk_lift():
        state["d"] = d if d is not None else find_min_d(pd, d_max)
        state["lp"] = lift(pd, state["d"])
        lp = state["lp"]
        assert min(lp.q_lo, lp.b_lo, lp.a_lo) > 0, "non-positive uniformity margin"
        return (
            f"d={state['d']}, margins q={lp.q_lo:.3e} b={lp.b_lo:.3e} a={lp.a_lo:.3e}"
        )

    if not _check(checks, "lifting margins", chk_lift):
        report["passed"] = False
        report["elapsed_s"] = time.perf_counter() - start
        return report
    lp = state["lp"]
    report["d"] = state["d"]

    def chk_contraction():
        cc = riccati.contraction_constants(lp)
        state["cc"] = cc
        assert cc.rho_bar < 1.0, f"rho_bar={cc.rho_bar}"
        for _ in range(10):
            t = int(rng.integers(0, lp.period))
            G1 = rng.normal(size=(lp.n, lp.n))
            G2 = rng.normal(size=(lp.n, lp.n))
            Y = G1 @ G1.T + 0.1 * np.eye(lp.n)
            Z = G2 @ G2.T + 0.1 * np.eye(lp.n)
            lhs = riemannian_distance(riccati.riccati_apply(lp, t, Y), riccati.riccati_apply(lp, t, Z))
            rhs = cc.rho[t] * riemannian_distance(Y, Z)
            assert lhs <= rhs + 1e-8, f"contraction violated at t={t}: {lhs} > {rhs}"
        return f"rho_bar={cc.rho_bar:.6f}"

    _check(checks, "riccati contraction", chk_contraction)

    def chk_approx():
        ra = riccati.solve_infinite_horizon(lp, (0, lp.period), tol_delta=1e-9)
        state["ra"] = ra
        for t in range(ra.t0, ra.t1):
            gap = norm2(riccati.riccati_apply(lp, t, ra.at(t + 1)) - ra.at(t))
            assert gap <= 1e-10 * max(1.0, norm2(ra.at(t))), f"recursion gap {gap:.3e}"
        return f"trunc_err={ra.trunc_err:.3e} tail={ra.tail_len}"

    _check(checks, "infinite-horizon approximation", chk_approx)

    certs = {}
    for T in horizons:

        def chk_cert(T=T):
            cert = cert_mod.build_certificate(lp, T, ra=state.get("ra"), cc=state.get("cc"))
            certs[T] = cert
            pen = cert_mod.penalty_sequence(lp, T)
            trange = range(lp.period) if lp.periodic else range(len(pen) - 1)
            for t in trange:
                dec = lamin(pen.at(t) - riccati.riccati_apply(lp, t, pen.at(t + 1)))
                assert dec >= -1e-9 * max(1.0, norm2(pen.at(t))), (
                    f"penalty decrease condition violated at t={t}: {dec:.3e}"
                )
            return f"beta_bound={cert.beta_bound:.4e}"

        _check(checks, f"certificate T={T}", chk_cert)

    def make_sim_check(T, seed):
        def chk_sim():
            cert = certs[T]
            pen = cert_mod.penalty_sequence(lp, T)
            pol = closedloop.rh_gains(lp, pen, horizon=T)
            local = np.random.default_rng(seed)
            x0 = local.normal(size=lp.n)
            x0 /= np.linalg.norm(x0)
            rep = closedloop.simulate(lp, pol, x0, stop_tol=1e-10)
            assert not rep.envelope_violations, (
                f"envelope violated at steps {rep.envelope_violations[:5]}"
            )
            if rep.lyapunov.size:
                worst = float(np.max(rep.lyapunov))
                scale = 1e-8 * max(1.0, float(np.max(rep.w1[np.isfinite(rep.w1)])))
                assert worst <= scale, f"Lyapunov decrease violated by {worst:.3e}"
            base = closedloop.unlift_controls(lp, pol, rep)
            lifted_cost = float(np.sum(rep.stage))
            gap = abs(base.cost - lifted_cost) / max(1.0, abs(lifted_cost))
            assert gap <= 1e-8, f"base/lifted cost mismatch {gap:.3e}"
            if "ra" in state:
                loss = closedloop.performance_loss(rep, state["ra"], x0)
                x2 = float(x0 @ x0)
                assert loss.beta_hi <= cert.beta_bound * x2 + 1e-9, (
                    f"performance loss {loss.beta_hi:.4e} exceeds bound "
                    f"{cert.beta_bound * x2:.4e}"
                )
                assert loss.beta_lo >= -2.0 * loss.opt_gap - rep.tail_bound - 1e-9, (
                    f"negative performance loss {loss.beta_lo:.4e}"
                )
            return f"steps={rep.steps} cost=[{rep.cost_lo:.6g}, {rep.cost_hi:.6g}]"

        return chk_sim

    for T in horizons:
        if T not in certs:
            continue
        for seed in range(n_seeds):
            _check(checks, f"closed loop T={T} seed={seed}", make_sim_check(T, seed))

    report["certificates"] = {str(T): certificate_to_dict(c) for T, c in certs.items()}
    report["passed"] = all(c["passed"] for c in checks)
    report["elapsed_s"] = time.perf_counter() - start
    return report
