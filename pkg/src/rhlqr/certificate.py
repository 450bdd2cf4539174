"""Terminal-penalty construction, certificate constants, the performance-loss
bound, and horizon-length selection."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import CertificationError, InputError, MarginViolation
from .lifting import LiftedProblem
from .riccati import (
    ContractionConstants,
    PenaltySequence,
    RiccatiApprox,
    contraction_constants,
    riccati_apply,
    riccati_compose,
)
from .spd import lamin, norm2, sym

T_MAX_DEFAULT = 10_000
ORDER_RTOL = 1e-9  # slack for the asserted orderings between constants


def terminal_candidate(lp: LiftedProblem, t: int) -> np.ndarray:
    """Terminal-penalty candidate Q + A'(BB')^{-1} B R B' (BB')^{-1} A at step t.

    This is the one-step cost of the minimum-norm input that returns the
    state to the origin, so it upper-bounds the one-step value update of any
    positive-semidefinite argument.
    """
    A, B, Q, R = lp.A_at(t), lp.B_at(t), lp.Q_at(t), lp.R_at(t)
    S = sym(B @ B.T)
    try:
        cho = scipy.linalg.cho_factor(S)
    except scipy.linalg.LinAlgError as exc:
        raise MarginViolation(
            f"terminal_candidate: B B' near-singular at t={t} "
            f"(lambda_min margin {lp.b_lo:.3e})"
        ) from exc
    Z = B.T @ scipy.linalg.cho_solve(cho, A)  # md x n
    return sym(Q + Z.T @ R @ Z)


def penalty_sequence(lp: LiftedProblem, horizon: int) -> PenaltySequence:
    """Composed terminal penalties for the T-step policy's one-step reduction.

    The value at step s is the candidate at s + T - 1 pushed backward
    through T - 1 stages; horizon 1 returns the candidates unchanged.
    """
    if horizon < 1:
        raise InputError(f"penalty_sequence: horizon T={horizon} must be >= 1")
    if lp.periodic:
        srange = range(lp.period)
    else:
        count = lp.period - horizon + 1
        if count < 1:
            raise CertificationError(
                f"penalty_sequence: window of {lp.period} lifted steps is too "
                f"short for horizon T={horizon}"
            )
        srange = range(count)
    vals = []
    for s in srange:
        X = terminal_candidate(lp, s + horizon - 1)
        vals.append(riccati_compose(lp, s, X, horizon - 1))
    return PenaltySequence(
        values=np.stack(vals), start=0, periodic=lp.periodic, provenance="candidate"
    )


def candidate_distance_bound(lp: LiftedProblem, horizon: int | None = None) -> float:
    """Riemannian distance bound sqrt(n) log sup_t ||X_t|| / lambda_min(Q_t)
    between the candidate penalties and the exact infinite-horizon solution.

    Computable from the lifted data alone. For window-mode problems a given
    horizon restricts the indices to those a T-step policy can reach.
    """
    if lp.periodic or horizon is None:
        srange = range(lp.period)
    else:
        srange = range(min(horizon, lp.period - 1), lp.period)
    ratio = max(
        norm2(terminal_candidate(lp, s)) / lamin(lp.Q_at(s)) for s in srange
    )
    return math.sqrt(lp.n) * math.log(ratio)


@dataclass(frozen=True)
class Certificate:
    """Computed constants certifying stability and performance loss.

    value_sup / value_inf bound the one-step value matrices of the policy,
    decrease_inf the per-step cost decrease, opt_sup the optimal value
    matrices; beta_bound multiplies |x0|^2 in the performance-loss bound.
    mode records whether the sups/infs are exact over one period or only
    over a finite window.
    """

    d: int
    horizon: int
    value_sup: float
    value_inf: float
    decrease_inf: float
    opt_sup: float
    dist_bound: float
    zeta_sup: float
    eps_inf: float
    rho_bar: float
    beta_bound: float
    env_gain: float
    env_decay: float
    mode: str

    def __post_init__(self):
        checks = [
            (0.0 < self.value_inf, "value_inf must be positive"),
            (
                self.value_inf <= self.value_sup * (1.0 + ORDER_RTOL),
                "value_inf must not exceed value_sup",
            ),
            (0.0 < self.decrease_inf, "decrease_inf must be positive"),
            (
                self.decrease_inf <= self.value_sup * (1.0 + ORDER_RTOL),
                "decrease_inf must not exceed value_sup",
            ),
            (self.rho_bar < 1.0, "contraction rate must be < 1"),
            (math.isfinite(self.dist_bound), "distance bound must be finite"),
            (self.beta_bound > 0.0, "performance-loss bound must be positive"),
            (0.0 <= self.env_decay < 1.0, "envelope decay must lie in [0, 1)"),
        ]
        for ok, msg in checks:
            if not ok:
                raise CertificationError(f"certificate invariant failed: {msg}")


def _beta_bound(
    value_sup: float,
    value_inf: float,
    decrease_inf: float,
    opt_sup: float,
    dist_bound: float,
    rho_bar: float,
    horizon: int,
) -> float:
    return (
        (opt_sup / decrease_inf)
        * (value_sup / value_inf)
        * value_sup
        * math.expm1(rho_bar ** (horizon - 1) * dist_bound)
    )


def build_certificate(
    lp: LiftedProblem,
    horizon: int,
    ra: RiccatiApprox | None = None,
    cc: ContractionConstants | None = None,
) -> Certificate:
    """Evaluate the certificate constants for the T-step policy.

    When a Riccati approximation is supplied, the domination of the composed
    penalties over the (approximate) optimal value matrices is checked up to
    the truncation slack.
    """
    pen = penalty_sequence(lp, horizon)
    if cc is None:
        cc = contraction_constants(lp)
    ts = range(lp.period) if lp.periodic else range(len(pen) - 1)
    if len(ts) == 0:
        raise CertificationError(
            f"build_certificate: window too short for horizon T={horizon}"
        )
    value_sup = -math.inf
    value_inf = math.inf
    decrease_inf = math.inf
    for t in ts:
        Xn = pen.at(t + 1)
        V = riccati_apply(lp, t, Xn)
        value_sup = max(value_sup, norm2(V))
        value_inf = min(value_inf, lamin(V))
        B, R = lp.B_at(t), lp.R_at(t)
        M = sym(R + B.T @ Xn @ B)
        K = scipy.linalg.cho_solve(
            scipy.linalg.cho_factor(M), B.T @ Xn @ lp.A_at(t)
        )
        decrease_inf = min(decrease_inf, lamin(sym(lp.Q_at(t) + K.T @ R @ K)))
    value_inf = max(value_inf, lp.q_lo)
    opt_sup = max(norm2(terminal_candidate(lp, s)) for s in range(lp.period))
    dist_bound = candidate_distance_bound(lp, None if lp.periodic else horizon)

    if ra is not None:
        lo, hi = ra.t0, ra.t1
        if not lp.periodic:
            lo, hi = max(lo, 0), min(hi, len(pen) - 1)
        for t in range(lo, hi + 1):
            P_hat = ra.at(t)
            slack = norm2(P_hat) * math.expm1(ra.trunc_err) + ORDER_RTOL * norm2(P_hat)
            gap = lamin(pen.at(t) - P_hat)
            if gap < -slack:
                raise CertificationError(
                    f"build_certificate: composed penalty at t={t} does not "
                    f"dominate the optimal value matrix "
                    f"(lambda_min gap {gap:.3e} < -{slack:.3e})"
                )

    return Certificate(
        d=lp.d,
        horizon=horizon,
        value_sup=value_sup,
        value_inf=value_inf,
        decrease_inf=decrease_inf,
        opt_sup=opt_sup,
        dist_bound=dist_bound,
        zeta_sup=cc.zeta_sup,
        eps_inf=cc.eps_inf,
        rho_bar=cc.rho_bar,
        beta_bound=_beta_bound(
            value_sup, value_inf, decrease_inf, opt_sup, dist_bound, cc.rho_bar, horizon
        ),
        env_gain=value_sup / value_inf,
        env_decay=1.0 - decrease_inf / value_sup,
        mode="exact-periodic" if lp.periodic else "window-limited",
    )


def corollary_horizon(
    value_sup: float,
    value_inf: float,
    decrease_inf: float,
    opt_sup: float,
    dist_bound: float,
    rho_bar: float,
    beta_max: float,
    t_max: int = T_MAX_DEFAULT,
) -> int:
    """Smallest horizon T whose performance-loss bound meets beta_max.

    Inverts beta_bound(T) <= beta_max for the given constants; the result is
    clamped to [1, t_max].
    """
    if beta_max <= 0.0:
        raise InputError(f"corollary_horizon: beta_max={beta_max} must be > 0")
    if not 0.0 < rho_bar < 1.0:
        raise CertificationError(f"corollary_horizon: rho_bar={rho_bar} outside (0, 1)")
    if dist_bound <= 0.0:
        return 1
    x = beta_max * decrease_inf * value_inf / (value_sup**2 * opt_sup)
    inner = math.log1p(x) / dist_bound
    if inner >= 1.0:
        return 1
    t_req = math.log(inner) / math.log(rho_bar) + 1.0
    return max(1, min(int(math.ceil(t_req - ORDER_RTOL)), t_max))


def horizon_for_tolerance(
    lp: LiftedProblem, beta_max: float, t_max: int = T_MAX_DEFAULT
) -> tuple[int, Certificate]:
    """Pick a horizon certified to keep the performance loss below beta_max |x0|^2.

    The composed penalties depend on the horizon, so a first pick is made
    from horizon-independent surrogate constants (candidate norms and the
    lifted-cost margin), then tightened once using the exact constants of
    the resulting certificate. The returned certificate always satisfies
    beta_bound <= beta_max.
    """
    if beta_max <= 0.0:
        raise InputError(f"horizon_for_tolerance: beta_max={beta_max} must be > 0")
    cc = contraction_constants(lp)
    cand_sup = max(norm2(terminal_candidate(lp, s)) for s in range(lp.period))
    db = candidate_distance_bound(lp)
    t0 = corollary_horizon(
        value_sup=cand_sup,
        value_inf=lp.q_lo,
        decrease_inf=lp.q_lo,
        opt_sup=cand_sup,
        dist_bound=db,
        rho_bar=cc.rho_bar,
        beta_max=beta_max,
        t_max=t_max,
    )
    cert = build_certificate(lp, t0, cc=cc)
    if cert.beta_bound <= beta_max:
        t1 = corollary_horizon(
            cert.value_sup,
            cert.value_inf,
            cert.decrease_inf,
            cert.opt_sup,
            cert.dist_bound,
            cert.rho_bar,
            beta_max,
            t_max,
        )
        if t1 < t0:
            tightened = build_certificate(lp, t1, cc=cc)
            if tightened.beta_bound <= beta_max:
                return t1, tightened
        return t0, cert
    raise CertificationError(
        f"horizon_for_tolerance: cannot certify beta <= {beta_max:g} within "
        f"T_max={t_max} (reached beta_bound={cert.beta_bound:.3e} at T={t0})"
    )
