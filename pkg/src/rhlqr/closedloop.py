"""Receding-horizon execution on the lifted system, base-domain recovery,
and measured performance loss with certified tails."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import InputError, LiftingConsistencyError, StabilityFailure
from .lifting import LiftedProblem
from .riccati import PenaltySequence, RiccatiApprox, riccati_apply
from .spd import lamin, norm2, sym

LYAPUNOV_RTOL = 1e-8
ENVELOPE_RTOL = 1e-6
CONSISTENCY_ATOL = 1e-8


@dataclass(frozen=True)
class PolicyRealization:
    """State-feedback gains of the one-step reduction of the T-step policy.

    gains[t] maps the lifted state to the (negated) stacked input; corr[t]
    is subtracted from the lifted input to recover base-domain inputs;
    value_mats[t] is the one-step value matrix of the policy, whose extremes
    give the stability envelope.
    """

    gains: np.ndarray  # (L, md, n)
    corr: np.ndarray  # (L, md, n)
    value_mats: np.ndarray  # (L, n, n)
    penalties: PenaltySequence
    horizon: int
    periodic: bool
    value_sup: float
    value_inf: float
    decrease_inf: float

    def __len__(self) -> int:
        return self.gains.shape[0]

    def _idx(self, t: int) -> int:
        if self.periodic:
            return t % len(self)
        if not 0 <= t < len(self):
            raise InputError(f"policy: step t={t} outside window [0, {len(self)})")
        return t

    def gain_at(self, t: int) -> np.ndarray:
        return self.gains[self._idx(t)]

    def corr_at(self, t: int) -> np.ndarray:
        return self.corr[self._idx(t)]

    def value_at(self, t: int) -> np.ndarray:
        return self.value_mats[self._idx(t)]

    @property
    def env_gain(self) -> float:
        return self.value_sup / self.value_inf

    @property
    def env_decay(self) -> float:
        return 1.0 - self.decrease_inf / self.value_sup


def rh_gains(
    lp: LiftedProblem, penalties: PenaltySequence, horizon: int = 1
) -> PolicyRealization:
    """Gains of the one-step policy for a given terminal-penalty sequence.

    By the dynamic-programming reduction these equal the first input block
    of the full T-step minimization with the corresponding end penalties.
    """
    if lp.periodic:
        trange = range(lp.period)
    else:
        trange = range(penalties.start, penalties.start + len(penalties) - 1)
        if len(trange) == 0:
            raise InputError("rh_gains: penalty window too short for a single step")
    n, md = lp.n, lp.md
    L = len(trange)
    gains = np.empty((L, md, n))
    corr = np.empty((L, md, n))
    vmats = np.empty((L, n, n))
    decrease_inf = math.inf
    for i, t in enumerate(trange):
        Xn = penalties.at(t + 1)
        A, B, Q, R = lp.A_at(t), lp.B_at(t), lp.Q_at(t), lp.R_at(t)
        M = sym(R + B.T @ Xn @ B)
        K = scipy.linalg.cho_solve(scipy.linalg.cho_factor(M), B.T @ Xn @ A)
        gains[i] = K
        corr[i] = lp.corr_at(t)
        vmats[i] = riccati_apply(lp, t, Xn)
        decrease_inf = min(decrease_inf, lamin(sym(Q + K.T @ R @ K)))
    value_sup = max(norm2(V) for V in vmats)
    value_inf = max(min(lamin(V) for V in vmats), lp.q_lo)
    return PolicyRealization(
        gains=gains,
        corr=corr,
        value_mats=vmats,
        penalties=penalties,
        horizon=horizon,
        periodic=lp.periodic,
        value_sup=value_sup,
        value_inf=value_inf,
        decrease_inf=decrease_inf,
    )


@dataclass(frozen=True)
class ClosedLoopReport:
    """Trajectory, realized cost with certified tail, and per-step checks.

    The realized infinite-horizon cost lies in [cost_lo, cost_hi]; the gap
    is the certified tail bound value_sup * |x_end|^2. lyapunov holds the
    per-step margins W1(t+1) - W1(t) + stage(t), which certified policies
    keep below the rounding tolerance.
    """

    x: np.ndarray  # (steps + 1, n)
    u: np.ndarray  # (steps, md)
    stage: np.ndarray  # (steps,)
    w1: np.ndarray  # (steps + 1,), NaN where the value matrix is unavailable
    cost_lo: float
    cost_hi: float
    tail_bound: float
    lyapunov: np.ndarray  # (steps,) or shorter in window mode
    envelope_violations: list[int] = field(default_factory=list)
    stop_reason: str = "tail"
    window_limited: bool = False

    @property
    def steps(self) -> int:
        return self.u.shape[0]


def simulate(
    lp: LiftedProblem,
    pol: PolicyRealization,
    x0,
    stop_tol: float = 1e-10,
    max_steps: int = 200_000,
    div_run: int = 50,
) -> ClosedLoopReport:
    """Run the closed loop from x0 until the certified remaining cost
    value_sup |x_t|^2 falls below stop_tol |x0|^2 (or data/steps run out).

    Records stage costs, the one-step value function, per-step Lyapunov
    margins, and envelope compliance. Raises StabilityFailure if the state
    norm grows div_run steps in a row while violating the envelope.
    """
    x = np.asarray(x0, dtype=float).reshape(-1)
    if x.shape != (lp.n,):
        raise InputError(f"simulate: x0 must have dimension {lp.n}, got {x.shape[0]}")
    if not np.all(np.isfinite(x)):
        raise InputError("simulate: x0 must be finite")
    x2_0 = float(x @ x)
    stop_abs = stop_tol * x2_0
    gain, decay = pol.env_gain, pol.env_decay

    xs = [x.copy()]
    us: list[np.ndarray] = []
    stages: list[float] = []
    w1: list[float] = [float(x @ pol.value_at(0) @ x)] if len(pol) else []
    lyap: list[float] = []
    env_viol: list[int] = []
    grow = 0
    stop_reason = "tail"
    window_limited = False
    t = 0
    while True:
        x2 = float(x @ x)
        if pol.value_sup * x2 <= stop_abs:
            stop_reason = "tail"
            break
        if not pol.periodic and t >= len(pol):
            stop_reason = "window"
            window_limited = True
            break
        if t >= max_steps:
            stop_reason = "max_steps"
            break
        u = -pol.gain_at(t) @ x
        stage = float(x @ lp.Q_at(t) @ x + u @ lp.R_at(t) @ u)
        x_next = lp.A_at(t) @ x + lp.B_at(t) @ u
        us.append(u)
        stages.append(stage)

        have_next_value = pol.periodic or (t + 1) < len(pol)
        if have_next_value:
            w1_next = float(x_next @ pol.value_at(t + 1) @ x_next)
            lyap.append(w1_next - w1[t] + stage)
        else:
            w1_next = math.nan
        w1.append(w1_next)

        env_bound = gain * decay ** (t + 1) * x2_0
        x2_next = float(x_next @ x_next)
        if x2_next > env_bound * (1.0 + ENVELOPE_RTOL) + 1e-280 * max(x2_0, 1.0):
            env_viol.append(t + 1)
        grow = grow + 1 if x2_next > x2 else 0
        if grow >= div_run and x2_next > 4.0 * max(env_bound, gain * x2_0):
            raise StabilityFailure(
                f"simulate: state norm grew for {grow} consecutive steps and "
                f"left the certified envelope at t={t + 1} "
                f"(|x|^2 = {x2_next:.3e} vs bound {env_bound:.3e})"
            )
        xs.append(x_next.copy())
        x = x_next
        t += 1

    stage_arr = np.asarray(stages)
    cost_lo = float(np.sum(stage_arr))
    tail_bound = pol.value_sup * float(x @ x)
    return ClosedLoopReport(
        x=np.asarray(xs),
        u=np.asarray(us) if us else np.zeros((0, lp.md)),
        stage=stage_arr,
        w1=np.asarray(w1),
        cost_lo=cost_lo,
        cost_hi=cost_lo + tail_bound,
        tail_bound=tail_bound,
        lyapunov=np.asarray(lyap),
        envelope_violations=env_viol,
        stop_reason=stop_reason,
        window_limited=window_limited,
    )


@dataclass(frozen=True)
class BaseTrajectory:
    """Base-domain trajectory recovered from a lifted run."""

    x: np.ndarray  # (d * steps + 1, n)
    u: np.ndarray  # (d * steps, m)
    stage: np.ndarray  # (d * steps,)
    cost: float
    max_block_gap: float  # worst block-boundary mismatch against the lifted states


def unlift_controls(
    lp: LiftedProblem, pol: PolicyRealization, report: ClosedLoopReport
) -> BaseTrajectory:
    """Recover base-domain inputs and states from a lifted closed-loop run.

    Each lifted input block is corrected by corr[t] @ x_t and split into d
    base inputs; the base state is propagated through the original dynamics
    and must meet the lifted state at every block boundary.
    """
    d, m, n = lp.d, lp.m, lp.n
    N = report.steps
    pd = lp.base
    x_base = np.empty((d * N + 1, n))
    u_base = np.empty((d * N, m))
    stage = np.empty(d * N)
    xb = report.x[0].copy()
    max_gap = 0.0
    for t in range(N):
        block = report.u[t] - pol.corr_at(t) @ report.x[t]
        for j in range(d):
            k = d * t + j
            u = block[j * m : (j + 1) * m]
            stage[k] = float(xb @ pd.Q_at(k) @ xb + u @ pd.R_at(k) @ u)
            x_base[k] = xb
            u_base[k] = u
            xb = pd.A_at(k) @ xb + pd.B_at(k) @ u
        gap = float(np.linalg.norm(xb - report.x[t + 1]))
        max_gap = max(max_gap, gap)
        if gap > CONSISTENCY_ATOL * (1.0 + float(np.linalg.norm(report.x[t + 1]))):
            raise LiftingConsistencyError(
                f"unlift_controls: base state misses the lifted state at block "
                f"{t + 1} by {gap:.3e}"
            )
    x_base[-1] = xb
    return BaseTrajectory(
        x=x_base, u=u_base, stage=stage, cost=float(np.sum(stage)), max_block_gap=max_gap
    )


@dataclass(frozen=True)
class PerformanceLoss:
    """Measured performance loss interval against the certified optimum."""

    beta_lo: float
    beta_hi: float
    beta_mid: float
    opt_value: float  # x0' P_hat_0 x0
    opt_gap: float  # spectral slack from the Riccati truncation error


def performance_loss(
    report: ClosedLoopReport, ra: RiccatiApprox, x0
) -> PerformanceLoss:
    """Interval for realized cost minus optimal cost from initial state x0.

    The optimal cost is known only up to the truncation error of the
    Riccati approximation, which converts to a spectral gap via the
    norm-gap bound; both interval ends carry that slack.
    """
    x = np.asarray(x0, dtype=float).reshape(-1)
    P0 = ra.at(0)
    opt = float(x @ P0 @ x)
    x2 = float(x @ x)
    opt_gap = norm2(P0) * math.expm1(ra.trunc_err) * x2
    beta_lo = report.cost_lo - opt - opt_gap
    beta_hi = report.cost_hi - opt + opt_gap
    return PerformanceLoss(
        beta_lo=beta_lo,
        beta_hi=beta_hi,
        beta_mid=0.5 * (report.cost_lo + report.cost_hi) - opt,
        opt_value=opt,
        opt_gap=opt_gap,
    )
