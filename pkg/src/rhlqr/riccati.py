"""The lifted Riccati operator, its contraction constants, and the certified
approximation of the infinite-horizon solution."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import CertificationError, InputError, NumericalError
from .lifting import LiftedProblem
from .spd import PSD_RTOL, lamin, norm2, psd_sqrt, riemannian_distance, sym

NEAR_SINGULAR_RTOL = 1e-8  # switch to the factored update below this lambda_min ratio


def _check_value_matrix(P, n: int) -> np.ndarray:
    """Accept an SPD/PSD value matrix, the scalar 0, or None for the zero matrix."""
    if P is None or (np.isscalar(P) and P == 0):
        return np.zeros((n, n))
    P = sym(np.asarray(P, dtype=float))
    if P.shape != (n, n):
        raise InputError(f"value matrix: expected shape ({n}, {n}), got {P.shape}")
    lo = lamin(P)
    if lo < -PSD_RTOL * max(norm2(P), 1.0):
        raise InputError(f"value matrix: not positive semidefinite (lambda_min = {lo:.6e})")
    return P


def _riccati_step(lp: LiftedProblem, t: int, P: np.ndarray) -> np.ndarray:
    """Core backward update; P must already be a symmetric PSD ndarray."""
    A, B, Q, R = lp.A_at(t), lp.B_at(t), lp.Q_at(t), lp.R_at(t)
    w = np.linalg.eigvalsh(P)
    hi = max(abs(float(w[0])), abs(float(w[-1])))
    try:
        if hi == 0.0:
            D = np.zeros_like(P)
        elif float(w[0]) < NEAR_SINGULAR_RTOL * hi:
            Ph = psd_sqrt(P)
            S = Ph @ B  # n x md
            cho_r = scipy.linalg.cho_factor(R)
            T0 = sym(np.eye(lp.n) + S @ scipy.linalg.cho_solve(cho_r, S.T))
            D = sym(Ph @ scipy.linalg.cho_solve(scipy.linalg.cho_factor(T0), Ph))
        else:
            M = sym(R + B.T @ P @ B)
            Y = scipy.linalg.cho_solve(scipy.linalg.cho_factor(M), B.T @ P)
            D = sym(P - (P @ B) @ Y)
    except scipy.linalg.LinAlgError as exc:
        raise NumericalError(f"riccati_apply: inner solve failed at t={t}: {exc}") from exc
    return sym(Q + A.T @ D @ A)


def riccati_apply(lp: LiftedProblem, t: int, P) -> np.ndarray:
    """One backward dynamic-programming step Q + A'(P - P B (R + B'PB)^{-1} B'P) A.

    The inner term is evaluated through a Cholesky solve of (R + B'PB), or
    through the factored congruence P^{1/2} (I + P^{1/2} B R^{-1} B' P^{1/2})^{-1} P^{1/2}
    when P is (near-)singular. The result is positive definite.
    """
    return _riccati_step(lp, t, _check_value_matrix(P, lp.n))


def riccati_compose(lp: LiftedProblem, t: int, X, steps: int) -> np.ndarray:
    """Backward composition over `steps` stages, ending with the map at index t."""
    if steps < 0:
        raise InputError(f"riccati_compose: steps={steps} must be >= 0")
    X = _check_value_matrix(X, lp.n)
    for j in range(t + steps - 1, t - 1, -1):
        X = _riccati_step(lp, j, X)
    return X


@dataclass(frozen=True)
class ContractionConstants:
    """Per-step contraction data of the Riccati map in the Riemannian metric.

    rho = zeta / (zeta + eps) < 1 is the per-step contraction factor;
    rho_bar = zeta_sup / (zeta_sup + eps_inf) bounds every rho uniformly.
    """

    zeta: np.ndarray
    eps: np.ndarray
    rho: np.ndarray
    zeta_sup: float
    eps_inf: float
    rho_bar: float
    window_limited: bool

    def rho_at(self, t: int) -> float:
        return float(self.rho[t % len(self.rho)] if not self.window_limited else self.rho[t])


def contraction_constants(lp: LiftedProblem) -> ContractionConstants:
    """Evaluate the per-step contraction constants over one period (or window)."""
    L = lp.period
    zeta = np.empty(L)
    eps = np.empty(L)
    for t in range(L):
        A, B, Q, R = lp.A_at(t), lp.B_at(t), lp.Q_at(t), lp.R_at(t)
        try:
            U = np.linalg.solve(A, B)  # LU solve of A^{-1} B, no explicit inverse
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"contraction_constants: A singular at t={t}") from exc
        try:
            RiU = scipy.linalg.cho_solve(scipy.linalg.cho_factor(lp.R_at(t)), U.T)
            W = sym(Q + Q @ (U @ RiU) @ Q)
            zeta[t] = 1.0 / lamin(W)
            V = sym(R + U.T @ Q @ U)
            E = sym(U @ scipy.linalg.cho_solve(scipy.linalg.cho_factor(V), U.T))
        except scipy.linalg.LinAlgError as exc:
            raise NumericalError(
                f"contraction_constants: inner solve failed at t={t}: {exc}"
            ) from exc
        eps[t] = lamin(E)
    rho = zeta / (zeta + eps)
    zeta_sup = float(np.max(zeta))
    eps_inf = float(np.min(eps))
    rho_bar = zeta_sup / (zeta_sup + eps_inf)
    if not (eps_inf > 0.0 and math.isfinite(zeta_sup) and rho_bar < 1.0):
        raise CertificationError(
            f"contraction constants invalid (zeta_sup={zeta_sup:.6e}, "
            f"eps_inf={eps_inf:.6e}); uniformity margins are too small"
        )
    return ContractionConstants(
        zeta=zeta,
        eps=eps,
        rho=rho,
        zeta_sup=zeta_sup,
        eps_inf=eps_inf,
        rho_bar=rho_bar,
        window_limited=not lp.periodic,
    )


@dataclass(frozen=True)
class PenaltySequence:
    """A sequence of terminal-penalty matrices indexed by lifted step."""

    values: np.ndarray  # (L, n, n)
    start: int
    periodic: bool
    provenance: str = "candidate"

    def __len__(self) -> int:
        return self.values.shape[0]

    def at(self, t: int) -> np.ndarray:
        if self.periodic:
            return self.values[(t - self.start) % len(self)]
        i = t - self.start
        if not 0 <= i < len(self):
            raise InputError(
                f"penalty sequence: index t={t} outside [{self.start}, "
                f"{self.start + len(self)})"
            )
        return self.values[i]


@dataclass(frozen=True)
class RiccatiApprox:
    """Window of approximations to the infinite-horizon Riccati solution.

    trunc_err bounds the Riemannian distance between each stored value and
    the exact solution at the same index; it equals rho_bar**tail_len times
    the terminal-candidate distance bound used to seed the recursion.
    """

    t0: int
    t1: int
    values: np.ndarray  # (t1 - t0 + 1, n, n)
    trunc_err: float
    rho_bar: float
    dist_bound: float
    tail_len: int

    def at(self, t: int) -> np.ndarray:
        if not self.t0 <= t <= self.t1:
            raise InputError(f"RiccatiApprox: index t={t} outside [{self.t0}, {self.t1}]")
        return self.values[t - self.t0]

    def to_penalties(self, lp: LiftedProblem) -> PenaltySequence:
        """Use the stored values as a terminal-penalty sequence.

        For a periodic problem the window must cover one full period, which
        is then wrapped.
        """
        if lp.periodic:
            if self.t1 - self.t0 + 1 < lp.period:
                raise InputError(
                    f"to_penalties: window [{self.t0}, {self.t1}] shorter than "
                    f"one lifted period ({lp.period})"
                )
            return PenaltySequence(
                values=self.values[: lp.period],
                start=self.t0,
                periodic=True,
                provenance="custom",
            )
        return PenaltySequence(
            values=self.values, start=self.t0, periodic=False, provenance="custom"
        )


TAIL_DIRECT_CAP = 2000  # longest a-priori tail run before switching strategy
PERIOD_ITER_CAP = 5000  # period-map iterations before giving up on tol_delta
STALL_PATIENCE = 50  # consecutive non-improving iterations tolerated


def _solve_posterior_periodic(
    lp: LiftedProblem, window: tuple[int, int], tol_delta: float, cc, db: float
):
    """Backward period-map iteration with a certified a-posteriori error bound.

    One pass of the period map contracts the metric by at least the product
    of the per-step factors, so the measured step between consecutive passes
    bounds the remaining distance to the fixed point. Stops at tol_delta or
    when the bound stops improving (returned bound is then the best achieved).
    """
    t0, t1 = window
    period = lp.period
    rho_prod = float(np.prod(cc.rho))
    if not rho_prod < 1.0:
        raise CertificationError(
            "solve_infinite_horizon: period contraction factor rounds to 1"
        )
    from . import certificate as _cert

    X = _cert.terminal_candidate(lp, t1)
    best_X = X
    bound = db
    best = db
    stall = 0
    iters = 0
    while bound > tol_delta:
        if iters >= PERIOD_ITER_CAP or stall >= STALL_PATIENCE:
            X = best_X
            bound = best
            break
        X_next = X
        for j in range(t1 + period - 1, t1 - 1, -1):
            X_next = _riccati_step(lp, j, X_next)
        step = riemannian_distance(X_next, X)
        X = X_next
        iters += 1
        posterior = rho_prod * step / (1.0 - rho_prod) if step > 0.0 else 0.0
        bound = min(db * rho_prod**iters, posterior)
        if bound < 0.99 * best:
            best = bound
            best_X = X
            stall = 0
        else:
            stall += 1
    collected = [X]
    for s in range(t1 - 1, t0 - 1, -1):
        X = _riccati_step(lp, s, X)
        collected.append(X)
    return collected[::-1], bound, iters * period


def solve_infinite_horizon(
    lp: LiftedProblem, window: tuple[int, int], tol_delta: float, strict: bool = True
) -> RiccatiApprox:
    """Approximate the infinite-horizon solution over a window of lifted steps.

    Runs the backward recursion from the terminal-penalty candidate placed
    past the window end until the certified Riemannian truncation error
    falls below tol_delta: either a tail of a-priori length from the uniform
    contraction factor, or, when that factor is too close to one, a periodic
    fixed-point iteration with an a-posteriori bound.

    A problem with very weak margins may not be certifiable down to
    tol_delta in floating point; with strict=False the result then carries
    the best achieved bound in trunc_err instead of raising.
    """
    from . import certificate as _cert  # deferred: certificate builds on this module

    t0, t1 = window
    if t1 < t0:
        raise InputError(f"solve_infinite_horizon: empty window [{t0}, {t1}]")
    if tol_delta <= 0.0:
        raise InputError(f"solve_infinite_horizon: tol_delta={tol_delta} must be > 0")
    cc = contraction_constants(lp)
    db = _cert.candidate_distance_bound(lp)
    if db <= tol_delta:
        tail = 0
    else:
        tail = max(int(math.ceil(math.log(tol_delta / db) / math.log(cc.rho_bar))), 0)
        # guard against log rounding just below the target
        while cc.rho_bar**tail * db > tol_delta:
            tail += 1
    if not lp.periodic and t1 + tail > lp.period - 1:
        avail = lp.period - 1 - t1
        achievable = cc.rho_bar ** max(avail, 0) * db
        raise CertificationError(
            f"solve_infinite_horizon: window data ends at t={lp.period - 1}; "
            f"achievable truncation error {achievable:.3e} exceeds tol_delta="
            f"{tol_delta:.3e} (window-limited)"
        )
    if lp.periodic and tail > TAIL_DIRECT_CAP:
        collected, err, tail = _solve_posterior_periodic(lp, window, tol_delta, cc, db)
        if err > tol_delta and strict:
            raise CertificationError(
                f"solve_infinite_horizon: achieved truncation error {err:.3e} "
                f"exceeds tol_delta={tol_delta:.3e}; the tolerance is below "
                f"what the contraction margins certify in floating point "
                f"(retry with strict=False to accept the achieved bound)"
            )
    else:
        X = _cert.terminal_candidate(lp, t1 + tail)
        collected = [X] if tail == 0 else []
        for s in range(t1 + tail - 1, t0 - 1, -1):
            X = _riccati_step(lp, s, X)
            if s <= t1:
                collected.append(X)
        collected = collected[::-1]
        err = float(cc.rho_bar**tail * db)
    return RiccatiApprox(
        t0=t0,
        t1=t1,
        values=np.stack(collected),
        trunc_err=err,
        rho_bar=cc.rho_bar,
        dist_bound=db,
        tail_len=tail,
    )
