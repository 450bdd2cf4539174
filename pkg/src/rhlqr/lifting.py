"""Time-varying problem data and its d-step block lifting.

The lifting turns a problem that is only controllable/observable over d
steps into a blocked problem that is 1-step controllable and observable,
at the price of stacking d inputs per step.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import InputError, MarginViolation, NoUniformDepth, NumericalError
from .spd import PSD_RTOL, SYM_RTOL, lamin, norm2, psd_sqrt, sym

INV_RTOL = 1e-12  # smallest accepted sigma_min(A_k) relative to max(1, sigma_max)
MARGIN_TOL = 1e-10  # uniformity margins must exceed this


def _as_stack(name: str, arr, shape: tuple[int, int, int]) -> np.ndarray:
    A = np.asarray(arr, dtype=float)
    if A.shape != shape:
        raise InputError(f"{name}: expected shape {shape}, got {A.shape}")
    if not np.all(np.isfinite(A)):
        bad = int(np.argwhere(~np.isfinite(A).all(axis=(1, 2)))[0][0])
        raise InputError(f"{name}[{bad}]: entries must be finite")
    return A


@dataclass(frozen=True)
class ProblemData:
    """Base-domain data (A_k, B_k, Q_k, R_k) over one period or a finite window.

    In periodic mode the sequences hold exactly one period and indices
    resolve modulo the period; in window mode indices out of range are an
    error. Q_k must be positive semidefinite, R_k positive definite, and
    every A_k non-singular.
    """

    A: np.ndarray
    B: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    periodic: bool = True
    name: str = ""
    description: str = ""

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        if A.ndim != 3 or A.shape[1] != A.shape[2]:
            raise InputError(f"A: expected shape (count, n, n), got {A.shape}")
        count, n = A.shape[0], A.shape[1]
        if count < 1:
            raise InputError("problem data must contain at least one step")
        B = np.asarray(self.B, dtype=float)
        if B.ndim != 3 or B.shape[0] != count or B.shape[1] != n:
            raise InputError(f"B: expected shape ({count}, {n}, m), got {B.shape}")
        m = B.shape[2]
        A = _as_stack("A", A, (count, n, n))
        B = _as_stack("B", B, (count, n, m))
        Q = _as_stack("Q", self.Q, (count, n, n))
        R = _as_stack("R", self.R, (count, m, m))

        Qs = np.empty_like(Q)
        Rs = np.empty_like(R)
        for k in range(count):
            for nm, M in (("Q", Q[k]), ("R", R[k])):
                if norm2(M - M.T) > SYM_RTOL * max(norm2(M), np.finfo(float).tiny):
                    raise InputError(f"{nm}[{k}]: not symmetric within tolerance")
            Qs[k] = sym(Q[k])
            Rs[k] = sym(R[k])
            q_lo = lamin(Qs[k])
            if q_lo < -PSD_RTOL * max(norm2(Qs[k]), 1.0):
                raise InputError(
                    f"Q[{k}]: not positive semidefinite (lambda_min = {q_lo:.6e})"
                )
            r_lo = lamin(Rs[k])
            if r_lo <= PSD_RTOL * norm2(Rs[k]) or r_lo <= 0.0:
                raise InputError(
                    f"R[{k}]: not positive definite (lambda_min = {r_lo:.6e})"
                )
            sv = np.linalg.svd(A[k], compute_uv=False)
            if sv[-1] < INV_RTOL * max(1.0, sv[0]):
                raise InputError(
                    f"A[{k}]: singular or near-singular (sigma_min = {sv[-1]:.6e})"
                )
        for arr in (A, B, Qs, Rs):
            arr.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "Q", Qs)
        object.__setattr__(self, "R", Rs)

    @property
    def n(self) -> int:
        return self.A.shape[1]

    @property
    def m(self) -> int:
        return self.B.shape[2]

    @property
    def count(self) -> int:
        """Period length (periodic mode) or window length (window mode)."""
        return self.A.shape[0]

    def bounds(self) -> tuple[float, float, float, float]:
        """Sup spectral norms (a_sup, b_sup, q_sup, r_sup) over the data."""
        return (
            max(norm2(M) for M in self.A),
            max(norm2(M) for M in self.B),
            max(norm2(M) for M in self.Q),
            max(norm2(M) for M in self.R),
        )

    def index(self, k: int) -> int:
        if self.periodic:
            return k % self.count
        if not 0 <= k < self.count:
            raise InputError(f"base index k={k} outside window [0, {self.count})")
        return k

    def A_at(self, k: int) -> np.ndarray:
        return self.A[self.index(k)]

    def B_at(self, k: int) -> np.ndarray:
        return self.B[self.index(k)]

    def Q_at(self, k: int) -> np.ndarray:
        return self.Q[self.index(k)]

    def R_at(self, k: int) -> np.ndarray:
        return self.R[self.index(k)]

    def repeat(self, times: int) -> "ProblemData":
        """Tile the period `times` times (periodic mode only)."""
        if not self.periodic:
            raise InputError("repeat() only applies to periodic problem data")
        return ProblemData(
            A=np.tile(self.A, (times, 1, 1)),
            B=np.tile(self.B, (times, 1, 1)),
            Q=np.tile(self.Q, (times, 1, 1)),
            R=np.tile(self.R, (times, 1, 1)),
            periodic=True,
            name=self.name,
            description=self.description,
        )


def state_transition(pd: ProblemData, k: int, d: int) -> np.ndarray:
    """d-step transition A_{k+d-1} ... A_k; the empty product (d = 0) is I."""
    if d < 0:
        raise InputError(f"state_transition: depth d={d} must be >= 0")
    T = np.eye(pd.n)
    for j in range(d):
        T = pd.A_at(k + j) @ T
    return T


def controllability_matrix(pd: ProblemData, k: int, d: int) -> np.ndarray:
    """d-step controllability matrix, blocks Theta_{k+j+1, d-1-j} B_{k+j}."""
    if d < 1:
        raise InputError(f"controllability_matrix: depth d={d} must be >= 1")
    blocks = []
    for j in range(d):
        blocks.append(state_transition(pd, k + j + 1, d - 1 - j) @ pd.B_at(k + j))
    return np.hstack(blocks)


def observability_matrix(pd: ProblemData, k: int, d: int) -> np.ndarray:
    """d-step observability matrix, block rows Q_{k+i}^{1/2} Theta_{k,i}."""
    if d < 1:
        raise InputError(f"observability_matrix: depth d={d} must be >= 1")
    rows = []
    theta = np.eye(pd.n)
    for i in range(d + 1):
        rows.append(psd_sqrt(pd.Q_at(k + i)) @ theta)
        theta = pd.A_at(k + i) @ theta
    return np.vstack(rows)


def _rank(M: np.ndarray) -> int:
    sv = np.linalg.svd(M, compute_uv=False)
    if sv.size == 0 or sv[0] == 0.0:
        return 0
    tol = min(M.shape) * np.finfo(float).eps * sv[0]
    return int(np.sum(sv > tol))


def _depth_indices(pd: ProblemData, d: int) -> range:
    if pd.periodic:
        return range(pd.count)
    return range(max(0, pd.count - d))


def find_min_d(pd: ProblemData, d_max: int) -> int:
    """Smallest depth d <= d_max with uniform full-rank controllability and
    observability over all representable base indices."""
    if d_max < 1:
        raise InputError(f"find_min_d: d_max={d_max} must be >= 1")
    failing_k = 0
    for d in range(1, d_max + 1):
        ok = True
        for k in _depth_indices(pd, d):
            if _rank(controllability_matrix(pd, k, d)) < pd.n:
                ok, failing_k = False, k
                break
            if _rank(observability_matrix(pd, k, d)) < pd.n:
                ok, failing_k = False, k
                break
        if ok:
            return d
    raise NoUniformDepth(d_max, failing_k)


@dataclass(frozen=True)
class LiftingIntermediates:
    """Stacked one-block matrices and the block response maps for one step t.

    `ahat` is unit-lower-block-triangular (hence invertible); `trans` must
    equal the d-step state transition of the block.
    """

    d: int
    t: int
    ahat: np.ndarray  # n(d+1) x n(d+1)
    bhat: np.ndarray  # n(d+1) x md
    chat: np.ndarray  # nd x n(d+1)
    trans: np.ndarray  # n x n, end state from initial state
    input_map: np.ndarray  # n x md, end state from stacked inputs
    obs_free: np.ndarray  # nd x n, in-block outputs from initial state
    obs_forced: np.ndarray  # nd x md, in-block outputs from stacked inputs


def _block_maps(pd: ProblemData, d: int, t: int):
    """Forward-substitution solve of the stacked one-block dynamics.

    Returns (trans, input_map, obs_free, obs_forced) without forming the
    stacked matrix inverse.
    """
    n, m = pd.n, pd.m
    k0 = d * t
    A = [pd.A_at(k0 + j) for j in range(d)]
    B = [pd.B_at(k0 + j) for j in range(d)]
    C = [psd_sqrt(pd.Q_at(k0 + j)) for j in range(d)]

    free = [np.eye(n)]
    for j in range(d):
        free.append(A[j] @ free[-1])
    forced = [np.zeros((n, m * d))]
    for i in range(1, d + 1):
        nxt = A[i - 1] @ forced[-1]
        nxt[:, (i - 1) * m : i * m] += B[i - 1]
        forced.append(nxt)

    trans = free[d]
    input_map = forced[d]
    obs_free = np.vstack([C[i] @ free[i] for i in range(d)])
    obs_forced = np.vstack([C[i] @ forced[i] for i in range(d)])
    return trans, input_map, obs_free, obs_forced


def lifting_intermediates(pd: ProblemData, d: int, t: int) -> LiftingIntermediates:
    """Explicit stacked matrices plus the response maps, for inspection/tests."""
    n, m = pd.n, pd.m
    k0 = d * t
    ahat = np.eye(n * (d + 1))
    bhat = np.zeros((n * (d + 1), m * d))
    chat = np.zeros((n * d, n * (d + 1)))
    for i in range(d):
        ahat[(i + 1) * n : (i + 2) * n, i * n : (i + 1) * n] = -pd.A_at(k0 + i)
        bhat[(i + 1) * n : (i + 2) * n, i * m : (i + 1) * m] = pd.B_at(k0 + i)
        chat[i * n : (i + 1) * n, i * n : (i + 1) * n] = psd_sqrt(pd.Q_at(k0 + i))
    trans, input_map, obs_free, obs_forced = _block_maps(pd, d, t)
    return LiftingIntermediates(
        d=d,
        t=t,
        ahat=ahat,
        bhat=bhat,
        chat=chat,
        trans=trans,
        input_map=input_map,
        obs_free=obs_free,
        obs_forced=obs_forced,
    )


@dataclass(frozen=True)
class LiftedProblem:
    """d-step lifted problem data with verified uniformity margins.

    `corr` holds the per-step base-input correction matrices: the base input
    block over lifted step t is the lifted input minus corr_at(t) @ x_t.
    """

    base: ProblemData
    d: int
    A: np.ndarray  # (L, n, n)
    B: np.ndarray  # (L, n, md)
    Q: np.ndarray  # (L, n, n)
    R: np.ndarray  # (L, md, md)
    corr: np.ndarray  # (L, md, n)
    periodic: bool
    q_lo: float = field(default=0.0)  # inf_t lambda_min(Q_t)
    b_lo: float = field(default=0.0)  # inf_t lambda_min(B_t B_t')
    a_lo: float = field(default=0.0)  # inf_t lambda_min(A_t A_t')

    @property
    def n(self) -> int:
        return self.A.shape[1]

    @property
    def m(self) -> int:
        return self.base.m

    @property
    def md(self) -> int:
        return self.B.shape[2]

    @property
    def period(self) -> int:
        """Lifted period (periodic mode) or number of complete blocks."""
        return self.A.shape[0]

    def index(self, t: int) -> int:
        if self.periodic:
            return t % self.period
        if not 0 <= t < self.period:
            raise InputError(f"lifted index t={t} outside window [0, {self.period})")
        return t

    def A_at(self, t: int) -> np.ndarray:
        return self.A[self.index(t)]

    def B_at(self, t: int) -> np.ndarray:
        return self.B[self.index(t)]

    def Q_at(self, t: int) -> np.ndarray:
        return self.Q[self.index(t)]

    def R_at(self, t: int) -> np.ndarray:
        return self.R[self.index(t)]

    def corr_at(self, t: int) -> np.ndarray:
        return self.corr[self.index(t)]


def lift(pd: ProblemData, d: int, margin_tol: float = MARGIN_TOL) -> LiftedProblem:
    """Build the d-step lifted problem and verify its uniformity margins.

    In periodic mode a base period not divisible by d is tiled out to
    lcm(period, d) so the lifted problem is exactly periodic. In window
    mode a trailing partial block is discarded with a warning.
    """
    if d < 1:
        raise InputError(f"lift: depth d={d} must be >= 1")
    if pd.periodic and pd.count % d != 0:
        pd = pd.repeat(math.lcm(pd.count, d) // pd.count)
    nblocks = pd.count // d
    if nblocks < 1:
        raise InputError(
            f"lift: window of {pd.count} base steps holds no complete d={d} block"
        )
    if not pd.periodic and pd.count % d != 0:
        warnings.warn(
            f"lift: discarding trailing partial block of {pd.count % d} base steps",
            stacklevel=2,
        )

    n, m = pd.n, pd.m
    At = np.empty((nblocks, n, n))
    Bt = np.empty((nblocks, n, m * d))
    Qt = np.empty((nblocks, n, n))
    Rt = np.empty((nblocks, m * d, m * d))
    corr = np.empty((nblocks, m * d, n))
    for t in range(nblocks):
        trans, input_map, obs_free, obs_forced = _block_maps(pd, d, t)
        R_diag = scipy.linalg.block_diag(*(pd.R_at(d * t + j) for j in range(d)))
        R_lift = sym(R_diag + obs_forced.T @ obs_forced)
        try:
            cho = scipy.linalg.cho_factor(R_lift)
        except scipy.linalg.LinAlgError as exc:
            raise NumericalError(f"lift: Cholesky of R at t={t} failed: {exc}") from exc
        cross = obs_forced.T @ obs_free  # md x n
        G = scipy.linalg.cho_solve(cho, cross)
        Qt[t] = sym(obs_free.T @ obs_free - cross.T @ G)
        Rt[t] = R_lift
        At[t] = trans - input_map @ G
        Bt[t] = input_map
        corr[t] = G

    q_lo = min(lamin(Qt[t]) for t in range(nblocks))
    b_lo = min(lamin(Bt[t] @ Bt[t].T) for t in range(nblocks))
    a_lo = min(lamin(At[t] @ At[t].T) for t in range(nblocks))
    for label, val in (("Q", q_lo), ("B B'", b_lo), ("A A'", a_lo)):
        if val <= margin_tol:
            raise MarginViolation(
                f"lift: uniformity margin lambda_min({label}) = {val:.6e} <= "
                f"{margin_tol:g} at depth d={d}; the depth does not give a "
                f"uniformly controllable/observable lifted problem"
            )
    for arr in (At, Bt, Qt, Rt, corr):
        arr.setflags(write=False)
    return LiftedProblem(
        base=pd,
        d=d,
        A=At,
        B=Bt,
        Q=Qt,
        R=Rt,
        corr=corr,
        periodic=pd.periodic,
        q_lo=q_lo,
        b_lo=b_lo,
        a_lo=a_lo,
    )
