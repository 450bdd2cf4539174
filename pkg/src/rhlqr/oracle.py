"""Dense stacked finite-horizon solver used to cross-validate the Riccati path.

Deliberately independent of the backward-recursion code: the finite-horizon
objective is expanded as an explicit quadratic in the stacked inputs and
minimized by a normal-equations solve.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import InputError, NumericalError
from .lifting import LiftedProblem
from .spd import lamin, sym

STACK_MAX = 2000  # cap on T * md


@dataclass(frozen=True)
class StackedLQ:
    """Quadratic w' H w + 2 g' w + const of the finite-horizon objective."""

    t: int
    horizon: int
    chi: np.ndarray
    H: np.ndarray
    g: np.ndarray
    const: float
    md: int


def build_stacked(
    lp: LiftedProblem, t: int, horizon: int, chi, X, stack_max: int = STACK_MAX
) -> StackedLQ:
    """Expand the T-step cost with terminal penalty X as a dense quadratic."""
    if horizon < 1:
        raise InputError(f"build_stacked: horizon T={horizon} must be >= 1")
    md = lp.md
    if horizon * md > stack_max:
        raise InputError(
            f"build_stacked: stacked size T*md = {horizon * md} exceeds cap {stack_max}"
        )
    chi = np.asarray(chi, dtype=float).reshape(-1)
    if chi.shape != (lp.n,):
        raise InputError(f"build_stacked: chi must have dimension {lp.n}")
    X = sym(np.asarray(X, dtype=float))
    if X.shape != (lp.n, lp.n) or lamin(X) <= 0.0:
        raise InputError("build_stacked: terminal penalty must be SPD of state size")

    n = lp.n
    # z_{t+i} = F_i chi + sum_j G_{i j} w_j, built row by row
    F_rows = []
    G_rows = []
    F_prev = np.eye(n)
    G_prev = np.zeros((n, horizon * md))
    for i in range(1, horizon + 1):
        A = lp.A_at(t + i - 1)
        F_prev = A @ F_prev
        G_prev = A @ G_prev
        G_prev[:, (i - 1) * md : i * md] += lp.B_at(t + i - 1)
        F_rows.append(F_prev)
        G_rows.append(G_prev)
    F = np.vstack(F_rows)
    G = np.vstack(G_rows)

    weights = [lp.Q_at(t + i) for i in range(1, horizon)] + [X]
    bigQ = scipy.linalg.block_diag(*weights)
    bigR = scipy.linalg.block_diag(*(lp.R_at(t + j) for j in range(horizon)))

    H = sym(G.T @ bigQ @ G + bigR)
    g = G.T @ (bigQ @ (F @ chi))
    const = float(chi @ lp.Q_at(t) @ chi + (F @ chi) @ bigQ @ (F @ chi))
    return StackedLQ(t=t, horizon=horizon, chi=chi, H=H, g=g, const=const, md=md)


def solve_stacked(sq: StackedLQ) -> tuple[np.ndarray, float]:
    """Minimize the stacked quadratic; returns (inputs shaped (T, md), value).

    Normal-equations solve with one refinement pass, since the Hessian can
    be moderately ill-conditioned for longer horizons.
    """
    try:
        cho = scipy.linalg.cho_factor(sq.H)
    except scipy.linalg.LinAlgError as exc:
        raise NumericalError(f"solve_stacked: Hessian not SPD: {exc}") from exc
    w = -scipy.linalg.cho_solve(cho, sq.g)
    w -= scipy.linalg.cho_solve(cho, sq.H @ w + sq.g)
    value = float(sq.const + 2.0 * sq.g @ w + w @ sq.H @ w)
    return w.reshape(sq.horizon, sq.md), value


def stacked_value(lp: LiftedProblem, t: int, horizon: int, chi, X, w) -> float:
    """Evaluate the T-step cost of a given stacked input by forward simulation."""
    chi = np.asarray(chi, dtype=float).reshape(-1)
    w = np.asarray(w, dtype=float).reshape(horizon, lp.md)
    X = sym(np.asarray(X, dtype=float))
    z = chi
    total = 0.0
    for i in range(horizon):
        total += float(z @ lp.Q_at(t + i) @ z + w[i] @ lp.R_at(t + i) @ w[i])
        z = lp.A_at(t + i) @ z + lp.B_at(t + i) @ w[i]
    return total + float(z @ X @ z)
