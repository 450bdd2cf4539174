"""Numerically robust primitives on symmetric positive-definite matrices.

Everything here goes through symmetric (self-adjoint) eigendecompositions
after explicit symmetrization, and congruences are formed from Cholesky
factors rather than explicit inverses.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import InputError, NumericalError

SYM_RTOL = 1e-10  # accepted relative asymmetry ||M - M'||_2 / ||M||_2
PSD_RTOL = 1e-9  # relative slack for semidefiniteness / ordering checks
ROUNDTRIP_RTOL = 1e-8  # sqrt/log reconstruction accuracy


def sym(M: np.ndarray) -> np.ndarray:
    """Exact symmetrization (M + M') / 2."""
    M = np.asarray(M, dtype=float)
    return 0.5 * (M + M.T)


def norm2(M: np.ndarray) -> float:
    """Spectral norm."""
    return float(np.linalg.norm(np.asarray(M, dtype=float), 2))


def lamin(M: np.ndarray) -> float:
    """Smallest eigenvalue of the symmetrized matrix."""
    return float(np.linalg.eigvalsh(sym(M))[0])


def _eigh(M: np.ndarray, context: str) -> tuple[np.ndarray, np.ndarray]:
    try:
        w, V = np.linalg.eigh(M)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            f"{context}: symmetric eigendecomposition failed "
            f"(||M||_2 ~ {np.linalg.norm(M):.3e}): {exc}"
        ) from exc
    return w, V


def _check_square(M: np.ndarray, name: str) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise InputError(f"{name}: expected a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise InputError(f"{name}: entries must be finite")
    return M


def _as_spd(M, name: str = "matrix", sym_rtol: float = SYM_RTOL) -> np.ndarray:
    """Validate and return the exactly symmetrized array form of an SPD matrix."""
    if isinstance(M, SpdMatrix):
        return M.a
    M = _check_square(M, name)
    nrm = norm2(M)
    if norm2(M - M.T) > sym_rtol * max(nrm, np.finfo(float).tiny):
        raise InputError(f"{name}: not symmetric within tolerance {sym_rtol:g}")
    S = sym(M)
    lo = float(np.linalg.eigvalsh(S)[0])
    if lo <= 0.0:
        raise InputError(f"{name}: not positive definite (lambda_min = {lo:.6e})")
    return S


@dataclass(frozen=True)
class SpdMatrix:
    """Construction-checked SPD matrix; stored exactly symmetrized."""

    a: np.ndarray

    def __post_init__(self):
        S = _as_spd(np.asarray(self.a, dtype=float), name="SpdMatrix")
        S.setflags(write=False)
        object.__setattr__(self, "a", S)

    @property
    def dim(self) -> int:
        return self.a.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.a, dtype=dtype)


def spd_sqrt(M) -> np.ndarray:
    """Symmetric positive-definite square root S with S @ S = M."""
    S = _as_spd(M, "spd_sqrt")
    w, V = _eigh(S, "spd_sqrt")
    return sym((V * np.sqrt(w)) @ V.T)


def psd_sqrt(M) -> np.ndarray:
    """Square root of a positive-semidefinite matrix, eigenvalues clamped at 0."""
    S = sym(_check_square(M, "psd_sqrt"))
    w, V = _eigh(S, "psd_sqrt")
    return sym((V * np.sqrt(np.clip(w, 0.0, None))) @ V.T)


def spd_log(M) -> np.ndarray:
    """Matrix logarithm of an SPD matrix via orthogonal eigendecomposition.

    The result is exactly symmetric and satisfies expm(result) = M up to
    ROUNDTRIP_RTOL.
    """
    S = _as_spd(M, "spd_log")
    w, V = _eigh(S, "spd_log")
    return sym((V * np.log(w)) @ V.T)


def riemannian_distance(Y, Z) -> float:
    """Affine-invariant Riemannian distance sqrt(sum log^2 eig(Y Z^{-1})).

    The eigenvalues are computed from the symmetric congruence
    L^{-1} Y L^{-T} with Z = L L', which has the same spectrum as Y Z^{-1}
    but stays in real symmetric arithmetic.
    """
    Ys = _as_spd(Y, "riemannian_distance: Y")
    Zs = _as_spd(Z, "riemannian_distance: Z")
    if Ys.shape != Zs.shape:
        raise InputError(
            f"riemannian_distance: dimension mismatch {Ys.shape} vs {Zs.shape}"
        )
    try:
        L = scipy.linalg.cholesky(Zs, lower=True)
    except scipy.linalg.LinAlgError as exc:
        raise NumericalError(f"riemannian_distance: Cholesky of Z failed: {exc}") from exc
    W = scipy.linalg.solve_triangular(L, Ys, lower=True)
    W = scipy.linalg.solve_triangular(L, W.T, lower=True).T
    w = np.linalg.eigvalsh(sym(W))
    if w[0] <= 0.0:
        raise NumericalError(
            f"riemannian_distance: congruence has non-positive eigenvalue "
            f"{w[0]:.6e}; conditioning failure"
        )
    return float(np.sqrt(np.sum(np.log(w) ** 2)))


def spd_gap_bound(Y, Z, psd_rtol: float = PSD_RTOL) -> float:
    """Upper bound ||Z||_2 (exp(delta(Y, Z)) - 1) on ||Y - Z||_2 for Y >= Z.

    Requires the ordering Y >= Z up to psd_rtol relative slack.
    """
    Ys = _as_spd(Y, "spd_gap_bound: Y")
    Zs = _as_spd(Z, "spd_gap_bound: Z")
    if Ys.shape != Zs.shape:
        raise InputError(f"spd_gap_bound: dimension mismatch {Ys.shape} vs {Zs.shape}")
    scale = max(norm2(Ys), norm2(Zs), np.finfo(float).tiny)
    gap_min = lamin(Ys - Zs)
    if gap_min < -psd_rtol * scale:
        raise InputError(
            f"spd_gap_bound: ordering Y >= Z violated, lambda_min(Y - Z) = {gap_min:.6e}"
        )
    return norm2(Zs) * float(np.expm1(riemannian_distance(Ys, Zs)))
