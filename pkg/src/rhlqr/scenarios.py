"""Deterministic scenario generation for tests, demos, and verification."""

from __future__ import annotations

import numpy as np

from .errors import InputError
from .lifting import ProblemData

KINDS = ("time-invariant-random", "periodic-random", "scalar-unit")


def _random_system(rng: np.random.Generator, n: int, m: int):
    """One random step: normal A with |eigenvalues| in [0.5, 1.5], dense B,
    and SPD cost weights with a 0.1 I floor."""
    raw = rng.normal(size=(n, n))
    U, _ = np.linalg.qr(raw)
    eigs = rng.uniform(0.5, 1.5, size=n) * rng.choice([-1.0, 1.0], size=n)
    A = U @ np.diag(eigs) @ U.T
    B = rng.normal(size=(n, m))
    G = rng.normal(size=(n, n))
    Q = G.T @ G + 0.1 * np.eye(n)
    H = rng.normal(size=(m, m))
    R = H.T @ H + 0.1 * np.eye(m)
    return A, B, Q, R


def generate_scenario(
    kind: str, n: int = 2, m: int = 1, period: int = 1, seed: int = 0
) -> ProblemData:
    """Generate a ProblemData instance; identical seeds give identical data."""
    if kind not in KINDS:
        raise InputError(f"unknown scenario kind {kind!r}; choose from {KINDS}")
    if kind == "scalar-unit":
        one = np.ones((1, 1, 1))
        return ProblemData(
            A=one, B=one, Q=one, R=one, periodic=True, name="scalar-unit"
        )
    if n < 1 or m < 1 or period < 1:
        raise InputError(f"invalid scenario dimensions n={n}, m={m}, period={period}")
    rng = np.random.default_rng(seed)
    count = 1 if kind == "time-invariant-random" else period
    A = np.empty((count, n, n))
    B = np.empty((count, n, m))
    Q = np.empty((count, n, n))
    R = np.empty((count, m, m))
    for k in range(count):
        A[k], B[k], Q[k], R[k] = _random_system(rng, n, m)
    return ProblemData(
        A=A,
        B=B,
        Q=Q,
        R=R,
        periodic=True,
        name=f"{kind} n={n} m={m} period={count} seed={seed}",
    )
