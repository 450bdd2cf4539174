import numpy as np
import pytest

from rhlqr import (
    ProblemData,
    contraction_constants,
    lift,
    riccati_apply,
    riccati_compose,
    riemannian_distance,
    solve_infinite_horizon,
    terminal_candidate,
)
from rhlqr.spd import lamin, norm2

from conftest import PHI, lifted_random, rand_spd, rand_spd_pair_ordered, random_problem


def scalar_riccati(p: float) -> float:
    """Closed form of the scalar-unit backward step: 1 + p / (1 + p)."""
    return 1.0 + p / (1.0 + p)


class TestApply:
    def test_zero_argument_returns_q(self, scalar_lp):
        assert np.allclose(riccati_apply(scalar_lp, 0, 0), 1.0, atol=1e-14)
        lp = lifted_random(0, n=2, m=1, period=2)
        assert np.allclose(riccati_apply(lp, 1, None), lp.Q_at(1), atol=1e-13)

    def test_scalar_fixed_point(self, scalar_lp):
        # fixed-point iteration oracle for the root of p^2 - p - 1 = 0
        p = 1.0
        for _ in range(120):
            p = scalar_riccati(p)
        X = np.array([[1.0]])
        for _ in range(120):
            X = riccati_apply(scalar_lp, 0, X)
        assert abs(X[0, 0] - p) < 1e-14
        assert abs(X[0, 0] - PHI) < 1e-12

    def test_monotone_in_argument(self):
        rng = np.random.default_rng(1)
        lp = lifted_random(2, n=3, m=2, period=2)
        for _ in range(20):
            t = int(rng.integers(0, lp.period))
            X, P = rand_spd_pair_ordered(rng, 3)
            gap = riccati_apply(lp, t, X) - riccati_apply(lp, t, P)
            assert lamin(gap) >= -1e-9 * max(1.0, norm2(gap))

    def test_lower_bound_by_q(self):
        rng = np.random.default_rng(2)
        lp = lifted_random(3, n=2, m=1, period=3)
        for _ in range(20):
            t = int(rng.integers(0, lp.period))
            P = rand_spd(rng, 2, floor=0.0)  # may be singular
            out = riccati_apply(lp, t, P)
            assert lamin(out) >= lamin(lp.Q_at(t)) - 1e-9

    def test_upper_bound_by_candidate(self):
        rng = np.random.default_rng(3)
        lp = lifted_random(4, n=2, m=2, period=2)
        for _ in range(20):
            t = int(rng.integers(0, lp.period))
            X = rand_spd(rng, 2)
            gap = terminal_candidate(lp, t) - riccati_apply(lp, t, X)
            assert lamin(gap) >= -1e-8 * max(1.0, norm2(gap))

    def test_factored_branch_matches_direct(self, monkeypatch):
        import rhlqr.riccati as rmod

        lp = lifted_random(5, n=3, m=1, period=1)
        rng = np.random.default_rng(4)
        P = rand_spd(rng, 3)
        direct = riccati_apply(lp, 0, P)
        monkeypatch.setattr(rmod, "NEAR_SINGULAR_RTOL", np.inf)  # force factored path
        factored = riccati_apply(lp, 0, P)
        assert np.allclose(direct, factored, atol=1e-10 * norm2(direct))

    def test_value_gap_lipschitz(self):
        # one-step value gap bounded by ||P|| |chi|^2 (e^delta - 1)
        rng = np.random.default_rng(5)
        lp = lifted_random(6, n=2, m=1, period=2)
        for _ in range(30):
            t = int(rng.integers(0, lp.period))
            X, P = rand_spd_pair_ordered(rng, 2)
            chi = rng.normal(size=2)
            lhs = chi @ (riccati_apply(lp, t, X) - riccati_apply(lp, t, P)) @ chi
            rhs = (
                norm2(P)
                * float(chi @ chi)
                * np.expm1(riemannian_distance(X, P))
            )
            assert lhs <= rhs + 1e-8


class TestCompose:
    def test_single_step(self, scalar_lp):
        X = np.array([[2.0]])
        assert np.allclose(
            riccati_compose(scalar_lp, 0, X, 1), riccati_apply(scalar_lp, 0, X)
        )

    def test_fixed_point_invariance(self, scalar_lp):
        X = np.array([[PHI]])
        for T in (1, 3, 7):
            assert abs(riccati_compose(scalar_lp, 0, X, T)[0, 0] - PHI) < 1e-12


class TestContraction:
    def test_scalar_constants(self, scalar_lp):
        cc = contraction_constants(scalar_lp)
        assert abs(cc.zeta[0] - 0.5) < 1e-12
        assert abs(cc.eps[0] - 0.5) < 1e-12
        assert abs(cc.rho[0] - 0.5) < 1e-12
        assert abs(cc.rho_bar - 0.5) < 1e-12

    def test_zeta_decreases_with_larger_q(self):
        ones = np.ones((1, 1, 1))
        lp1 = lift(ProblemData(A=ones, B=ones, Q=ones, R=ones), 1)
        lp4 = lift(ProblemData(A=ones, B=ones, Q=4.0 * ones, R=ones), 1)
        assert contraction_constants(lp4).zeta[0] < contraction_constants(lp1).zeta[0]

    def test_contraction_inequality(self):
        rng = np.random.default_rng(6)
        for seed in range(10):
            lp = lifted_random(seed, n=2, m=1, period=2)
            cc = contraction_constants(lp)
            assert cc.rho_bar < 1.0
            for _ in range(10):
                t = int(rng.integers(0, lp.period))
                Y, Z = rand_spd(rng, 2), rand_spd(rng, 2)
                lhs = riemannian_distance(
                    riccati_apply(lp, t, Y), riccati_apply(lp, t, Z)
                )
                assert lhs <= cc.rho[t] * riemannian_distance(Y, Z) + 1e-8


class TestInfiniteHorizon:
    def test_scalar_golden_ratio(self, scalar_lp):
        ra = solve_infinite_horizon(scalar_lp, (0, 0), tol_delta=1e-9)
        assert abs(ra.at(0)[0, 0] - PHI) < 1e-9
        assert ra.trunc_err <= 1e-9

    def test_backward_consistency(self):
        lp = lifted_random(7, n=2, m=1, period=3)
        ra = solve_infinite_horizon(lp, (0, lp.period), tol_delta=1e-10)
        for t in range(ra.t0, ra.t1):
            gap = norm2(riccati_apply(lp, t, ra.at(t + 1)) - ra.at(t))
            assert gap <= 1e-10 * max(1.0, norm2(ra.at(t)))

    def test_periodic_consistency(self):
        lp = lift(random_problem(8, n=2, m=1, period=4), 2)
        ra = solve_infinite_horizon(lp, (0, lp.period), tol_delta=1e-11)
        spectral_gap = norm2(ra.at(0)) * np.expm1(2.0 * ra.trunc_err)
        assert norm2(ra.at(0) - ra.at(lp.period)) <= spectral_gap + 1e-12

    def test_time_invariant_matches_long_iteration(self):
        lp = lifted_random(9, n=3, m=2, period=1)
        ra = solve_infinite_horizon(lp, (0, 0), tol_delta=1e-10)
        # independent oracle: plain textbook iteration written out locally
        A, B, Q, R = lp.A_at(0), lp.B_at(0), lp.Q_at(0), lp.R_at(0)
        P = Q.copy()
        for _ in range(20000):
            M = R + B.T @ P @ B
            K = np.linalg.solve(M, B.T @ P @ A)
            P_next = Q + A.T @ P @ A - A.T @ P @ B @ K
            P_next = 0.5 * (P_next + P_next.T)
            if np.max(np.abs(P_next - P)) < 1e-14:
                P = P_next
                break
            P = P_next
        assert norm2(ra.at(0) - P) <= 1e-7 * norm2(P)

    def test_lower_bound_invariant(self):
        lp = lifted_random(10, n=2, m=1, period=2)
        ra = solve_infinite_horizon(lp, (0, lp.period), tol_delta=1e-9)
        for t in range(ra.t0, ra.t1 + 1):
            assert lamin(ra.at(t)) >= lamin(lp.Q_at(t)) - 1e-9

    def test_rejects_bad_tolerance(self, scalar_lp):
        with pytest.raises(Exception):
            solve_infinite_horizon(scalar_lp, (0, 0), tol_delta=0.0)
