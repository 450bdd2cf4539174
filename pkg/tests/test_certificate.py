import math

import numpy as np
import pytest

from rhlqr import (
    CertificationError,
    InputError,
    ProblemData,
    build_certificate,
    candidate_distance_bound,
    corollary_horizon,
    horizon_for_tolerance,
    lift,
    penalty_sequence,
    riccati_apply,
    riemannian_distance,
    solve_infinite_horizon,
    terminal_candidate,
)
from rhlqr.spd import lamin, norm2

from conftest import lifted_random, random_problem


class TestTerminalCandidate:
    def test_scalar_value(self, scalar_lp):
        assert abs(terminal_candidate(scalar_lp, 0)[0, 0] - 2.0) < 1e-14

    def test_fully_actuated_hand_formula(self):
        # d = 1, B square invertible, Q = R = I: with R = I the middle factor
        # collapses to I + A'(BB')^{-1} (BB') (BB')^{-1} A, evaluated by hand
        rng = np.random.default_rng(0)
        A = rng.normal(size=(2, 2)) + 2.0 * np.eye(2)
        B = rng.normal(size=(2, 2)) + 3.0 * np.eye(2)
        pd = ProblemData(
            A=A[None], B=B[None], Q=np.eye(2)[None], R=np.eye(2)[None]
        )
        lp = lift(pd, 1)
        S_inv = np.linalg.inv(B @ B.T)
        hand = np.eye(2) + A.T @ S_inv @ (B @ B.T) @ S_inv @ A
        assert np.allclose(terminal_candidate(lp, 0), hand, atol=1e-10)

    def test_candidates_satisfy_decrease(self):
        for seed in range(5):
            lp = lifted_random(seed, n=2, m=1, period=3)
            for t in range(lp.period):
                gap = terminal_candidate(lp, t) - riccati_apply(
                    lp, t, terminal_candidate(lp, t + 1)
                )
                assert lamin(gap) >= -1e-9 * max(1.0, norm2(gap))


class TestPenaltySequence:
    def test_horizon_one_is_candidates(self, scalar_lp):
        pen = penalty_sequence(scalar_lp, 1)
        assert np.allclose(pen.at(0), terminal_candidate(scalar_lp, 0))

    def test_scalar_horizon_three(self, scalar_lp):
        # pushing 2 through two backward steps: 5/3 then 13/8
        pen = penalty_sequence(scalar_lp, 3)
        assert abs(pen.at(0)[0, 0] - 13.0 / 8.0) < 1e-12

    def test_approaches_optimal_values(self):
        lp = lifted_random(1, n=2, m=1, period=2)
        ra = solve_infinite_horizon(lp, (0, lp.period), tol_delta=1e-10)
        d_short = max(
            riemannian_distance(penalty_sequence(lp, 2).at(t), ra.at(t))
            for t in range(lp.period)
        )
        d_long = max(
            riemannian_distance(penalty_sequence(lp, 6).at(t), ra.at(t))
            for t in range(lp.period)
        )
        assert d_long < d_short

    def test_stability_condition(self):
        for seed in range(5):
            lp = lifted_random(seed, n=2, m=1, period=2)
            for T in (1, 2, 4):
                pen = penalty_sequence(lp, T)
                for t in range(lp.period):
                    gap = pen.at(t) - riccati_apply(lp, t, pen.at(t + 1))
                    assert lamin(gap) >= -1e-9 * max(1.0, norm2(pen.at(t)))


class TestDistanceBound:
    def test_scalar_log_two(self, scalar_lp):
        assert abs(candidate_distance_bound(scalar_lp) - math.log(2.0)) < 1e-13

    def test_log_arithmetic_of_scaling(self):
        # fixed numerator, weight floor scaled by 4: bound drops by sqrt(n) log 4
        n, x_sup, q_lo = 3, 7.0, 0.5
        before = math.sqrt(n) * math.log(x_sup / q_lo)
        after = math.sqrt(n) * math.log(x_sup / (4.0 * q_lo))
        assert abs(before - after - math.sqrt(n) * math.log(4.0)) < 1e-14

    def test_bounds_actual_distance(self):
        for seed in range(5):
            lp = lifted_random(seed, n=2, m=1, period=2)
            ra = solve_infinite_horizon(lp, (0, lp.period), tol_delta=1e-10)
            db = candidate_distance_bound(lp)
            for t in range(lp.period):
                actual = riemannian_distance(terminal_candidate(lp, t), ra.at(t))
                assert actual <= db + ra.trunc_err + 1e-9


class TestBuildCertificate:
    def test_scalar_worked_values(self, scalar_lp):
        cert = build_certificate(scalar_lp, 1)
        assert abs(cert.value_sup - 5.0 / 3.0) < 1e-12
        assert abs(cert.value_inf - 5.0 / 3.0) < 1e-12
        assert abs(cert.decrease_inf - 13.0 / 9.0) < 1e-12
        assert abs(cert.opt_sup - 2.0) < 1e-12
        assert abs(cert.beta_bound - 30.0 / 13.0) < 1e-10
        assert cert.mode == "exact-periodic"

    def test_beta_bound_decreases_with_horizon(self, scalar_lp):
        bounds = [build_certificate(scalar_lp, T).beta_bound for T in range(1, 11)]
        assert all(b2 < b1 for b1, b2 in zip(bounds, bounds[1:]))

    def test_random_invariants(self):
        for seed in range(5):
            lp = lifted_random(seed, n=3, m=2, period=2)
            cert = build_certificate(lp, 3)
            assert 0.0 < cert.value_inf <= cert.value_sup * (1 + 1e-9)
            assert 0.0 < cert.decrease_inf <= cert.value_sup * (1 + 1e-9)
            assert cert.rho_bar < 1.0
            assert 0.0 <= cert.env_decay < 1.0
            assert cert.beta_bound > 0.0

    def test_domination_check_passes(self):
        lp = lifted_random(3, n=2, m=1, period=2)
        ra = solve_infinite_horizon(lp, (0, lp.period), tol_delta=1e-10)
        build_certificate(lp, 2, ra=ra)  # must not raise


class TestCorollaryHorizon:
    def test_worked_example(self):
        # value_sup = opt_sup = 2, value_inf = decrease_inf = 1, dist bound 1,
        # contraction 1/2, tolerance 0.1: inner log(1.0125) ~ 0.012422 gives 8
        assert corollary_horizon(2.0, 1.0, 1.0, 2.0, 1.0, 0.5, 0.1) == 8

    def test_huge_tolerance_clamps_to_one(self):
        assert corollary_horizon(2.0, 1.0, 1.0, 2.0, 1.0, 0.5, 1e9) == 1

    def test_monotone_in_tolerance(self):
        prev = 1
        for beta in (10.0, 1.0, 0.1, 0.01, 0.001):
            T = corollary_horizon(2.0, 1.0, 1.0, 2.0, 1.0, 0.5, beta)
            assert T >= prev
            prev = T

    def test_rejects_nonpositive_tolerance(self):
        with pytest.raises(InputError):
            corollary_horizon(2.0, 1.0, 1.0, 2.0, 1.0, 0.5, 0.0)


class TestHorizonForTolerance:
    def test_scalar_certifies_tolerance(self, scalar_lp):
        T, cert = horizon_for_tolerance(scalar_lp, 0.05)
        assert T >= 1
        assert cert.beta_bound <= 0.05

    def test_random_certifies_tolerance(self):
        for seed in range(3):
            lp = lifted_random(seed, n=2, m=1, period=2)
            T, cert = horizon_for_tolerance(lp, 0.5)
            assert cert.beta_bound <= 0.5
            assert cert.horizon == T

    def test_unreachable_tolerance_raises(self, scalar_lp):
        with pytest.raises(CertificationError):
            horizon_for_tolerance(scalar_lp, 1e-9, t_max=2)
