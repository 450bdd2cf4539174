import numpy as np
import pytest

from rhlqr import (
    InputError,
    MarginViolation,
    NoUniformDepth,
    ProblemData,
    controllability_matrix,
    find_min_d,
    lift,
    lifting_intermediates,
    observability_matrix,
    state_transition,
)
from rhlqr.spd import lamin, norm2

from conftest import random_problem


def chain_integrator() -> ProblemData:
    """Single-integrator chain: controllable only over two steps."""
    A = np.array([[[1.0, 1.0], [0.0, 1.0]]])
    B = np.array([[[0.0], [1.0]]])
    Q = np.eye(2)[None]
    R = np.eye(1)[None]
    return ProblemData(A=A, B=B, Q=Q, R=R, periodic=True)


class TestProblemData:
    def test_validates_shapes(self):
        with pytest.raises(InputError, match="B"):
            ProblemData(
                A=np.eye(2)[None],
                B=np.ones((1, 3, 1)),
                Q=np.eye(2)[None],
                R=np.eye(1)[None],
            )

    def test_rejects_indefinite_q(self):
        with pytest.raises(InputError, match=r"Q\[0\]"):
            ProblemData(
                A=np.eye(2)[None],
                B=np.ones((1, 2, 1)),
                Q=-np.eye(2)[None],
                R=np.eye(1)[None],
            )

    def test_rejects_singular_r(self):
        with pytest.raises(InputError, match=r"R\[0\]"):
            ProblemData(
                A=np.eye(2)[None],
                B=np.ones((1, 2, 1)),
                Q=np.eye(2)[None],
                R=np.zeros((1, 1, 1)),
            )

    def test_rejects_singular_a(self):
        with pytest.raises(InputError, match=r"A\[0\]"):
            ProblemData(
                A=np.zeros((1, 2, 2)),
                B=np.ones((1, 2, 1)),
                Q=np.eye(2)[None],
                R=np.eye(1)[None],
            )

    def test_rejects_nan(self):
        A = np.eye(2)[None].copy()
        A[0, 0, 0] = np.nan
        with pytest.raises(InputError, match="finite"):
            ProblemData(A=A, B=np.ones((1, 2, 1)), Q=np.eye(2)[None], R=np.eye(1)[None])

    def test_periodic_indexing_wraps(self):
        pd = random_problem(0, n=2, m=1, period=3)
        assert np.array_equal(pd.A_at(5), pd.A_at(2))

    def test_window_indexing_bounds(self):
        pd = random_problem(0, n=2, m=1, period=3)
        win = ProblemData(A=pd.A, B=pd.B, Q=pd.Q, R=pd.R, periodic=False)
        with pytest.raises(InputError, match="window"):
            win.A_at(3)


class TestStateTransition:
    def test_depth_zero_is_identity(self):
        pd = random_problem(1, n=3, m=2, period=2)
        assert np.array_equal(state_transition(pd, 1, 0), np.eye(3))

    def test_time_invariant_power(self):
        pd = random_problem(2, n=3, m=1, period=1)
        A = pd.A[0]
        assert np.allclose(state_transition(pd, 0, 3), A @ A @ A, atol=1e-12)

    def test_matches_product_oracle(self):
        pd = random_problem(3, n=2, m=1, period=5)
        expected = pd.A_at(3) @ pd.A_at(2)
        assert np.allclose(state_transition(pd, 2, 2), expected, atol=1e-13)


class TestRankMatrices:
    def test_controllability_depth_one_is_b(self):
        pd = random_problem(4, n=2, m=2, period=2)
        assert np.array_equal(controllability_matrix(pd, 1, 1), pd.B_at(1))

    def test_observability_first_block_identity(self):
        pd = chain_integrator()
        O = observability_matrix(pd, 0, 2)
        assert np.allclose(O[:2], np.eye(2), atol=1e-12)

    def test_rank_matches_svd_oracle(self):
        pd = random_problem(5, n=2, m=1, period=3)
        C = controllability_matrix(pd, 0, 2)
        brute = np.hstack([pd.A_at(1) @ pd.B_at(0), pd.B_at(1)])
        assert np.allclose(C, brute, atol=1e-12)
        assert np.linalg.matrix_rank(C) == np.linalg.matrix_rank(brute)


class TestFindMinD:
    def test_fully_actuated_gives_one(self):
        rng = np.random.default_rng(8)
        B = rng.normal(size=(2, 2)) + 3.0 * np.eye(2)
        pd = ProblemData(
            A=np.eye(2)[None] * 0.9,
            B=B[None],
            Q=np.eye(2)[None],
            R=np.eye(2)[None],
        )
        assert find_min_d(pd, 3) == 1

    def test_chain_needs_two(self):
        assert find_min_d(chain_integrator(), 4) == 2

    def test_uncontrollable_raises(self):
        pd = ProblemData(
            A=np.eye(2)[None],
            B=np.zeros((1, 2, 1)),
            Q=np.eye(2)[None],
            R=np.eye(1)[None],
        )
        with pytest.raises(NoUniformDepth):
            find_min_d(pd, 4)


class TestLift:
    def test_depth_one_identity(self):
        # depth 1 requires at least as many inputs as states for full row rank
        for seed in range(5):
            pd = random_problem(seed, n=2, m=2 + seed % 2, period=2)
            lp = lift(pd, 1)
            for t in range(2):
                assert np.allclose(lp.A_at(t), pd.A_at(t), atol=1e-10)
                assert np.allclose(lp.B_at(t), pd.B_at(t), atol=1e-10)
                assert np.allclose(lp.Q_at(t), pd.Q_at(t), atol=1e-10)
                assert np.allclose(lp.R_at(t), pd.R_at(t), atol=1e-10)
                assert np.allclose(lp.corr_at(t), 0.0, atol=1e-12)

    def test_scalar_unit_all_ones(self, scalar_lp):
        for arr in (scalar_lp.A, scalar_lp.B, scalar_lp.Q, scalar_lp.R):
            assert np.allclose(arr, 1.0, atol=1e-14)

    def test_lifted_invariants(self):
        pd = random_problem(9, n=2, m=1, period=4)
        lp = lift(pd, 2)
        assert lp.period == 2
        for t in range(lp.period):
            assert lamin(lp.Q_at(t)) > 0
            assert np.linalg.matrix_rank(lp.B_at(t)) == lp.n
            # the Delta' Delta term only adds to the input weight
            R_diag = np.block(
                [
                    [pd.R_at(2 * t), np.zeros((1, 1))],
                    [np.zeros((1, 1)), pd.R_at(2 * t + 1)],
                ]
            )
            assert lamin(lp.R_at(t) - R_diag) >= -1e-10 * norm2(lp.R_at(t))

    def test_transition_crosscheck(self):
        pd = random_problem(10, n=2, m=1, period=2)
        li = lifting_intermediates(pd, 2, 1)
        assert np.allclose(li.trans, state_transition(pd, 2, 2), atol=1e-12)
        # stacked matrix is unit lower block triangular
        assert np.allclose(np.triu(li.ahat, 1), 0.0, atol=1e-14)
        assert np.allclose(np.diag(li.ahat), 1.0, atol=1e-14)

    def test_intermediates_match_explicit_inverse(self):
        pd = random_problem(11, n=2, m=2, period=3)
        d = 3
        li = lifting_intermediates(pd, d, 0)
        Ainv = np.linalg.inv(li.ahat)
        n = pd.n
        last = np.zeros((n, n * (d + 1)))
        last[:, -n:] = np.eye(n)
        first = np.zeros((n * (d + 1), n))
        first[:n] = np.eye(n)
        assert np.allclose(last @ Ainv @ first, li.trans, atol=1e-10)
        assert np.allclose(last @ Ainv @ li.bhat, li.input_map, atol=1e-10)
        assert np.allclose(li.chat @ Ainv @ first, li.obs_free, atol=1e-10)
        assert np.allclose(li.chat @ Ainv @ li.bhat, li.obs_forced, atol=1e-10)

    def test_period_not_divisible_extends(self):
        pd = random_problem(12, n=2, m=2, period=3)
        lp = lift(pd, 2)
        assert lp.period == 3  # lcm(3, 2) / 2
        assert lp.base.count == 6

    def test_window_discards_partial_block(self):
        pd = random_problem(13, n=2, m=2, period=5)
        win = ProblemData(A=pd.A, B=pd.B, Q=pd.Q, R=pd.R, periodic=False)
        with pytest.warns(UserWarning, match="partial block"):
            lp = lift(win, 2)
        assert lp.period == 2

    def test_margin_violation(self):
        # B = 0 passes data validation but cannot be lifted at any depth
        pd = ProblemData(
            A=np.eye(2)[None] * 0.5,
            B=np.zeros((1, 2, 1)),
            Q=np.eye(2)[None],
            R=np.eye(1)[None],
        )
        with pytest.raises(MarginViolation):
            lift(pd, 1)
