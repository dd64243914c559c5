import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from capnet import matlin
from oracles import (nearest_in_ball_grid, projection_via_slsqp,
                     singular_values_via_gram)

small_matrices = arrays(
    np.float64, st.tuples(st.integers(1, 5), st.integers(1, 5)),
    elements=st.floats(-10, 10, allow_nan=False),
)


class TestSvd:
    def test_identity(self):
        r = matlin.svd(np.eye(3))
        np.testing.assert_allclose(r.singular, [1, 1, 1], atol=1e-14)

    def test_diagonal(self):
        r = matlin.svd(np.diag([5.0, 3.0, 1.0]))
        np.testing.assert_allclose(r.singular, [5, 3, 1], atol=1e-14)
        # left and right agree with the identity up to per-column signs
        signs = np.sign(np.diag(r.left))
        np.testing.assert_allclose(r.left * signs, np.eye(3), atol=1e-14)
        np.testing.assert_allclose(r.right * signs, np.eye(3), atol=1e-14)

    def test_matches_gram_eigenvalue_oracle(self):
        rng = np.random.default_rng(42)
        w = rng.standard_normal((4, 4))
        np.testing.assert_allclose(
            matlin.svd(w).singular, singular_values_via_gram(w), atol=1e-8)

    def test_invariants_random(self, rng):
        for _ in range(25):
            w = rng.standard_normal((rng.integers(1, 7), rng.integers(1, 7)))
            r = matlin.svd(w)
            assert np.all(np.diff(r.singular) <= 1e-12)
            assert np.all(r.singular >= 0)
            scale = max(1.0, float(np.linalg.norm(w)))
            assert np.linalg.norm(r.reconstruct() - w) <= 1e-10 * scale
            for q in (r.left, r.right):
                assert np.abs(q.T @ q - np.eye(q.shape[1])).max() <= 1e-10

    def test_rejects_nonfinite_and_oversize(self):
        with pytest.raises(ValueError):
            matlin.svd(np.array([[np.nan, 1.0]]))
        with pytest.raises(ValueError):
            matlin.svd(np.zeros((1, matlin.MAX_SIDE + 1)))

    def test_deterministic(self, rng):
        w = rng.standard_normal((6, 4))
        a, b = matlin.svd(w), matlin.svd(w.copy())
        assert np.array_equal(a.left, b.left)
        assert np.array_equal(a.singular, b.singular)
        assert np.array_equal(a.right, b.right)


class TestMatrixNorm:
    def test_diagonal_examples(self):
        w = np.diag([3.0, 4.0])
        assert matlin.matrix_norm(w, matlin.SPECTRAL) == pytest.approx(4.0)
        assert matlin.matrix_norm(w, matlin.FROBENIUS) == pytest.approx(5.0)
        assert matlin.matrix_norm(w, matlin.schatten(1)) == pytest.approx(7.0)

    def test_identity_schatten(self):
        assert matlin.matrix_norm(np.eye(4), matlin.schatten(2)) == pytest.approx(2.0)
        for p in (1.0, 3.0, 8.0):
            assert matlin.matrix_norm(np.eye(4), matlin.schatten(p)) == \
                pytest.approx(4.0 ** (1.0 / p))

    def test_row_norms(self):
        w = np.array([[1.0, -2.0], [3.0, 0.5]])
        assert matlin.matrix_norm(w, matlin.ROWS_L1_MAX) == pytest.approx(3.5)
        assert matlin.matrix_norm(w, matlin.ROWS_L2_SUM) == \
            pytest.approx(math.sqrt(5.0) + math.sqrt(9.25))

    def test_schatten3_matches_gram_oracle(self):
        rng = np.random.default_rng(99)
        w = rng.standard_normal((5, 3))
        s = singular_values_via_gram(w)
        expected = (s ** 3).sum() ** (1.0 / 3.0)
        assert matlin.matrix_norm(w, matlin.schatten(3)) == pytest.approx(expected, abs=1e-9)

    def test_schatten2_equals_frobenius(self, rng):
        for _ in range(20):
            w = rng.standard_normal((rng.integers(1, 8), rng.integers(1, 8)))
            f = matlin.matrix_norm(w, matlin.FROBENIUS)
            assert matlin.matrix_norm(w, matlin.schatten(2)) == pytest.approx(f, rel=1e-12)

    def test_parameter_domain(self):
        with pytest.raises(ValueError):
            matlin.schatten(0.5)
        with pytest.raises(ValueError, match="SPECTRAL"):
            matlin.schatten(100.0)
        assert matlin.schatten(math.inf) == matlin.SPECTRAL

    @settings(max_examples=40, deadline=None)
    @given(small_matrices)
    def test_schatten_chain_monotone(self, w):
        if not w.any():
            return
        vals = [matlin.matrix_norm(w, matlin.schatten(p)) for p in (1, 1.5, 2, 4, 16)]
        vals.append(matlin.matrix_norm(w, matlin.SPECTRAL))
        for a, b in zip(vals, vals[1:]):
            assert a >= b - 1e-10

    @settings(max_examples=40, deadline=None)
    @given(small_matrices)
    def test_row_sum_dominance_chain(self, w):
        spec = matlin.matrix_norm(w, matlin.SPECTRAL)
        frob = matlin.matrix_norm(w, matlin.FROBENIUS)
        tr = matlin.matrix_norm(w, matlin.schatten(1))
        r21 = matlin.matrix_norm(w, matlin.ROWS_L2_SUM)
        assert spec <= frob + 1e-10
        assert frob <= tr + 1e-10
        assert r21 >= frob - 1e-10

    def test_unitary_invariance(self, rng):
        for _ in range(10):
            w = rng.standard_normal((5, 4))
            q, _ = np.linalg.qr(rng.standard_normal((5, 5)))
            u, _ = np.linalg.qr(rng.standard_normal((4, 4)))
            for p in (1.0, 2.0, 7.0):
                a = matlin.matrix_norm(w, matlin.schatten(p))
                b = matlin.matrix_norm(q @ w @ u, matlin.schatten(p))
                assert b == pytest.approx(a, rel=1e-8)


class TestRank1Approx:
    def test_diagonal_example_and_lemma_bound(self):
        w = np.diag([5.0, 3.0, 1.0])
        approx, err = matlin.rank1_approx(w)
        np.testing.assert_allclose(approx, np.diag([5.0, 0.0, 0.0]), atol=1e-12)
        assert err == pytest.approx(3.0)
        # p = 2 error cap: (25 + 9 + 1 - 25)^(1/2) = sqrt(10)
        cap = (matlin.matrix_norm(w, matlin.schatten(2)) ** 2
               - matlin.matrix_norm(w, matlin.SPECTRAL) ** 2) ** 0.5
        assert cap == pytest.approx(math.sqrt(10.0))
        assert err <= cap

    def test_rank1_input(self, rng):
        w = np.outer(rng.standard_normal(4), rng.standard_normal(3))
        approx, err = matlin.rank1_approx(w)
        np.testing.assert_allclose(approx, w, atol=1e-12 * np.abs(w).max())
        assert err <= 1e-12 * matlin.matrix_norm(w, matlin.SPECTRAL)

    def test_zero_matrix(self):
        approx, err = matlin.rank1_approx(np.zeros((2, 3)))
        assert err == 0.0 and not approx.any()

    def test_error_equals_second_singular_value(self):
        rng = np.random.default_rng(7)
        w = rng.standard_normal((4, 4))
        _, err = matlin.rank1_approx(w)
        assert err == pytest.approx(singular_values_via_gram(w)[1], abs=1e-9)

    def test_norm_nonexpansion_and_error_caps(self, rng):
        for _ in range(30):
            w = rng.standard_normal((rng.integers(2, 7), rng.integers(2, 7)))
            approx, err = matlin.rank1_approx(w)
            for kind in (matlin.SPECTRAL, matlin.schatten(1), matlin.schatten(2),
                         matlin.schatten(4)):
                assert matlin.matrix_norm(approx, kind) <= \
                    matlin.matrix_norm(w, kind) * (1 + 1e-12)
            spec = matlin.matrix_norm(w, matlin.SPECTRAL)
            for p in (1.0, 2.0, 4.0):
                cap = (matlin.matrix_norm(w, matlin.schatten(p)) ** p - spec ** p)
                assert err <= max(cap, 0.0) ** (1.0 / p) + 1e-9


class TestProjection:
    def test_frobenius_uniform_scaling(self, rng):
        w = rng.standard_normal((3, 4))
        w *= 10.0 / np.linalg.norm(w)
        out = matlin.project_to_ball(w, matlin.BallConstraint(matlin.FROBENIUS, 5.0))
        np.testing.assert_allclose(out, 0.5 * w, rtol=1e-14)

    def test_spectral_clipping(self):
        out = matlin.project_to_ball(
            np.diag([5.0, 3.0]), matlin.BallConstraint(matlin.SPECTRAL, 4.0))
        np.testing.assert_allclose(out, np.diag([4.0, 3.0]), atol=1e-12)

    def test_trace_ball_example_with_grid_oracle(self):
        c = matlin.BallConstraint(matlin.schatten(1), 2.0)
        w = np.diag([3.0, 1.0])
        out = matlin.project_to_ball(w, c)
        np.testing.assert_allclose(out, np.diag([2.0, 0.0]), atol=1e-10)
        # distance-minimality against a dense grid over the feasible set
        oracle = nearest_in_ball_grid(
            np.array([3.0, 1.0]), lambda v: np.abs(v).sum(), 2.0, -0.5, 3.0, steps=141)
        assert np.linalg.norm(out - w) <= oracle + 1e-8

    def test_inside_ball_returned_unchanged(self, rng):
        w = rng.standard_normal((3, 3)) * 0.1
        for c in (matlin.BallConstraint(matlin.FROBENIUS, 10.0),
                  matlin.BallConstraint(matlin.schatten(3), 10.0),
                  matlin.BallConstraint(matlin.ROWS_L1_MAX, 10.0)):
            assert matlin.project_to_ball(w, c) is w

    @pytest.mark.parametrize("kind", [
        matlin.SPECTRAL, matlin.FROBENIUS, matlin.schatten(1), matlin.schatten(1.5),
        matlin.schatten(3), matlin.ROWS_L1_MAX, matlin.ROWS_L2_SUM,
    ])
    def test_feasibility_and_idempotence(self, rng, kind):
        for _ in range(10):
            w = rng.standard_normal((4, 3)) * 3.0
            c = matlin.BallConstraint(kind, float(rng.uniform(0.5, 2.0)))
            out = matlin.project_to_ball(w, c)
            assert matlin.matrix_norm(out, kind) <= c.radius * (1 + 1e-9)
            again = matlin.project_to_ball(out, c)
            assert np.abs(again - out).max() <= 1e-10

    @pytest.mark.parametrize("kind", [
        matlin.SPECTRAL, matlin.FROBENIUS, matlin.schatten(1), matlin.schatten(2.5),
        matlin.ROWS_L1_MAX, matlin.ROWS_L2_SUM,
    ])
    def test_optimality_against_sampled_interior_points(self, kind):
        rng = np.random.default_rng(5)
        w = rng.standard_normal((3, 3)) * 3.0
        c = matlin.BallConstraint(kind, 1.0)
        out = matlin.project_to_ball(w, c)
        d_out = np.linalg.norm(w - out)
        for _ in range(1000):
            q = rng.standard_normal((3, 3))
            nq = matlin.matrix_norm(q, kind)
            q *= rng.uniform(0, 1) / max(nq, 1e-12)
            assert d_out <= np.linalg.norm(w - q) + 1e-8

    def test_general_p_vector_projection_matches_slsqp(self):
        rng = np.random.default_rng(17)
        for p in (1.5, 3.0, 8.0):
            v = rng.standard_normal(4) * 2.0
            mine = matlin.project_lp_ball(v, p, 1.0)
            ref = projection_via_slsqp(
                v, lambda x, p=p: float((np.abs(x) ** p).sum() ** (1 / p)), 1.0)
            np.testing.assert_allclose(mine, ref, atol=5e-6)

    def test_lp_projection_bracket_expansion(self):
        # many large coordinates force the multiplier beyond max(a)/p
        v = np.full(16, 10.0)
        out = matlin.project_lp_ball(v, 2.0, 1.0)
        assert float((out ** 2).sum() ** 0.5) == pytest.approx(1.0, abs=1e-9)
        np.testing.assert_allclose(out, v / np.linalg.norm(v), atol=1e-9)

    @pytest.mark.parametrize("p", [1.01, 7.0, 32.0, 63.9, 64.0])
    def test_lp_projection_lands_on_boundary(self, p):
        # exterior points project onto the sphere; large p once stalled the
        # inner solve far from the boundary
        rng = np.random.default_rng(33)
        for _ in range(20):
            v = rng.standard_normal(rng.integers(2, 10)) * rng.uniform(1.5, 20)
            if matlin._lp_vec_norm(np.abs(v), p) <= 1.0:
                continue
            out = matlin.project_lp_ball(v, p, 1.0)
            assert matlin._lp_vec_norm(np.abs(out), p) == pytest.approx(1.0, abs=5e-9)
