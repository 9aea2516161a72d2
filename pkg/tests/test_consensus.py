import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kcbo import (
    EmptyEnsembleError,
    ObjectiveSpec,
    delta_alpha,
    make_objective,
    noise_matrix_apply,
    tau,
    weighted_consensus,
)
from kcbo.consensus import consensus_weights


def identity_objective():
    """f(x) = x_0 clipped to [0, 1]; declared bounds [0, 1]."""
    return ObjectiveSpec(lambda x: np.clip(x[..., 0], 0.0, 1.0), 0.0, 1.0, 1.0, "clip", 1)


def softmax_oracle(X, fvals, alpha, dps=50):
    """Unstabilized softmax-weighted mean in extended precision."""
    with mpmath.workdps(dps):
        w = [mpmath.exp(-mpmath.mpf(alpha) * mpmath.mpf(float(f))) for f in fvals]
        total = mpmath.fsum(w)
        return np.array(
            [float(mpmath.fsum(wi * mpmath.mpf(float(x)) for wi, x in zip(w, X[:, k])) / total) for k in range(X.shape[1])]
        )


class TestWeightedConsensus:
    def test_single_particle(self):
        x0 = np.array([[0.3, -1.2]])
        out = weighted_consensus(x0, 5.0, make_objective("ackley", 2))
        assert np.array_equal(out.point, x0[0])

    def test_alpha_zero_is_mean(self):
        out = weighted_consensus(np.array([[0.0], [2.0]]), 0.0, identity_objective())
        assert out.point[0] == 1.0

    def test_worked_example(self):
        out = weighted_consensus(np.array([[0.0], [1.0]]), math.log(3), identity_objective())
        w, _ = consensus_weights(np.array([0.0, 1.0]), math.log(3))
        assert w == pytest.approx([0.75, 0.25], abs=1e-15)
        assert out.point[0] == pytest.approx(0.25, abs=1e-15)

    def test_log_partition(self):
        out = weighted_consensus(np.array([[0.0], [1.0]]), math.log(3), identity_objective())
        assert out.log_partition == pytest.approx(math.log((1 + 1 / 3) / 2), abs=1e-15)

    def test_empty(self):
        with pytest.raises(EmptyEnsembleError):
            weighted_consensus(np.zeros((0, 2)), 1.0, make_objective("ackley", 2))

    def test_equal_values_give_uniform_weights(self):
        f = ObjectiveSpec(lambda x: np.ones(x.shape[:-1]), 1.0, 1.0, 1.0, "flat", 2)
        X = np.arange(10.0).reshape(5, 2)
        assert np.allclose(weighted_consensus(X, 1e3, f).point, X.mean(axis=0), rtol=0, atol=1e-14)

    def test_no_overflow_at_large_alpha(self, rng):
        f = make_objective("tanh_quadratic", 3)
        X = 3 * rng.standard_normal((50, 3))
        out = weighted_consensus(X, 700.0 / f.spread, f)
        assert np.all(np.isfinite(out.point))
        assert np.all(out.point >= X.min(axis=0)) and np.all(out.point <= X.max(axis=0))

    def test_weights_sum_to_one(self, rng):
        w, _ = consensus_weights(rng.uniform(0, 20, size=(40, 30)), 3.0)
        assert np.all(np.abs(w.sum(axis=-1) - 1) <= 1e-14)

    def test_batch_matches_single(self, rng):
        f = make_objective("tanh_rastrigin", 2)
        X = rng.standard_normal((4, 7, 2))
        batch = weighted_consensus(X, 2.0, f).point
        for r in range(4):
            assert np.array_equal(batch[r], weighted_consensus(X[r], 2.0, f).point)

    @pytest.mark.parametrize("name", ["ackley", "tanh_rastrigin", "cosine_well"])
    def test_extended_precision_oracle(self, name, rng):
        for _ in range(20):
            d = int(rng.integers(1, 6))
            J = int(rng.integers(1, 13))
            f = make_objective(name, d)
            alpha = rng.uniform(0, 20) / f.spread
            X = rng.uniform(-3, 3, size=(J, d))
            got = weighted_consensus(X, alpha, f).point
            want = softmax_oracle(X, f(X), alpha)
            assert np.allclose(got, want, rtol=1e-12, atol=1e-12 * np.abs(X).max())

    @settings(max_examples=60, deadline=None)
    @given(
        J=st.integers(1, 20),
        d=st.integers(1, 4),
        alpha=st.floats(0, 50),
        seed=st.integers(0, 2**32 - 1),
    )
    def test_convex_combination(self, J, d, alpha, seed):
        g = np.random.default_rng(seed)
        f = make_objective("ackley", d)
        X = g.uniform(-5, 5, size=(J, d))
        point = weighted_consensus(X, alpha, f).point
        assert np.all(point >= X.min(axis=0) - 1e-12)
        assert np.all(point <= X.max(axis=0) + 1e-12)

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), alpha=st.floats(0, 10))
    def test_translation_covariance(self, seed, alpha):
        g = np.random.default_rng(seed)
        d = 3
        base = make_objective("tanh_rastrigin", d)
        c = g.uniform(-4, 4, size=d)
        shifted = ObjectiveSpec(lambda x: base.eval(x - c), 0.0, 1.0, base.lipschitz, "shifted", d)
        X = g.standard_normal((9, d))
        lhs = weighted_consensus(X + c, alpha, shifted).point
        rhs = weighted_consensus(X, alpha, base).point + c
        assert np.allclose(lhs, rhs, rtol=0, atol=1e-12 * (1 + np.abs(c).max()))


class TestDeltaAlpha:
    def test_alpha_zero(self, rng):
        X = rng.standard_normal((6, 2))
        assert np.allclose(delta_alpha(X, 0.0, make_objective("ackley", 2)), 0.0, atol=1e-15)

    def test_collapsed(self):
        X = np.tile([1.0, 2.0], (5, 1))
        assert np.all(delta_alpha(X, 3.0, make_objective("ackley", 2)) == 0.0)

    def test_worked_example(self):
        out = delta_alpha(np.array([[0.0], [1.0]]), math.log(3), identity_objective())
        assert out[0] == pytest.approx(0.25, abs=1e-15)

    @pytest.mark.parametrize("q", [2, 4, 8])
    def test_weight_bound(self, q, rng):
        """|mean - consensus|^q <= exp(alpha * spread) * centered q-th moment."""
        for _ in range(200):
            d = int(rng.integers(1, 5))
            f = make_objective("ackley", d)
            alpha = rng.uniform(0, 20) / f.spread
            X = rng.standard_normal((int(rng.integers(1, 30)), d)) * rng.uniform(0.1, 5)
            lhs = np.linalg.norm(delta_alpha(X, alpha, f)) ** q
            dev = np.linalg.norm(X - X.mean(axis=0), axis=1)
            assert lhs <= math.exp(alpha * f.spread) * np.mean(dev**q) * (1 + 1e-12) + 1e-300


class TestNoise:
    @pytest.mark.parametrize("kind", ["isotropic", "anisotropic"])
    def test_zero_displacement(self, kind):
        assert np.all(noise_matrix_apply(np.zeros(3), kind, np.ones(3)) == 0)

    def test_isotropic(self):
        assert np.array_equal(noise_matrix_apply(np.array([3.0, 4.0]), "isotropic", np.array([1.0, 0.0])), [5.0, 0.0])

    def test_anisotropic(self):
        assert np.array_equal(noise_matrix_apply(np.array([3.0, 4.0]), "anisotropic", np.array([1.0, 1.0])), [3.0, 4.0])

    def test_tau(self):
        assert tau("isotropic", 7) == 7
        assert tau("anisotropic", 7) == 1
