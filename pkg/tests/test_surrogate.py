from __future__ import annotations

import math

import numpy as np
import pytest

from recipesearch.surrogate import (
    NOISE_VARIANCE,
    SIGNAL_VARIANCE,
    SurrogateError,
    fit_gp,
    predict_gp,
)

# Frozen from the independent 2x2 dense solve (centered scores, population
# std scaling, length scale 0.5*sqrt(2), signal variance 1, noise 1e-4).
TWO_POINT_MU_AT_X1 = 1.000115638390491
TWO_POINT_SIGMA_AT_X1 = 0.009999490711175873
TWO_POINT_MU_AT_MID = 2.0
TWO_POINT_SIGMA_AT_MID = 0.5932982401288502


def dense_oracle(x, y, queries, length_scale=None):
    """Direct dense linear solve, no Cholesky shortcut (independent route)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if length_scale is None:
        length_scale = 0.5 * math.sqrt(x.shape[1])
    mean = y.mean()
    scale = y.std() if (len(y) >= 2 and y.std() > 0) else 1.0
    ys = (y - mean) / scale

    def kmat(a, b):
        d2 = ((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=2)
        return SIGNAL_VARIANCE * np.exp(-d2 / (2 * length_scale**2))

    gram = kmat(x, x) + NOISE_VARIANCE * np.eye(len(x))
    inv = np.linalg.inv(gram)
    out = []
    for q in np.atleast_2d(queries):
        ks = kmat(x, q[None, :]).ravel()
        mu = mean + scale * float(ks @ inv @ ys)
        var = SIGNAL_VARIANCE - float(ks @ inv @ ks)
        out.append((mu, scale * math.sqrt(max(var, 0.0))))
    return out


class TestFit:
    def test_single_observation_self_prediction(self):
        model = fit_gp([[0.2, 0.8]], [37.5])
        mu, sigma = predict_gp(model, [0.2, 0.8])
        assert mu == pytest.approx(37.5, abs=1e-6)
        assert sigma >= 0.0

    def test_duplicate_inputs_survive_via_jitter(self):
        model = fit_gp([[0.5, 0.5], [0.5, 0.5]], [2.0, 2.0])
        mu, _ = predict_gp(model, [0.5, 0.5])
        assert mu == pytest.approx(2.0, abs=1e-6)

    def test_two_point_closed_form(self):
        model = fit_gp([[0.0, 0.0], [1.0, 1.0]], [1.0, 3.0])
        mu, sigma = predict_gp(model, [0.0, 0.0])
        assert mu == pytest.approx(TWO_POINT_MU_AT_X1, abs=1e-10)
        assert sigma == pytest.approx(TWO_POINT_SIGMA_AT_X1, abs=1e-10)
        assert abs(mu - 1.0) < 2e-4  # jitter-level smoothing only

    def test_dimension_mismatch(self):
        with pytest.raises(SurrogateError, match="does not match"):
            fit_gp([[0.0, 0.0]], [1.0, 2.0])

    def test_non_finite_score(self):
        with pytest.raises(SurrogateError, match="non-finite score"):
            fit_gp([[0.0], [1.0]], [1.0, float("nan")])


class TestPredict:
    def test_training_point_near_interpolation(self):
        x = [[0.0, 0.0], [1.0, 0.2], [0.4, 0.9]]
        y = [0.0, 0.5, 1.0]
        model = fit_gp(x, y)
        for xi, yi in zip(x, y):
            mu, _ = predict_gp(model, xi)
            assert mu == pytest.approx(yi, abs=1e-4)

    def test_sigma_bound_at_training_inputs(self):
        x = [[0.0, 0.0], [1.0, 0.2], [0.4, 0.9]]
        y = [0.1, 0.6, 0.9]
        model = fit_gp(x, y)
        bound = math.sqrt(NOISE_VARIANCE * model.y_scale**2) + 1e-6
        for xi in x:
            _, sigma = predict_gp(model, xi)
            assert sigma <= bound

    def test_prior_reversion_far_from_data(self):
        # one-dimensional inputs, a query many length scales away
        x = [[0.0], [0.05], [0.1]]
        y = [1.0, 2.0, 3.0]
        model = fit_gp(x, y)
        far = [40.0]
        mu, sigma = predict_gp(model, far)
        assert mu == pytest.approx(np.mean(y), abs=1e-3)
        assert sigma == pytest.approx(model.y_scale * math.sqrt(SIGNAL_VARIANCE), abs=1e-6)

    def test_midpoint_matches_hand_solve(self):
        model = fit_gp([[0.0, 0.0], [1.0, 1.0]], [1.0, 3.0])
        mu, sigma = predict_gp(model, [0.5, 0.5])
        assert mu == pytest.approx(TWO_POINT_MU_AT_MID, abs=1e-10)
        assert sigma == pytest.approx(TWO_POINT_SIGMA_AT_MID, abs=1e-10)

    def test_query_dimension_mismatch(self):
        model = fit_gp([[0.0, 0.0]], [1.0])
        with pytest.raises(SurrogateError, match="does not match"):
            predict_gp(model, [0.0, 0.0, 0.0])


class TestProperties:
    def test_permutation_invariance(self):
        rng = np.random.default_rng(3)
        x = rng.uniform(0, 1, size=(6, 4))
        y = rng.uniform(0, 5, size=6)
        perm = rng.permutation(6)
        a = fit_gp(x, y)
        b = fit_gp(x[perm], y[perm])
        for q in rng.uniform(0, 1, size=(10, 4)):
            mu_a, s_a = predict_gp(a, q)
            mu_b, s_b = predict_gp(b, q)
            assert mu_a == pytest.approx(mu_b, abs=1e-8)
            assert s_a == pytest.approx(s_b, abs=1e-8)

    def test_variance_nonnegative_and_ordered(self):
        rng = np.random.default_rng(9)
        x = rng.uniform(0, 1, size=(5, 3))
        y = rng.uniform(0, 2, size=5)
        model = fit_gp(x, y)
        _, sigma_train = predict_gp(model, x[0])
        _, sigma_far = predict_gp(model, np.full(3, 25.0))
        assert 0.0 <= sigma_train <= sigma_far

    def test_brute_force_equivalence_small_models(self):
        rng = np.random.default_rng(101)
        for n in (1, 2, 3, 4, 5):
            x = rng.uniform(0, 1, size=(n, 3))
            y = rng.uniform(-1, 4, size=n)
            model = fit_gp(x, y)
            queries = rng.uniform(0, 1, size=(6, 3))
            expected = dense_oracle(x, y, queries)
            for q, (mu_e, s_e) in zip(queries, expected):
                mu, s = predict_gp(model, q)
                assert mu == pytest.approx(mu_e, abs=1e-8)
                assert s == pytest.approx(s_e, abs=1e-8)

    def test_adding_observation_never_raises_variance(self):
        rng = np.random.default_rng(55)
        x = rng.uniform(0, 1, size=(6, 3))
        y = rng.uniform(0, 1, size=6)
        queries = rng.uniform(0, 1, size=(8, 3))
        # compare latent (standardized) posterior sd so score rescaling
        # between the two fits cannot mask the information ordering
        small = fit_gp(x[:5], y[:5])
        big = fit_gp(x, y)
        for q in queries:
            _, s_small = predict_gp(small, q)
            _, s_big = predict_gp(big, q)
            assert s_big / big.y_scale <= s_small / small.y_scale + 1e-8
