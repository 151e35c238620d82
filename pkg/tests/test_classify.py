"""Classifier oracles: brute-force Bayes, finite-difference gradients."""

import math

import numpy as np
import pytest
from scipy import sparse

from screenloop.classify import (
    ClassifierSpec,
    _linear_loss_grad,
    fit,
    predict_relevance,
)
from screenloop.errors import DimensionMismatch, SingleClassTraining


def brute_force_nb_posteriors(X, y, alpha, Q):
    """No-log multinomial Bayes: explicit priors and theta products."""
    X = np.asarray(X, dtype=float)
    Q = np.asarray(Q, dtype=float)
    n, V = X.shape
    posteriors = []
    theta = {}
    prior = {}
    for c in (0, 1):
        members = X[y == c]
        prior[c] = len(members) / n
        counts = members.sum(axis=0)
        theta[c] = (alpha + counts) / (alpha * V + counts.sum())
    for x in Q:
        joint = {}
        for c in (0, 1):
            value = prior[c]
            for t in range(V):
                value *= theta[c][t] ** x[t]
            joint[c] = value
        posteriors.append(joint[1] / (joint[0] + joint[1]))
    return np.array(posteriors)


class TestNaiveBayes:
    def test_hand_theta_example(self):
        # D+ counts {cat:2}, D- {dog:1}, alpha=1, V=2
        X = np.array([[2.0, 0.0], [0.0, 1.0]])
        y = np.array([1, 0])
        model = fit(X, y, ClassifierSpec())
        theta = np.exp(model.log_theta)
        assert theta[1] == pytest.approx([0.75, 0.25], abs=1e-12)
        assert theta[0] == pytest.approx([1 / 3, 2 / 3], abs=1e-12)
        # posterior of D+'s own row: likelihood ratio (0.75/(1/3))^2
        scores = predict_relevance(model, X)
        expected = 5.0625 / 6.0625
        assert scores[0] == pytest.approx(expected, abs=1e-12)

    def test_empty_row_scores_class_prior(self):
        X = np.array([[2.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
        model = fit(X[:2], [1, 0], ClassifierSpec())
        scores = predict_relevance(model, X)
        assert scores[2] == pytest.approx(0.5, abs=1e-12)

    def test_prior_reflects_class_frequencies_on_empty_row(self):
        X = np.array([[1.0], [1.0], [1.0], [0.0]])
        model = fit(X[:3] * [[1], [1], [1]], [1, 1, 0], ClassifierSpec())
        scores = predict_relevance(model, np.array([[0.0]]))
        assert scores[0] == pytest.approx(2 / 3, abs=1e-12)

    def test_single_class_raises(self):
        with pytest.raises(SingleClassTraining):
            fit(np.eye(3), [1, 1, 1], ClassifierSpec())

    def test_matches_brute_force_on_random_corpora(self):
        rng = np.random.default_rng(2024)
        for _ in range(200):
            n = rng.integers(2, 7)
            V = rng.integers(1, 6)
            X = rng.integers(0, 4, size=(n, V)).astype(float)
            y = rng.integers(0, 2, size=n)
            if len(np.unique(y)) < 2:
                y[0], y[1] = 0, 1
            alpha = float(rng.choice([0.5, 1.0, 2.0]))
            model = fit(X, y, ClassifierSpec(smoothing_alpha=alpha))
            got = predict_relevance(model, X)
            want = brute_force_nb_posteriors(X, y, alpha, X)
            np.testing.assert_allclose(got, want, atol=1e-9)

    def test_fractional_counts_supported(self):
        rng = np.random.default_rng(7)
        X = rng.random((5, 4))
        y = np.array([1, 0, 1, 0, 0])
        got = predict_relevance(fit(X, y, ClassifierSpec()), X)
        want = brute_force_nb_posteriors(X, y, 1.0, X)
        np.testing.assert_allclose(got, want, atol=1e-9)

    def test_more_discriminative_term_never_lowers_score(self):
        X = np.array([[3.0, 1.0], [0.0, 2.0], [1.0, 1.0]])
        y = np.array([1, 0, 0])
        model = fit(X, y, ClassifierSpec())
        theta = np.exp(model.log_theta)
        assert theta[1][0] > theta[0][0]  # term 0 favors the relevant class
        doc = np.zeros((6, 2))
        doc[:, 1] = 1.0
        doc[:, 0] = np.arange(6)
        scores = predict_relevance(model, doc)
        assert np.all(np.diff(scores) > 0)

    def test_scores_finite_in_unit_interval(self, tiny_labeled_dataset):
        from screenloop.textfeat import build_features

        matrix = build_features(tiny_labeled_dataset)
        y = np.array(tiny_labeled_dataset.labels())
        model = fit(matrix.matrix, y, ClassifierSpec())
        scores = predict_relevance(model, matrix)
        assert np.all(np.isfinite(scores))
        assert np.all((scores >= 0) & (scores <= 1))


class TestLinearModels:
    def test_lr_separable_sign(self):
        X = np.array([[1.0], [-1.0]])
        y = np.array([1, 0])
        model = fit(X, y, ClassifierSpec(kind="logistic_regression"))
        assert model.weights[0] > 0

    def test_lr_zero_weights_score_half(self):
        X = sparse.csr_matrix(np.array([[1.0, 0.0], [0.0, 2.0]]))
        model = fit(
            X, [1, 0], ClassifierSpec(kind="logistic_regression", max_iterations=1,
                                      learning_rate=1e-12)
        )
        # one negligible step from the zero init: scores stay at 0.5
        scores = predict_relevance(model, X)
        np.testing.assert_allclose(scores, 0.5, atol=1e-9)

    def test_svm_separable_sign(self):
        X = np.array([[1.0], [-1.0]])
        model = fit(X, [1, 0], ClassifierSpec(kind="linear_svm"))
        assert model.weights[0] > 0

    @pytest.mark.parametrize("kind", ["logistic_regression", "linear_svm"])
    def test_gradients_match_central_differences(self, kind):
        rng = np.random.default_rng(99)
        h = 1e-5
        checked = 0
        while checked < 50:
            n = int(rng.integers(3, 9))
            d = int(rng.integers(1, 6))
            X = sparse.csr_matrix(rng.normal(size=(n, d)))
            z = rng.choice([-1.0, 1.0], size=n)
            w = rng.normal(size=d)
            b = float(rng.normal())
            lam = float(rng.choice([0.0, 1e-3, 0.1]))
            if kind == "linear_svm":
                margins = 1.0 - z * (X @ w + b)
                if np.any(np.abs(margins) < 1e-3):  # keep away from the hinge kink
                    continue
            _, grad_w, grad_b = _linear_loss_grad(kind, X, z, w, b, lam)
            numeric = np.empty(d + 1)
            for j in range(d):
                delta = np.zeros(d)
                delta[j] = h
                up, _, _ = _linear_loss_grad(kind, X, z, w + delta, b, lam)
                dn, _, _ = _linear_loss_grad(kind, X, z, w - delta, b, lam)
                numeric[j] = (up - dn) / (2 * h)
            up, _, _ = _linear_loss_grad(kind, X, z, w, b + h, lam)
            dn, _, _ = _linear_loss_grad(kind, X, z, w, b - h, lam)
            numeric[d] = (up - dn) / (2 * h)
            analytic = np.append(grad_w, grad_b)
            scale = max(1.0, float(np.max(np.abs(numeric))))
            assert np.max(np.abs(analytic - numeric)) / scale < 1e-5
            checked += 1

    def test_fit_bit_reproducible(self):
        rng = np.random.default_rng(5)
        X = sparse.csr_matrix(rng.normal(size=(8, 4)))
        y = rng.integers(0, 2, size=8)
        y[:2] = [0, 1]
        spec = ClassifierSpec(kind="logistic_regression", max_iterations=200)
        a = fit(X, y, spec)
        b = fit(X, y, spec)
        assert np.array_equal(a.weights, b.weights)
        assert a.bias == b.bias

    def test_dimension_mismatch(self):
        model = fit(np.array([[1.0], [-1.0]]), [1, 0],
                    ClassifierSpec(kind="logistic_regression"))
        with pytest.raises(DimensionMismatch):
            predict_relevance(model, np.ones((2, 3)))

    def test_sigmoid_of_margin_monotone(self):
        X = np.array([[1.0], [-1.0]])
        model = fit(X, [1, 0], ClassifierSpec(kind="linear_svm"))
        margins = np.array([[-2.0], [0.0], [2.0]])
        scores = predict_relevance(model, margins)
        assert np.all(np.diff(scores) > 0)
        assert np.all((scores > 0) & (scores < 1))
