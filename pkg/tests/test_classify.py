"""Classifier training, calibration and prediction oracles."""

import numpy as np
import pytest

from riskvec.classify import (
    SigmoidCalibrator,
    classifier_from_bytes,
    classifier_to_bytes,
    decide,
    hinge_loss,
    normalize,
    predict_proba,
    train_classifier,
)


class TestNormalize:
    def test_three_four_five(self):
        np.testing.assert_allclose(normalize([3.0, 4.0]), [0.6, 0.8], atol=1e-15)

    def test_unit_vector_unchanged(self):
        v = np.array([0.6, 0.8])
        np.testing.assert_allclose(normalize(v), v, atol=1e-15)

    def test_random_vectors_unit_norm(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            v = rng.normal(size=100)
            assert abs(np.linalg.norm(normalize(v)) - 1.0) < 1e-9

    def test_zero_vector_rejected(self):
        with pytest.raises(ValueError):
            normalize(np.zeros(5))

    def test_preserves_cosine_neighbor_ranking(self):
        """Nearest-neighbor order by cosine is identical before and after."""
        rng = np.random.default_rng(1)
        points = rng.normal(size=(30, 8)) * rng.uniform(0.1, 10, size=(30, 1))
        query = rng.normal(size=8)

        def ranking(vectors, q):
            sims = [
                float(v @ q / (np.linalg.norm(v) * np.linalg.norm(q))) for v in vectors
            ]
            return np.argsort(np.array(sims))[::-1].tolist()

        before = ranking(points, query)
        after = ranking([normalize(p) for p in points], normalize(query))
        assert before == after


class TestLinearSvm:
    def test_separable_1d_zero_hinge(self):
        """x=-1 (label 0), x=+1 (label 1), C=1: perfect accuracy, hinge 0."""
        x = np.array([[-1.0], [1.0]])
        y = np.array([0, 1])
        clf = train_classifier("svm_linear", x, y, params={"c": 1.0})
        w, b = clf.params["weights"], clf.params["bias"]
        assert hinge_loss(w, b, x, np.array([-1.0, 1.0])) == 0.0
        assert [clf.decide(xi) for xi in x] == [False, True]

    def test_midpoint_probability_half(self):
        x = np.array([[-1.0], [1.0]])
        y = np.array([0, 1])
        clf = train_classifier("svm_linear", x, y)
        assert clf.predict_proba(np.array([0.0])) == pytest.approx(0.5, abs=1e-9)

    def test_separable_blobs(self):
        rng = np.random.default_rng(2)
        x = np.vstack([rng.normal([-2, -2], 0.5, (40, 2)), rng.normal([2, 2], 0.5, (40, 2))])
        y = np.array([0] * 40 + [1] * 40)
        clf = train_classifier("svm_linear", x, y)
        y_signed = np.where(y == 1, 1.0, -1.0)
        assert hinge_loss(clf.params["weights"], clf.params["bias"], x, y_signed) == 0.0
        assert all(clf.decide(xi) == bool(label) for xi, label in zip(x, y))

    def test_scale_consistency_on_separable_data(self):
        """Uniform positive feature scaling leaves label outputs unchanged."""
        rng = np.random.default_rng(3)
        x = np.vstack([rng.normal([-3, 1], 0.6, (30, 2)), rng.normal([3, -1], 0.6, (30, 2))])
        y = np.array([0] * 30 + [1] * 30)
        base = train_classifier("svm_linear", x, y)
        for scale in (0.2, 5.0, 41.0):
            scaled = train_classifier("svm_linear", x * scale, y)
            assert [scaled.decide(xi * scale) for xi in x] == [base.decide(xi) for xi in x]

    def test_decision_matches_margin_sign(self):
        """At threshold 0.5 the decision equals the sign of the SVM margin."""
        rng = np.random.default_rng(4)
        x = np.vstack([rng.normal(-1.5, 0.7, (50, 3)), rng.normal(1.5, 0.7, (50, 3))])
        y = np.array([0] * 50 + [1] * 50)
        clf = train_classifier("svm_linear", x, y)
        test = rng.normal(0, 2.0, (100, 3))
        for point in test:
            margin = clf.raw_score(point)
            if abs(margin) > 1e-9:
                assert clf.decide(point, 0.5) == (margin > 0)

    def test_calibrated_probability_monotone_in_margin(self):
        rng = np.random.default_rng(5)
        x = np.vstack([rng.normal(-1, 1.0, (60, 4)), rng.normal(1, 1.0, (60, 4))])
        y = np.array([0] * 60 + [1] * 60)
        clf = train_classifier("svm_linear", x, y)
        points = rng.normal(0, 2, (100, 4))
        margins = np.array([clf.raw_score(p) for p in points])
        probas = np.array([clf.predict_proba(p) for p in points])
        order = np.argsort(margins)
        assert np.all(np.diff(probas[order]) >= -1e-12)

    def test_determinism(self):
        rng = np.random.default_rng(6)
        x = rng.normal(size=(40, 5))
        y = (rng.random(40) < 0.5).astype(int)
        y[0], y[1] = 0, 1
        a = train_classifier("svm_linear", x, y, seed=3)
        b = train_classifier("svm_linear", x, y, seed=3)
        assert classifier_to_bytes(a) == classifier_to_bytes(b)


class TestRbfSvm:
    def test_solves_xor_layout(self):
        rng = np.random.default_rng(7)
        base = np.array([[0, 0], [1, 1], [0, 1], [1, 0]], dtype=float)
        labels = np.array([0, 0, 1, 1])
        x = np.vstack([base + rng.normal(0, 0.05, (4, 2)) for _ in range(10)])
        y = np.tile(labels, 10)
        clf = train_classifier("svm_rbf", x, y, params={"c": 10.0, "gamma": 2.0})
        preds = np.array([clf.decide(xi) for xi in x]).astype(int)
        assert (preds == y).mean() == 1.0

    def test_default_gamma_is_inverse_dim(self):
        rng = np.random.default_rng(8)
        x = rng.normal(size=(20, 8))
        y = np.array([0, 1] * 10)
        clf = train_classifier("svm_rbf", x, y)
        assert clf.params["gamma"] == pytest.approx(1.0 / 8)


class TestGaussianNb:
    def test_symmetric_midpoint(self):
        """Class means 0 and 4, equal variance and priors: posterior(2) = 0.5."""
        x = np.array([[-1.0], [1.0], [3.0], [5.0]])
        y = np.array([0, 0, 1, 1])
        clf = train_classifier("nb_gaussian", x, y)
        assert clf.predict_proba(np.array([2.0])) == pytest.approx(0.5, abs=1e-9)

    def test_posterior_complement(self):
        rng = np.random.default_rng(9)
        x = np.vstack([rng.normal(-1, 1, (30, 4)), rng.normal(1, 1, (30, 4))])
        y = np.array([0] * 30 + [1] * 30)
        clf = train_classifier("nb_gaussian", x, y)
        for point in rng.normal(0, 2, (20, 4)):
            p = clf.predict_proba(point)
            assert abs(p + (1.0 - p) - 1.0) < 1e-12

    def test_recovers_generating_boundary(self):
        """Error at most twice the Bayes error on independent Gaussian features."""
        rng = np.random.default_rng(10)
        n = 10_000
        y = (rng.random(n) < 0.5).astype(int)
        means = np.where(y[:, None] == 1, 1.0, -1.0)
        x = rng.normal(means, 1.0, size=(n, 3))
        clf = train_classifier("nb_gaussian", x[: n // 2], y[: n // 2])
        preds = np.array([clf.decide(xi) for xi in x[n // 2 :]]).astype(int)
        error = (preds != y[n // 2 :]).mean()
        # Bayes error for +-1 means, unit variance, 3 independent features:
        # Phi(-sqrt(3)) ~= 0.0416
        from math import erf, sqrt

        bayes = 0.5 * (1 - erf(sqrt(3) / sqrt(2)))
        assert error <= 2 * bayes


class TestBernoulliNb:
    def test_matches_hand_computed_bayes(self):
        """4-point boolean dataset against Laplace-smoothed Bayes by hand.

        Class 1 has feature patterns (1,0), (1,1); class 0 has (0,1), (0,0).
        With alpha=1: theta_1 = (3/4, 1/2), theta_0 = (1/4, 1/2), priors 1/2.
        Posterior for x=(1,0): (3/4 * 1/2) / (3/4 * 1/2 + 1/4 * 1/2) = 3/4.
        """
        x = np.array([[1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.0, 0.0]])
        y = np.array([1, 1, 0, 0])
        clf = train_classifier("nb_bernoulli", x, y)
        assert clf.predict_proba(np.array([1.0, 0.0])) == pytest.approx(0.75, abs=1e-9)
        assert clf.predict_proba(np.array([0.0, 1.0])) == pytest.approx(0.25, abs=1e-9)
        assert clf.predict_proba(np.array([1.0, 1.0])) == pytest.approx(0.75, abs=1e-9)
        assert clf.predict_proba(np.array([0.0, 0.0])) == pytest.approx(0.25, abs=1e-9)

    def test_binarizes_at_zero(self):
        x = np.array([[0.4, -0.2], [0.9, 0.1], [-0.5, 0.3], [-0.1, -0.8]])
        y = np.array([1, 1, 0, 0])
        clf = train_classifier("nb_bernoulli", x, y)
        assert clf.predict_proba(np.array([2.5, -9.0])) == clf.predict_proba(np.array([0.1, -0.1]))


class TestDegenerateAndErrors:
    def test_single_class_yields_flagged_constant(self):
        x = np.array([[0.1], [0.2], [0.3]])
        clf = train_classifier("svm_linear", x, np.array([1, 1, 1]))
        assert clf.degenerate
        assert clf.predict_proba(np.array([9.9])) == 1.0
        clf0 = train_classifier("nb_gaussian", x, np.array([0, 0, 0]))
        assert clf0.degenerate
        assert clf0.predict_proba(np.array([9.9])) == 0.0

    def test_dimension_mismatch(self):
        clf = train_classifier("svm_linear", np.array([[-1.0], [1.0]]), np.array([0, 1]))
        with pytest.raises(ValueError, match="dimension"):
            clf.predict_proba(np.array([1.0, 2.0]))

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            train_classifier("decision_tree", np.array([[1.0]]), np.array([1]))

    def test_non_binary_labels(self):
        with pytest.raises(ValueError):
            train_classifier("svm_linear", np.array([[1.0], [2.0]]), np.array([1, 2]))

    def test_decide_threshold_extremes(self):
        rng = np.random.default_rng(11)
        x = np.vstack([rng.normal(-1, 0.5, (10, 2)), rng.normal(1, 0.5, (10, 2))])
        y = np.array([0] * 10 + [1] * 10)
        clf = train_classifier("svm_linear", x, y)
        probe = rng.normal(0, 1, (10, 2))
        assert all(decide(clf, p, 0.0) for p in probe)
        assert not any(
            decide(clf, p, 1.0) for p in probe if predict_proba(clf, p) < 1.0
        )


class TestCalibrator:
    def test_monotone_increasing(self):
        cal = SigmoidCalibrator.fit(np.array([-2.0, -1.0, 1.0, 2.0]), np.array([0, 0, 1, 1]))
        assert cal.a > 0
        grid = np.linspace(-5, 5, 101)
        values = [cal.probability(s) for s in grid]
        assert all(b >= a for a, b in zip(values, values[1:]))

    def test_symmetric_scores_give_half_at_zero(self):
        cal = SigmoidCalibrator.fit(np.array([-1.0, 1.0]), np.array([0, 1]))
        assert cal.probability(0.0) == pytest.approx(0.5, abs=1e-9)


class TestSerialization:
    @pytest.mark.parametrize("kind", ["svm_linear", "svm_rbf", "nb_gaussian", "nb_bernoulli"])
    def test_round_trip_bit_exact(self, kind):
        rng = np.random.default_rng(12)
        x = np.vstack([rng.normal(-1, 1, (15, 4)), rng.normal(1, 1, (15, 4))])
        y = np.array([0] * 15 + [1] * 15)
        clf = train_classifier(kind, x, y, category="Termination")
        blob = classifier_to_bytes(clf)
        assert classifier_to_bytes(classifier_from_bytes(blob)) == blob

    def test_loaded_predicts_identically(self):
        rng = np.random.default_rng(13)
        x = np.vstack([rng.normal(-1, 1, (20, 3)), rng.normal(1, 1, (20, 3))])
        y = np.array([0] * 20 + [1] * 20)
        clf = train_classifier("svm_linear", x, y, category="Indemnity")
        loaded = classifier_from_bytes(classifier_to_bytes(clf))
        for point in rng.normal(0, 1, (25, 3)):
            assert loaded.predict_proba(point) == clf.predict_proba(point)

    def test_counts_recorded(self):
        x = np.array([[-1.0], [-0.5], [1.0]])
        y = np.array([0, 0, 1])
        clf = train_classifier("nb_gaussian", x, y)
        assert (clf.n_pos, clf.n_neg) == (1, 2)
