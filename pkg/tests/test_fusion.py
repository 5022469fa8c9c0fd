import math

import numpy as np
import pytest

from ssdetect.errors import DegenerateLabelsError, DimensionMismatchError
from ssdetect.evaluation import compute_eer
from ssdetect.fusion import (FusionModel, apply_fusion, decide, format_fusion, fuse_detectors,
                             fusion_objective, minimize_objective, parse_fusion, train_fusion)
from ssdetect.scoring import GroupScoreVector


def blob_data(seed, n=120, j=3, sep=1.0):
    rng = np.random.default_rng(seed)
    y = np.arange(n) % 2 == 0
    X = rng.normal(size=(n, j)) + sep * y[:, None] * rng.uniform(0.2, 1.0, j)
    return X, y


def cross_entropy(model, X, y, prior=0.5):
    s = X @ model.weights + model.bias
    tar = np.logaddexp(0, -s[y]).mean()
    non = np.logaddexp(0, s[~y]).mean()
    return prior * tar + (1 - prior) * non


class TestObjective:
    @pytest.mark.parametrize("seed", range(10))
    def test_gradient_matches_central_differences(self, seed):
        rng = np.random.default_rng(seed)
        X, y = blob_data(seed, j=4)
        params = rng.normal(size=5)
        prior = rng.uniform(0.1, 0.9)
        _, grad = fusion_objective(params, X, y, prior, l2=0.01)
        h = 1e-5
        fd = np.array([(fusion_objective(params + h * e, X, y, prior, 0.01)[0]
                        - fusion_objective(params - h * e, X, y, prior, 0.01)[0]) / (2 * h)
                       for e in np.eye(5)])
        np.testing.assert_allclose(grad, fd, rtol=1e-6, atol=1e-9)

    def test_restarts_agree(self):
        X, y = blob_data(3)
        values = []
        for seed in range(5):
            init = np.random.default_rng(seed).normal(0, 3, X.shape[1] + 1)
            values.append(minimize_objective(X, y, init=init)[1])
        assert max(values) - min(values) < 1e-8


class TestTrain:
    def test_separable_1d(self):
        x = np.array([-3.0, -2.0, -0.5, 0.4, 1.0, 2.5])
        y = x > 0
        m = train_fusion(x[:, None], y)
        s = apply_fusion(m, x[:, None])
        assert compute_eer(s[y], s[~y]) == 0.0

    def test_constant_input(self):
        X = np.full((40, 2), 3.0)
        y = np.arange(40) < 10
        m = train_fusion(X, y, prior=0.5)
        np.testing.assert_allclose(m.weights, 0.0, atol=1e-6)
        assert m.bias == pytest.approx(0.0, abs=1e-6)
        m = train_fusion(X, y, prior=0.2)
        assert m.bias == pytest.approx(math.log(0.2 / 0.8), abs=1e-6)

    def test_gradient_norm_contract(self):
        X, y = blob_data(5)
        _, _, gnorm = minimize_objective(X, y)
        assert gnorm < 1e-7

    @pytest.mark.parametrize("c", [0.3, 2.5, 10.0])
    def test_rescaling_inputs(self, c):
        X, y = blob_data(7, sep=0.5)
        m1 = train_fusion(X, y, l2=0.0)
        m2 = train_fusion(c * X, y, l2=0.0)
        np.testing.assert_allclose(m2.weights, m1.weights / c, atol=1e-5)
        np.testing.assert_allclose(apply_fusion(m2, c * X), apply_fusion(m1, X), atol=1e-5)

    def test_rescaling_with_default_penalty(self):
        # The l2 term is not scale invariant, so only an O(l2) drift remains.
        X, y = blob_data(7, sep=0.5)
        m1, m2 = train_fusion(X, y), train_fusion(2.5 * X, y)
        np.testing.assert_allclose(m2.weights, m1.weights / 2.5, atol=1e-5)
        np.testing.assert_allclose(apply_fusion(m2, 2.5 * X), apply_fusion(m1, X), atol=1e-4)

    def test_beats_prior_only_model(self):
        X, y = blob_data(8)
        Xd, yd = blob_data(9)
        m = train_fusion(X, y)
        zero = FusionModel(m.labels, np.zeros(3), 0.0)
        assert cross_entropy(m, Xd, yd) <= cross_entropy(zero, Xd, yd)

    def test_errors(self):
        with pytest.raises(DegenerateLabelsError):
            train_fusion(np.zeros((4, 2)), [True] * 4)
        vs = [GroupScoreVector("class", np.zeros(5), np.ones(5), 5, "a"),
              GroupScoreVector("class", np.zeros(4), np.ones(4), 4, "b")]
        with pytest.raises(DimensionMismatchError):
            train_fusion(vs, [True, False])

    def test_accepts_score_vectors(self):
        rng = np.random.default_rng(0)
        vs = [GroupScoreVector("class", rng.normal(size=5) + (i % 2), np.ones(5), 5, f"u{i}")
              for i in range(30)]
        m = train_fusion(vs, [i % 2 == 1 for i in range(30)])
        assert m.scheme == "class" and m.num_inputs == 5
        assert isinstance(apply_fusion(m, vs[0]), float)


class TestApply:
    def test_mean_recovery(self):
        j = 4
        m = FusionModel(tuple("abcd"), np.full(j, 1.0 / j), 0.0)
        s = np.array([0.5, -1.0, 2.0, 3.5])
        assert apply_fusion(m, s) == pytest.approx(s.mean(), abs=1e-15)

    def test_monotone_in_positive_weight(self):
        m = FusionModel(("a", "b"), [0.7, -0.2], 0.1)
        assert apply_fusion(m, [1.0, 1.0]) < apply_fusion(m, [1.1, 1.0])

    def test_matches_dot_product(self):
        rng = np.random.default_rng(1)
        w = rng.normal(size=6)
        m = FusionModel(tuple("abcdef"), w, 0.3)
        x = rng.normal(size=6)
        assert apply_fusion(m, x) == pytest.approx(float(sum(a * b for a, b in zip(w, x)) + 0.3),
                                                   abs=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            apply_fusion(FusionModel(("a",), [1.0], 0.0), [1.0, 2.0])

    def test_decide_uses_stored_threshold(self):
        m = FusionModel(("a",), [1.0], 0.0, threshold=0.5)
        np.testing.assert_array_equal(decide(m, np.array([[0.4], [0.6]])), [False, True])

    def test_file_round_trip(self):
        X, y = blob_data(2)
        m = train_fusion(X, y, input_labels=("x", "y", "z"), scheme="class")
        back = parse_fusion(format_fusion(m))
        assert format_fusion(m).startswith("SSDFUSE v1 class 3 0.5 ")
        assert back.labels == ("x", "y", "z") and back.threshold == m.threshold
        np.testing.assert_array_equal(back.weights, m.weights)
        assert back.bias == m.bias


def complementary_detectors(seed, n=400):
    """Each detector only separates its own half of the spoofed trials."""
    rng = np.random.default_rng(seed)
    y = np.arange(n) % 2 == 0
    half = (np.arange(n) // 2) % 2 == 0
    X = rng.normal(0, 1, (n, 3))
    X[~y & half, 0] -= 4.0
    X[~y & ~half, 1] -= 4.0
    return X, y


class TestSecondStage:
    def test_perfect_detector_dominates(self):
        # The second stage is fitted on the dev split, so its dev objective can
        # only improve on the single detector, which it contains as a special case.
        rng = np.random.default_rng(0)
        n = 200
        y = np.arange(n) % 2 == 0
        good = np.where(y, 1.0, -1.0) + rng.uniform(-0.5, 0.5, n)
        X = np.column_stack([good, rng.normal(size=n), rng.normal(size=n)])
        fused = fuse_detectors(X, y)
        single = train_fusion(X[:, :1], y)
        obj_f = fusion_objective(np.append(fused.weights, fused.bias), X, y)[0]
        obj_s = fusion_objective(np.array([single.weights[0], 0.0, 0.0, single.bias]), X, y)[0]
        assert obj_f <= obj_s + 1e-6
        assert cross_entropy(fused, X, y) <= cross_entropy(single, X[:, :1], y) + 1e-6

    def test_identical_detectors(self):
        X, y = blob_data(4, j=1)
        X3 = np.repeat(X, 3, axis=1)
        m = fuse_detectors(X3, y)
        s = apply_fusion(m, X3)
        assert compute_eer(s[y], s[~y]) == pytest.approx(compute_eer(X[y, 0], X[~y, 0]), abs=1e-12)

    def test_complementary_detectors(self):
        X, y = complementary_detectors(0)
        Xd, yd = complementary_detectors(1)
        m = fuse_detectors(X, y)
        fused = apply_fusion(m, Xd)
        singles = [compute_eer(Xd[yd, j], Xd[~yd, j]) for j in range(3)]
        assert compute_eer(fused[yd], fused[~yd]) < min(singles)
        assert m.labels == ("class", "phoneme", "gaussian")
