import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ssdetect.errors import DimensionMismatchError, InsufficientDataError, NumericalFailureError
from ssdetect.gmm import (DiagGmm, TrainConfig, accumulate, align, format_gmm, kmeans,
                          kmeans_init, log_likelihood, map_adapt, parse_gmm, train_em,
                          train_gmm)


def random_gmm(rng, k, d):
    w = rng.uniform(0.1, 1.0, k)
    return DiagGmm(w / w.sum(), rng.normal(0, 3, (k, d)), rng.uniform(0.2, 3.0, (k, d)))


def oracle_loglik(gmm, x):
    """High-precision direct summation of the mixture density."""
    mpmath.mp.dps = 40
    total = mpmath.mpf(0)
    for w, m, v in zip(gmm.weights, gmm.means, gmm.variances):
        log_c = mpmath.log(w)
        for xd, md, vd in zip(x, m, v):
            log_c += -mpmath.mpf(0.5) * (mpmath.log(2 * mpmath.pi * vd)
                                         + (mpmath.mpf(xd) - md) ** 2 / vd)
        total += mpmath.exp(log_c)
    return float(mpmath.log(total))


def plain_kmeans(x, k, seed, iters):
    """Loop-based reimplementation of the documented k-means rules."""
    n = len(x)
    rng = np.random.default_rng(seed)
    cents = [x[i].copy() for i in rng.choice(n, size=k, replace=False)]

    def assign(cents):
        labels, dists = [], []
        for p in x:
            ds = [float(np.sum((p - c) ** 2)) for c in cents]
            j = min(range(k), key=lambda q: (ds[q], q))
            labels.append(j)
            dists.append(ds[j])
        return labels, dists

    labels = None
    for _ in range(iters):
        new, dists = assign(cents)
        while len(set(new)) < k:
            empty = min(set(range(k)) - set(new))
            far = max(range(n), key=lambda i: (dists[i], -i))
            cents[empty] = x[far].copy()
            new, dists = assign(cents)
        if new == labels:
            break
        labels = new
        for j in range(k):
            members = [x[i] for i in range(n) if labels[i] == j]
            cents[j] = np.mean(members, axis=0)
    return np.array(cents), np.array(labels)


class TestDiagGmm:
    def test_invariants_enforced(self):
        with pytest.raises(ValueError):
            DiagGmm([0.5, 0.4], np.zeros((2, 1)), np.ones((2, 1)))
        with pytest.raises(ValueError):
            DiagGmm([1.0], np.zeros((1, 1)), np.zeros((1, 1)))

    def test_file_round_trip_exact(self):
        g = random_gmm(np.random.default_rng(0), 5, 3)
        text = format_gmm(g)
        assert text.startswith("SSDGMM v1 5 3\n")
        assert parse_gmm(text) == g


class TestLogLikelihood:
    def test_standard_normal_at_mean(self):
        g = DiagGmm([1.0], [[0.0]], [[1.0]])
        assert log_likelihood(g, [0.0]) == pytest.approx(-0.918938533, abs=1e-9)
        assert log_likelihood(g, [0.0]) == pytest.approx(-0.5 * math.log(2 * math.pi), rel=1e-15)

    def test_dominant_mean_beats_far_point(self):
        g = random_gmm(np.random.default_rng(1), 4, 3)
        k = int(np.argmax(g.weights))
        assert log_likelihood(g, g.means[k]) >= log_likelihood(g, g.means[k] + 10.0)

    @given(st.integers(0, 10_000))
    @settings(max_examples=25, deadline=None)
    def test_matches_high_precision_oracle(self, seed):
        rng = np.random.default_rng(seed)
        g = random_gmm(rng, 8, 5)
        x = rng.normal(0, 4, 5)
        assert log_likelihood(g, x) == pytest.approx(oracle_loglik(g, x), rel=1e-10)

    def test_far_outlier_is_finite(self):
        g = random_gmm(np.random.default_rng(2), 3, 2)
        assert np.isfinite(log_likelihood(g, [1e4, -1e4]))

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            log_likelihood(DiagGmm([1.0], [[0.0]], [[1.0]]), [0.0, 1.0])


class TestAlign:
    def test_frame_at_component_mean(self):
        means = np.arange(5)[:, None] * 100.0 * np.ones((5, 2))
        g = DiagGmm(np.full(5, 0.2), means, np.ones((5, 2)))
        assert align(g, means[3][None, :])[0] == 3

    def test_single_component(self):
        g = DiagGmm([1.0], [[0.0, 0.0]], [[1.0, 1.0]])
        assert np.all(align(g, np.random.default_rng(0).normal(size=(20, 2))) == 0)

    def test_matches_exhaustive_argmax(self):
        rng = np.random.default_rng(3)
        g = random_gmm(rng, 6, 3)
        x = rng.normal(0, 3, (50, 3))
        expected = []
        for f in x:
            best, best_v = 0, -np.inf
            for k in range(6):
                v = math.log(g.weights[k]) + sum(
                    -0.5 * (math.log(2 * math.pi * g.variances[k, d])
                            + (f[d] - g.means[k, d]) ** 2 / g.variances[k, d]) for d in range(3))
                if v > best_v:
                    best, best_v = k, v
            expected.append(best)
        np.testing.assert_array_equal(align(g, x), expected)


class TestKmeans:
    def test_two_point_masses(self):
        x = np.vstack([np.zeros((50, 2)), np.full((50, 2), 10.0)])
        g = kmeans_init(x, 2, seed=0)
        order = np.argsort(g.means[:, 0])
        np.testing.assert_array_equal(g.means[order], [[0, 0], [10, 10]])
        np.testing.assert_array_equal(g.weights, [0.5, 0.5])

    def test_single_cluster(self):
        x = np.random.default_rng(0).normal(size=(40, 3))
        g = kmeans_init(x, 1)
        np.testing.assert_allclose(g.means[0], x.mean(axis=0), rtol=1e-12)
        np.testing.assert_allclose(g.variances[0], x.var(axis=0), rtol=1e-12)

    def test_matches_plain_reimplementation(self):
        rng = np.random.default_rng(11)
        centers = rng.normal(0, 6, (4, 2))
        x = np.vstack([c + rng.normal(size=(30, 2)) for c in centers])
        c1, l1 = kmeans(x, 4, seed=7, max_iters=20)
        c2, l2 = plain_kmeans(x, 4, seed=7, iters=20)
        np.testing.assert_array_equal(l1, l2)
        np.testing.assert_allclose(c1, c2, rtol=1e-12)

    def test_too_few_frames(self):
        with pytest.raises(InsufficientDataError):
            kmeans_init(np.zeros((3, 2)), 4)

    def test_deterministic(self):
        x = np.random.default_rng(0).normal(size=(200, 3))
        assert kmeans_init(x, 5, seed=3) == kmeans_init(x, 5, seed=3)


def two_gaussian_sample(seed, n=5000):
    rng = np.random.default_rng(seed)
    comp = rng.random(n) < 0.5
    return np.where(comp, -3.0, 3.0) + rng.standard_normal(n)


class TestEm:
    def test_recovers_toy_means(self):
        x = two_gaussian_sample(0)[:, None]
        g, trace = train_gmm(x, TrainConfig(num_components=2, seed=0))
        np.testing.assert_allclose(np.sort(g.means[:, 0]), [-3.0, 3.0], atol=0.15)

    def test_one_iteration_single_component(self):
        x = np.random.default_rng(0).normal(2.0, 1.5, (100, 2))
        init = DiagGmm([1.0], [[0.0, 0.0]], [[1.0, 1.0]])
        g, _ = train_em(init, x, TrainConfig(num_components=1, max_em_iters=1))
        np.testing.assert_allclose(g.means[0], x.mean(axis=0), rtol=1e-13)
        np.testing.assert_allclose(g.variances[0], x.var(axis=0), rtol=1e-12)

    @pytest.mark.parametrize("seed", range(5))
    def test_trace_monotone(self, seed):
        rng = np.random.default_rng(seed)
        x = np.vstack([rng.normal(m, 1.0, (200, 2)) for m in (-4, 0, 5)])
        _, trace = train_gmm(x, TrainConfig(num_components=4, seed=seed, rel_ll_tolerance=1e-9))
        assert np.all(np.diff(trace) >= -1e-8)

    def test_trace_matches_direct_summation(self):
        rng = np.random.default_rng(4)
        x = rng.normal(0, 2, (60, 2))
        init = kmeans_init(x, 3, seed=1)
        cfg = TrainConfig(num_components=3, max_em_iters=3, rel_ll_tolerance=1e-12)
        _, trace = train_em(init, x, cfg)
        for t in range(len(trace)):
            g_t, _ = train_em(init, x, TrainConfig(num_components=3, max_em_iters=t,
                                                   rel_ll_tolerance=1e-12))
            direct = math.fsum(oracle_loglik(g_t, f) for f in x)
            assert trace[t] == pytest.approx(direct, rel=1e-9)

    def test_invariants_after_training(self):
        x = np.random.default_rng(0).normal(size=(300, 3))
        g, _ = train_gmm(x, TrainConfig(num_components=6, seed=0))
        floor = 1e-3 * x.var(axis=0)
        assert abs(g.weights.sum() - 1) < 1e-9 and np.all(g.weights > 0)
        assert np.all(g.variances >= floor)

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_numerical_failure_reported(self):
        g = DiagGmm([1.0], [[0.0]], [[1e-300]])
        with pytest.raises(NumericalFailureError, match="iteration 0"):
            train_em(g, np.array([[1e200], [-1e200]]), TrainConfig(num_components=1))

    def test_stats_merge_across_partitions(self):
        rng = np.random.default_rng(9)
        g = random_gmm(rng, 3, 2)
        x = rng.normal(size=(100, 2))
        whole = accumulate(g, x)
        merged = accumulate(g, x[:37]) + accumulate(g, x[37:])
        np.testing.assert_allclose(merged.n, whole.n, rtol=1e-12)
        np.testing.assert_allclose(merged.f, whole.f, rtol=1e-12, atol=1e-12)
        np.testing.assert_allclose(merged.s, whole.s, rtol=1e-12)
        assert merged.loglik == pytest.approx(whole.loglik, rel=1e-12)


class TestMap:
    def test_huge_relevance_keeps_ubm(self):
        rng = np.random.default_rng(0)
        ubm = random_gmm(rng, 4, 2)
        out = map_adapt(ubm, rng.normal(5, 1, (500, 2)), 1e12)
        np.testing.assert_allclose(out.means, ubm.means, atol=1e-6)
        assert out.weights.tobytes() == ubm.weights.tobytes()
        assert out.variances.tobytes() == ubm.variances.tobytes()

    def test_zero_relevance_single_component(self):
        x = np.random.default_rng(1).normal(3, 2, (77, 3))
        ubm = DiagGmm([1.0], np.zeros((1, 3)), np.ones((1, 3)))
        out = map_adapt(ubm, x, 0.0)
        np.testing.assert_allclose(out.means[0], x.mean(axis=0), rtol=1e-14)

    def test_two_component_formula(self):
        ubm = DiagGmm([0.3, 0.7], [[-1.0], [2.0]], [[1.0], [0.5]])
        x = np.linspace(-3, 4, 10)
        r = 16.0
        num = [0.0, 0.0]
        den = [0.0, 0.0]
        for xi in x:
            dens = [w * math.exp(-0.5 * (xi - m) ** 2 / v) / math.sqrt(2 * math.pi * v)
                    for w, m, v in ((0.3, -1.0, 1.0), (0.7, 2.0, 0.5))]
            for k in range(2):
                g = dens[k] / sum(dens)
                num[k] += g * xi
                den[k] += g
        expected = [(num[k] + r * m) / (den[k] + r) for k, m in enumerate((-1.0, 2.0))]
        np.testing.assert_allclose(map_adapt(ubm, x[:, None], r).means[:, 0], expected,
                                   rtol=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            map_adapt(DiagGmm([1.0], [[0.0]], [[1.0]]), np.zeros((5, 2)))
