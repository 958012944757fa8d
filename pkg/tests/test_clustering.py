import numpy as np
import pytest

from legendre.clustering import (
    FeatureKind,
    adjusted_mutual_info,
    adjusted_rand_index,
    contingency_matrix,
    expected_mutual_info,
    extract_features,
    kmeans,
    kmeans_fit,
    mutual_info,
    rand_index,
)
from legendre.engine import decompose
from legendre.errors import BadK, DimensionMismatch, LengthMismatch, TooFewSamples, UnknownKind
from legendre.experiments import cluster_results, stack_features

import oracles


def random_pair(rng, n_max=30):
    n = int(rng.integers(2, n_max + 1))
    return rng.integers(0, rng.integers(1, 6), size=n), rng.integers(0, rng.integers(1, 6), size=n)


class TestPairCounting:
    def test_rand_example(self):
        assert rand_index([0, 0, 1, 1], [0, 0, 0, 1]) == pytest.approx(0.5, abs=1e-15)

    def test_ari_example_is_chance(self):
        assert adjusted_rand_index([0, 0, 1, 1], [0, 0, 0, 1]) == pytest.approx(0.0, abs=1e-15)

    def test_contingency(self):
        m = contingency_matrix([3, 3, 7, 7, 7], ["a", "b", "b", "b", "a"])
        assert m.tolist() == [[1, 1], [1, 2]]

    def test_against_enumeration(self, rng):
        for _ in range(100):
            t, p = random_pair(rng)
            assert rand_index(t, p) == pytest.approx(oracles.rand_index(t, p), abs=1e-12)
            assert adjusted_rand_index(t, p) == pytest.approx(oracles.adjusted_rand_index(t, p), abs=1e-10)

    def test_expected_index_by_permutation(self):
        t, p = [0, 0, 1, 1, 2, 2], [0, 0, 1, 1, 1, 2]
        expected = oracles.expected_index_by_permutation(t, p)
        assert expected == oracles.Fraction(4, 5)
        # index 2, best 3.5
        assert adjusted_rand_index(t, p) == pytest.approx(float((2 - expected) / (oracles.Fraction(7, 2) - expected)), abs=1e-15)

    def test_identical_and_relabelled(self, rng):
        t = rng.integers(0, 4, size=25)
        perm = rng.permutation(4)
        assert adjusted_rand_index(t, t) == 1.0
        assert adjusted_rand_index(t, perm[t]) == 1.0
        assert rand_index(t, perm[t]) == 1.0

    def test_single_cluster_both(self):
        assert adjusted_rand_index([1, 1, 1], [0, 0, 0]) == 1.0

    def test_chance_level(self):
        rng = np.random.default_rng(11)
        t = np.repeat(np.arange(10), 30)
        scores = [adjusted_rand_index(t, rng.permutation(t)) for _ in range(300)]
        assert abs(np.mean(scores)) < 0.02

    def test_errors(self):
        with pytest.raises(LengthMismatch):
            adjusted_rand_index([0, 1], [0, 1, 1])
        with pytest.raises(TooFewSamples):
            rand_index([0], [0])


class TestMutualInfo:
    def test_mutual_info_identical(self):
        assert mutual_info([0, 0, 1, 1], [5, 5, 6, 6]) == pytest.approx(np.log(2), abs=1e-15)

    def test_expected_mi_by_permutation(self):
        t, p = [0, 0, 1, 1, 2, 2], [0, 0, 1, 1, 1, 2]
        emi = expected_mutual_info(contingency_matrix(t, p))
        assert emi == pytest.approx(oracles.expected_mi_by_permutation(t, p), abs=1e-12)

    def test_against_direct_summation(self, rng):
        for _ in range(100):
            t, p = random_pair(rng)
            ref = 1.0 if len(set(zip(t, p))) == len(set(t)) == len(set(p)) else None
            got = adjusted_mutual_info(t, p)
            if ref is None:
                ref = oracles.adjusted_mutual_info(list(t), list(p))
            assert got == pytest.approx(ref, abs=1e-10)

    def test_identical_is_one(self, rng):
        t = rng.integers(0, 5, size=30)
        assert adjusted_mutual_info(t, t) == 1.0
        assert adjusted_mutual_info(t, (t + 3) % 5) == 1.0

    def test_one_sided_constant_is_zero(self):
        assert adjusted_mutual_info([0, 0, 0, 0], [0, 1, 0, 1]) == pytest.approx(0.0, abs=1e-12)


class TestKMeans:
    def test_k_equals_n(self, rng):
        x = rng.normal(size=(7, 3))
        r = kmeans_fit(x, 7)
        assert len(set(r.labels)) == 7 and r.inertia == pytest.approx(0.0, abs=1e-20)

    def test_k_one(self, rng):
        x = rng.normal(size=(20, 2))
        r = kmeans_fit(x, 1)
        assert np.all(r.labels == 0)
        assert r.inertia == pytest.approx(((x - x.mean(axis=0)) ** 2).sum(), rel=1e-12)

    def test_separated_blobs(self, rng):
        centers = np.array([[0, 0], [20, 0], [0, 20]])
        truth = np.repeat(np.arange(3), 30)
        x = centers[truth] + rng.normal(size=(90, 2))
        assert adjusted_rand_index(truth, kmeans(x, 3, seed=1)) == 1.0

    def test_inertia_non_increasing(self, rng):
        x = rng.normal(size=(200, 4))
        r = kmeans_fit(x, 6, restarts=1, seed=3)
        h = np.array(r.history)
        assert np.all(np.diff(h) <= 1e-9 * h[0])

    def test_deterministic(self, rng):
        x = rng.normal(size=(60, 3))
        assert np.array_equal(kmeans(x, 4, seed=9), kmeans(x, 4, seed=9))

    def test_bad_k(self, rng):
        with pytest.raises(BadK):
            kmeans(rng.normal(size=(5, 2)), 6)
        with pytest.raises(BadK):
            kmeans(rng.normal(size=(5, 2)), 0)
        with pytest.raises(DimensionMismatch):
            kmeans(np.zeros(5), 2)

    def test_standardize(self):
        x = np.column_stack([np.repeat([0.0, 1.0], 10), np.linspace(0, 1e4, 20) % 77])
        labels = kmeans(x, 2, standardize=True, seed=0)
        assert len(set(labels)) == 2


@pytest.fixture(scope="module")
def results():
    rng = np.random.default_rng(5)
    xs = [rng.random((6, 6, 2)) * (rng.random((6, 6, 2)) > 0.3) for _ in range(4)]
    return [decompose(x, 3, 1) for x in xs]


class TestFeatures:

    def test_lengths_and_tags(self, results):
        r = results[0]
        expected = {
            "sum-theta-eta": (2, "[1x2,1]"),
            "sum-theta-eta-beta": (2, "[1x2,1]"),
            "sum-theta-nonzero": (2, "[1x2,1]"),
            "sum-p-nonzero": (2, "[1x2,1]"),
            "last-dkl": (1, "[1,1]"),
            "unfolded-p": (72, "[6x6x2,1]"),
            "unfolded-theta-eta": (144, "[6x6x2x2,1]"),
            "beta-theta-eta": (2 * len(r.basis), f"[{len(r.basis)}x2,1]"),
        }
        for kind, (n, tag) in expected.items():
            f = extract_features(r, kind)
            assert len(f) == n and f.shape_tag == tag and f.kind is FeatureKind(kind)

    def test_values(self, results):
        r = results[0]
        nz = np.count_nonzero(r.target.probs)
        assert extract_features(r, "sum-p-nonzero").values.tolist() == pytest.approx([1.0, nz])
        assert extract_features(r, "last-dkl").values[0] == r.kl
        assert np.array_equal(extract_features(r, "unfolded-p").values, r.q.probs.ravel())
        b = r.basis.flat
        f = extract_features(r, "beta-theta-eta").values
        assert np.array_equal(f, np.concatenate([r.theta_final.flat[b], r.eta_final.flat[b]]))

    def test_unknown_kind(self, results):
        with pytest.raises(UnknownKind):
            extract_features(results[0], "mean-theta")

    def test_stack_truncates_basis_vectors(self):
        x = np.ones((3, 3, 1))
        y = np.zeros((3, 3, 1))
        y[0, 0, 0] = y[2, 2, 0] = y[1, 2, 0] = 1.0
        rs = [decompose(x, 4, 1), decompose(y, 4, 1)]
        feats = [extract_features(r, "beta-theta-eta") for r in rs]
        m = stack_features(feats)
        assert m.shape == (2, 4)
        assert np.array_equal(m[1], feats[1].values)
        assert np.array_equal(m[0], np.r_[feats[0].values[:2], feats[0].values[4:6]])

    def test_cluster_results_perfect(self):
        rng = np.random.default_rng(2)
        xs, labels = [], []
        for d in range(3):
            for _ in range(3):
                x = np.full((4, 4), 0.01)
                x[d, :] = 1.0 + 0.01 * rng.random(4)
                xs.append(x)
                labels.append(d)
        rs = [decompose(x, 2, 1) for x in xs]
        (rep,) = cluster_results(rs, labels, ["unfolded-p"], k=3)
        assert rep.ari == 1.0 and rep.ami == 1.0
        assert rep.contingency.sum() == 9
