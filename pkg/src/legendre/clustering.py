"""Clustering agreement scores, k-means, and feature vectors taken from
decomposition results.
"""
from dataclasses import dataclass
import enum
from math import comb

import numpy as np
from scipy.special import gammaln

from .errors import BadK, DimensionMismatch, LengthMismatch, TooFewSamples, UnknownKind


def _check_labels(labels_true, labels_pred):
    t = np.asarray(labels_true)
    p = np.asarray(labels_pred)
    if t.ndim != 1 or p.ndim != 1 or t.shape != p.shape:
        raise LengthMismatch(f"label vectors of shapes {t.shape} and {p.shape}")
    if t.size < 2:
        raise TooFewSamples("need at least two samples")
    return t, p


def contingency_matrix(labels_true, labels_pred):
    """Counts ``n_ij`` of samples in true class ``i`` and predicted cluster ``j``.

    Rows and columns follow the sorted distinct label values.
    """
    _, ti = np.unique(labels_true, return_inverse=True)
    _, pi = np.unique(labels_pred, return_inverse=True)
    m = np.zeros((ti.max() + 1, pi.max() + 1), dtype=np.int64)
    np.add.at(m, (ti, pi), 1)
    return m


def _pair_counts(labels_true, labels_pred):
    m = contingency_matrix(labels_true, labels_pred)
    n = int(m.sum())
    pairs = lambda a: float(np.sum(a * (a - 1) // 2))  # noqa: E731
    return pairs(m), pairs(m.sum(axis=1)), pairs(m.sum(axis=0)), comb(n, 2)


def rand_index(labels_true, labels_pred):
    """Fraction of sample pairs on which the two labelings agree."""
    _check_labels(labels_true, labels_pred)
    same_both, same_true, same_pred, total = _pair_counts(labels_true, labels_pred)
    apart_both = total - same_true - same_pred + same_both
    return (same_both + apart_both) / total


def adjusted_rand_index(labels_true, labels_pred):
    """Rand index corrected for chance under the permutation model."""
    _check_labels(labels_true, labels_pred)
    same_both, same_true, same_pred, total = _pair_counts(labels_true, labels_pred)
    expected = same_true * same_pred / total
    best = (same_true + same_pred) / 2
    if best == expected:
        return 1.0
    return (same_both - expected) / (best - expected)


def _entropy(counts):
    n = counts.sum()
    p = counts[counts > 0] / n
    return float(-np.sum(p * np.log(p)))


def mutual_info(labels_true, labels_pred):
    """Mutual information of two labelings in nats."""
    m = contingency_matrix(labels_true, labels_pred).astype(np.float64)
    n = m.sum()
    a = m.sum(axis=1, keepdims=True)
    b = m.sum(axis=0, keepdims=True)
    nz = m > 0
    return float(np.sum(m[nz] / n * np.log(n * m[nz] / (a @ b)[nz])))


def expected_mutual_info(contingency):
    """Exact expectation of the mutual information under the hypergeometric model."""
    m = np.asarray(contingency)
    n = int(m.sum())
    a = m.sum(axis=1)
    b = m.sum(axis=0)
    emi = 0.0
    lg_n = gammaln(n + 1)
    for ai in a:
        for bj in b:
            lo = max(1, ai + bj - n)
            hi = min(ai, bj)
            if lo > hi:
                continue
            nij = np.arange(lo, hi + 1, dtype=np.float64)
            log_pmf = (
                gammaln(ai + 1) + gammaln(bj + 1) + gammaln(n - ai + 1) + gammaln(n - bj + 1)
                - lg_n - gammaln(nij + 1) - gammaln(ai - nij + 1) - gammaln(bj - nij + 1)
                - gammaln(n - ai - bj + nij + 1)
            )
            emi += float(np.sum(nij / n * np.log(n * nij / (ai * bj)) * np.exp(log_pmf)))
    return emi


def _same_partition(m):
    return bool(np.all((m > 0).sum(axis=0) == 1) and np.all((m > 0).sum(axis=1) == 1))


def adjusted_mutual_info(labels_true, labels_pred):
    """Mutual information adjusted for chance, normalized by ``max(H(U), H(V))``.

    Returns 1 for identical partitions and 0 when the normalizer vanishes.
    """
    _check_labels(labels_true, labels_pred)
    m = contingency_matrix(labels_true, labels_pred)
    if _same_partition(m):
        return 1.0
    mi = mutual_info(labels_true, labels_pred)
    emi = expected_mutual_info(m)
    denom = max(_entropy(m.sum(axis=1)), _entropy(m.sum(axis=0))) - emi
    if abs(denom) < 1e-15:
        return 0.0
    return (mi - emi) / denom


@dataclass(frozen=True, eq=False)
class KMeansResult:
    labels: np.ndarray
    centers: np.ndarray
    inertia: float
    # inertia after every assignment step of the winning run
    history: tuple
    n_iter: int


def _sq_dist(x, centers):
    d = (x**2).sum(axis=1)[:, None] - 2 * x @ centers.T + (centers**2).sum(axis=1)[None, :]
    return np.maximum(d, 0.0)


def _plus_plus(x, k, rng):
    centers = [x[rng.integers(len(x))]]
    d = ((x - centers[0]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d.sum()
        i = rng.choice(len(x), p=d / total) if total > 0 else rng.integers(len(x))
        centers.append(x[i])
        d = np.minimum(d, ((x - x[i]) ** 2).sum(axis=1))
    return np.array(centers)


def _lloyd(x, k, rng, max_iter):
    centers = _plus_plus(x, k, rng)
    labels = None
    history = []
    for it in range(1, max_iter + 1):
        new = np.argmin(_sq_dist(x, centers), axis=1)
        history.append(float(((x - centers[new]) ** 2).sum()))
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        for j in range(k):
            members = labels == j
            if members.any():
                centers[j] = x[members].mean(axis=0)
            else:
                far = np.argmax(((x - centers[labels]) ** 2).sum(axis=1))
                centers[j] = x[far]
                labels[far] = j
    inertia = float(((x - centers[labels]) ** 2).sum())
    return labels, centers, inertia, tuple(history), it


def kmeans_fit(points, k, seed=0, restarts=10, max_iter=300, standardize=False):
    """Lloyd's algorithm with k-means++ seeding; best inertia over ``restarts`` runs."""
    x = np.asarray(points, dtype=np.float64)
    if x.ndim != 2:
        raise DimensionMismatch("points must be a 2-D array of equal-length vectors")
    if not 1 <= k <= len(x):
        raise BadK(f"k must lie in [1, {len(x)}], got {k}")
    if standardize:
        sd = x.std(axis=0)
        x = (x - x.mean(axis=0)) / np.where(sd > 0, sd, 1.0)
    best = None
    for child in np.random.SeedSequence(seed).spawn(restarts):
        run = _lloyd(x, k, np.random.default_rng(child), max_iter)
        if best is None or run[2] < best[2]:
            best = run
    return KMeansResult(*best)


def kmeans(points, k, seed=0, restarts=10, standardize=False):
    """Cluster labels from :func:`kmeans_fit`."""
    return kmeans_fit(points, k, seed, restarts, standardize=standardize).labels


class FeatureKind(enum.Enum):
    SUM_THETA_ETA = "sum-theta-eta"
    SUM_THETA_ETA_BETA = "sum-theta-eta-beta"
    SUM_THETA_NONZERO = "sum-theta-nonzero"
    SUM_P_NONZERO = "sum-p-nonzero"
    LAST_DKL = "last-dkl"
    UNFOLDED_P = "unfolded-p"
    UNFOLDED_THETA_ETA = "unfolded-theta-eta"
    BETA_THETA_ETA = "beta-theta-eta"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower().replace("_", "-"))
        except ValueError:
            raise UnknownKind(f"unknown feature kind {value!r}") from None


@dataclass(frozen=True, eq=False)
class FeatureVector:
    values: np.ndarray
    kind: FeatureKind
    shape_tag: str

    def __len__(self):
        return len(self.values)


def extract_features(result, kind):
    """Feature vector of a finished decomposition.

    ``p`` here is the model distribution of the last iteration, which is what
    the reconstruction is built from; ``N_nonzero`` counts nonzero input cells.
    """
    kind = FeatureKind.parse(kind)
    state = result.state
    theta, eta, q = state.theta, state.eta, state.q.probs
    b = result.basis.flat
    nonzero = float(np.count_nonzero(result.target.probs))
    dims = "x".join(str(n) for n in q.shape)
    if kind is FeatureKind.SUM_THETA_ETA:
        values, tag = [theta.sum(), eta.sum()], "[1x2,1]"
    elif kind is FeatureKind.SUM_THETA_ETA_BETA:
        values, tag = [theta.flat[b].sum(), eta.flat[b].sum()], "[1x2,1]"
    elif kind is FeatureKind.SUM_THETA_NONZERO:
        values, tag = [theta.sum(), nonzero], "[1x2,1]"
    elif kind is FeatureKind.SUM_P_NONZERO:
        values, tag = [q.sum(), nonzero], "[1x2,1]"
    elif kind is FeatureKind.LAST_DKL:
        values, tag = [result.kl], "[1,1]"
    elif kind is FeatureKind.UNFOLDED_P:
        values, tag = q.ravel(), f"[{dims},1]"
    elif kind is FeatureKind.UNFOLDED_THETA_ETA:
        values, tag = np.concatenate([theta.ravel(), eta.ravel()]), f"[{dims}x2,1]"
    else:
        values, tag = np.concatenate([theta.flat[b], eta.flat[b]]), f"[{b.size}x2,1]"
    return FeatureVector(np.asarray(values, dtype=np.float64), kind, tag)
