"""Batch decomposition and parameter-clustering experiments."""
from concurrent.futures import ProcessPoolExecutor
import csv
from dataclasses import dataclass
from functools import partial
import os

import numpy as np

from .clustering import (
    FeatureKind,
    adjusted_mutual_info,
    adjusted_rand_index,
    contingency_matrix,
    extract_features,
    kmeans,
)
from .engine import decompose
from .errors import ShapeMismatch

THREADS_ENV = "LEGENDRE_THREADS"


def worker_count(requested=None):
    if requested is not None:
        return max(1, int(requested))
    cap = os.environ.get(THREADS_ENV)
    return max(1, int(cap)) if cap else 1


def decompose_many(tensors, core_size, basis_mode, options=None, basis_seed=0, workers=None):
    """Decompose every tensor independently; results keep input order."""
    run = partial(decompose, core_size=core_size, basis_mode=basis_mode, options=options, basis_seed=basis_seed)
    n = worker_count(workers)
    if n == 1:
        return [run(t) for t in tensors]
    with ProcessPoolExecutor(max_workers=n) as pool:
        return list(pool.map(run, tensors))


def stack_features(features):
    """Matrix of feature rows.

    ``beta-theta-eta`` vectors have length ``2 |B|`` and ``|B|`` varies when
    slices clamp; each half is cut to the shortest basis in the batch.
    """
    lengths = {len(f) for f in features}
    if len(lengths) == 1:
        return np.stack([f.values for f in features])
    if features[0].kind is not FeatureKind.BETA_THETA_ETA:
        raise ShapeMismatch(f"feature vectors of differing lengths {sorted(lengths)}")
    half = min(lengths) // 2
    rows = []
    for f in features:
        m = len(f) // 2
        rows.append(np.concatenate([f.values[:half], f.values[m: m + half]]))
    return np.stack(rows)


@dataclass(frozen=True, eq=False)
class ClusterReport:
    kind: FeatureKind
    ami: float
    ari: float
    contingency: np.ndarray
    predicted: np.ndarray
    shape_tag: str


def cluster_results(results, labels, kinds, k=10, seed=0, restarts=10, standardize=False):
    """Cluster decomposition results by each feature kind and score against ``labels``."""
    reports = []
    for kind in kinds:
        feats = [extract_features(r, kind) for r in results]
        x = stack_features(feats)
        pred = kmeans(x, k, seed=seed, restarts=restarts, standardize=standardize)
        reports.append(
            ClusterReport(
                kind=FeatureKind.parse(kind),
                ami=adjusted_mutual_info(labels, pred),
                ari=adjusted_rand_index(labels, pred),
                contingency=class_by_digit(labels, pred, k),
                predicted=pred,
                shape_tag=feats[0].shape_tag if len({len(f) for f in feats}) == 1 else f"[{x.shape[1] // 2}x2,1]",
            )
        )
    return reports


def class_by_digit(labels, predicted, k=10):
    """Rows are predicted classes ``0..k-1``, columns the sorted true digits."""
    digits = np.unique(labels)
    table = np.zeros((k, len(digits)), dtype=np.int64)
    m = contingency_matrix(labels, predicted)
    classes = np.unique(predicted)
    table[classes] = m.T
    return table


def write_contingency_csv(path, report, digits):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([report.kind.value] + [f"D{d}" for d in digits])
        for i, row in enumerate(report.contingency):
            w.writerow([f"C{i}"] + [int(v) for v in row])


def write_metrics_csv(path, reports):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["kind", "AMI", "ARI"])
        for r in reports:
            w.writerow([r.kind.value, f"{r.ami:.5f}", f"{r.ari:.5f}"])
