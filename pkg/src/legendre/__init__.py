"""Legendre decomposition of non-negative tensors.

A normalized tensor is projected, in KL divergence, onto a log-linear model
over the index grid whose free parameters sit on a chosen basis of indices.
"""
__version__ = "0.1.0"

from .clustering import (
    FeatureKind,
    FeatureVector,
    adjusted_mutual_info,
    adjusted_rand_index,
    extract_features,
    kmeans,
    rand_index,
)
from .engine import (
    DecompositionResult,
    DecompositionState,
    InitScheme,
    Method,
    SampleSpace,
    SolverOptions,
    compute_eta_hat,
    compute_q_and_psi,
    decompose,
    fisher_matrix,
    gradient_descent_step,
    init_theta,
    natural_gradient_step,
    reconstruct,
)
from .poset import (
    Basis,
    BasisMode,
    IndexPoset,
    downset_accumulate,
    join,
    select_basis,
    upset_accumulate,
    zeta,
)
from .tensor import NormalizedTensor, kl_divergence, normalize, read_tensor_csv, rmse, write_tensor_csv
