"""Legendre decomposition of a non-negative tensor.

The model family is the log-linear model on the index grid

    log q_v = sum_{u in B, u <= v} theta_u - psi(theta)

whose expectation coordinates are the up-set masses ``eta_v = sum_{u >= v} q_u``.
Decomposition finds the member closest to the normalized input ``P`` in KL
divergence, which is the point where ``eta_u`` equals the input's up-set mass
``eta_hat_u`` for every basis position ``u``. The objective
``psi(theta) - <theta, eta_hat>`` is convex with gradient ``eta - eta_hat`` and
Hessian equal to the Fisher information, so natural gradient is Newton's method.

The bottom entry of every ``theta`` tensor stores ``-psi`` so that
``log q = downset_accumulate(theta)`` holds exactly on the sample space.

The sample space defaults to the support of ``P`` plus the bottom index, so
the model puts no mass where the input is zero; ``sample_space="grid"`` uses
every index instead. Restricting the space only masks ``q``: up-set sums and
the Fisher formula are unchanged because masked cells carry zero mass.
"""
from dataclasses import dataclass, field
import enum
import logging
import time

import numpy as np
import scipy.linalg

from .errors import (
    ConvergenceFailure,
    NonFiniteState,
    OverflowGuard,
    SingularSystem,
    UnknownScheme,
)
from .poset import Basis, BasisMode, downset_accumulate, select_basis, upset_accumulate
from .tensor import NormalizedTensor, as_tensor, kl_divergence, normalize, rmse

logger = logging.getLogger(__name__)


class Method(enum.Enum):
    NATURAL_GRADIENT = "natural"
    GRADIENT_DESCENT = "gradient"


class SampleSpace(enum.Enum):
    SUPPORT = "support"
    GRID = "grid"


class InitScheme(enum.Enum):
    ZERO = "zero"
    RANDOM = "random"
    UNIFORM = "uniform"
    GAUSSIAN = "gaussian"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise UnknownScheme(f"unknown initialization scheme {value!r}") from None


@dataclass(frozen=True)
class SolverOptions:
    method: Method = Method.NATURAL_GRADIENT
    learning_rate: float = 0.5
    epsilon: float = 1e-5
    repeat_max: int = 100
    ridge: float = 1e-9
    init: InitScheme = InitScheme.ZERO
    init_seed: int = 0
    sample_space: SampleSpace = SampleSpace.SUPPORT
    # backtrack natural-gradient steps until the residual shrinks
    line_search: bool = True

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        object.__setattr__(self, "init", InitScheme.parse(self.init))
        object.__setattr__(self, "sample_space", SampleSpace(self.sample_space))
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.repeat_max < 1:
            raise ValueError("repeat_max must be at least 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.ridge < 0:
            raise ValueError("ridge must be non-negative")


@dataclass(frozen=True, eq=False)
class DecompositionState:
    """One point on the model manifold, in both coordinate systems."""

    theta: np.ndarray
    eta: np.ndarray
    eta_hat: np.ndarray
    q: NormalizedTensor
    residual: float
    step: int = 0
    support: np.ndarray = None

    @property
    def psi(self):
        return -float(self.theta.flat[0])


@dataclass(frozen=True, eq=False)
class DecompositionResult:
    reconstructed: np.ndarray
    q: NormalizedTensor
    theta_final: np.ndarray
    eta_final: np.ndarray
    kl: float
    rmse_value: float
    iterations: int
    elapsed: float
    basis: Basis
    target: NormalizedTensor
    state: DecompositionState
    options: SolverOptions
    converged: bool
    stop_reason: str
    residual_history: list = field(default_factory=list)

    def __repr__(self):
        return (
            f"DecompositionResult(shape={self.q.shape}, N_par={self.n_par}, N_iter={self.iterations}, "
            f"rmse={self.rmse_value:.6g}, kl={self.kl:.6g}, stop_reason={self.stop_reason!r})"
        )

    @property
    def residual(self):
        return self.state.residual

    @property
    def n_par(self):
        return len(self.basis)

    def report(self, include_time=True):
        """Summary as a JSON-serializable dict."""
        out = {
            "shape": list(self.q.shape),
            "core_size": self.basis.core_size,
            "basis_mode": self.basis.mode.name.lower(),
            "method": self.options.method.value,
            "init": self.options.init.value,
            "sample_space": self.options.sample_space.value,
            "N_par": self.n_par,
            "N_iter": self.iterations,
            "residual": self.residual,
            "kl": self.kl,
            "rmse": self.rmse_value,
            "converged": self.converged,
            "stop_reason": self.stop_reason,
        }
        if include_time:
            out["elapsed_seconds"] = self.elapsed
        return out


def compute_eta_hat(p):
    """Up-set masses of the input distribution: the target expectation coordinates."""
    return upset_accumulate(getattr(p, "probs", p))


def sample_space_mask(p, sample_space=SampleSpace.SUPPORT):
    """Boolean mask of the sample space, or ``None`` for the whole grid."""
    if SampleSpace(sample_space) is SampleSpace.GRID:
        return None
    mask = np.asarray(getattr(p, "probs", p)) > 0
    mask.flat[0] = True
    return mask


def compute_q_and_psi(theta, basis, support=None):
    """Model distribution and log-partition value for ``theta`` restricted to ``basis``.

    Entries of ``theta`` outside the basis (the bottom included) are ignored.
    ``support`` masks the sample space; ``None`` means the whole grid. The
    exponent is shifted by its maximum before exponentiating.
    """
    theta = np.asarray(theta, dtype=np.float64)
    exponent = np.zeros(basis.shape)
    exponent.flat[basis.flat] = theta.flat[basis.flat]
    with np.errstate(over="ignore", invalid="ignore"):
        s = downset_accumulate(exponent)
    if not np.all(np.isfinite(s)):
        raise OverflowGuard("non-finite natural parameters")
    top = s.max() if support is None else s[support].max()
    w = np.exp(np.minimum(s - top, 0.0))
    if support is not None:
        w[~support] = 0.0
    total = w.sum()
    psi = float(top + np.log(total))
    q = w / total
    return NormalizedTensor(q), psi


def make_state(theta, basis, eta_hat, step=0, support=None):
    """Complete a state from its free parameters ``theta[basis]``."""
    q, psi = compute_q_and_psi(theta, basis, support)
    full = np.zeros(basis.shape)
    full.flat[basis.flat] = np.asarray(theta).flat[basis.flat]
    full.flat[0] = -psi
    eta = upset_accumulate(q.probs)
    b = basis.flat
    residual = float(np.max(np.abs(eta.flat[b] - eta_hat.flat[b]))) if b.size else 0.0
    if not (np.isfinite(residual) and np.all(np.isfinite(full))):
        raise NonFiniteState("state became non-finite")
    return DecompositionState(full, eta, eta_hat, q, residual, step, support)


def join_index(basis):
    """``(|B|, |B|)`` matrix of flat positions of pairwise joins of basis members."""
    c = basis.coords
    size = int(np.prod(basis.shape))
    dtype = np.int32 if size < 2**31 else np.int64
    strides = np.cumprod((basis.shape[1:] + (1,))[::-1])[::-1]
    out = np.zeros((len(basis), len(basis)), dtype=dtype)
    for k, stride in enumerate(strides):
        col = c[:, k].astype(dtype)
        out += np.maximum.outer(col, col) * dtype(stride)
    return out


def fisher_matrix(eta, basis, joins=None):
    """Fisher information of the model on the basis coordinates.

    ``g_uv = eta[u v v] - eta_u eta_v`` where ``u v v`` is the join; this is
    the Hessian of ``psi``.
    """
    eta = np.asarray(eta, dtype=np.float64)
    if joins is None:
        joins = join_index(basis)
    eb = eta.flat[basis.flat]
    g = eta.ravel()[joins]
    g -= np.outer(eb, eb)
    return g


def _solve(g, rhs):
    try:
        return scipy.linalg.solve(g, rhs, assume_a="pos", check_finite=False)
    except np.linalg.LinAlgError:
        pass
    try:
        return scipy.linalg.solve(g, rhs, assume_a="sym", check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem("Fisher system could not be solved") from exc


def objective(state, basis):
    """``psi(theta) - <theta_B, eta_hat_B>``: KL(P, Q) up to a constant."""
    b = basis.flat
    return state.psi - float(state.theta.flat[b] @ state.eta_hat.flat[b])


def natural_gradient_step(
    state, basis, ridge=1e-9, joins=None, fisher=fisher_matrix, line_search=False, max_halvings=60
):
    """One e-projection update: solve ``(G + ridge I) d = eta_B - eta_hat_B``, then ``theta_B -= d``.

    With ``line_search`` the step ``t d`` is halved until the objective meets
    the Armijo condition and the residual does not grow. Both hold for small
    ``t`` along the Newton direction; the full step is taken whenever it
    already qualifies, which is the usual case near the optimum.
    """
    if len(basis) == 0:
        return state
    b = basis.flat
    g = fisher(state.eta, basis, joins)
    g[np.diag_indices_from(g)] += ridge
    grad = state.eta.flat[b] - state.eta_hat.flat[b]
    delta = _solve(g, grad)
    if not np.all(np.isfinite(delta)):
        raise NonFiniteState("natural gradient step is not finite")
    f0 = objective(state, basis) if line_search else 0.0
    slope = float(grad @ delta)
    t = 1.0
    new = None
    for _ in range(max_halvings + 1):
        theta = state.theta.copy()
        theta.flat[b] -= t * delta
        try:
            new = make_state(theta, basis, state.eta_hat, state.step + 1, state.support)
        except NonFiniteState:
            if not line_search:
                raise
            new = None
        if not line_search:
            break
        if (
            new is not None
            and objective(new, basis) <= f0 - 1e-4 * t * slope
            and new.residual <= state.residual
        ):
            break
        t /= 2
    if new is None:
        raise NonFiniteState("no finite step along the natural gradient")
    return new


def gradient_descent_step(state, basis, learning_rate=0.5):
    """Plain gradient step ``theta_B -= lr (eta_B - eta_hat_B)``."""
    b = basis.flat
    theta = state.theta.copy()
    theta.flat[b] -= learning_rate * (state.eta.flat[b] - state.eta_hat.flat[b])
    return make_state(theta, basis, state.eta_hat, state.step + 1, state.support)


def theta_max_for(p):
    """Largest log-ratio between nonzero probabilities; scale for random/uniform init."""
    probs = np.asarray(getattr(p, "probs", p))
    nz = probs[probs > 0]
    return float(np.log(nz.max() / nz.min()))


def init_theta(scheme, basis, shape=None, seed=0, theta_max=1.0):
    """Initial natural parameters, nonzero only on basis positions.

    ``gaussian`` evaluates the standard normal density at
    ``x = (1-based row-major position) - |grid| / 2``.
    """
    scheme = InitScheme.parse(scheme)
    shape = tuple(basis.shape if shape is None else shape)
    size = int(np.prod(shape))
    theta = np.zeros(shape)
    b = basis.flat
    if scheme is InitScheme.ZERO:
        pass
    elif scheme is InitScheme.RANDOM:
        rng = np.random.default_rng(seed)
        theta.flat[b] = rng.uniform(0.0, theta_max, size=b.size)
    elif scheme is InitScheme.UNIFORM:
        theta.flat[b] = theta_max / size
    elif scheme is InitScheme.GAUSSIAN:
        x = (b + 1) - size / 2
        theta.flat[b] = np.exp(-(x**2) / 2) / np.sqrt(2 * np.pi)
    return theta


def reconstruct(theta, basis, scale=1.0, support=None):
    """Tensor ``scale * q`` for the model with parameters ``theta`` on ``basis``."""
    q, _ = compute_q_and_psi(theta, basis, support)
    return q.probs * scale


def decompose(
    x,
    core_size=None,
    basis_mode=BasisMode.RANDOM,
    options=None,
    *,
    basis=None,
    basis_seed=0,
    fisher=fisher_matrix,
):
    """Legendre decomposition of a non-negative tensor.

    Parameters
    ----------
    x : array_like
        Non-negative tensor with at least one positive entry.
    core_size : int
        Basis positions per slice of the last axis. Ignored when ``basis`` is given.
    basis_mode : BasisMode or int
        ``1``/``RANDOM``, ``2``/``PARTIAL_ORDER`` or ``3``/``STRIDE``.
    options : SolverOptions, optional
    basis : Basis, optional
        Use this basis instead of selecting one. May be empty.
    basis_seed : int
        Seed of the random basis draw.

    Returns
    -------
    DecompositionResult
        Hitting ``repeat_max`` is a normal return with ``converged=False``.
        If the residual grows after an unconverged step the previous state is
        returned with ``stop_reason="diverging"``.
    """
    options = options or SolverOptions()
    x = as_tensor(x)
    p = normalize(x)
    if basis is None:
        basis = select_basis(p, core_size, basis_mode, basis_seed)
    eta_hat = compute_eta_hat(p)
    support = sample_space_mask(p, options.sample_space)
    theta0 = init_theta(options.init, basis, x.shape, options.init_seed, theta_max_for(p))

    if options.method is Method.NATURAL_GRADIENT:
        joins = join_index(basis) if len(basis) else None

        def advance(s):
            return natural_gradient_step(s, basis, options.ridge, joins, fisher, options.line_search)
    else:

        def advance(s):
            return gradient_descent_step(s, basis, options.learning_rate)

    start = time.perf_counter()
    try:
        state = make_state(theta0, basis, eta_hat, support=support)
        history = [state.residual]
        stop = "max_iter"
        residual_prev = np.inf
        if state.residual < options.epsilon:
            stop = "converged"
        while stop == "max_iter" and state.step < options.repeat_max:
            new = advance(state)
            history.append(new.residual)
            logger.debug("step %d residual %.3e", new.step, new.residual)
            if residual_prev >= options.epsilon and new.residual > residual_prev:
                stop = "diverging"
                break
            state, residual_prev = new, new.residual
            if state.residual < options.epsilon:
                stop = "converged"
    except NonFiniteState as exc:
        raise ConvergenceFailure(str(exc)) from exc
    elapsed = time.perf_counter() - start

    reconstructed = state.q.probs * p.scale
    return DecompositionResult(
        reconstructed=reconstructed,
        q=state.q,
        theta_final=state.theta,
        eta_final=state.eta,
        kl=kl_divergence(p, state.q),
        rmse_value=rmse(x, reconstructed),
        iterations=state.step,
        elapsed=elapsed,
        basis=basis,
        target=p,
        state=state,
        options=options,
        converged=stop == "converged",
        stop_reason=stop,
        residual_history=history,
    )
