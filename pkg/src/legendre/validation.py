"""Self-checks of the engine against brute-force references.

Everything here evaluates the model by explicit enumeration of the grid, so
it shares no code path with the accumulation-based engine.
"""
from itertools import product
import sys

import numpy as np
from scipy.optimize import minimize_scalar

from .engine import (
    InitScheme,
    SolverOptions,
    compute_eta_hat,
    decompose,
    fisher_matrix,
    make_state,
)
from .poset import Basis, select_basis
from .tensor import normalize


def brute_log_weights(theta_b, members, shape):
    """``sum_{u in B, u <= v} theta_u`` for every ``v``, by enumeration (0-based coords)."""
    out = np.zeros(shape)
    for v in product(*(range(n) for n in shape)):
        out[v] = sum(t for t, u in zip(theta_b, members) if all(a <= c for a, c in zip(u, v)))
    return out


def brute_psi(theta_b, members, shape):
    s = brute_log_weights(theta_b, members, shape)
    top = s.max()
    return float(top + np.log(np.exp(s - top).sum()))


def brute_kl(p, theta_b, members):
    s = brute_log_weights(theta_b, members, p.shape)
    log_q = s - brute_psi(theta_b, members, p.shape)
    nz = p > 0
    return float(np.sum(p[nz] * (np.log(p[nz]) - log_q[nz])))


def fd_gradient(f, x, h=1e-5):
    g = np.zeros(len(x))
    for i in range(len(x)):
        e = np.zeros(len(x))
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def fd_hessian(f, x, h=1e-4):
    n = len(x)
    hess = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            ei = np.zeros(n)
            ej = np.zeros(n)
            ei[i] = h
            ej[j] = h
            hess[i, j] = (f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej) + f(x - ei - ej)) / (4 * h * h)
    return hess


def brute_minimize_kl(p, members, lo=-8.0, hi=8.0, steps=81, sweeps=200):
    """Global KL minimum over ``theta_B`` by grid search then coordinate descent."""
    grid = np.linspace(lo, hi, steps)
    best = min(product(grid, repeat=len(members)), key=lambda t: brute_kl(p, t, members))
    x = np.array(best, dtype=np.float64)
    val = brute_kl(p, x, members)
    for _ in range(sweeps):
        prev = val
        for i in range(len(x)):
            def f(t, i=i):
                y = x.copy()
                y[i] = t
                return brute_kl(p, y, members)

            res = minimize_scalar(f, bracket=(x[i] - 0.5, x[i] + 0.5), tol=1e-12)
            if res.fun < val:
                x[i], val = res.x, res.fun
        if prev - val < 1e-14:
            break
    return x, val


def _random_instance(rng, shapes=((2, 2), (2, 3), (3, 3), (3, 2))):
    shape = shapes[rng.integers(len(shapes))]
    size = int(np.prod(shape))
    m = int(rng.integers(1, size))
    flat = np.sort(rng.choice(np.arange(1, size), size=m, replace=False))
    basis = Basis.from_flat(flat, shape)
    theta_b = rng.normal(scale=1.0, size=m)
    return basis, theta_b


def check_gradient(rng, n=20, fisher=fisher_matrix):
    worst = 0.0
    for _ in range(n):
        basis, theta_b = _random_instance(rng)
        members = basis.coords.tolist()
        theta = np.zeros(basis.shape)
        theta.flat[basis.flat] = theta_b
        state = make_state(theta, basis, np.zeros(basis.shape))
        fd = fd_gradient(lambda t: brute_psi(t, members, basis.shape), theta_b)
        worst = max(worst, float(np.max(np.abs(state.eta.flat[basis.flat] - fd))))
    return worst < 1e-6, f"max |eta_B - dpsi| = {worst:.1e}"


def check_hessian(rng, n=20, fisher=fisher_matrix):
    worst = 0.0
    for _ in range(n):
        basis, theta_b = _random_instance(rng)
        members = basis.coords.tolist()
        theta = np.zeros(basis.shape)
        theta.flat[basis.flat] = theta_b
        state = make_state(theta, basis, np.zeros(basis.shape))
        fd = fd_hessian(lambda t: brute_psi(t, members, basis.shape), theta_b)
        worst = max(worst, float(np.max(np.abs(fisher(state.eta, basis) - fd))))
    return worst < 1e-5, f"max |G - d2psi| = {worst:.1e}"


def check_saturated(rng, n=10, fisher=fisher_matrix):
    worst_kl = worst_q = 0.0
    for shape in [(2, 2, 2), (3, 3)] * (n // 2):
        x = rng.uniform(0.05, 1.0, size=shape)
        r = decompose(x, basis=Basis.full(shape), options=SolverOptions(epsilon=1e-12), fisher=fisher)
        worst_kl = max(worst_kl, r.kl)
        worst_q = max(worst_q, float(np.max(np.abs(r.q.probs - r.target.probs))))
    return worst_kl < 1e-9 and worst_q < 1e-9, f"max KL = {worst_kl:.1e}, max |q - p| = {worst_q:.1e}"


def check_eprojection(rng, n=5, fisher=fisher_matrix):
    worst = 0.0
    for _ in range(n):
        x = rng.uniform(0.0, 1.0, size=(5, 5, 4))
        r = decompose(x, 3, 1, SolverOptions(), basis_seed=int(rng.integers(1 << 31)), fisher=fisher)
        if not r.converged:
            return False, f"run stopped with {r.stop_reason}"
        b = r.basis.flat
        worst = max(worst, float(np.max(np.abs(r.eta_final.flat[b] - compute_eta_hat(r.target).flat[b]))))
    return worst < SolverOptions().epsilon, f"max |eta_B - eta_hat_B| = {worst:.1e}"


def check_init_invariance(rng, fisher=fisher_matrix):
    x = rng.uniform(0.0, 1.0, size=(6, 6, 6))
    rmses = []
    for scheme in InitScheme:
        r = decompose(x, 4, 1, SolverOptions(init=scheme, init_seed=1), fisher=fisher)
        rmses.append(r.rmse_value)
    spread = max(rmses) - min(rmses)
    return spread < 1e-6, f"RMSE spread over inits = {spread:.1e}"


def check_oracle(rng, n=3, fisher=fisher_matrix):
    worst = 0.0
    for _ in range(n):
        x = rng.uniform(0.05, 1.0, size=(2, 2))
        p = normalize(x)
        basis = select_basis(p, 1, 1, seed=int(rng.integers(1 << 31)))
        r = decompose(x, basis=basis, options=SolverOptions(epsilon=1e-12), fisher=fisher)
        _, best = brute_minimize_kl(p.probs, basis.coords.tolist())
        worst = max(worst, abs(r.kl - best))
    return worst < 1e-5, f"max |KL - brute minimum| = {worst:.1e}"


CHECKS = [
    ("gradient", check_gradient),
    ("hessian", check_hessian),
    ("saturated-exactness", check_saturated),
    ("e-projection", check_eprojection),
    ("init-invariance", check_init_invariance),
    ("oracle-equivalence", check_oracle),
]


def run_validate(seed=0, fisher=fisher_matrix, out=None):
    """Run every check, print one ``PASS``/``FAIL`` line each, return overall success.

    ``fisher`` replaces the Fisher matrix routine, which lets a test inject a
    faulty one and watch the checks fail.
    """
    out = out or sys.stdout
    ok_all = True
    for name, check in CHECKS:
        rng = np.random.default_rng([seed, len(name)])
        try:
            ok, detail = check(rng, fisher=fisher)
        except Exception as exc:  # a crash is a failed property, not a crashed run
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        ok_all &= ok
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}", file=out)
    return ok_all
