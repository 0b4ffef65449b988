"""Canonical rough-path lifts of sampled paths.

Sample values are post-jump (cadlag convention): for the Ito lift the path
jumps by X_j - X_{j-1} at time t_j, and the integrand is the left limit.
"""
from dataclasses import dataclass

import numpy as np

from .rng import replica_generator
from .rough_core import RoughPathGrid, validate_grid

MODES = ("piecewise_linear", "piecewise_constant_ito")


@dataclass(frozen=True)
class LiftRequest:
    base_values: np.ndarray
    times: np.ndarray
    mode: str = "piecewise_linear"

    def __post_init__(self):
        vals = np.asarray(self.base_values, dtype=float)
        if vals.ndim == 1:
            vals = vals[:, None]
        times = validate_grid(self.times)
        if vals.shape[0] != times.size:
            raise ValueError("one sample per grid time required")
        if not np.all(np.isfinite(vals)):
            raise ValueError("non-finite sample values")
        if self.mode not in MODES:
            raise ValueError(f"unknown lift mode {self.mode!r}")
        object.__setattr__(self, "base_values", vals)
        object.__setattr__(self, "times", times)


def ito_second_level(X):
    """Running sum of X_{r-} (x) dX_r for anchored samples X of shape (..., N, m)."""
    dX = np.diff(X, axis=-2)
    terms = X[..., :-1, :, None] * dX[..., :, None, :]
    M = np.zeros(X.shape + (X.shape[-1],))
    np.cumsum(terms, axis=-3, out=M[..., 1:, :, :])
    return M


def linear_second_level(X):
    """Same as :func:`ito_second_level` plus the chord term dX (x) dX / 2."""
    dX = np.diff(X, axis=-2)
    terms = X[..., :-1, :, None] * dX[..., :, None, :] + 0.5 * dX[..., :, None] * dX[..., None, :]
    M = np.zeros(X.shape + (X.shape[-1],))
    np.cumsum(terms, axis=-3, out=M[..., 1:, :, :])
    return M


def _anchored(req, mode):
    if req.mode != mode:
        raise ValueError(f"request mode is {req.mode!r}, expected {mode!r}")
    return req.base_values - req.base_values[0]


def lift_piecewise_linear(req):
    X = _anchored(req, "piecewise_linear")
    return RoughPathGrid(req.times, X, linear_second_level(X), "geometric-continuous")


def lift_piecewise_constant_ito(req):
    X = _anchored(req, "piecewise_constant_ito")
    return RoughPathGrid(req.times, X, ito_second_level(X), "cadlag-ito")


def lift(values, times, mode="piecewise_linear"):
    req = LiftRequest(values, times, mode)
    if mode == "piecewise_linear":
        return lift_piecewise_linear(req)
    return lift_piecewise_constant_ito(req)


def psd_sqrt(sigma, tol=1e-12):
    """Symmetric square root of a PSD matrix; raises on negative spectrum."""
    sigma = np.atleast_2d(np.asarray(sigma, dtype=float))
    if sigma.shape[0] != sigma.shape[1] or not np.allclose(sigma, sigma.T, atol=1e-12):
        raise ValueError("covariance must be a symmetric square matrix")
    w, U = np.linalg.eigh(sigma)
    if w.min() < -tol * max(1.0, abs(w).max()):
        raise ValueError(f"covariance is not positive semidefinite (min eig {w.min():.3g})")
    return (U * np.sqrt(np.clip(w, 0, None))) @ U.T


def brownian_increments(sigma, n_steps, rng):
    """(n_steps, m) Gaussian increments with covariance sigma / n_steps."""
    root = psd_sqrt(sigma)
    z = rng.standard_normal((n_steps, root.shape[0]))
    return z @ root.T / np.sqrt(n_steps)


def brownian_rough_path(sigma, gamma, mesh, seed, replica=0):
    """Stratonovich Brownian lift on a uniform mesh plus area drift (t - s) gamma."""
    sigma = np.atleast_2d(np.asarray(sigma, dtype=float))
    gamma = np.atleast_2d(np.asarray(gamma, dtype=float))
    if gamma.shape != sigma.shape:
        raise ValueError("gamma must match sigma's shape")
    rng = replica_generator(seed, "brownian", replica)
    dB = brownian_increments(sigma, int(mesh), rng)
    times = np.linspace(0.0, 1.0, int(mesh) + 1)
    X = np.vstack([np.zeros((1, sigma.shape[0])), np.cumsum(dB, axis=0)])
    M = linear_second_level(X) + times[:, None, None] * gamma
    return RoughPathGrid(times, X, M, "geometric-continuous")


def pure_area_path(gamma, times):
    """Zero first level, second level (t - s) gamma."""
    gamma = np.atleast_2d(np.asarray(gamma, dtype=float))
    times = validate_grid(times)
    m = gamma.shape[0]
    return RoughPathGrid(times, np.zeros((times.size, m)), times[:, None, None] * gamma)


def _rel(x, y):
    num = max(np.max(np.abs(x.a - y.a)), np.max(np.abs(x.M - y.M)))
    scale = max(1.0, np.max(np.abs(y.a)), np.max(np.abs(y.M)))
    return float(num / scale)


def identity_suite(cases=1000, seed=1):
    """Maximal relative errors of the algebraic identities over random cases.

    Keys: ``group`` (associativity, inverse, unit), ``chen`` (multiplicativity
    of increments of both lifts), ``geometric`` (symmetric part of
    piecewise-linear increments equals a (x) a / 2) and ``ito_jumps``
    (symmetric part of Ito increments equals a (x) a / 2 minus half the sum
    of squared jumps).
    """
    from .rough_core import Level2Increment, group_inv, group_mul, sym_defect

    err = {"group": 0.0, "chen": 0.0, "geometric": 0.0, "ito_jumps": 0.0}
    for case in range(cases):
        rng = replica_generator(seed, "lift-check", case)
        m = int(rng.integers(1, 5))
        g = [Level2Increment(rng.standard_normal(m), rng.standard_normal((m, m)))
             for _ in range(3)]
        e = Level2Increment.identity(m)
        x, y, z = g
        err["group"] = max(err["group"],
                           _rel(group_mul(group_mul(x, y), z), group_mul(x, group_mul(y, z))),
                           _rel(group_mul(x, group_inv(x)), e), _rel(group_mul(group_inv(x), x), e),
                           _rel(group_mul(e, x), x), _rel(group_mul(x, e), x))
        N = int(rng.integers(3, 24))
        times = np.sort(rng.uniform(0, 1, N - 2))
        times = np.concatenate([[0.0], times, [1.0]])
        if np.any(np.diff(times) <= 0):
            continue
        vals = np.cumsum(rng.standard_normal((N, m)), axis=0)
        i, j, k = np.sort(rng.choice(N, 3, replace=False))
        lin = lift(vals, times, "piecewise_linear")
        ito = lift(vals, times, "piecewise_constant_ito")
        for path in (lin, ito):
            err["chen"] = max(err["chen"], _rel(group_mul(path.increment(i, j), path.increment(j, k)),
                                                path.increment(i, k)))
        inc = lin.increment(i, k)
        scale = max(1.0, float(np.max(np.abs(inc.M))))
        err["geometric"] = max(err["geometric"], float(np.max(np.abs(sym_defect(inc)))) / scale)
        inc = ito.increment(i, k)
        jumps = np.diff(ito.X, axis=0)[i:k]
        expect = -0.5 * np.einsum("rj,rk->jk", jumps, jumps)
        scale = max(1.0, float(np.max(np.abs(inc.M))))
        err["ito_jumps"] = max(err["ito_jumps"],
                               float(np.max(np.abs(sym_defect(inc) - expect))) / scale)
    return err
