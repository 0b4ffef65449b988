"""Level-2 rough-path algebra over R^m and p-variation norms.

Group law on G = R^m (+) (R^m (x) R^m):

    (a, M) * (b, N) = (a + b, M + a (x) b + N)
    (a, M)^-1       = (-a, -M + a (x) a)

A path on a grid is stored as its values X_t, M_t anchored at the identity;
increments are recovered by group division X_s^-1 * X_t.
"""
from dataclasses import dataclass
from itertools import combinations
import math

import numpy as np

from . import kernels

DEFAULT_RTOL = 1e-12
FLAVORS = ("geometric-continuous", "cadlag-ito")


@dataclass(frozen=True)
class Level2Increment:
    a: np.ndarray
    M: np.ndarray

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.a, dtype=float))
        M = np.asarray(self.M, dtype=float)
        if M.ndim == 0:
            M = M.reshape(1, 1)
        if a.ndim != 1 or M.shape != (a.size, a.size):
            raise ValueError(f"inconsistent shapes a{a.shape} M{M.shape}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "M", M)

    @property
    def dim(self):
        return self.a.size

    @classmethod
    def identity(cls, m):
        return cls(np.zeros(m), np.zeros((m, m)))

    def __mul__(self, other):
        return group_mul(self, other)

    def allclose(self, other, rtol=DEFAULT_RTOL):
        scale = max(1.0, np.abs(self.a).max(initial=0), np.abs(self.M).max(initial=0))
        return bool(
            np.allclose(self.a, other.a, rtol=0, atol=rtol * scale)
            and np.allclose(self.M, other.M, rtol=0, atol=rtol * scale)
        )


def group_mul(x, y):
    if x.dim != y.dim:
        raise ValueError(f"dimension mismatch: {x.dim} vs {y.dim}")
    return Level2Increment(x.a + y.a, x.M + np.outer(x.a, y.a) + y.M)


def group_inv(x):
    return Level2Increment(-x.a, -x.M + np.outer(x.a, x.a))


def sym_defect(x):
    """Sym(M) - a (x) a / 2; zero exactly for weakly geometric elements."""
    return 0.5 * (x.M + x.M.T) - 0.5 * np.outer(x.a, x.a)


@dataclass(frozen=True)
class RoughPathGrid:
    """Group-valued path sampled on a grid of [0, 1].

    ``X`` has shape (N, m), ``M`` shape (N, m, m); ``X[0]`` and ``M[0]`` are
    zero (the path starts at the identity).
    """

    times: np.ndarray
    X: np.ndarray
    M: np.ndarray
    flavor: str = "geometric-continuous"

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        M = np.asarray(self.M, dtype=float)
        if M.ndim == 1:
            M = M[:, None, None]
        N, m = X.shape
        if times.shape != (N,) or M.shape != (N, m, m):
            raise ValueError(f"shape mismatch: times{times.shape} X{X.shape} M{M.shape}")
        validate_grid(times)
        if self.flavor not in FLAVORS:
            raise ValueError(f"unknown flavor {self.flavor!r}")
        if np.any(X[0] != 0) or np.any(M[0] != 0):
            raise ValueError("path must start at the group identity")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(M))):
            raise ValueError("non-finite path values")
        for name, arr in (("times", times), ("X", X), ("M", M)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def dim(self):
        return self.X.shape[1]

    def __len__(self):
        return self.times.size

    def value(self, i):
        return Level2Increment(self.X[i], self.M[i])

    def increment(self, i, j):
        """X_{t_i, t_j} as a group element."""
        return group_mul(group_inv(self.value(i)), self.value(j))

    def step_increments(self):
        """Consecutive increments (dX, dXX), shapes (N-1, m) and (N-1, m, m)."""
        X, M = self.X, self.M
        dX = np.diff(X, axis=0)
        dM = np.diff(M, axis=0) - X[:-1, :, None] * dX[:, None, :]
        return dX, dM


def validate_grid(times):
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size < 2:
        raise ValueError("grid needs at least two times")
    if times[0] != 0.0 or times[-1] != 1.0:
        raise ValueError("grid must start at 0 and end at 1")
    if np.any(np.diff(times) <= 0):
        raise ValueError("grid times must be strictly increasing")
    return times


def _c(arr):
    return np.ascontiguousarray(arr, dtype=np.float64)


def path_qvar(values, q):
    """q-variation (sup_P sum |X_{s,t}|^q)^(1/q) of an R^d-valued grid path."""
    X = np.asarray(values, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    return kernels.qvar_first(_c(X), float(q)) ** (1.0 / q)


def second_level_qvar(path, q, other=None):
    """(sup_P sum |XX_{s,t} - XXo_{s,t}|^q)^(1/q); ``other=None`` means zero."""
    if other is None:
        Xt, Mt = np.zeros_like(path.X), np.zeros_like(path.M)
    else:
        Xt, Mt = other.X, other.M
    s = kernels.qvar_second(_c(path.X), _c(path.M), _c(Xt), _c(Mt), float(q))
    return s ** (1.0 / q)


def _check_p(p):
    if not 2.0 <= p < 3.0:
        raise ValueError(f"p must lie in [2, 3), got {p}")


def p_var_homog(path, p):
    """Homogeneous norm ||X||_{p-var} + ||XX||_{p/2-var}^{1/2}.

    Both suprema are exact over partitions built from grid points.
    """
    _check_p(p)
    return path_qvar(path.X, p) + math.sqrt(second_level_qvar(path, p / 2))


def p_var_inhomog(path, p):
    _check_p(p)
    return path_qvar(path.X, p) + second_level_qvar(path, p / 2)


def p_var_inhomog_dist(x, y, p):
    """||X - Y||_{p-var} + ||XX - YY||_{p/2-var} on a shared grid."""
    _check_p(p)
    if x.times.shape != y.times.shape or np.any(x.times != y.times):
        raise ValueError("paths live on different grids; resample first")
    if x.dim != y.dim:
        raise ValueError("dimension mismatch")
    return path_qvar(x.X - y.X, p) + second_level_qvar(x, p / 2, other=y)


def holder_norm(path, alpha):
    """max over grid pairs of |X_st|/|t-s|^a + (|XX_st|/|t-s|^(2a))^(1/2)."""
    # rough paths need alpha <= 1/2; alpha up to 1 is accepted for smooth checks
    if not 0 < alpha <= 1:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    t, X, M = path.times, path.X, path.M
    s_idx, t_idx = np.triu_indices(t.size, k=1)
    dt = t[t_idx] - t[s_idx]
    dX = X[t_idx] - X[s_idx]
    dM = M[t_idx] - M[s_idx] - X[s_idx][:, :, None] * dX[:, None, :]
    first = np.linalg.norm(dX, axis=1) / dt ** alpha
    second = np.sqrt(np.linalg.norm(dM, axis=(1, 2)) / dt ** (2 * alpha))
    return float(np.max(first + second))


def p_var_upper_bound(values, q, block=None):
    """Cheap upper bound on sup_P sum |X_{s,t}|^q for q >= 1 (first level).

    The grid is cut into blocks of ``block`` points. Splitting every partition
    interval at the first and last block boundary it crosses and using
    |x + y + z|^q <= 3^(q-1) (|x|^q + |y|^q + |z|^q) together with
    superadditivity gives

        sum <= 3^(q-1) * (sum_blocks exact(block) + exact(block boundaries)).

    Cost O(N * block + (N / block)^2) instead of O(N^2). Returns the bound
    on the q-th power sum (not its 1/q-th root).
    """
    if q < 1:
        raise ValueError("the block bound needs q >= 1")
    X = np.asarray(values, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    N = X.shape[0]
    if block is None:
        block = max(2, int(math.isqrt(N)))
    edges = list(range(0, N - 1, block)) + [N - 1]
    inner = sum(kernels.qvar_first(_c(X[a:b + 1]), q) for a, b in zip(edges[:-1], edges[1:]))
    coarse = kernels.qvar_first(_c(X[edges]), q)
    return 3.0 ** (q - 1) * (inner + coarse)


def enumerate_qvar(dist, N, q):
    """Brute force over all 2^(N-2) partitions of range(N); dist(s, t) -> float.

    Oracle for the dynamic program; only sensible for N <= ~16.
    """
    best = 0.0
    inner = range(1, N - 1)
    for r in range(N - 1):
        for pts in combinations(inner, r):
            nodes = (0, *pts, N - 1)
            best = max(best, sum(dist(s, t) ** q for s, t in zip(nodes[:-1], nodes[1:])))
    return best
