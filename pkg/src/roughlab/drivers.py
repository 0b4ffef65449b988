"""Fast dynamics: interval maps, IID walks and OU physical Brownian motion.

Map orbits start from Lebesgue measure. Floating-point doubling collapses
to 0 after ~53 steps, so batch orbits carry the 53-bit binary expansion of
y and append one fresh random bit per step; this is the doubling map acting
on a Lebesgue-random point, exactly in law. The intermittent map uses the
same bit injection at the 2^-53 level on its float state.
"""
from dataclasses import dataclass, field
import math
from typing import Callable

import numpy as np
from scipy import linalg

from . import kernels
from .lifts import linear_second_level, ito_second_level, psd_sqrt
from .rng import replica_generator, stream_keys, uniform_from_key
from .rough_core import RoughPathGrid

DEFAULT_CHUNK = 512
MAP_KINDS = ("doubling", "lsv")


@dataclass(frozen=True)
class MapDriver:
    kind: str = "doubling"
    gamma: float = 0.0
    burn_in: int = 1000
    mixing: bool = True

    def __post_init__(self):
        if self.kind not in MAP_KINDS:
            raise ValueError(f"unknown map kind {self.kind!r}")
        if not 0.0 <= self.gamma < 0.5:
            raise ValueError("intermittency parameter must lie in [0, 1/2) (CLT regime)")
        if self.kind == "doubling" and self.gamma != 0.0:
            raise ValueError("the doubling map has gamma = 0")
        if self.burn_in < 0:
            raise ValueError("burn_in must be non-negative")

    @property
    def exact_doubling(self):
        return self.gamma == 0.0

    def __call__(self, y):
        return lsv_map(y, self.gamma)


def lsv_map(y, gamma):
    """y (1 + (2y)^gamma) for y < 1/2, 2y - 1 otherwise."""
    y = np.asarray(y, dtype=float)
    left = y < 0.5
    out = np.where(left, y * (1.0 + np.power(2.0 * np.where(left, y, 0.0), gamma)), 2.0 * y - 1.0)
    return out if out.ndim else float(out)


def iterate_map(d, y0, n):
    """Plain floating-point orbit (y0, T y0, ..., T^{n-1} y0)."""
    if not 0.0 <= y0 <= 1.0:
        raise ValueError("y0 must lie in [0, 1]")
    orbit = np.empty(n)
    y = float(y0)
    for j in range(n):
        orbit[j] = y
        y = lsv_map(y, d.gamma)
    return orbit


@dataclass(frozen=True)
class Observable:
    fn: Callable
    dim: int = 1
    name: str = "custom"
    mean_zero: bool = True

    def __call__(self, y):
        out = np.asarray(self.fn(y), dtype=float)
        if self.dim == 1 and out.shape == np.shape(y):
            out = out[..., None]
        return out


def centered_id(shift=0.5):
    return Observable(lambda y: y - shift, 1, "centered-id")


def cosine():
    return Observable(lambda y: np.cos(2 * np.pi * y), 1, "cos")


def zero_observable(dim=1):
    return Observable(lambda y: np.zeros(np.shape(y) + (dim,)), dim, "zero")


@dataclass(frozen=True)
class WalkDriver:
    law: str = "rademacher"
    sigma: np.ndarray = field(default_factory=lambda: np.eye(1))
    mixing: bool = True

    def __post_init__(self):
        if self.law not in ("rademacher", "gaussian"):
            raise ValueError(f"unknown increment law {self.law!r}")
        object.__setattr__(self, "sigma", np.atleast_2d(np.asarray(self.sigma, dtype=float)))
        psd_sqrt(self.sigma)

    @property
    def dim(self):
        return self.sigma.shape[0]

    def draw(self, rng, size):
        root = psd_sqrt(self.sigma)
        if self.law == "rademacher":
            z = rng.integers(0, 2, size=(size, self.dim)) * 2.0 - 1.0
        else:
            z = rng.standard_normal((size, self.dim))
        return z @ root.T


@dataclass(frozen=True)
class OUDriver:
    """Physical Brownian motion W_eps(t) = eps * int_0^{t/eps^2} Y ds, dY = -M Y dt + dB."""

    friction: np.ndarray
    epsilon: float = 0.1
    mesh: int = 2000
    stationary_start: bool = True
    mixing: bool = True

    def __post_init__(self):
        M = np.atleast_2d(np.asarray(self.friction, dtype=float))
        object.__setattr__(self, "friction", M)
        eig = np.linalg.eigvals(M)
        if np.min(eig.real) <= 0:
            raise ValueError("friction spectrum must have positive real part")
        if not 0 < self.epsilon <= 1:
            raise ValueError("epsilon must lie in (0, 1]")
        if self.steps_per_relaxation < 10:
            raise ValueError(
                f"mesh too coarse: {self.steps_per_relaxation:.2f} steps per relaxation time (< 10)"
            )

    @property
    def dim(self):
        return self.friction.shape[0]

    @property
    def fast_step(self):
        return self.epsilon ** -2 / self.mesh

    @property
    def steps_per_relaxation(self):
        rate = np.max(np.abs(np.linalg.eigvals(self.friction)))
        return 1.0 / rate / self.fast_step

    def limit_covariance(self):
        Minv = np.linalg.inv(self.friction)
        return Minv @ Minv.T

    def stationary_covariance(self):
        return linalg.solve_continuous_lyapunov(self.friction, np.eye(self.dim))

    def limit_area_drift(self):
        """Skew part of int_0^inf E[Y_0 (x) Y_s] ds = C M^-T (closed form)."""
        G = self.stationary_covariance() @ np.linalg.inv(self.friction).T
        return 0.5 * (G - G.T)

    def transition(self):
        """Exact one-step law of (Y, int Y) over one fast step: (Phi, noise root)."""
        m = self.dim
        F = np.zeros((2 * m, 2 * m))
        F[:m, :m] = -self.friction
        F[m:, :m] = np.eye(m)
        GG = np.zeros((2 * m, 2 * m))
        GG[:m, :m] = np.eye(m)
        h = self.fast_step
        big = np.block([[-F, GG], [np.zeros_like(F), F.T]]) * h
        E = linalg.expm(big)
        Phi = E[2 * m:, 2 * m:].T
        Q = Phi @ E[:2 * m, 2 * m:]
        Q = 0.5 * (Q + Q.T)
        return Phi, psd_sqrt(Q, tol=1e-9)


# ---------------------------------------------------------------- map batches

def _chunk_sizes(n, chunk, cuts=()):
    edges = sorted({0, n, *[c for c in cuts if 0 < c < n]})
    for a, b in zip(edges[:-1], edges[1:]):
        while a < b:
            step = min(chunk, b - a)
            yield step
            a += step


def map_orbit_chunks(d, n, replicas, seed, chunk=DEFAULT_CHUNK, cuts=()):
    """Yield orbit chunks of shape (R, c) covering Y_0 .. Y_{n-1} per replica.

    ``replicas`` is a count or an array of replica indices; ``cuts`` forces
    chunk boundaries at the given time indices.
    """
    idx = np.arange(replicas) if np.isscalar(replicas) else np.asarray(replicas)
    rs = stream_keys(seed, "map", idx)
    k = uniform_from_key(rs)
    R = idx.size
    if d.exact_doubling:
        state, step = k, kernels.doubling_chunk
        args = ()
    else:
        state = k.astype(np.float64) * 2.0 ** -53
        step = kernels.lsv_chunk
        args = (float(d.gamma),)

    def advance(out):
        if args:
            step(state, rs, args[0], out)
        else:
            step(state, rs, out)

    for size in _chunk_sizes(d.burn_in, chunk):
        advance(np.empty((R, size)))
    for size in _chunk_sizes(n, chunk, cuts):
        out = np.empty((R, size))
        advance(out)
        yield out


def increment_chunks(driver, observable, n, replicas, seed, chunk=DEFAULT_CHUNK, cuts=()):
    """Yield observable values v(Y_j) (or walk increments) as (R, c, m) chunks."""
    if isinstance(driver, MapDriver):
        for orb in map_orbit_chunks(driver, n, replicas, seed, chunk, cuts):
            yield observable(orb)
    elif isinstance(driver, WalkDriver):
        idx = np.arange(replicas) if np.isscalar(replicas) else np.asarray(replicas)
        gens = [replica_generator(seed, "walk", int(i)) for i in idx]
        for size in _chunk_sizes(n, chunk, cuts):
            yield np.stack([driver.draw(g, size) for g in gens])
    else:
        raise TypeError(f"discrete increments unavailable for {type(driver).__name__}")


def driver_dim(driver, observable=None):
    if isinstance(driver, MapDriver):
        return observable.dim
    return driver.dim


# ------------------------------------------------------ single-replica paths

@dataclass
class BirkhoffPath:
    times: np.ndarray
    values: np.ndarray
    sums: np.ndarray
    increments: np.ndarray


def birkhoff_path(d, v, n, seed=0, replica=0, y0=None):
    """W_n(t) = n^{-1/2} v_{floor(nt)} on the grid {j/n} plus the raw sums v_j.

    With ``y0`` given (map drivers only) the plain floating-point orbit from
    y0 is used instead of a random Lebesgue start, without burn-in.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if y0 is not None:
        inc = v(iterate_map(d, y0, n))
    else:
        inc = np.concatenate(list(increment_chunks(d, v, n, [replica], seed)), axis=1)[0]
    sums = np.vstack([np.zeros((1, inc.shape[1])), np.cumsum(inc, axis=0)])
    return BirkhoffPath(np.arange(n + 1) / n, sums / math.sqrt(n), sums, inc)


def iterated_sum_path(d, v, n, seed=0, replica=0, y0=None):
    """Ito lift of the Birkhoff path together with S_n = sum_{i<=j} v_i (x) v_j."""
    bp = birkhoff_path(d, v, n, seed, replica, y0)
    path = RoughPathGrid(bp.times, bp.values, ito_second_level(bp.values), "cadlag-ito")
    diag = np.einsum("jk,jl->kl", bp.increments, bp.increments)
    S = n * path.M[-1] + diag
    return path, S


def walk_rough_path(d, n, seed=0, replica=0, lift="ito"):
    """Scaled walk n^{-1/2} Z_{floor(nt)} with Ito or Stratonovich lift."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = replica_generator(seed, "walk", replica)
    inc = d.draw(rng, n) / math.sqrt(n)
    X = np.vstack([np.zeros((1, d.dim)), np.cumsum(inc, axis=0)])
    times = np.arange(n + 1) / n
    if lift == "ito":
        return RoughPathGrid(times, X, ito_second_level(X), "cadlag-ito")
    if lift == "stratonovich":
        return RoughPathGrid(times, X, linear_second_level(X), "geometric-continuous")
    raise ValueError(f"lift must be 'ito' or 'stratonovich', got {lift!r}")


# ------------------------------------------------------------------ OU paths

def ou_increment_blocks(d, replicas, seed, block=512):
    """Yield (start, dW) with dW of shape (R_block, mesh, m): mesh increments of W_eps."""
    Phi, root = d.transition()
    m = d.dim
    C0 = psd_sqrt(d.stationary_covariance()) if d.stationary_start else np.zeros((m, m))
    idx = np.arange(replicas) if np.isscalar(replicas) else np.asarray(replicas)
    for start in range(0, idx.size, block):
        sel = idx[start:start + block]
        noise = np.stack([replica_generator(seed, "ou", int(i)).standard_normal((d.mesh + 1, 2 * m))
                          for i in sel])
        R = sel.size
        z = np.zeros((R, 2 * m))
        # einsum keeps every row independent of the block size (BLAS may not)
        z[:, :m] = np.einsum("rj,kj->rk", noise[:, 0, :m], C0)
        integral = np.empty((R, d.mesh + 1, m))
        integral[:, 0] = 0.0
        # step loop: z_{k+1} = Phi z_k + root xi_k; record the running integral
        for k in range(d.mesh):
            z = np.einsum("rj,kj->rk", z, Phi) + np.einsum("rj,kj->rk", noise[:, k + 1], root)
            integral[:, k + 1] = z[:, m:]
        yield start, d.epsilon * np.diff(integral, axis=1)


def ou_rough_path(d, seed=0, replica=0):
    """Piecewise-linear lift of W_eps on the uniform mesh of [0, 1]."""
    _, dW = next(ou_increment_blocks(d, [replica], seed))
    X = np.vstack([np.zeros((1, d.dim)), np.cumsum(dW[0], axis=0)])
    times = np.linspace(0.0, 1.0, d.mesh + 1)
    return RoughPathGrid(times, X, linear_second_level(X), "geometric-continuous")
