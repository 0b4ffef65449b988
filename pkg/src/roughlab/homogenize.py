"""Fast-slow systems, their limit SDEs, and law comparisons.

Discrete system (Ito-type limit):

    X_{j+1} = X_j + a(X_j) / n + b(X_j) v(Y_j) / sqrt(n)

Continuous system (Stratonovich-type limit), driven by OU physical Brownian
motion W_eps: dx = a(x) dt + b(x) dW_eps, integrated by RK4 on the driver
mesh where W_eps is linear.

Both limits read dX = (a + sum_ij Gamma^ij (b_i . grad) b_j) dt + b dW.
"""
from dataclasses import dataclass, field
import math
from typing import Callable, Optional

import numpy as np
from scipy.stats import wasserstein_distance

from .drivers import MapDriver, OUDriver, birkhoff_path, increment_chunks, \
    ou_increment_blocks
from .estimators import jackknife_mean, ks_2samp
from .lifts import ito_second_level
from .parallel import map_blocks, replica_blocks
from .rde import DEFAULT_BLOWUP, VectorFieldBundle, _check, solve_rde, \
    solve_sde_euler_maruyama
from .rough_core import RoughPathGrid, path_qvar


@dataclass
class FastSlowConfig:
    b: Callable
    d: int = 1
    m: int = 1
    a: Optional[Callable] = None
    db: Optional[Callable] = None
    driver: object = field(default_factory=MapDriver)
    observable: object = None
    n: int = 2048
    xi: object = 1.0
    replicas: int = 1000
    seed: int = 0
    blowup: float = DEFAULT_BLOWUP

    def __post_init__(self):
        xi = np.broadcast_to(np.atleast_1d(np.asarray(self.xi, dtype=float)), (self.d,)).copy()
        if not np.all(np.isfinite(xi)):
            raise ValueError("initial slow state must be finite")
        self.xi = xi
        if self.n < 1 or self.replicas < 1:
            raise ValueError("n and replicas must be >= 1")
        if isinstance(self.driver, MapDriver) and self.observable is None:
            raise ValueError("map drivers need an observable")

    def vector_fields(self):
        return VectorFieldBundle(self.d, self.m, V=self.b, V0=self.a, jac=self.db)


@dataclass
class FastSlowSample:
    times: np.ndarray
    terminal: np.ndarray
    paths: Optional[np.ndarray] = None
    verified: int = 0
    max_verify_error: float = 0.0


def _zero(x):
    return np.zeros_like(x)


def run_discrete_fast_slow(cfg, keep_paths=0, verify=4, block=4096):
    """Iterate the discrete recursion along a fresh orbit per replica.

    The first ``verify`` replicas are re-solved as the controlled equation
    dx = a(x-) dz_n + b(x-) dW_n with the step-2 RDE scheme on the Ito lift
    of W_n; the largest discrepancy is reported.
    """
    n = cfg.n
    a = cfg.a or _zero
    keep = max(keep_paths, verify)
    rootn = math.sqrt(n)

    def run(blk):
        idx = np.asarray(blk)
        x = np.tile(cfg.xi, (idx.size, 1))
        store = idx < keep
        paths = np.empty((int(store.sum()), n + 1, cfg.d))
        paths[:, 0] = x[store]
        j = 0
        for inc in increment_chunks(cfg.driver, cfg.observable, n, idx, cfg.seed):
            for c in range(inc.shape[1]):
                x = x + a(x) / n + np.einsum("rkj,rj->rk", cfg.b(x), inc[:, c]) / rootn
                j += 1
                _check(x, j / n, cfg.blowup)
                paths[:, j] = x[store]
        return x, paths

    parts = map_blocks(run, replica_blocks(cfg.replicas, block))
    terminal = np.concatenate([p[0] for p in parts])
    paths = np.concatenate([p[1] for p in parts])
    times = np.arange(n + 1) / n
    err = 0.0
    if verify:
        vf = cfg.vector_fields()
        clock = np.floor(times * n) / n
        for r in range(min(verify, cfg.replicas)):
            bp = birkhoff_path(cfg.driver, cfg.observable, n, cfg.seed, r)
            lift = RoughPathGrid(times, bp.values, ito_second_level(bp.values), "cadlag-ito")
            sol = solve_rde(vf, lift, cfg.xi, clock=clock, blowup=cfg.blowup)
            scale = max(1.0, float(np.max(np.abs(paths[r]))))
            err = max(err, float(np.max(np.abs(sol.states - paths[r]))) / scale)
    return FastSlowSample(times, terminal, paths[:keep_paths] if keep_paths else None,
                          min(verify, cfg.replicas), err)


def _rk4(f, x, h):
    k1 = f(x)
    k2 = f(x + 0.5 * h * k1)
    k3 = f(x + 0.5 * h * k2)
    k4 = f(x + h * k3)
    return x + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def run_continuous_fast_slow(cfg, keep_paths=0, block=512):
    """Integrate dx = a dt + b dW_eps for an OU driver (RK4 per mesh step)."""
    drv = cfg.driver
    if not isinstance(drv, OUDriver):
        raise TypeError("the continuous system needs an OUDriver")
    a = cfg.a or _zero
    h = 1.0 / drv.mesh
    terminal = np.empty((cfg.replicas, cfg.d))
    kept = np.empty((min(keep_paths, cfg.replicas), drv.mesh + 1, cfg.d))
    for start, dW in ou_increment_blocks(drv, cfg.replicas, cfg.seed, block):
        R = dW.shape[0]
        x = np.tile(cfg.xi, (R, 1))
        sel = slice(0, max(0, min(keep_paths - start, R)))
        kept[start:start + sel.stop, 0] = x[sel]
        for k in range(drv.mesh):
            rate = dW[:, k] / h

            def f(y, rate=rate):
                return a(y) + np.einsum("rkj,rj->rk", cfg.b(y), rate)

            x = _rk4(f, x, h)
            _check(x, (k + 1) * h, cfg.blowup)
            kept[start:start + sel.stop, k + 1] = x[sel]
        terminal[start:start + R] = x
    return FastSlowSample(np.linspace(0, 1, drv.mesh + 1), terminal,
                          kept if keep_paths else None)


def limit_sde_sample(cfg, sigma, gamma, mode="ito", N=None, replicas=None, seed=None,
                     store_paths=False):
    """Sample the limit SDE with covariance sigma and area drift gamma."""
    vf = cfg.vector_fields()
    N = N or (cfg.n if not isinstance(cfg.driver, OUDriver) else cfg.driver.mesh)
    sol = solve_sde_euler_maruyama(vf, mode, sigma, gamma, N,
                                   cfg.seed if seed is None else seed, cfg.xi,
                                   replicas=replicas or cfg.replicas, store_paths=store_paths)
    return sol


@dataclass
class LawComparison:
    ks_stat: np.ndarray
    ks_pvalue: np.ndarray
    mean_gap: np.ndarray
    mean_gap_se: np.ndarray
    var_gap: np.ndarray
    var_gap_se: np.ndarray
    wasserstein: np.ndarray
    pvar_ks_pvalue: Optional[float] = None
    alpha: float = 0.01

    @property
    def ks_pass(self):
        return bool(np.all(self.ks_pvalue > self.alpha))

    @property
    def mean_pass(self):
        return bool(np.all(np.abs(self.mean_gap) <= 3 * self.mean_gap_se))

    @property
    def passed(self):
        return self.ks_pass and self.mean_pass


def compare_laws(samples_a, samples_b, paths_a=None, paths_b=None, p=2.5, alpha=0.01):
    """Per-coordinate KS, mean and variance gaps; KS of p-var norms if paths are given."""
    A = np.asarray(samples_a, dtype=float)
    B = np.asarray(samples_b, dtype=float)
    if A.ndim == 1:
        A, B = A[:, None], B[:, None] if B.ndim == 1 else B
    if A.shape != B.shape:
        raise ValueError(f"sample shapes differ: {A.shape} vs {B.shape}")
    if A.shape[0] < 1000:
        raise ValueError("law comparison needs at least 1000 samples per side")
    ks = [ks_2samp(A[:, k], B[:, k]) for k in range(A.shape[1])]
    ma, sa = jackknife_mean(A)
    mb, sb = jackknife_mean(B)
    va, vsa = jackknife_mean((A - ma) ** 2)
    vb, vsb = jackknife_mean((B - mb) ** 2)
    w1 = np.array([wasserstein_distance(A[:, k], B[:, k]) for k in range(A.shape[1])])
    pv = None
    if paths_a is not None and paths_b is not None:
        na = [path_qvar(x, p) for x in paths_a]
        nb = [path_qvar(x, p) for x in paths_b]
        pv = ks_2samp(na, nb)[0]
    return LawComparison(
        ks_stat=np.array([k[1] for k in ks]), ks_pvalue=np.array([k[0] for k in ks]),
        mean_gap=ma - mb, mean_gap_se=np.hypot(sa, sb),
        var_gap=va - vb, var_gap_se=np.hypot(vsa, vsb),
        wasserstein=w1, pvar_ks_pvalue=pv, alpha=alpha,
    )


def correction_ablation(cfg, sigma, gamma, mode="ito", sample=None, N=None):
    """Compare the fast-slow sample with the Gamma-corrected and uncorrected limits."""
    if sample is None:
        runner = run_continuous_fast_slow if isinstance(cfg.driver, OUDriver) \
            else run_discrete_fast_slow
        sample = runner(cfg)
    corrected = limit_sde_sample(cfg, sigma, gamma, mode, N=N).terminal
    uncorrected = limit_sde_sample(cfg, sigma, np.zeros_like(np.atleast_2d(gamma)), mode,
                                   N=N).terminal
    x = sample.terminal
    return {
        "corrected": compare_laws(x, np.atleast_2d(corrected.T).T),
        "uncorrected": compare_laws(x, np.atleast_2d(uncorrected.T).T),
        "sample": sample,
    }
