"""Estimators for the limit covariance and area drift, moment and tightness
diagnostics, and Kolmogorov-Smirnov tests.

Standard errors are jackknife over replicas. For statistics that are plain
replica means the delete-one jackknife reduces to s / sqrt(R); nonlinear
statistics use a grouped (delete-a-group) jackknife.
"""
from dataclasses import dataclass, field
import math

import numpy as np
from scipy.special import kolmogorov

from .drivers import MapDriver, Observable, OUDriver, WalkDriver, increment_chunks, ou_increment_blocks
from .lifts import ito_second_level
from .parallel import map_blocks, replica_blocks
from .rough_core import RoughPathGrid, p_var_homog

DEFAULT_BLOCK = 2048
AUTO_LAG_CAP = 200


@dataclass
class LimitStatistics:
    sigma_hat: np.ndarray = None
    gamma_hat: np.ndarray = None
    sigma_se: np.ndarray = None
    gamma_se: np.ndarray = None
    method: str = ""
    meta: dict = field(default_factory=dict)


# ----------------------------------------------------------------- jackknife

def jackknife_mean(values):
    """Mean over axis 0 and its delete-one jackknife standard error."""
    x = np.asarray(values, dtype=float)
    R = x.shape[0]
    mean = x.mean(axis=0)
    if R < 2:
        return mean, np.full_like(mean, np.nan)
    loo = (R * mean - x) / (R - 1)
    se = np.sqrt((R - 1) / R * np.sum((loo - loo.mean(axis=0)) ** 2, axis=0))
    return mean, se


def grouped_jackknife(values, statistic, groups=50):
    """statistic(values) and its delete-a-group jackknife standard error."""
    x = np.asarray(values)
    R = x.shape[0]
    full = np.asarray(statistic(x), dtype=float)
    G = min(groups, R)
    if G < 2:
        return full, np.full_like(full, np.nan)
    labels = np.arange(R) % G
    reps = np.stack([np.asarray(statistic(x[labels != g]), dtype=float) for g in range(G)])
    se = np.sqrt((G - 1) / G * np.sum((reps - reps.mean(axis=0)) ** 2, axis=0))
    return full, se


# ------------------------------------------------------------ batch engine

@dataclass
class BirkhoffBatch:
    """Per-replica sums for a discrete driver.

    sums: v_n (R, m); area: W_n(1) second level, i.e. n^-1 sum_{i<j} v_i (x) v_j;
    diag: sum_j v_j (x) v_j; S: S_n = n * area + diag; cp_*: the same at
    checkpoints; lag_means: per-replica averages of v_j (x) v_{j+k}.
    """

    n: int
    sums: np.ndarray
    area: np.ndarray
    diag: np.ndarray
    checkpoints: tuple
    cp_sums: np.ndarray
    cp_S: np.ndarray
    lag_means: np.ndarray
    value_sum: np.ndarray

    @property
    def replicas(self):
        return self.sums.shape[0]

    @property
    def S(self):
        return self.n * self.area + self.diag

    @property
    def grand_mean(self):
        return self.value_sum.sum(axis=0) / (self.n * self.replicas)


def _batch_block(driver, v, n, seed, checkpoints, lags, chunk):
    def run(block):
        idx = np.asarray(block)
        R = idx.size
        s = None
        cps = set(checkpoints)
        cp_sums, cp_S = [], []
        done = 0
        for inc in increment_chunks(driver, v, n, idx, seed, chunk, cuts=checkpoints):
            c, m = inc.shape[1], inc.shape[2]
            if s is None:
                s = np.zeros((R, m))
                W2 = np.zeros((R, m, m))
                diag = np.zeros((R, m, m))
                vsum = np.zeros((R, m))
                L = lags if lags is not None else -1
                lag_sum = np.zeros((R, L + 1, m, m))
                carry = np.zeros((R, max(L, 0), m))
            prefix = np.cumsum(inc, axis=1) - inc
            W2 += np.einsum("rj,rk->rjk", s, inc.sum(axis=1))
            W2 += np.einsum("rcj,rck->rjk", prefix, inc)
            diag += np.einsum("rcj,rck->rjk", inc, inc)
            if L >= 0:
                buf = np.concatenate([carry, inc], axis=1)
                for k in range(L + 1):
                    lag_sum[:, k] += np.einsum("rcj,rck->rjk", buf[:, L - k:L - k + c], inc)
                carry = buf[:, -L:] if L > 0 else carry
            s = s + inc.sum(axis=1)
            vsum += inc.sum(axis=1)
            done += c
            if done in cps:
                cp_sums.append(s.copy())
                cp_S.append(W2 + diag)
        m = s.shape[1]
        K = len(cp_sums)
        out = {
            "sums": s,
            "area": W2 / n,
            "diag": diag,
            "cp_sums": np.stack(cp_sums, axis=1) if K else np.zeros((R, 0, m)),
            "cp_S": np.stack(cp_S, axis=1) if K else np.zeros((R, 0, m, m)),
            "value_sum": vsum,
        }
        if L >= 0:
            counts = (n - np.arange(L + 1)).clip(min=1).astype(float)
            out["lag_means"] = lag_sum / counts[None, :, None, None]
        else:
            out["lag_means"] = np.zeros((R, 0, m, m))
        return out

    return run


def birkhoff_batch(driver, v, n, replicas, seed, checkpoints=(), lags=None,
                   chunk=512, block=DEFAULT_BLOCK):
    """Stream Birkhoff and iterated sums for ``replicas`` independent orbits."""
    if n < 1 or replicas < 1:
        raise ValueError("n and replicas must be >= 1")
    checkpoints = tuple(sorted(int(c) for c in checkpoints))
    if any(c < 1 or c > n for c in checkpoints):
        raise ValueError("checkpoints must lie in [1, n]")
    if lags is not None and lags >= n:
        raise ValueError("lag_max must be smaller than n")
    parts = map_blocks(_batch_block(driver, v, n, seed, checkpoints, lags, chunk),
                       replica_blocks(replicas, block))
    cat = {k: np.concatenate([p[k] for p in parts]) for k in parts[0]}
    return BirkhoffBatch(n=n, checkpoints=checkpoints, **cat)


@dataclass
class OUBatch:
    W: np.ndarray
    area: np.ndarray


def ou_batch(driver, replicas, seed, block=512):
    """Terminal W_eps(1) and its Stratonovich second level for many replicas."""
    Ws, As = [], []
    for _, dW in ou_increment_blocks(driver, replicas, seed, block):
        X = np.cumsum(dW, axis=1)
        prev = X - dW
        A = np.einsum("rnj,rnk->rjk", prev, dW) + 0.5 * np.einsum("rnj,rnk->rjk", dW, dW)
        Ws.append(X[:, -1])
        As.append(A)
    return OUBatch(np.concatenate(Ws), np.concatenate(As))


# ------------------------------------------------------------ Sigma / Gamma

def _symmetrize(a):
    return 0.5 * (a + np.swapaxes(a, -1, -2))


def estimate_sigma_batch(driver, v=None, n=None, replicas=1000, seed=0, batch=None):
    """Monte-Carlo mean of n^-1 v_n (x) v_n (or W_eps(1) (x) W_eps(1) for OU)."""
    if isinstance(driver, OUDriver):
        ob = ou_batch(driver, replicas, seed) if batch is None else batch
        outer = np.einsum("rj,rk->rjk", ob.W, ob.W)
    else:
        b = birkhoff_batch(driver, v, n, replicas, seed) if batch is None else batch
        outer = np.einsum("rj,rk->rjk", b.sums, b.sums) / b.n
    mean, se = jackknife_mean(outer)
    return LimitStatistics(sigma_hat=_symmetrize(mean), sigma_se=se, method="batch",
                           meta={"replicas": outer.shape[0]})


def _require_mixing(driver):
    if isinstance(driver, OUDriver) or not getattr(driver, "mixing", False):
        raise ValueError("series estimators need a discrete driver declared mixing")


def auto_truncation(c_mean, c_se, run=5, factor=2.0):
    """First lag starting ``run`` consecutive lags with |c_k| < factor * se_k.

    Returns the number of lags (>= 1) to keep in the series.
    """
    L = c_mean.shape[0] - 1
    small = np.all(np.abs(c_mean) < factor * np.where(c_se > 0, c_se, np.inf), axis=(1, 2))
    for k in range(1, L + 1):
        if np.all(small[k:k + run]) and k + run - 1 <= L:
            return k - 1
    return L


def _lag_series(b, lag_max, auto):
    """Per-replica lag averages -> (c_mean (L+1,m,m), per-replica array, used lag)."""
    per = b.lag_means
    c_mean, c_se = jackknife_mean(per)
    used = auto_truncation(c_mean, c_se) if auto else per.shape[1] - 1
    return per, c_mean, used


def _tail(terms, used):
    """Truncation error proxy: size of the last kept lag term.

    For geometrically decaying correlations c_k ~ r^k with r <= 1/2 the
    dropped remainder is at most this term.
    """
    if used < 1:
        return np.zeros(terms.shape[1:])
    return np.abs(terms[used])


def estimate_sigma_green_kubo(driver, v, lag_max, n, replicas=1000, seed=0, batch=None):
    """Truncated series c_0 + sum_{k>=1} (c_k + c_k^T) with ergodic-average lag products.

    ``lag_max=None`` applies the automatic truncation rule on lags up to
    ``AUTO_LAG_CAP``. The reported standard error combines the jackknife
    error with a tail estimate from the last kept lag.
    """
    _require_mixing(driver)
    auto = lag_max is None
    L = min(AUTO_LAG_CAP, n - 1) if auto else int(lag_max)
    if L < 0:
        raise ValueError("lag_max must be >= 0")
    b = birkhoff_batch(driver, v, n, replicas, seed, lags=L) if batch is None else batch
    per, c_mean, used = _lag_series(b, L, auto)
    terms = per[:, :used + 1] + np.swapaxes(per[:, :used + 1], -1, -2)
    terms[:, 0] *= 0.5
    sig_r = terms.sum(axis=1)
    mean, se = jackknife_mean(sig_r)
    tail = _tail(terms.mean(axis=0), used)
    return LimitStatistics(sigma_hat=_symmetrize(mean), sigma_se=np.sqrt(se ** 2 + tail ** 2),
                           method="green-kubo",
                           meta={"lag_max": used, "tail": tail, "stat_se": se})


def estimate_gamma(driver, v=None, n=None, replicas=1000, method="empirical", seed=0,
                   lag_max=30, batch=None):
    """Area drift: mean of W_n(1) second level, or the one-sided lag series."""
    if method == "empirical":
        if isinstance(driver, OUDriver):
            ob = ou_batch(driver, replicas, seed) if batch is None else batch
            # Stratonovich second level minus W (x) W / 2 is its skew part
            per = ob.area - 0.5 * np.einsum("rj,rk->rjk", ob.W, ob.W)
        else:
            b = birkhoff_batch(driver, v, n, replicas, seed) if batch is None else batch
            per = b.area
        mean, se = jackknife_mean(per)
        return LimitStatistics(gamma_hat=mean, gamma_se=se, method="empirical",
                               meta={"replicas": per.shape[0]})
    if method == "series":
        _require_mixing(driver)
        auto = lag_max is None
        L = min(AUTO_LAG_CAP, n - 1) if auto else int(lag_max)
        b = birkhoff_batch(driver, v, n, replicas, seed, lags=L) if batch is None else batch
        per, c_mean, used = _lag_series(b, L, auto)
        gam_r = per[:, 1:used + 1].sum(axis=1)
        mean, se = jackknife_mean(gam_r)
        tail = _tail(np.concatenate([np.zeros_like(c_mean[:1]), c_mean[1:]]), used)
        return LimitStatistics(gamma_hat=mean, gamma_se=np.sqrt(se ** 2 + tail ** 2),
                               method="series", meta={"lag_max": used, "tail": tail})
    raise ValueError(f"unknown method {method!r}")


def invariant_mean(driver, observable, n=1 << 16, replicas=256, seed=0):
    """Birkhoff-average estimate of the invariant mean of an observable."""
    b = birkhoff_batch(driver, observable, n, replicas, seed)
    per = b.value_sum / n
    return jackknife_mean(per)


def center_observable(driver, observable, n=1 << 16, replicas=256, seed=0):
    """Shift ``observable`` by its estimated invariant mean.

    Returns (centered observable, mean, standard error). The doubling map's
    built-in observables are exactly centered already and come back as is.
    """
    if isinstance(driver, MapDriver) and driver.exact_doubling and observable.mean_zero:
        zero = np.zeros(observable.dim)
        return observable, zero, zero
    mu, se = invariant_mean(driver, observable, n, replicas, seed)
    shifted = Observable(lambda y, f=observable, mu=mu: f(y) - mu, observable.dim,
                         observable.name, True)
    return shifted, mu, se


# ------------------------------------------------------------- diagnostics

def _slope(ns, vals):
    return np.polyfit(np.log(ns), np.log(vals), 1)[0]


@dataclass
class ScalingReport:
    n_list: np.ndarray
    norm_v: np.ndarray
    norm_S: np.ndarray
    slope_v: float
    slope_S: float
    slope_v_se: float
    slope_S_se: float
    tol: float
    q: float

    @property
    def pass_upper(self):
        """One-sided check: growth no faster than n^{1/2} resp. n."""
        return self.slope_v <= 0.5 + self.tol and self.slope_S <= 1.0 + self.tol

    @property
    def within_band(self):
        return abs(self.slope_v - 0.5) <= self.tol and abs(self.slope_S - 1.0) <= self.tol


def moment_scaling_diagnostic(driver, v, q, n_list, replicas=2000, seed=0, tol=0.1, batch=None):
    """Regress log ||v_n||_{2q} and log ||S_n||_q on log n."""
    if q <= 1:
        raise ValueError("q must exceed 1")
    n_list = np.asarray(sorted(int(n) for n in n_list))
    if batch is None:
        batch = birkhoff_batch(driver, v, int(n_list[-1]), replicas, seed, checkpoints=n_list)
    idx = [batch.checkpoints.index(int(n)) for n in n_list]
    av = np.linalg.norm(batch.cp_sums[:, idx], axis=-1)
    aS = np.linalg.norm(batch.cp_S[:, idx], axis=(-2, -1))

    def norms(x, r):
        return np.mean(x ** r, axis=0) ** (1.0 / r)

    def slope_v(x):
        return _slope(n_list, norms(x, 2 * q))

    def slope_S(x):
        return _slope(n_list, norms(x, q))

    sv, sv_se = grouped_jackknife(av, slope_v)
    sS, sS_se = grouped_jackknife(aS, slope_S)
    return ScalingReport(n_list, norms(av, 2 * q), norms(aS, q), float(sv), float(sS),
                         float(sv_se), float(sS_se), tol, q)


@dataclass
class TightnessReport:
    n_list: np.ndarray
    moments: np.ndarray
    moment_se: np.ndarray
    slope: float
    slope_se: float
    tol: float

    @property
    def passed(self):
        return abs(self.slope) <= self.tol


def pvar_moment_diagnostic(paths_by_n, p, q=1.0, tol=0.1):
    """Empirical E|||W|||_{p-var}^{2q} per scale n and its log-log slope in n."""
    if not 2.0 < p < 3.0:
        raise ValueError("p must lie in (2, 3)")
    ns = np.asarray(sorted(paths_by_n))
    norms = [np.array([p_var_homog(path, p) for path in paths_by_n[n]]) for n in ns]
    mom, se = zip(*(jackknife_mean(x ** (2 * q)) for x in norms))
    mom, se = np.array(mom), np.array(se)
    if np.all(mom == 0):
        return TightnessReport(ns, mom, se, 0.0, 0.0, tol)
    slope = _slope(ns, mom)
    # delta method for the slope error from independent per-n errors
    X = np.log(ns) - np.log(ns).mean()
    slope_se = math.sqrt(np.sum((X / np.sum(X ** 2)) ** 2 * (se / mom) ** 2))
    return TightnessReport(ns, mom, se, float(slope), slope_se, tol)


def ito_lift_batch(driver, v, n, replicas, seed):
    """Ito lifts of the Birkhoff paths W_n for a batch of replicas."""
    inc = np.concatenate(list(increment_chunks(driver, v, n, replicas, seed)), axis=1)
    X = np.concatenate([np.zeros((inc.shape[0], 1, inc.shape[2])),
                        np.cumsum(inc, axis=1)], axis=1) / math.sqrt(n)
    M = ito_second_level(X)
    times = np.arange(n + 1) / n
    return [RoughPathGrid(times, X[r], M[r], "cadlag-ito") for r in range(X.shape[0])]


# ------------------------------------------------------------------ KS tests

def ks_statistic(samples, cdf):
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    F = cdf(x)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))


def ks_test_normal(samples, sigma):
    """Two-sided KS test of samples against N(0, sigma^2); asymptotic p-value."""
    from scipy.special import ndtr

    if not sigma > 0:
        raise ValueError("sigma must be positive")
    x = np.asarray(samples, dtype=float)
    D = ks_statistic(x, lambda t: ndtr(t / sigma))
    return float(kolmogorov(math.sqrt(x.size) * D)), D


def ks_2samp(a, b):
    """Two-sample KS statistic and asymptotic p-value."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    both = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, both, side="right") / a.size
    cdf_b = np.searchsorted(b, both, side="right") / b.size
    D = float(np.max(np.abs(cdf_a - cdf_b)))
    en = math.sqrt(a.size * b.size / (a.size + b.size))
    return float(kolmogorov(en * D)), D
