"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

All seeds are fixed here, before any result was looked at.
"""
import math

import numpy as np
import pytest

from roughlab import kernels
from roughlab.cli import make_coefficients
from roughlab.drivers import MapDriver, OUDriver, centered_id, cosine
from roughlab.estimators import (
    birkhoff_batch,
    center_observable,
    estimate_gamma,
    estimate_sigma_batch,
    estimate_sigma_green_kubo,
    ito_lift_batch,
    jackknife_mean,
    ks_test_normal,
    moment_scaling_diagnostic,
    ou_batch,
    pvar_moment_diagnostic,
)
from roughlab.homogenize import (
    FastSlowConfig,
    compare_laws,
    correction_ablation,
    limit_sde_sample,
    run_continuous_fast_slow,
)
from roughlab.lifts import identity_suite, lift, pure_area_path
from roughlab.rde import VectorFieldBundle, lipschitz_ratio, solve_rde
from roughlab.rng import child_seed
from roughlab.rough_core import enumerate_qvar

SEED = 20261018
ALPHA = 0.01


@pytest.fixture
def report(capsys):
    def emit(k, ok, detail):
        with capsys.disabled():
            print(f"\nACCEPTANCE {k}: {'PASS' if ok else 'FAIL'} | {detail}")
        return ok
    return emit


def _within(est, se, ref, k=3.0):
    return abs(est - ref) <= k * se


# ---------------------------------------------------------------- 1

def test_criterion_1_algebraic_identities(report):
    errs = identity_suite(cases=1000, seed=SEED)
    ok = max(errs.values()) < 1e-12
    report(1, ok, "max rel errors " + ", ".join(f"{k}={v:.2e}" for k, v in errs.items()))
    assert ok


# ---------------------------------------------------------------- 2

def _dist_first(X):
    def d(s, t):
        acc = 0.0
        for a in range(X.shape[1]):
            e = X[t, a] - X[s, a]
            acc = acc + e * e
        return math.sqrt(acc)
    return d


def _dist_second(X, M, Xt, Mt):
    m = X.shape[1]

    def d(s, t):
        acc = 0.0
        for a in range(m):
            for b in range(m):
                e = (M[t, a, b] - M[s, a, b] - X[s, a] * (X[t, b] - X[s, b])) - (
                    Mt[t, a, b] - Mt[s, a, b] - Xt[s, a] * (Xt[t, b] - Xt[s, b]))
                acc = acc + e * e
        return math.sqrt(acc)
    return d


def test_criterion_2_dp_equals_enumeration(report):
    r = np.random.default_rng(SEED)
    cases = mismatches = 0
    for _ in range(150):
        N, m = int(r.integers(2, 13)), int(r.integers(1, 4))
        q = float(r.uniform(1.0, 3.5))
        X = np.cumsum(r.standard_normal((N, m)), axis=0)
        mismatches += kernels.qvar_first(X, q) != enumerate_qvar(_dist_first(X), N, q)
        Xt = X + 0.3 * r.standard_normal((N, m))
        M, Mt = r.standard_normal((2, N, m, m))
        q2 = q / 2
        mismatches += kernels.qvar_second(X, M, Xt, Mt, q2) != enumerate_qvar(
            _dist_second(X, M, Xt, Mt), N, q2)
        cases += 2
    report(2, mismatches == 0, f"{cases} grids with N <= 12, {mismatches} inexact matches "
                               f"(backend {kernels.BACKEND})")
    assert mismatches == 0


# ---------------------------------------------------------------- 3, 4

@pytest.fixture(scope="module")
def doubling_batches():
    d = MapDriver()
    return {name: birkhoff_batch(d, v, 10_000, 10_000, SEED, lags=200)
            for name, v in (("centered-id", centered_id()), ("cos", cosine()))}


def test_criterion_3_sigma_gamma_oracles(report, doubling_batches):
    oracle = {"centered-id": (0.25, 1 / 12), "cos": (0.5, 0.0)}
    d = MapDriver()
    lines, ok = [], True
    for name, b in doubling_batches.items():
        s_ref, g_ref = oracle[name]
        ests = {
            "sigma batch": (estimate_sigma_batch(d, batch=b), "sigma", s_ref),
            "sigma green-kubo": (estimate_sigma_green_kubo(d, None, None, b.n, batch=b),
                                 "sigma", s_ref),
            "gamma empirical": (estimate_gamma(d, batch=b), "gamma", g_ref),
            "gamma series": (estimate_gamma(d, None, b.n, method="series", lag_max=None,
                                            batch=b), "gamma", g_ref),
        }
        for label, (est, kind, ref) in ests.items():
            val = float(getattr(est, f"{kind}_hat")[0, 0])
            se = float(getattr(est, f"{kind}_se")[0, 0])
            good = _within(val, se, ref)
            ok &= good
            lines.append(f"{name} {label} {val:.5f}+-{se:.5f} vs {ref:.5f}"
                         + ("" if good else " (out)"))
    report(3, ok, "; ".join(lines))
    assert ok


def _lsv_clt(gamma, n=100_000, replicas=5000):
    d = MapDriver("lsv", gamma)
    v = centered_id()
    main = birkhoff_batch(d, v, n, replicas, SEED)
    aux = birkhoff_batch(d, v, n, replicas, child_seed(SEED, "misc"))

    def centered(b):
        return (b.sums[:, 0] - n * b.grand_mean[0]) / math.sqrt(n)

    sig2 = float(np.mean(centered(aux) ** 2))
    p, _ = ks_test_normal(centered(main), math.sqrt(sig2))
    return p, sig2


def test_criterion_4_clt(report, doubling_batches):
    b = doubling_batches["centered-id"]
    p_dbl, _ = ks_test_normal(b.sums[:, 0] / math.sqrt(b.n), 0.5)
    parts = [f"doubling p={p_dbl:.3f}"]
    ok = p_dbl > ALPHA
    for g in (0.1, 0.25, 0.4):
        p, s2 = _lsv_clt(g)
        ok &= p > ALPHA
        parts.append(f"lsv {g} p={p:.3f} (sigma2_hat={s2:.4f})")
    report(4, ok, "KS vs normal: " + ", ".join(parts))
    assert ok


# ---------------------------------------------------------------- 5

def test_criterion_5_homogenization(report):
    cfg = FastSlowConfig(b=lambda x: x[..., None], db=lambda x: np.ones(np.shape(x) + (1, 1)),
                         driver=MapDriver(), observable=centered_id(), n=2048, xi=1.0,
                         replicas=100_000, seed=SEED)
    res = correction_ablation(cfg, [[0.25]], [[1 / 12]], "ito")
    x = res["sample"].terminal[:, 0]
    mean, se = jackknife_mean(x)
    target = math.exp(1 / 12)
    mean_ok = _within(mean, se, target)
    ks_ok = res["corrected"].ks_pvalue[0] > ALPHA
    un = res["uncorrected"]
    ablation_fails = abs(un.mean_gap[0]) > 3 * un.mean_gap_se[0] and abs(mean - 1.0) > 3 * se
    ok = mean_ok and ks_ok and ablation_fails and res["sample"].max_verify_error < 1e-12
    report(5, ok, f"E x(1)={mean:.5f}+-{se:.5f} vs {target:.5f}; "
                  f"KS corrected p={res['corrected'].ks_pvalue[0]:.3f}; "
                  f"uncorrected gap {un.mean_gap[0] / un.mean_gap_se[0]:.1f} se; "
                  f"recursion vs RDE {res['sample'].max_verify_error:.1e}")
    assert ok


# ---------------------------------------------------------------- 6

def test_criterion_6_moment_scaling(report):
    ns = [2 ** k for k in range(8, 15)]
    parts, ok = [], True
    for label, d, q in (("doubling", MapDriver(), 2.0), ("lsv 0.1", MapDriver("lsv", 0.1), 2.0),
                        ("lsv 0.4", MapDriver("lsv", 0.4), 1.5)):
        v = center_observable(d, centered_id(), n=1 << 18, replicas=512,
                              seed=child_seed(SEED, "center"))[0]
        # 2e4 replicas keep the slope standard errors well below the band half-width
        rep = moment_scaling_diagnostic(d, v, q, ns, replicas=20_000, seed=SEED, tol=0.1)
        ok &= rep.within_band
        parts.append(f"{label} q={q}: slope_v={rep.slope_v:.3f}+-{rep.slope_v_se:.3f} "
                     f"slope_S={rep.slope_S:.3f}+-{rep.slope_S_se:.3f}")
    report(6, ok, "; ".join(parts))
    assert ok


# ---------------------------------------------------------------- 7

def test_criterion_7_pvar_tightness(report):
    ns = [2 ** k for k in range(8, 13)]
    parts, ok = [], True
    for label, d in (("doubling", MapDriver()), ("lsv 0.1", MapDriver("lsv", 0.1))):
        v = center_observable(d, centered_id(), n=1 << 18, replicas=512,
                              seed=child_seed(SEED, "center"))[0]
        paths = {n: ito_lift_batch(d, v, n, 200, SEED) for n in ns}
        tr = pvar_moment_diagnostic(paths, 2.5, 1.0, 0.1)
        ok &= tr.passed
        parts.append(f"{label}: slope {tr.slope:.3f}+-{tr.slope_se:.3f}")
    report(7, ok, "E|||W_n|||^2 p=2.5 log-log " + "; ".join(parts))
    assert ok


# ---------------------------------------------------------------- 8

def test_criterion_8_physical_brownian_motion(report):
    R = 10_000
    nonnormal = OUDriver(np.array([[1.0, 2.0], [0.0, 1.0]]), 0.1, 2000)
    ob = ou_batch(nonnormal, R, SEED)
    outer = np.einsum("rj,rk->rjk", ob.W, ob.W)
    cmean, cse = jackknife_mean(outer)
    cov_ok = bool(np.all(np.abs(cmean - nonnormal.limit_covariance()) <= 3 * cse))

    def antisym(b):
        a = b.area[:, 0, 1] - b.area[:, 1, 0]
        return jackknife_mean(a)

    sym = OUDriver(np.array([[2.0, 0.5], [0.5, 1.0]]), 0.1, 4000)
    a_sym, s_sym = antisym(ou_batch(sym, R, SEED))
    a_nn, s_nn = antisym(ob)
    area_ok = abs(a_sym) <= 3 * s_sym and abs(a_nn) > 3 * s_nn

    # continuous fast-slow vs the limit SDE built from estimates at the same epsilon
    aux = child_seed(SEED, "misc")
    sig = estimate_sigma_batch(nonnormal, replicas=R, seed=aux).sigma_hat
    gam = estimate_gamma(nonnormal, replicas=R, seed=aux).gamma_hat
    ks = {}
    for name in ("constant", "rotation"):
        b, db = make_coefficients(name, 2)
        cfg = FastSlowConfig(b=b, db=db, d=2, m=2, driver=nonnormal, xi=1.0, replicas=R,
                             seed=SEED)
        x = run_continuous_fast_slow(cfg).terminal
        y = limit_sde_sample(cfg, sig, gam, "stratonovich", N=1000).terminal
        ks[name] = compare_laws(x, y).ks_pvalue
    ks_ok = all(np.all(p > ALPHA) for p in ks.values())
    ok = cov_ok and area_ok and ks_ok
    report(8, ok, f"cov {'ok' if cov_ok else 'out'} "
                  f"(max |gap|/se {np.max(np.abs(cmean - nonnormal.limit_covariance()) / cse):.2f}); "
                  f"antisym area sym {a_sym / s_sym:.2f} se, non-normal {a_nn / s_nn:.1f} se; "
                  + ", ".join(f"KS {k} p={np.round(p, 3).tolist()}" for k, p in ks.items()))
    assert ok


# ---------------------------------------------------------------- 9

def test_criterion_9_rde_solver(report):
    vf = VectorFieldBundle(1, 1, V=lambda y: y[..., None],
                           jac=lambda y: np.ones(np.shape(y) + (1, 1)))
    Ns = (16, 32, 64, 128, 256)
    g = 0.7

    def smooth(N):
        t = np.linspace(0, 1, N + 1)
        return lift(t[:, None], t)

    e_s = np.array([abs(solve_rde(vf, smooth(N), [1.0]).terminal[0] - math.e) for N in Ns])
    e_a = np.array([abs(solve_rde(vf, pure_area_path([[g]], np.linspace(0, 1, N + 1)), [1.0])
                        .terminal[0] - math.exp(g)) for N in Ns])
    ord_s = np.log2(e_s[:-1] / e_s[1:])
    ord_a = np.log2(e_a[:-1] / e_a[1:])
    order_ok = ord_s.min() >= 0.95 and ord_a.min() >= 0.95

    r = np.random.default_rng(SEED)
    nl = VectorFieldBundle(2, 2, V=lambda y: np.stack([np.sin(y), np.cos(y[..., ::-1])], axis=-1))
    t = np.linspace(0, 1, 65)
    ratios = {}
    for size in (1e-1, 1e-2, 1e-3):
        vals = []
        for _ in range(20):
            base = np.cumsum(r.standard_normal((65, 2)), axis=0) * 0.15
            pert = base + size * r.standard_normal((65, 2))
            y0 = r.standard_normal(2)
            vals.append(lipschitz_ratio(nl, lift(base, t), lift(pert, t), y0,
                                        y0 + size * r.standard_normal(2), 2.5))
        ratios[size] = max(vals)
    top = max(ratios.values())
    lip_ok = all(np.isfinite(v) for v in ratios.values()) and top < 20 \
        and ratios[1e-3] <= 2 * ratios[1e-1]
    ok = order_ok and lip_ok
    report(9, ok, f"orders smooth {ord_s.min():.2f}, area {ord_a.min():.2f}; "
                  "max Lipschitz ratio by perturbation size "
                  + ", ".join(f"{k:g}: {v:.2f}" for k, v in ratios.items()))
    assert ok
