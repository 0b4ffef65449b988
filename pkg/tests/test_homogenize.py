import math

import numpy as np
import pytest
from scipy import stats
from scipy.integrate import solve_ivp

from roughlab.drivers import MapDriver, OUDriver, WalkDriver, birkhoff_path, centered_id, cosine, \
    ou_rough_path
from roughlab.homogenize import (
    FastSlowConfig,
    compare_laws,
    correction_ablation,
    limit_sde_sample,
    run_continuous_fast_slow,
    run_discrete_fast_slow,
)
from roughlab.rde import BlowUpError


def lin_b(x):
    return x[..., None]


def lin_db(x):
    return np.ones(x.shape + (1, 1))


def eye_b(m):
    return (lambda x: np.broadcast_to(np.eye(m), x.shape[:-1] + (m, m)).copy(),
            lambda x: np.zeros(x.shape[:-1] + (m, m, m)))


def zero_b(d, m):
    return lambda x: np.zeros(x.shape[:-1] + (d, m))


def test_config_validation():
    with pytest.raises(ValueError):
        FastSlowConfig(b=lin_b, driver=MapDriver())
    with pytest.raises(ValueError):
        FastSlowConfig(b=lin_b, observable=centered_id(), xi=np.nan)
    with pytest.raises(ValueError):
        FastSlowConfig(b=lin_b, observable=centered_id(), n=0)


def test_pure_drift_constant():
    cfg = FastSlowConfig(b=zero_b(2, 1), d=2, a=lambda x: np.full_like(x, 0.75), observable=centered_id(),
                         n=64, xi=[1.0, -2.0], replicas=3, seed=1)
    s = run_discrete_fast_slow(cfg, verify=1)
    assert np.allclose(s.terminal, [[1.75, -1.25]] * 3, rtol=1e-14)


def test_telescoping_identity_noise():
    b, db = eye_b(1)
    cfg = FastSlowConfig(b=b, db=db, observable=centered_id(), n=300, xi=0.5, replicas=4, seed=6)
    s = run_discrete_fast_slow(cfg, keep_paths=4, verify=2)
    for r in range(4):
        bp = birkhoff_path(cfg.driver, cfg.observable, 300, seed=6, replica=r)
        assert np.allclose(s.paths[r], 0.5 + bp.values, rtol=0, atol=1e-13)
    assert s.max_verify_error <= 1e-12 and s.verified == 2


def test_recursion_equals_rde_form():
    cfg = FastSlowConfig(b=lambda x: np.sin(x)[..., None] + 1.0,
                         db=lambda x: np.cos(x)[..., None, None],
                         a=lambda x: -x, observable=cosine(), driver=MapDriver("lsv", 0.3),
                         n=500, replicas=8, seed=2)
    s = run_discrete_fast_slow(cfg, verify=8)
    assert s.verified == 8 and s.max_verify_error <= 1e-12


def test_walk_driver_runs():
    b, db = eye_b(1)
    cfg = FastSlowConfig(b=b, db=db, driver=WalkDriver(), n=100, replicas=5, seed=2)
    s = run_discrete_fast_slow(cfg, verify=1)
    assert s.terminal.shape == (5, 1)


def test_blowup_propagates():
    cfg = FastSlowConfig(b=lambda x: (x ** 2)[..., None], db=lambda x: (2 * x)[..., None, None],
                         a=lambda x: 50 * x ** 3, observable=centered_id(), n=100, xi=2.0,
                         replicas=2, blowup=1e6)
    with pytest.raises(BlowUpError):
        run_discrete_fast_slow(cfg, verify=0)


def test_continuous_pure_ode():
    drv = OUDriver(np.eye(1), 0.2, 400)
    cfg = FastSlowConfig(b=zero_b(1, 1), a=lambda x: np.sin(x) - 0.5 * x, driver=drv, xi=0.3, replicas=2)
    s = run_continuous_fast_slow(cfg)
    ref = solve_ivp(lambda t, y: np.sin(y) - 0.5 * y, (0, 1), [0.3], rtol=1e-12, atol=1e-14).y[0, -1]
    assert np.allclose(s.terminal, ref, atol=1e-8)


def test_continuous_identity_noise():
    drv = OUDriver(np.array([[1.0, 2.0], [0.0, 1.0]]), 0.2, 500)
    b, db = eye_b(2)
    cfg = FastSlowConfig(b=b, db=db, d=2, m=2, driver=drv, xi=1.0, replicas=3, seed=4)
    s = run_continuous_fast_slow(cfg, keep_paths=3)
    for r in range(3):
        W = ou_rough_path(drv, seed=4, replica=r).X
        assert np.allclose(s.paths[r], 1.0 + W, atol=1e-12)


def test_continuous_needs_ou():
    with pytest.raises(TypeError):
        run_continuous_fast_slow(FastSlowConfig(b=lin_b, observable=centered_id()))


def test_compare_laws_basics(rng):
    x = rng.standard_normal((1500, 2))
    c = compare_laws(x, x)
    assert np.all(c.ks_stat == 0) and np.all(c.mean_gap == 0) and c.passed
    with pytest.raises(ValueError):
        compare_laws(x, x[:1200])
    with pytest.raises(ValueError):
        compare_laws(x[:999], x[:999])


def test_compare_laws_pvar_functional(rng):
    a = np.cumsum(rng.standard_normal((1000, 20, 1)), axis=1)
    b = np.cumsum(rng.standard_normal((1000, 20, 1)), axis=1)
    c = compare_laws(a[:, -1], b[:, -1], a, b)
    assert 0 <= c.pvar_ks_pvalue <= 1


def test_compare_laws_null_calibration():
    # rejection count at level 0.001 must be consistent with Binomial(1000, 0.001)
    r = np.random.default_rng(77)
    ps = np.array([compare_laws(r.standard_normal(1000), r.standard_normal(1000)).ks_pvalue[0]
                   for _ in range(1000)])
    k = int(np.sum(ps <= 0.001))
    assert stats.binomtest(k, 1000, 0.001, alternative="greater").pvalue > 0.001
    assert stats.kstest(ps, "uniform").pvalue > 0.001


def test_ablation_small_scale():
    cfg = FastSlowConfig(b=lin_b, db=lin_db, observable=centered_id(), n=256, replicas=20000, seed=31)
    rep = correction_ablation(cfg, [[0.25]], [[1 / 12]])
    cor, unc = rep["corrected"], rep["uncorrected"]
    assert cor.mean_pass
    assert abs(unc.mean_gap[0]) > 3 * unc.mean_gap_se[0]
    mean = rep["sample"].terminal.mean()
    assert mean == pytest.approx(math.exp(1 / 12), abs=0.02)


def test_ablation_zero_gamma_coincides():
    cfg = FastSlowConfig(b=lin_b, db=lin_db, observable=cosine(), n=64, replicas=1000, seed=3)
    a = limit_sde_sample(cfg, [[0.5]], [[0.0]]).terminal
    b = limit_sde_sample(cfg, [[0.5]], np.zeros((1, 1))).terminal
    assert np.array_equal(a, b)


def test_constant_b_has_no_correction():
    b, db = eye_b(2)
    cfg = FastSlowConfig(b=b, db=db, d=2, m=2, observable=centered_id(), replicas=10)
    G = np.array([[0.0, 0.4], [-0.4, 0.0]])
    assert np.all(cfg.vector_fields().area_term(np.ones((5, 2)), G) == 0)
