import math

import mpmath
import numpy as np
import pytest
from scipy import linalg, stats
from scipy.integrate import simpson

from roughlab.drivers import (
    MapDriver,
    OUDriver,
    Observable,
    WalkDriver,
    birkhoff_path,
    centered_id,
    cosine,
    increment_chunks,
    iterate_map,
    iterated_sum_path,
    lsv_map,
    map_orbit_chunks,
    ou_increment_blocks,
    ou_rough_path,
    walk_rough_path,
    zero_observable,
)
from roughlab.estimators import ou_batch
from roughlab.lifts import lift


def test_doubling_examples():
    d = MapDriver()
    assert d(0.3) == pytest.approx(0.6, abs=1e-15)
    assert d(0.7) == pytest.approx(0.4, abs=1e-15)
    assert d(0.5) == 0.0 and d(1.0) == 1.0


def test_lsv_branch_high_precision():
    mpmath.mp.dps = 40
    y = mpmath.mpf(1) / 4
    exact = y * (1 + (2 * y) ** mpmath.mpf("0.25"))
    assert lsv_map(0.25, 0.25) == pytest.approx(float(exact), rel=1e-15)
    assert float(exact) == pytest.approx(0.4602, abs=1e-4)
    assert lsv_map(0.5, 0.25) == 0.0 and lsv_map(1.0, 0.25) == 1.0


def test_map_validation():
    for kw in ({"kind": "tent"}, {"kind": "lsv", "gamma": 0.5}, {"kind": "lsv", "gamma": -0.1},
               {"kind": "doubling", "gamma": 0.2}, {"burn_in": -1}):
        with pytest.raises(ValueError):
            MapDriver(**kw)
    with pytest.raises(ValueError):
        iterate_map(MapDriver(), 1.5, 3)


def test_iterate_map_orbit():
    orb = iterate_map(MapDriver("lsv", 0.3), 0.1, 50)
    assert orb[0] == 0.1
    assert np.allclose(orb[1:], lsv_map(orb[:-1], 0.3))


def test_exact_doubling_orbit():
    d = MapDriver(burn_in=10)
    orb = np.concatenate(list(map_orbit_chunks(d, 300, 16, seed=4, chunk=64)), axis=1)
    assert np.all((orb >= 0) & (orb < 1))
    step = orb[:, 1:] - np.mod(2 * orb[:, :-1], 1.0)
    assert np.all(np.isin(step, [0.0, 2.0 ** -53]))


def test_lsv_orbit_in_unit_interval():
    d = MapDriver("lsv", 0.45, burn_in=0)
    orb = np.concatenate(list(map_orbit_chunks(d, 2000, 64, seed=2)), axis=1)
    assert np.all((orb >= 0) & (orb <= 1))


def test_doubling_lebesgue_invariance():
    orb = np.concatenate(list(map_orbit_chunks(MapDriver(), 1000, 1000, seed=8)), axis=1).ravel()
    counts = np.histogram(orb, bins=100, range=(0, 1))[0]
    assert stats.chisquare(counts).pvalue > 0.001


def test_lsv_mass_near_zero():
    orb = np.concatenate(list(map_orbit_chunks(MapDriver("lsv", 0.4), 5000, 200, seed=3)), axis=1)
    for delta in (0.01, 0.05):
        assert np.mean(orb < delta) > delta


def test_orbits_independent_of_layout():
    for d in (MapDriver(), MapDriver("lsv", 0.25)):
        a = np.concatenate(list(map_orbit_chunks(d, 700, 10, seed=5, chunk=512)), axis=1)
        b = np.concatenate(list(map_orbit_chunks(d, 700, 10, seed=5, chunk=33, cuts=(100,))), axis=1)
        c = np.concatenate(list(map_orbit_chunks(d, 700, [3, 7], seed=5)), axis=1)
        assert np.array_equal(a, b)
        assert np.array_equal(a[[3, 7]], c)


def test_birkhoff_examples():
    bp = birkhoff_path(MapDriver(), zero_observable(), 20, seed=1)
    assert np.all(bp.values == 0)
    bp = birkhoff_path(MapDriver(), centered_id(), 2, y0=0.3)
    assert bp.values[-1, 0] == pytest.approx((-0.2 + 0.1) / math.sqrt(2), rel=1e-12)
    assert np.allclose(bp.times, [0, 0.5, 1])


def test_ergodic_average():
    n = 10 ** 6
    bp = birkhoff_path(MapDriver(), centered_id(), n, seed=12)
    assert abs(bp.sums[-1, 0] / n) < 5 * n ** -0.5 * 0.5


def test_iterated_sums_brute_force():
    v = Observable(lambda y: np.stack([y - 0.5, np.cos(2 * np.pi * y)], axis=-1), 2)
    d = MapDriver("lsv", 0.2)
    path, S = iterated_sum_path(d, v, 1, seed=3)
    inc = birkhoff_path(d, v, 1, seed=3).increments
    assert np.all(path.M[-1] == 0)
    assert np.allclose(S, np.outer(inc[0], inc[0]))
    for n in (3, 17, 50):
        path, S = iterated_sum_path(d, v, n, seed=n)
        bp = birkhoff_path(d, v, n, seed=n)
        vv = bp.increments
        brute = np.zeros((2, 2))
        strict = np.zeros((2, 2))
        for i in range(n):
            for j in range(i, n):
                brute += np.outer(vv[i], vv[j])
                if i < j:
                    strict += np.outer(vv[i], vv[j])
        assert np.allclose(S, brute, rtol=1e-12, atol=1e-12)
        assert np.allclose(path.M[-1] * n, strict, rtol=1e-12, atol=1e-12)
        ref = lift(bp.values, bp.times, "piecewise_constant_ito")
        assert np.array_equal(ref.M, path.M)


def test_walk_paths():
    d = WalkDriver()
    vals = {walk_rough_path(d, 1, seed=0, replica=r).X[-1, 0] for r in range(50)}
    assert vals == {-1.0, 1.0}
    S = np.array([[1.0, 0.4], [0.4, 0.5]])
    g = WalkDriver("gaussian", S)
    R = 4000
    W = np.empty((R, 2))
    anti = np.empty(R)
    for r in range(R):
        p = walk_rough_path(g, 200, seed=1, replica=r)
        W[r] = p.X[-1]
        anti[r] = p.M[-1, 0, 1] - p.M[-1, 1, 0]
    outer = np.einsum("rj,rk->rjk", W, W)
    se = outer.std(0, ddof=1) / math.sqrt(R)
    assert np.all(np.abs(outer.mean(0) - S) <= 3 * se)
    assert abs(anti.mean()) <= 3 * anti.std(ddof=1) / math.sqrt(R)
    with pytest.raises(ValueError):
        walk_rough_path(d, 10, lift="rough")


def test_walk_increment_chunks_deterministic():
    d = WalkDriver()
    a = np.concatenate(list(increment_chunks(d, None, 100, 5, seed=2, chunk=100)), axis=1)
    b = np.concatenate(list(increment_chunks(d, None, 100, 5, seed=2, chunk=7)), axis=1)
    assert np.array_equal(a, b)


def test_ou_validation():
    with pytest.raises(ValueError):
        OUDriver(np.array([[-1.0]]))
    with pytest.raises(ValueError):
        OUDriver(np.eye(2), epsilon=0.01, mesh=100)
    with pytest.raises(ValueError):
        OUDriver(np.eye(2), epsilon=0.0)


def test_ou_closed_forms():
    M = np.array([[1.0, 2.0], [0.0, 1.0]])
    d = OUDriver(M, 0.1, 2000)
    Minv = np.linalg.inv(M)
    assert np.allclose(d.limit_covariance(), Minv @ Minv.T)
    C = d.stationary_covariance()
    assert np.allclose(M @ C + C @ M.T, np.eye(2))
    G = d.limit_area_drift()
    assert np.allclose(G, -G.T)
    sym = OUDriver(np.array([[2.0, 0.5], [0.5, 1.0]]), 0.1, 4000)
    assert np.allclose(sym.limit_area_drift(), 0, atol=1e-14)


def test_ou_transition_matches_quadrature():
    M = np.array([[1.0, 2.0], [0.0, 1.0]])
    d = OUDriver(M, 0.2, 500)
    Phi, root = d.transition()
    h = d.fast_step
    F = np.block([[-M, np.zeros((2, 2))], [np.eye(2), np.zeros((2, 2))]])
    assert np.allclose(Phi, linalg.expm(F * h))
    # Q = int_0^h e^{Fs} G G^T e^{F^T s} ds by Simpson's rule
    s = np.linspace(0, h, 2001)
    GG = np.zeros((4, 4))
    GG[:2, :2] = np.eye(2)
    vals = np.array([linalg.expm(F * u) @ GG @ linalg.expm(F * u).T for u in s])
    Qn = simpson(vals, x=s, axis=0)
    assert np.allclose(root @ root.T, Qn, atol=1e-10)


def test_ou_path_starts_at_zero():
    path = ou_rough_path(OUDriver(np.eye(1), 0.2, 300), seed=1)
    assert path.X[0, 0] == 0 and path.flavor == "geometric-continuous"
    assert path.times.size == 301


def test_ou_blocks_layout_independent():
    d = OUDriver(np.eye(2), 0.2, 300)
    a = np.concatenate([dw for _, dw in ou_increment_blocks(d, 7, seed=3, block=7)])
    b = np.concatenate([dw for _, dw in ou_increment_blocks(d, 7, seed=3, block=2)])
    assert np.array_equal(a, b)


def test_ou_covariance_and_area():
    d = OUDriver(np.eye(2), 0.1, 1000)
    ob = ou_batch(d, 4000, seed=5)
    outer = np.einsum("rj,rk->rjk", ob.W, ob.W)
    se = outer.std(0, ddof=1) / math.sqrt(4000)
    assert np.all(np.abs(outer.mean(0) - np.eye(2)) <= 3 * se)
    anti = ob.area[:, 0, 1] - ob.area[:, 1, 0]
    assert abs(anti.mean()) <= 3 * anti.std(ddof=1) / math.sqrt(4000)
