"""Step-2 Euler scheme for RDEs and Euler-Maruyama for the limiting SDEs.

One step of the RDE scheme over [s, t]:

    Y_t = Y_s + V0(Y_s) (t - s) + V(Y_s) X_{s,t} + DV(Y_s) V(Y_s) XX_{s,t}

with the contraction (DV V M)^k = sum d_a V^k_g  V^a_b  M^{b g}.
"""
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .lifts import psd_sqrt
from .rng import replica_generator
from .rough_core import path_qvar, p_var_inhomog_dist

DEFAULT_BLOWUP = 1e8


class BlowUpError(FloatingPointError):
    """Solution left the finite / bounded region; ``time`` is the first bad time."""

    def __init__(self, time, message="solution blew up"):
        super().__init__(f"{message} at t={time:.6g}")
        self.time = time


@dataclass
class VectorFieldBundle:
    """Coefficients of dY = V0(Y) dt + V(Y) dX.

    Callables act on batches: ``V(y)`` maps (..., d) to (..., d, m),
    ``V0(y)`` to (..., d), and ``jac(y)`` to (..., d, m, d) with
    ``jac[..., k, j, a] = dV[k, j] / dy_a``. Without ``jac`` the derivative
    is taken by central differences.
    """

    dim_state: int
    dim_noise: int
    V: Callable
    V0: Optional[Callable] = None
    jac: Optional[Callable] = None
    validate: bool = True
    fd_step: float = 1e-6

    def __post_init__(self):
        if not self.validate:
            return
        probe = np.zeros((2, self.dim_state))
        d, m = self.dim_state, self.dim_noise
        if np.shape(self.V(probe)) != (2, d, m):
            raise ValueError(f"V must map (..., {d}) to (..., {d}, {m})")
        if self.V0 is not None and np.shape(self.V0(probe)) != (2, d):
            raise ValueError(f"V0 must map (..., {d}) to (..., {d})")
        if self.jac is not None:
            if np.shape(self.jac(probe)) != (2, d, m, d):
                raise ValueError(f"jac must map (..., {d}) to (..., {d}, {m}, {d})")
            err = finite_diff_check_DV(self, samples=16, h=1e-4)
            scale = 1.0 + float(np.abs(self.dvol(np.ones(self.dim_state))).max())
            if err > 1e-4 * scale:
                raise ValueError(f"jac disagrees with finite differences of V (error {err:.3g})")

    def drift(self, y):
        if self.V0 is None:
            return np.zeros_like(y)
        return np.asarray(self.V0(y), dtype=float)

    def vol(self, y):
        return np.asarray(self.V(y), dtype=float)

    def dvol(self, y):
        if self.jac is not None:
            return np.asarray(self.jac(y), dtype=float)
        return _central_jac(self.V, np.asarray(y, dtype=float), self.fd_step, self.dim_state)

    def area_term(self, y, M):
        """DV(y) V(y) M for M of shape (..., m, m) (or (m, m))."""
        J = self.dvol(y)
        Vy = self.vol(y)
        return np.einsum("...kga,...ab,...bg->...k", J, Vy, M)


def _central_jac(V, y, h, d):
    cols = []
    for a in range(d):
        e = np.zeros(d)
        e[a] = h
        cols.append((np.asarray(V(y + e)) - np.asarray(V(y - e))) / (2 * h))
    return np.stack(cols, axis=-1)


def finite_diff_check_DV(vf, samples=64, h=1e-5, seed=0, scale=1.0):
    """Max |jac - central difference of V| over random states."""
    rng = np.random.default_rng(seed)
    y = scale * rng.standard_normal((samples, vf.dim_state))
    fd = _central_jac(vf.V, y, h, vf.dim_state)
    return float(np.max(np.abs(vf.dvol(y) - fd)))


@dataclass
class RDESolution:
    times: np.ndarray
    states: Optional[np.ndarray]
    terminal: np.ndarray
    diagnostics: dict = field(default_factory=dict)


def _check(y, t, bound):
    if not np.all(np.isfinite(y)) or np.max(np.abs(y), initial=0.0) > bound:
        raise BlowUpError(t)


def step2_euler(vf, dX, dM, dt, y0, times=None, blowup=DEFAULT_BLOWUP, store=True):
    """March the step-2 Euler scheme over a batch of drivers.

    dX: (R, N, m); dM: (R, N, m, m) or None; dt: (N,) clock increments;
    y0: (R, d). Returns (states (R, N+1, d) or None, terminal, max area term).
    """
    R, N, _ = dX.shape
    y = np.array(y0, dtype=float, copy=True)
    times = np.concatenate([[0.0], np.cumsum(dt)]) if times is None else times
    states = np.empty((R, N + 1, y.shape[-1])) if store else None
    if store:
        states[:, 0] = y
    max_area = 0.0
    for i in range(N):
        step = vf.drift(y) * dt[i] + np.einsum("...kj,...j->...k", vf.vol(y), dX[:, i])
        if dM is not None:
            area = vf.area_term(y, dM[:, i])
            max_area = max(max_area, float(np.max(np.abs(area), initial=0.0)))
            step = step + area
        y = y + step
        _check(y, times[i + 1], blowup)
        if store:
            states[:, i + 1] = y
    return states, y, max_area


def solve_rde(vf, driver, y0, clock=None, blowup=DEFAULT_BLOWUP):
    """Solve dY = V0(Y-) dt + V(Y-) dX along a RoughPathGrid.

    ``clock`` optionally replaces the time grid in the drift term (for the
    discrete fast-slow recursion the drift integrates against z_n).
    """
    if driver.dim != vf.dim_noise:
        raise ValueError(f"driver dimension {driver.dim} != noise dimension {vf.dim_noise}")
    y0 = np.atleast_1d(np.asarray(y0, dtype=float))
    if y0.shape != (vf.dim_state,):
        raise ValueError("initial state has the wrong dimension")
    dX, dM = driver.step_increments()
    clock = driver.times if clock is None else np.asarray(clock, dtype=float)
    dt = np.diff(clock)
    states, yT, max_area = step2_euler(
        vf, dX[None], dM[None], dt, y0[None], times=driver.times, blowup=blowup
    )
    return RDESolution(driver.times, states[0], yT[0], {"max_area_term": max_area})


def corrected_drift(vf, gamma, sigma=None, mode="ito"):
    """Ito drift of the limit SDE: V0 + DV V (gamma [+ sigma/2 in Stratonovich mode])."""
    eff = np.atleast_2d(np.asarray(gamma, dtype=float))
    if mode == "stratonovich":
        eff = eff + 0.5 * np.atleast_2d(np.asarray(sigma, dtype=float))
    elif mode != "ito":
        raise ValueError(f"mode must be 'ito' or 'stratonovich', got {mode!r}")
    nonzero = np.any(eff != 0)

    def drift(y):
        out = vf.drift(y)
        if nonzero:
            out = out + vf.area_term(y, eff)
        return out

    return drift


def solve_sde_euler_maruyama(vf, mode, sigma, gamma, N, rng_seed, y0, replicas=1,
                             block=4096, store_paths=False, purpose="sde",
                             blowup=DEFAULT_BLOWUP):
    """Euler-Maruyama for dX = (V0 + DV V Gamma) dt + V(X) dW, Cov(W(1)) = sigma.

    Stratonovich mode converts to Ito by adding DV V sigma / 2. Replica ``i``
    draws its noise from stream (rng_seed, purpose, i).
    """
    sigma = np.atleast_2d(np.asarray(sigma, dtype=float))
    root = psd_sqrt(sigma)
    if sigma.shape != (vf.dim_noise, vf.dim_noise):
        raise ValueError("sigma shape does not match the noise dimension")
    drift = corrected_drift(vf, gamma, sigma, mode)
    N = int(N)
    h = 1.0 / N
    times = np.linspace(0.0, 1.0, N + 1)
    y0 = np.broadcast_to(np.atleast_1d(np.asarray(y0, dtype=float)), (vf.dim_state,))
    terminal = np.empty((replicas, vf.dim_state))
    paths = np.empty((replicas, N + 1, vf.dim_state)) if store_paths else None
    m = vf.dim_noise
    for start in range(0, replicas, block):
        stop = min(replicas, start + block)
        z = np.stack([replica_generator(rng_seed, purpose, i).standard_normal((N, m))
                      for i in range(start, stop)])
        dW = np.einsum("rnj,kj->rnk", z, root) * np.sqrt(h)
        y = np.tile(y0, (stop - start, 1))
        if store_paths:
            paths[start:stop, 0] = y
        for i in range(N):
            y = y + drift(y) * h + np.einsum("rkj,rj->rk", vf.vol(y), dW[:, i])
            _check(y, times[i + 1], blowup)
            if store_paths:
                paths[start:stop, i + 1] = y
        terminal[start:stop] = y
    if replicas == 1 and store_paths:
        states = paths[0]
    else:
        states = paths
    return RDESolution(times, states, terminal if replicas > 1 else terminal[0],
                       {"mode": mode, "replicas": replicas})


def lipschitz_ratio(vf, x, x_tilde, y0, y0_tilde, p):
    """(|Y0 - Y~0| + ||Y - Y~||_{p-var}) / (|y0 - y0~| + rough distance of drivers)."""
    Y = solve_rde(vf, x, y0).states
    Yt = solve_rde(vf, x_tilde, y0_tilde).states
    start = float(np.linalg.norm(np.subtract(y0, y0_tilde)))
    num = start + path_qvar(Y - Yt, p)
    den = start + p_var_inhomog_dist(x, x_tilde, p)
    return num / den
