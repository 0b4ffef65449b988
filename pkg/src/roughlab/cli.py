"""Command-line front end.

    roughlab {lift-check,estimate,moments,homogenize,ablate} [options]

Options come from a TOML file (``--config``, one flat table per subcommand)
and are overridden by flags. Results go to a CSV or JSON table; a manifest
with the resolved config, its hash, versions and wall time is written next
to it. Exit codes: 0 all checks pass, 2 a statistical check failed, 1 error
(including blow-up), 64 invalid usage.
"""
import argparse
import csv
import hashlib
import io
import json
import math
import platform
import sys
import time
from datetime import datetime, timezone

import numpy as np

from . import __version__, kernels
from .drivers import MapDriver, OUDriver, WalkDriver, centered_id, cosine
from .estimators import (
    center_observable,
    estimate_gamma,
    estimate_sigma_batch,
    estimate_sigma_green_kubo,
    jackknife_mean,
    moment_scaling_diagnostic,
    pvar_moment_diagnostic,
    birkhoff_batch,
    ito_lift_batch,
)
from .homogenize import (
    FastSlowConfig,
    compare_laws,
    limit_sde_sample,
    run_continuous_fast_slow,
    run_discrete_fast_slow,
)
from .lifts import identity_suite
from .rde import BlowUpError
from .rng import child_seed

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

SCHEMA_VERSION = 1
COLUMNS = ("schema_version", "experiment", "driver", "observable", "n", "replicas", "seed",
           "quantity", "estimate", "stderr", "reference", "pass")
EXIT_OK, EXIT_ERROR, EXIT_STAT_FAIL, EXIT_USAGE = 0, 1, 2, 64
ALPHA = 0.01

_DRIVER = {
    "driver": "doubling", "observable": "centered-id", "lsv_gamma": 0.25, "burn_in": 1000,
    "friction": "1,2;0,1", "epsilon": 0.1, "mesh": 2000, "walk_law": "rademacher",
}
_COMMON = {"seed": 0, "replicas": 1000, "format": "csv", "output": None, "manifest": None}
DEFAULTS = {
    "lift-check": {"seed": 1, "cases": 1000, "tol": 1e-12, "format": "csv", "output": None,
                   "manifest": None},
    "estimate": {**_COMMON, **_DRIVER, "n": 10000, "lag_max": "auto"},
    "moments": {**_COMMON, **_DRIVER, "q": 2.0, "n_min_exp": 8, "n_max_exp": 14, "tol": 0.1,
                "check": "band", "p": None, "pvar_replicas": 200, "pvar_max_exp": 12},
    "homogenize": {**_COMMON, **_DRIVER, "n": 2048, "b": "linear", "a": "zero", "xi": 1.0,
                   "sde_steps": None, "limits": "auto"},
}
DEFAULTS["ablate"] = dict(DEFAULTS["homogenize"])


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ------------------------------------------------------------------ parsing

def _add_common(p, cmd):
    s = argparse.SUPPRESS
    p.add_argument("--config", default=s, help="TOML file; table [%s] is read" % cmd)
    p.add_argument("--seed", type=int, default=s)
    p.add_argument("--output", "-o", default=s, help="result table path (stdout if omitted)")
    p.add_argument("--format", choices=("csv", "json"), default=s)
    p.add_argument("--manifest", default=s, help="manifest path (default <output>.manifest.json)")


def _add_driver(p):
    s = argparse.SUPPRESS
    p.add_argument("--replicas", type=int, default=s)
    p.add_argument("--driver", choices=("doubling", "lsv", "walk", "ou"), default=s)
    p.add_argument("--observable", choices=("centered-id", "cos"), default=s)
    p.add_argument("--lsv-gamma", type=float, default=s)
    p.add_argument("--burn-in", type=int, default=s)
    p.add_argument("--friction", default=s, help="OU friction matrix, rows split by ';'")
    p.add_argument("--epsilon", type=float, default=s)
    p.add_argument("--mesh", type=int, default=s)
    p.add_argument("--walk-law", choices=("rademacher", "gaussian"), default=s)


def build_parser():
    s = argparse.SUPPRESS
    parser = _Parser(prog="roughlab", description="Rough-path homogenization experiments.")
    parser.add_argument("--version", action="version", version=f"roughlab {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("lift-check", help="algebraic identity suite")
    _add_common(p, "lift-check")
    p.add_argument("--cases", type=int, default=s)
    p.add_argument("--tol", type=float, default=s)

    p = sub.add_parser("estimate", help="limit covariance and area drift")
    _add_common(p, "estimate")
    _add_driver(p)
    p.add_argument("--n", type=int, default=s)
    p.add_argument("--lag-max", default=s, help="integer or 'auto'")

    p = sub.add_parser("moments", help="moment scaling and p-variation tightness")
    _add_common(p, "moments")
    _add_driver(p)
    p.add_argument("--q", type=float, default=s)
    p.add_argument("--n-min-exp", type=int, default=s)
    p.add_argument("--n-max-exp", type=int, default=s)
    p.add_argument("--tol", type=float, default=s)
    p.add_argument("--check", choices=("band", "upper"), default=s)
    p.add_argument("--p", type=float, default=s, help="also run the p-var tightness check")
    p.add_argument("--pvar-replicas", type=int, default=s)
    p.add_argument("--pvar-max-exp", type=int, default=s)

    for name, help_ in (("homogenize", "fast-slow run vs corrected limit SDE"),
                        ("ablate", "fast-slow run vs corrected and uncorrected limit SDE")):
        p = sub.add_parser(name, help=help_)
        _add_common(p, name)
        _add_driver(p)
        p.add_argument("--n", type=int, default=s)
        p.add_argument("--b", choices=("linear", "constant", "rotation"), default=s)
        p.add_argument("--a", choices=("zero", "decay"), default=s)
        p.add_argument("--xi", type=float, default=s)
        p.add_argument("--sde-steps", type=int, default=s)
        p.add_argument("--limits", choices=("auto", "oracle", "estimated"), default=s)
    return parser


def resolve_config(argv):
    """Parse flags, merge with the TOML table, validate. Returns (command, config dict)."""
    ns = build_parser().parse_args(argv)
    if not getattr(ns, "command", None):
        raise UsageError("a subcommand is required")
    cmd = ns.command
    flags = {k: v for k, v in vars(ns).items() if k not in ("command", "config")}
    cfg = dict(DEFAULTS[cmd])
    path = getattr(ns, "config", None)
    if path:
        try:
            with open(path, "rb") as fh:
                table = tomllib.load(fh).get(cmd, {})
        except (OSError, tomllib.TOMLDecodeError) as exc:
            raise UsageError(f"cannot read config {path}: {exc}")
        for key, val in table.items():
            key = key.replace("-", "_")
            if key not in cfg:
                raise UsageError(f"unknown key {key!r} in [{cmd}]")
            cfg[key] = val
    cfg.update(flags)
    validate_config(cmd, cfg)
    return cmd, cfg


def _need(cond, msg):
    if not cond:
        raise UsageError(msg)


def parse_matrix(text):
    try:
        rows = [[float(v) for v in row.split(",")] for row in str(text).split(";")]
        M = np.array(rows, dtype=float)
    except ValueError:
        raise UsageError(f"cannot parse matrix {text!r}")
    _need(M.ndim == 2 and M.shape[0] == M.shape[1], "friction must be a square matrix")
    return M


def validate_config(cmd, cfg):
    _need(isinstance(cfg.get("seed"), int) and cfg["seed"] >= 0, "seed must be a non-negative integer")
    _need(cfg["format"] in ("csv", "json"), "format must be csv or json")
    if cmd == "lift-check":
        _need(cfg["cases"] >= 1, "cases must be >= 1")
        _need(cfg["tol"] > 0, "tol must be positive")
        return
    _need(cfg["replicas"] >= 2, "replicas must be >= 2")
    _need(cfg["driver"] in ("doubling", "lsv", "walk", "ou"), "unknown driver")
    _need(cfg["observable"] in ("centered-id", "cos"), "unknown observable")
    _need(0 < cfg["lsv_gamma"] < 0.5, "lsv-gamma must lie in (0, 1/2)")
    _need(cfg["burn_in"] >= 0, "burn-in must be >= 0")
    _need(0 < cfg["epsilon"] <= 1, "epsilon must lie in (0, 1]")
    _need(cfg["mesh"] >= 1, "mesh must be >= 1")
    if cfg["driver"] == "ou":
        M = parse_matrix(cfg["friction"])
        _need(np.min(np.linalg.eigvals(M).real) > 0, "friction spectrum must have positive real part")
        try:
            make_driver(cfg)
        except ValueError as exc:
            raise UsageError(str(exc))
    if "n" in cfg:
        _need(cfg["n"] >= 1, "n must be >= 1")
    if cmd == "estimate":
        lag = cfg["lag_max"]
        if lag != "auto":
            try:
                cfg["lag_max"] = int(lag)
            except (TypeError, ValueError):
                raise UsageError("lag-max must be an integer or 'auto'")
            _need(0 <= cfg["lag_max"] < cfg["n"], "lag-max must lie in [0, n)")
    if cmd == "moments":
        _need(cfg["driver"] in ("doubling", "lsv", "walk"), "moments needs a discrete driver")
        _need(cfg["q"] > 1, "q must exceed 1")
        _need(1 <= cfg["n_min_exp"] < cfg["n_max_exp"] <= 24, "need 1 <= n-min-exp < n-max-exp <= 24")
        _need(cfg["tol"] > 0, "tol must be positive")
        if cfg["p"] is not None:
            _need(2 < cfg["p"] < 3, "p must lie in (2, 3)")
            _need(cfg["n_min_exp"] < cfg["pvar_max_exp"] <= 14, "pvar-max-exp out of range")
            _need(cfg["pvar_replicas"] >= 2, "pvar-replicas must be >= 2")
    if cmd in ("homogenize", "ablate"):
        _need(math.isfinite(cfg["xi"]), "xi must be finite")
        _need(cfg["sde_steps"] is None or cfg["sde_steps"] >= 1, "sde-steps must be >= 1")
        _need(cfg["replicas"] >= 1000, "law comparisons need replicas >= 1000")
        m = noise_dim(cfg)
        _need(cfg["b"] != "rotation" or m == 2, "b=rotation needs a 2-dimensional driver")
        if cfg["limits"] == "oracle":
            _need(known_limits(cfg) is not None, "no oracle limit statistics for this driver")


# ------------------------------------------------------------------ builders

def make_driver(cfg):
    kind = cfg["driver"]
    if kind == "doubling":
        return MapDriver("doubling", 0.0, burn_in=cfg["burn_in"])
    if kind == "lsv":
        return MapDriver("lsv", cfg["lsv_gamma"], burn_in=cfg["burn_in"])
    if kind == "walk":
        return WalkDriver(cfg["walk_law"])
    return OUDriver(parse_matrix(cfg["friction"]), cfg["epsilon"], cfg["mesh"])


def make_observable(cfg, driver=None):
    """Observable for map drivers, centered by its invariant mean off the doubling map."""
    v = centered_id() if cfg["observable"] == "centered-id" else cosine()
    if isinstance(driver, MapDriver):
        v = center_observable(driver, v, seed=child_seed(cfg["seed"], "center"))[0]
    return v


def noise_dim(cfg):
    if cfg["driver"] == "ou":
        return parse_matrix(cfg["friction"]).shape[0]
    return 1


def driver_label(cfg):
    kind = cfg["driver"]
    if kind == "lsv":
        return f"lsv(gamma={cfg['lsv_gamma']!r})"
    if kind == "ou":
        return f"ou(friction={cfg['friction']};eps={cfg['epsilon']!r};mesh={cfg['mesh']})"
    if kind == "walk":
        return f"walk({cfg['walk_law']})"
    return kind


def observable_label(cfg):
    return "-" if cfg["driver"] in ("ou", "walk") else cfg["observable"]


def known_limits(cfg):
    """Closed-form (Sigma, Gamma) where one is available, else None."""
    kind = cfg["driver"]
    if kind == "doubling":
        if cfg["observable"] == "centered-id":
            return np.array([[0.25]]), np.array([[1.0 / 12]])
        return np.array([[0.5]]), np.array([[0.0]])
    if kind == "walk":
        return np.eye(1), np.zeros((1, 1))
    if kind == "ou":
        d = make_driver(cfg)
        return d.limit_covariance(), d.limit_area_drift()
    return None


_ROT = 0.5 * np.array([[[0.0, 1.0], [0.0, 0.0]], [[0.0, 0.0], [-1.0, 0.0]]])


def make_coefficients(name, m):
    """(b, Db) with b: (..., m) -> (..., m, m), Db: (..., m) -> (..., m, m, m)."""
    eye = np.eye(m)
    if name == "constant":
        return (lambda x: np.broadcast_to(eye, x.shape[:-1] + (m, m)).copy(),
                lambda x: np.zeros(x.shape[:-1] + (m, m, m)))
    if name == "linear":
        # b[k, j] = delta_kj x_k
        jac = np.einsum("kj,ka->kja", eye, eye)
        return (lambda x: x[..., :, None] * eye,
                lambda x: np.broadcast_to(jac, x.shape[:-1] + (m, m, m)).copy())
    jac = np.einsum("jka->kja", _ROT)
    return (lambda x: np.einsum("jka,...a->...kj", _ROT, x),
            lambda x: np.broadcast_to(jac, x.shape[:-1] + (m, m, m)).copy())


def make_drift(name):
    if name == "decay":
        return lambda x: -x
    return None


# ------------------------------------------------------------------ output

def _num(x):
    if x is None or x == "":
        return ""
    x = float(x)
    return repr(x) if math.isfinite(x) else ("nan" if math.isnan(x) else repr(x))


class Table:
    def __init__(self, experiment, cfg, driver="-", observable="-", n="-"):
        self.base = {"schema_version": SCHEMA_VERSION, "experiment": experiment,
                     "driver": driver, "observable": observable, "n": n,
                     "replicas": cfg.get("replicas", cfg.get("cases")), "seed": cfg["seed"]}
        self.rows = []

    def add(self, quantity, estimate, stderr=None, reference=None, passed=None, **over):
        row = dict(self.base, **over)
        row.update(quantity=quantity, estimate=_num(estimate), stderr=_num(stderr),
                   reference=_num(reference),
                   **{"pass": "" if passed is None else ("true" if passed else "false")})
        self.rows.append(row)

    def failed(self):
        return any(r["pass"] == "false" for r in self.rows)

    def render(self, fmt):
        if fmt == "json":
            return json.dumps({"schema_version": SCHEMA_VERSION, "columns": list(COLUMNS),
                               "rows": self.rows}, indent=2, sort_keys=True) + "\n"
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=COLUMNS, lineterminator="\n")
        w.writeheader()
        w.writerows(self.rows)
        return buf.getvalue()


def config_hash(cmd, cfg):
    blob = json.dumps({"command": cmd, "config": cfg}, sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


def manifest(cmd, cfg, wall, status):
    import scipy

    return {
        "command": cmd,
        "config": cfg,
        "config_hash": config_hash(cmd, cfg),
        "seed": cfg["seed"],
        "schema_version": SCHEMA_VERSION,
        "versions": {"roughlab": __version__, "python": platform.python_version(),
                     "numpy": np.__version__, "scipy": scipy.__version__},
        "backend": kernels.BACKEND,
        "wall_time_s": wall,
        "exit_code": status,
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }


# ------------------------------------------------------------------ experiments

def _idx(M, i, j):
    return "" if np.shape(M) == (1, 1) else f"[{i},{j}]"


def _matrix_rows(t, name, est, se, ref):
    m = np.atleast_2d(est).shape[0]
    for i in range(m):
        for j in range(m):
            r = None if ref is None else float(np.atleast_2d(ref)[i, j])
            e, s = float(np.atleast_2d(est)[i, j]), float(np.atleast_2d(se)[i, j])
            ok = None if r is None else abs(e - r) <= 3 * s
            t.add(name + _idx(est, i, j), e, s, r, ok)


def run_lift_check(cfg):
    t = Table("lift-check", cfg)
    for name, err in identity_suite(cfg["cases"], cfg["seed"]).items():
        t.add(f"max_rel_error:{name}", err, None, 0.0, err <= cfg["tol"])
    return t


def run_estimate(cfg):
    d = make_driver(cfg)
    v = make_observable(cfg, d)
    ref = known_limits(cfg)
    sig_ref, gam_ref = (None, None) if ref is None else ref
    t = Table("estimate", cfg, driver_label(cfg), observable_label(cfg),
              "-" if cfg["driver"] == "ou" else cfg["n"])
    R, seed, n = cfg["replicas"], cfg["seed"], cfg["n"]
    if isinstance(d, OUDriver):
        from .estimators import ou_batch

        ob = ou_batch(d, R, seed)
        s = estimate_sigma_batch(d, replicas=R, seed=seed, batch=ob)
        g = estimate_gamma(d, replicas=R, seed=seed, batch=ob)
        _matrix_rows(t, "sigma_hat:batch", s.sigma_hat, s.sigma_se, sig_ref)
        _matrix_rows(t, "gamma_hat:empirical", g.gamma_hat, g.gamma_se, gam_ref)
        return t
    lag = None if cfg["lag_max"] == "auto" else cfg["lag_max"]
    L = min(200, n - 1) if lag is None else lag
    b = birkhoff_batch(d, v, n, R, seed, lags=L)
    s = estimate_sigma_batch(d, v, n, R, seed, batch=b)
    _matrix_rows(t, "sigma_hat:batch", s.sigma_hat, s.sigma_se, sig_ref)
    gk = estimate_sigma_green_kubo(d, v, lag, n, R, seed, batch=b)
    _matrix_rows(t, "sigma_hat:green-kubo", gk.sigma_hat, gk.sigma_se, sig_ref)
    g = estimate_gamma(d, v, n, R, "empirical", seed, batch=b)
    _matrix_rows(t, "gamma_hat:empirical", g.gamma_hat, g.gamma_se, gam_ref)
    gs = estimate_gamma(d, v, n, R, "series", seed, lag_max=lag, batch=b)
    _matrix_rows(t, "gamma_hat:series", gs.gamma_hat, gs.gamma_se, gam_ref)
    t.add("lag_max_used", gk.meta["lag_max"])
    return t


def run_moments(cfg):
    d = make_driver(cfg)
    v = make_observable(cfg, d)
    ns = [2 ** k for k in range(cfg["n_min_exp"], cfg["n_max_exp"] + 1)]
    t = Table("moments", cfg, driver_label(cfg), observable_label(cfg), ns[-1])
    rep = moment_scaling_diagnostic(d, v, cfg["q"], ns, cfg["replicas"], cfg["seed"], cfg["tol"])
    for n, a, s in zip(ns, rep.norm_v, rep.norm_S):
        t.add(f"norm_v_2q", a, n=n)
        t.add(f"norm_S_q", s, n=n)
    band = cfg["check"] == "band"

    def ok(slope, target):
        return abs(slope - target) <= cfg["tol"] if band else slope <= target + cfg["tol"]

    t.add("slope_v_2q", rep.slope_v, rep.slope_v_se, 0.5, ok(rep.slope_v, 0.5))
    t.add("slope_S_q", rep.slope_S, rep.slope_S_se, 1.0, ok(rep.slope_S, 1.0))
    if cfg["p"] is not None:
        pns = [2 ** k for k in range(cfg["n_min_exp"], cfg["pvar_max_exp"] + 1)]
        seed = child_seed(cfg["seed"], "misc")
        paths = {n: ito_lift_batch(d, v, n, cfg["pvar_replicas"], seed) for n in pns}
        tr = pvar_moment_diagnostic(paths, cfg["p"], 1.0, cfg["tol"])
        for n, mo, se in zip(pns, tr.moments, tr.moment_se):
            t.add("pvar_moment", mo, se, n=n, replicas=cfg["pvar_replicas"])
        t.add("pvar_slope", tr.slope, tr.slope_se, 0.0, tr.passed, replicas=cfg["pvar_replicas"])
    return t


def _limits(cfg, d, v, m):
    mode = cfg["limits"]
    ref = known_limits(cfg)
    if mode == "oracle" or (mode == "auto" and ref is not None):
        return ref[0], ref[1], "oracle"
    seed = child_seed(cfg["seed"], "misc")
    if isinstance(d, OUDriver):
        s = estimate_sigma_batch(d, replicas=cfg["replicas"], seed=seed)
        g = estimate_gamma(d, replicas=cfg["replicas"], seed=seed)
    else:
        b = birkhoff_batch(d, v, cfg["n"], cfg["replicas"], seed)
        s = estimate_sigma_batch(d, v, batch=b)
        g = estimate_gamma(d, v, batch=b)
    return s.sigma_hat, g.gamma_hat, "estimated"


def _fast_slow(cfg):
    d = make_driver(cfg)
    v = make_observable(cfg, d)
    m = noise_dim(cfg)
    b, db = make_coefficients(cfg["b"], m)
    fs = FastSlowConfig(b=b, db=db, a=make_drift(cfg["a"]), d=m, m=m, driver=d,
                        observable=v if isinstance(d, MapDriver) else None, n=cfg["n"],
                        xi=cfg["xi"], replicas=cfg["replicas"], seed=cfg["seed"])
    continuous = isinstance(d, OUDriver)
    sample = run_continuous_fast_slow(fs) if continuous else run_discrete_fast_slow(fs)
    sigma, gamma, source = _limits(cfg, d, v, m)
    mode = "stratonovich" if continuous else "ito"
    steps = cfg["sde_steps"] or (1000 if continuous else cfg["n"])
    return fs, sample, sigma, gamma, source, mode, steps


def _mean_reference(cfg, sigma, gamma, mode):
    """xi e^{Gamma} (Ito) or xi e^{Gamma + Sigma/2} (Stratonovich) for scalar b(x) = x."""
    if cfg["b"] != "linear" or cfg["a"] != "zero" or np.shape(sigma) != (1, 1):
        return None
    rate = gamma[0, 0] + (0.5 * sigma[0, 0] if mode == "stratonovich" else 0.0)
    return cfg["xi"] * math.exp(rate)


def _homogenize_rows(t, cfg, sample, sde, sigma, gamma, mode, label=""):
    x = sample.terminal
    mean, se = jackknife_mean(x)
    cmp_ = compare_laws(x, sde)
    ref = _mean_reference(cfg, sigma, gamma, mode)
    for k in range(x.shape[1]):
        sfx = "" if x.shape[1] == 1 else f"[{k}]"
        if ref is not None and not label:
            t.add("mean_x1" + sfx, mean[k], se[k], ref, abs(mean[k] - ref) <= 3 * se[k])
        elif not label:
            t.add("mean_x1" + sfx, mean[k], se[k])
        t.add(f"mean_gap{label}" + sfx, cmp_.mean_gap[k], cmp_.mean_gap_se[k], 0.0,
              None if label else abs(cmp_.mean_gap[k]) <= 3 * cmp_.mean_gap_se[k])
        t.add(f"ks_pvalue{label}" + sfx, cmp_.ks_pvalue[k], None, ALPHA,
              None if label else cmp_.ks_pvalue[k] > ALPHA)
        t.add(f"var_gap{label}" + sfx, cmp_.var_gap[k], cmp_.var_gap_se[k], 0.0)
        t.add(f"wasserstein1{label}" + sfx, cmp_.wasserstein[k])
    return cmp_


def run_homogenize(cfg, ablate=False):
    fs, sample, sigma, gamma, source, mode, steps = _fast_slow(cfg)
    name = "ablate" if ablate else "homogenize"
    t = Table(name, cfg, driver_label(cfg), observable_label(cfg),
              "-" if isinstance(fs.driver, OUDriver) else cfg["n"])
    if sample.verified:
        t.add("max_recursion_vs_rde_error", sample.max_verify_error, None, 0.0,
              sample.max_verify_error <= 1e-12)
    _matrix_rows(t, f"sigma_used:{source}", sigma, np.zeros_like(sigma), None)
    _matrix_rows(t, f"gamma_used:{source}", gamma, np.zeros_like(gamma), None)
    sde = np.atleast_2d(limit_sde_sample(fs, sigma, gamma, mode, N=steps).terminal.T).T
    _homogenize_rows(t, cfg, sample, sde, sigma, gamma, mode)
    if ablate:
        zero = np.zeros_like(gamma)
        plain = np.atleast_2d(limit_sde_sample(fs, sigma, zero, mode, N=steps).terminal.T).T
        c = _homogenize_rows(t, cfg, sample, plain, sigma, zero, mode, label=":uncorrected")
        # correction term size: the ablation is only meaningful when it is nonzero
        corr = float(np.max(np.abs(fs.vector_fields().area_term(fs.xi, gamma))))
        t.add("correction_size_at_xi", corr)
        if corr > 0:
            detected = bool(np.any(np.abs(c.mean_gap) > 3 * c.mean_gap_se))
            t.add("ablation_detected", float(detected), None, None, detected)
    return t


RUNNERS = {
    "lift-check": run_lift_check,
    "estimate": run_estimate,
    "moments": run_moments,
    "homogenize": run_homogenize,
    "ablate": lambda cfg: run_homogenize(cfg, ablate=True),
}


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    try:
        cmd, cfg = resolve_config(argv)
    except UsageError as exc:
        build_parser().print_usage(sys.stderr)
        print(f"roughlab: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    t0 = time.perf_counter()
    try:
        table = RUNNERS[cmd](cfg)
    except BlowUpError as exc:
        print(f"roughlab: {cmd}: numeric blow-up ({exc}); driver={cfg.get('driver')} "
              f"seed={cfg['seed']}", file=sys.stderr)
        return EXIT_ERROR
    except (ValueError, FloatingPointError, MemoryError) as exc:
        print(f"roughlab: {cmd}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    status = EXIT_STAT_FAIL if table.failed() else EXIT_OK
    text = table.render(cfg["format"])
    out = cfg["output"]
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    mpath = cfg["manifest"] or (None if out in (None, "-") else out + ".manifest.json")
    if mpath:
        with open(mpath, "w") as fh:
            json.dump(manifest(cmd, cfg, time.perf_counter() - t0, status), fh, indent=2,
                      sort_keys=True, default=str)
            fh.write("\n")
    return status


if __name__ == "__main__":
    sys.exit(main())
