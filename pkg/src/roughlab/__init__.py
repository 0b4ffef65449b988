"""Rough-path homogenization lab: level-2 rough paths, RDE solvers, fast
chaotic and stochastic drivers, limit-statistic estimators and fast-slow
homogenization experiments."""
__version__ = "0.1.0"

from .kernels import BACKEND
from .rough_core import (
    Level2Increment,
    RoughPathGrid,
    group_inv,
    group_mul,
    holder_norm,
    p_var_homog,
    p_var_inhomog,
    p_var_inhomog_dist,
    path_qvar,
)
from .lifts import brownian_rough_path, identity_suite, lift, pure_area_path
from .rde import BlowUpError, VectorFieldBundle, solve_rde, solve_sde_euler_maruyama
from .drivers import MapDriver, Observable, OUDriver, WalkDriver, centered_id, cosine
from .estimators import (
    estimate_gamma,
    estimate_sigma_batch,
    estimate_sigma_green_kubo,
    moment_scaling_diagnostic,
    pvar_moment_diagnostic,
)
from .homogenize import (
    FastSlowConfig,
    compare_laws,
    correction_ablation,
    run_continuous_fast_slow,
    run_discrete_fast_slow,
)
