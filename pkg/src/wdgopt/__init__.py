"""Weak discrete-gradient optimization methods with rate certificates.

The package has four layers: :mod:`~wdgopt.problems` (objective catalog),
:mod:`~wdgopt.wdg` (the two-point gradient maps and their certified
constants), :mod:`~wdgopt.schemes` (the iterations, backed by
:mod:`~wdgopt.solvers` for implicit steps), and :mod:`~wdgopt.verify`
(sampled inequality checks, Lyapunov monitors, rate certificates).  The
:mod:`~wdgopt.cli` module ties them into reproducible experiments.
"""

from .problems import (
    CompositeObjective,
    Objective,
    get_problem,
    load_quadratic,
    make_composite,
    make_quadratic,
    pl_sine,
    problem_keys,
    quadratic_2d,
    quartic_2d,
)
from .schemes import (
    OPTIMAL,
    InitQuantities,
    Scheme,
    SchemeAborted,
    SchemeConfig,
    Trace,
    ZStrategy,
    nag_sc_momentum,
    resolve_step_size,
    run_accel_convex,
    run_accel_sc,
    run_gradient_flow,
    run_nag_c,
    run_nag_sc,
    run_proximal_gradient,
    run_scheme,
)
from .solvers import (
    NoBracketError,
    NonConvergenceError,
    SingularJacobianError,
    SolveConfig,
    SolveResult,
    fixed_point,
    newton,
    scalar_root,
)
from .verify import (
    RateCertificate,
    VerificationReport,
    certify_trace,
    check_lyapunov,
    check_pl_conditions,
    check_strict_chain_rule,
    check_wdg_inequality,
    counterexample_strict_dg,
    factor_formula,
    infer_bound_id,
    lyapunov_series,
    lyapunov_step_factor,
    optimal_accel_factor,
    optimal_gf_factor,
    rate_bound,
    step_factor,
)
from .wdg import (
    AVF_NODES,
    Kind,
    PlWdgParams,
    SumWdg,
    WdgKind,
    WdgParams,
    avf_quadrature,
    eval_wdg,
    is_explicit,
    is_strict,
    kind_key,
    params_for,
    parse_kind,
    pl_params_for,
    pl_wdg_params,
    wdg_params,
)

__version__ = "0.1.0"
