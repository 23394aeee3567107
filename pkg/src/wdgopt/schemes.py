"""Iteration schemes driven by weak discrete gradients, plus baselines.

Four families are implemented, all emitting a full :class:`Trace`:

* gradient flow: ``(x_{k+1} - x_k)/h = -g(x_{k+1}, x_k)``,
* accelerated scheme for convex objectives (two-variable, weight A_k = (kh)^2),
* accelerated scheme for strongly convex objectives (two-variable, geometric),
* the forward-backward splitting instance on composite objectives.

Nesterov's accelerated methods (convex and strongly convex forms) are
included as reference baselines with the same trace schema.

Step sizes may be given numerically or resolved to the largest certified
value for the scheme and constants (``h="optimal"``).  Implicit kinds solve
their update equation per step with the solvers from :mod:`wdgopt.solvers`;
convergence is measured on the divided residual ``||(map(x) - x)/h||`` so
the reported solver hygiene is meaningful for any step size.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from math import sqrt
from typing import Optional, Union

import numpy as np

from .problems import CompositeObjective, Objective
from .solvers import (
    NoBracketError,
    NonConvergenceError,
    SolveConfig,
    fixed_point,
    newton,
    scalar_root,
)
from .wdg import (
    ITOH_ABE_COINCIDENCE_RTOL,
    Kind,
    PlWdgParams,
    SumWdg,
    WdgKind,
    WdgParams,
    eval_wdg,
    is_explicit,
    kind_key,
    params_for,
    pl_params_for,
)

__all__ = [
    "Scheme",
    "ZStrategy",
    "OPTIMAL",
    "SchemeConfig",
    "Trace",
    "InitQuantities",
    "SchemeAborted",
    "resolve_step_size",
    "run_gradient_flow",
    "run_accel_convex",
    "run_accel_sc",
    "run_proximal_gradient",
    "run_nag_c",
    "run_nag_sc",
    "run_scheme",
    "nag_sc_momentum",
]

Array = np.ndarray

OPTIMAL = "optimal"

# cap applied when a scheme's admissible step is unbounded (the implicit
# Euler "rate 0" limit); one capped step already lands next to the optimum
_H_CAP = 1e6


class Scheme(Enum):
    GRADIENT_FLOW = "gradient-flow"
    ACCEL_CONVEX = "accel-convex"
    ACCEL_SC = "accel-sc"
    PROXIMAL_GRADIENT = "proximal-gradient"
    NAG_C = "nag-c"
    NAG_SC = "nag-sc"


class ZStrategy(Enum):
    """Choice of the auxiliary evaluation point z_k in accelerated schemes.

    COUPLED uses the scheme's own z-equation (certified step bound), PREV
    uses the previous iterate (smaller certified step), NEXT the next iterate
    (certified at any step, at the price of a larger implicit system).
    """

    COUPLED = "coupled"
    PREV = "prev"
    NEXT = "next"


@dataclass(frozen=True)
class SchemeConfig:
    scheme: Scheme
    x0: Optional[Array] = None
    h: Union[float, str] = OPTIMAL
    iterations: int = 100
    z_strategy: ZStrategy = ZStrategy.COUPLED
    v0: Optional[Array] = None
    solver: SolveConfig = field(default_factory=SolveConfig)
    flavor: str = "auto"  # auto | convex | sc | pl

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not isinstance(self.h, str) and float(self.h) <= 0:
            raise ValueError("h must be positive")
        if isinstance(self.h, str) and self.h != OPTIMAL:
            raise ValueError(f"h must be a number or {OPTIMAL!r}")
        if self.flavor not in ("auto", "convex", "sc", "pl"):
            raise ValueError(f"unknown flavor {self.flavor!r}")


@dataclass(frozen=True)
class InitQuantities:
    """Initial quantities consumed by the rate-bound formulas."""

    dist0_sq: Optional[float] = None
    f_gap0: Optional[float] = None
    v_dist0_sq: Optional[float] = None
    pl_mu: Optional[float] = None


@dataclass(frozen=True, eq=False)
class Trace:
    """Per-iteration record of a scheme run.

    Arrays have length K+1 with record 0 holding the initial state; ``zs``
    holds the K auxiliary points actually used (accelerated schemes only).
    ``f_gap`` is NaN throughout when the problem's optimum is unknown.
    """

    scheme: Scheme
    kind: Optional[str]
    flavor: str
    h: float
    params: Union[WdgParams, PlWdgParams, None]
    xs: Array
    f_values: Array
    f_gap: Array
    inner_iters: Array
    inner_residual: Array
    vs: Optional[Array] = None
    zs: Optional[Array] = None
    z_strategy: Optional[ZStrategy] = None
    init: InitQuantities = field(default_factory=InitQuantities)

    @property
    def iterations(self) -> int:
        return len(self.xs) - 1


class SchemeAborted(RuntimeError):
    """Inner solve failed; carries the trace accumulated so far."""

    def __init__(self, message, trace: Trace):
        super().__init__(message)
        self.trace = trace


def _resolve_flavor(f: Objective, flavor: str) -> str:
    if flavor != "auto":
        return flavor
    if f.strong_convexity > 0:
        return "sc"
    if f.pl_constant is not None:
        return "pl"
    return "convex"


def resolve_step_size(scheme: Scheme, params, z_strategy: ZStrategy = ZStrategy.COUPLED) -> float:
    """Largest certified step size for the scheme and constants.

    Where the admissible step is unbounded the returned value is capped
    (``1e6`` scaled by the relevant curvature) rather than infinite.
    """
    if isinstance(params, PlWdgParams):
        if scheme not in (Scheme.GRADIENT_FLOW, Scheme.PROXIMAL_GRADIENT):
            raise ValueError("gradient-dominance constants apply to the gradient-flow scheme only")
        denom = 2.0 * params.alpha + params.beta
        return 1.0 / denom if denom > 0 else _H_CAP
    if not isinstance(params, WdgParams):
        raise TypeError(f"params must be WdgParams or PlWdgParams, got {type(params).__name__}")
    a, b, g = params.alpha, params.beta, params.gamma
    s = b + g
    if scheme in (Scheme.GRADIENT_FLOW, Scheme.PROXIMAL_GRADIENT):
        if s > 0:
            return 1.0 / (a + b) if a + b > 0 else _H_CAP / (2.0 * s)
        return 1.0 / (2.0 * a) if a > 0 else _H_CAP
    if scheme in (Scheme.ACCEL_CONVEX, Scheme.NAG_C, Scheme.NAG_SC):
        return 1.0 / sqrt(2.0 * a) if a > 0 else _H_CAP
    if scheme is Scheme.ACCEL_SC:
        if s <= 0:
            raise ValueError("accelerated strongly convex scheme requires beta + gamma > 0")
        if z_strategy is ZStrategy.PREV:
            if a > b:
                return sqrt(s / 2.0) / (a - b)
            return _H_CAP / sqrt(2.0 * s)
        gap = sqrt(a + g) - sqrt(s)
        if gap > 0:
            return 1.0 / (sqrt(2.0) * gap)
        return _H_CAP / sqrt(2.0 * s)
    raise ValueError(f"unknown scheme {scheme!r}")


def _start_point(f: Objective, cfg: SchemeConfig) -> Array:
    if cfg.x0 is not None:
        x0 = np.asarray(cfg.x0, dtype=float)
    elif f.default_start is not None:
        x0 = np.asarray(f.default_start, dtype=float)
    else:
        raise ValueError(f"no initial point: pass x0 (problem {f.name!r} has no default)")
    if x0.shape != (f.dim,):
        raise ValueError(f"x0 must have shape ({f.dim},), got {x0.shape}")
    return x0.copy()


def _gf_params(f: Objective, kind: Kind, flavor: str, need: bool):
    try:
        if flavor == "pl":
            return pl_params_for(f, kind)
        return params_for(f, kind, mu=0.0 if flavor == "convex" else None)
    except (ValueError, TypeError):
        if need:
            raise
        return None


def _solve_implicit(step_map, warm: Array, h: float, solver: SolveConfig):
    """Solve x = step_map(x); success means ||(step_map(x) - x)/h|| <= tol."""
    fp_cfg = replace(solver, tol=solver.tol * h)
    try:
        res = fixed_point(step_map, warm, fp_cfg)
        return res.x, res.iterations, res.residual / h
    except NonConvergenceError as err:
        spent = err.iterations

    def residual(x):
        return (np.asarray(step_map(x), dtype=float) - x) / h

    res = newton(residual, warm, solver)
    return res.x, spent + res.iterations, res.residual


def _itoh_abe_step(f: Objective, x: Array, h: float, solver: SolveConfig):
    """Coordinate-wise implicit step: the update triangularizes, so each
    coordinate reduces to one scalar root find."""
    d = x.size
    per_tol = solver.tol / (2.0 * sqrt(d))
    cfg = replace(solver, tol=per_tol)
    y = x.copy()
    grad_x = f.grad(x)
    total_iters = 0
    res_sq = 0.0
    for i in range(d):
        f_prev = float(f.value(y))  # y currently equals (y_1..y_{i-1}, x_i..x_d)
        partial_prev = None
        zi = x[i]

        def g(t, i=i, zi=zi, f_prev=f_prev):
            nonlocal partial_prev
            dt = t - zi
            if abs(dt) < ITOH_ABE_COINCIDENCE_RTOL * (1.0 + abs(t)):
                if partial_prev is None:
                    w = y.copy()
                    w[i] = zi
                    partial_prev = float(f.grad(w)[i])
                dd = partial_prev
            else:
                w = y.copy()
                w[i] = t
                dd = (float(f.value(w)) - f_prev) / dt
            return dt / h + dd

        guess = zi - h * grad_x[i]
        span = max(0.5, 0.1 * (1.0 + abs(guess)))
        res = scalar_root(g, guess - span, guess + span, cfg)
        y[i] = float(res.x)
        total_iters += res.iterations
        res_sq += res.residual**2
    return y, total_iters, sqrt(res_sq)


def _finish_trace(
    f: Objective,
    scheme: Scheme,
    kind: Optional[str],
    flavor: str,
    h: float,
    params,
    xs,
    iters,
    resid,
    vs=None,
    zs=None,
    z_strategy=None,
) -> Trace:
    xs = np.array(xs, dtype=float)
    f_values = np.asarray(f.value(xs), dtype=float)
    if f.optimum is not None:
        x_star, f_star = f.optimum
        f_gap = f_values - f_star
        diff0 = xs[0] - x_star
        v_dist0 = None
        if vs is not None:
            dv = np.asarray(vs[0], dtype=float) - x_star
            v_dist0 = float(dv @ dv)
        init = InitQuantities(
            dist0_sq=float(diff0 @ diff0),
            f_gap0=float(f_gap[0]),
            v_dist0_sq=v_dist0,
            pl_mu=f.pl_constant,
        )
    else:
        f_gap = np.full(len(xs), np.nan)
        init = InitQuantities()
    for arr in (xs, f_values, f_gap):
        arr.setflags(write=False)
    iters = np.array(iters, dtype=int)
    resid = np.array(resid, dtype=float)
    iters.setflags(write=False)
    resid.setflags(write=False)
    if vs is not None:
        vs = np.array(vs, dtype=float)
        vs.setflags(write=False)
    if zs is not None:
        zs = np.array(zs, dtype=float)
        zs.setflags(write=False)
    return Trace(
        scheme=scheme,
        kind=kind,
        flavor=flavor,
        h=h,
        params=params,
        xs=xs,
        f_values=f_values,
        f_gap=f_gap,
        inner_iters=iters,
        inner_residual=resid,
        vs=vs,
        zs=zs,
        z_strategy=z_strategy,
        init=init,
    )


def run_gradient_flow(f: Objective, kind: Kind, cfg: SchemeConfig) -> Trace:
    """Run ``(x_{k+1} - x_k)/h = -g(x_{k+1}, x_k)`` for K steps.

    The explicit-Euler kind reduces to plain gradient descent with zero inner
    iterations; the Itoh-Abe kind solves one scalar equation per coordinate;
    all other kinds solve the coupled vector equation per step.
    """
    flavor = _resolve_flavor(f, cfg.flavor)
    params = _gf_params(f, kind, flavor, need=cfg.h == OPTIMAL)
    h = resolve_step_size(Scheme.GRADIENT_FLOW, params, cfg.z_strategy) if cfg.h == OPTIMAL else float(cfg.h)
    x = _start_point(f, cfg)
    K = cfg.iterations
    xs = [x.copy()]
    iters = [0]
    resid = [0.0]
    explicit = is_explicit(kind)
    base_ia = kind is WdgKind.ITOH_ABE

    def finish():
        return _finish_trace(f, Scheme.GRADIENT_FLOW, kind_key(kind), flavor, h, params, xs, iters, resid)

    for _ in range(K):
        xk = x
        try:
            if explicit:
                x = xk - h * f.grad(xk)
                it, rr = 0, 0.0
            elif base_ia:
                x, it, rr = _itoh_abe_step(f, xk, h, cfg.solver)
            else:

                def step_map(y, xk=xk):
                    return xk - h * eval_wdg(kind, f, y, xk)

                x, it, rr = _solve_implicit(step_map, xk, h, cfg.solver)
        except (NonConvergenceError, NoBracketError) as err:
            raise SchemeAborted(f"inner solve failed at step {len(xs)}: {err}", finish()) from err
        xs.append(x.copy())
        iters.append(it)
        resid.append(rr)
    return finish()


def run_proximal_gradient(fc: CompositeObjective, cfg: SchemeConfig) -> Trace:
    """Forward-backward splitting: explicit in f1, implicit in f2.

    This is the gradient flow driven by the sum kind (explicit Euler on f1,
    implicit Euler on f2); the constants add part-wise.
    """
    if not isinstance(fc, CompositeObjective):
        raise TypeError("run_proximal_gradient requires a CompositeObjective")
    kind = SumWdg(WdgKind.EXPLICIT_EULER, WdgKind.IMPLICIT_EULER)
    flavor = _resolve_flavor(fc, cfg.flavor)
    if flavor == "pl":
        raise ValueError("no gradient-dominance certificate for the splitting scheme")
    params = params_for(fc, kind, mu=0.0 if flavor == "convex" else None)
    h = resolve_step_size(Scheme.PROXIMAL_GRADIENT, params, cfg.z_strategy) if cfg.h == OPTIMAL else float(cfg.h)
    x = _start_point(fc, cfg)
    xs = [x.copy()]
    iters = [0]
    resid = [0.0]
    for _ in range(cfg.iterations):
        xk = x
        c = xk - h * fc.f1.grad(xk)

        def step_map(y, c=c):
            return c - h * fc.f2.grad(y)

        try:
            x, it, rr = _solve_implicit(step_map, xk, h, cfg.solver)
        except NonConvergenceError as err:
            partial = _finish_trace(fc, Scheme.PROXIMAL_GRADIENT, kind_key(kind), flavor, h, params, xs, iters, resid)
            raise SchemeAborted(f"inner solve failed at step {len(xs)}: {err}", partial) from err
        xs.append(x.copy())
        iters.append(it)
        resid.append(rr)
    return _finish_trace(fc, Scheme.PROXIMAL_GRADIENT, kind_key(kind), flavor, h, params, xs, iters, resid)


def run_accel_convex(f: Objective, kind: Kind, cfg: SchemeConfig) -> Trace:
    """Accelerated scheme for convex objectives with weight A_k = (kh)^2.

    Per step, with c_k = (2k+1) h^2 / 4:

        z_k     = x_k + (2k+1)/(k+1)^2 (v_k - x_k)
        v_{k+1} = v_k - c_k g(x_{k+1}, z_k)
        k^2 (x_{k+1} - x_k) = (2k+1)(v_{k+1} - x_{k+1})

    The x-update is kept in multiplied-through form, which is well defined at
    k = 0 (it forces x_1 = v_1).  The NEXT z-strategy replaces z_k by x_{k+1}
    inside the solve; PREV has no certified variant here and is rejected.
    """
    if cfg.z_strategy is ZStrategy.PREV:
        raise ValueError("prev z-strategy is not certified for the accelerated convex scheme")
    params = params_for(f, kind)
    h = resolve_step_size(Scheme.ACCEL_CONVEX, params, cfg.z_strategy) if cfg.h == OPTIMAL else float(cfg.h)
    x = _start_point(f, cfg)
    v = np.asarray(cfg.v0, dtype=float).copy() if cfg.v0 is not None else x.copy()
    flavor = "sc" if f.strong_convexity > 0 else "convex"
    xs = [x.copy()]
    vs = [v.copy()]
    zs = []
    iters = [0]
    resid = [0.0]
    explicit = is_explicit(kind)
    use_next = cfg.z_strategy is ZStrategy.NEXT
    for k in range(cfg.iterations):
        xk, vk = x, v
        ck = (2 * k + 1) * h * h / 4.0
        kk = float(k * k)
        k1 = float((k + 1) * (k + 1))
        z = xk + ((2 * k + 1) / k1) * (vk - xk)
        try:
            if explicit and not use_next:
                g = eval_wdg(kind, f, z, z)
                v = vk - ck * g
                x = (kk * xk + (2 * k + 1) * v) / k1
                it, rr = 0, 0.0
            else:

                def step_map(y, xk=xk, vk=vk, z=z, ck=ck, kk=kk, k1=k1, k=k):
                    zz = y if use_next else z
                    g = eval_wdg(kind, f, y, zz)
                    return (kk * xk + (2 * k + 1) * (vk - ck * g)) / k1

                x, it, rr = _solve_implicit(step_map, xk, h, cfg.solver)
                if use_next:
                    z = x.copy()
                v = vk - ck * eval_wdg(kind, f, x, z)
        except NonConvergenceError as err:
            partial = _finish_trace(
                f, Scheme.ACCEL_CONVEX, kind_key(kind), flavor, h, params, xs, iters, resid, vs, zs, cfg.z_strategy
            )
            raise SchemeAborted(f"inner solve failed at step {len(xs)}: {err}", partial) from err
        xs.append(x.copy())
        vs.append(v.copy())
        zs.append(np.asarray(z, dtype=float).copy())
        iters.append(it)
        resid.append(rr)
    return _finish_trace(
        f, Scheme.ACCEL_CONVEX, kind_key(kind), flavor, h, params, xs, iters, resid, vs, zs, cfg.z_strategy
    )


def run_accel_sc(f: Objective, kind: Kind, cfg: SchemeConfig) -> Trace:
    """Accelerated scheme for strongly convex objectives.

    With m = 2(beta + gamma) and the scaled step ht = sqrt(m) h:

        z_k     = ((ht+1) x_k + ht v_k) / (2 ht + 1)      [COUPLED]
        v_{k+1} = v_k + ht ((2 beta/m) z_k + (2 gamma/m) x_{k+1}
                           - v_{k+1} - g(x_{k+1}, z_k)/m)
        x_{k+1} = x_k + ht (v_{k+1} - x_{k+1})

    For the explicit-Euler kind (gamma = 0, g explicit in z) the two linear
    update equations solve in closed form; otherwise the pair is reduced to a
    single vector equation in x_{k+1} and v_{k+1} is back-substituted.
    """
    params = params_for(f, kind)
    s = params.beta + params.gamma
    if s <= 0:
        raise ValueError("accelerated strongly convex scheme requires beta + gamma > 0")
    m = 2.0 * s
    h = resolve_step_size(Scheme.ACCEL_SC, params, cfg.z_strategy) if cfg.h == OPTIMAL else float(cfg.h)
    ht = sqrt(m) * h
    wb = 2.0 * params.beta / m
    wg = 2.0 * params.gamma / m
    x = _start_point(f, cfg)
    v = np.asarray(cfg.v0, dtype=float).copy() if cfg.v0 is not None else x.copy()
    xs = [x.copy()]
    vs = [v.copy()]
    zs = []
    iters = [0]
    resid = [0.0]
    use_next = cfg.z_strategy is ZStrategy.NEXT
    explicit = is_explicit(kind) and wg == 0.0 and not use_next
    for _ in range(cfg.iterations):
        xk, vk = x, v
        if cfg.z_strategy is ZStrategy.PREV:
            z = xk.copy()
        else:
            z = ((ht + 1.0) * xk + ht * vk) / (2.0 * ht + 1.0)
        try:
            if explicit:
                g = eval_wdg(kind, f, z, z)
                v = (vk + ht * (wb * z - g / m)) / (1.0 + ht)
                x = (xk + ht * v) / (1.0 + ht)
                it, rr = 0, 0.0
            else:

                def step_map(y, xk=xk, vk=vk, z=z):
                    zz = y if use_next else z
                    g = eval_wdg(kind, f, y, zz)
                    return ((1.0 + ht) * xk + ht * vk + ht * ht * (wb * zz + wg * y - g / m)) / (1.0 + ht) ** 2

                x, it, rr = _solve_implicit(step_map, xk, h, cfg.solver)
                if use_next:
                    z = x.copy()
                v = ((1.0 + ht) * x - xk) / ht
        except NonConvergenceError as err:
            partial = _finish_trace(
                f, Scheme.ACCEL_SC, kind_key(kind), "sc", h, params, xs, iters, resid, vs, zs, cfg.z_strategy
            )
            raise SchemeAborted(f"inner solve failed at step {len(xs)}: {err}", partial) from err
        xs.append(x.copy())
        vs.append(v.copy())
        zs.append(np.asarray(z, dtype=float).copy())
        iters.append(it)
        resid.append(rr)
    return _finish_trace(f, Scheme.ACCEL_SC, kind_key(kind), "sc", h, params, xs, iters, resid, vs, zs, cfg.z_strategy)


def nag_sc_momentum(mu: float, h: float) -> float:
    """Momentum coefficient (1 - sqrt(mu) h) / (1 + sqrt(mu) h)."""
    r = sqrt(mu) * h
    return (1.0 - r) / (1.0 + r)


def _nag_common(f: Objective, cfg: SchemeConfig, scheme: Scheme, momentum) -> Trace:
    if cfg.h == OPTIMAL:
        L = f.smoothness
        if not np.isfinite(L) or L <= 0:
            raise ValueError("optimal baseline step needs a finite positive smoothness constant")
        h = 1.0 / sqrt(L)
    else:
        h = float(cfg.h)
    x = _start_point(f, cfg)
    y_prev = x.copy()
    xs = [x.copy()]
    iters = [0]
    resid = [0.0]
    for k in range(cfg.iterations):
        y_next = x - h * h * f.grad(x)
        x = y_next + momentum(k) * (y_next - y_prev)
        y_prev = y_next
        xs.append(x.copy())
        iters.append(0)
        resid.append(0.0)
    return _finish_trace(f, scheme, None, "baseline", h, None, xs, iters, resid)


def run_nag_c(f: Objective, cfg: SchemeConfig) -> Trace:
    """Nesterov's accelerated gradient for convex objectives (momentum k/(k+3))."""
    return _nag_common(f, cfg, Scheme.NAG_C, lambda k: k / (k + 3.0))


def run_nag_sc(f: Objective, cfg: SchemeConfig) -> Trace:
    """Nesterov's accelerated gradient for strongly convex objectives."""
    mu = f.strong_convexity
    if mu <= 0:
        raise ValueError("nag-sc requires a strongly convex problem")
    h = 1.0 / sqrt(f.smoothness) if cfg.h == OPTIMAL else float(cfg.h)
    beta = nag_sc_momentum(mu, h)
    return _nag_common(f, replace(cfg, h=h), Scheme.NAG_SC, lambda k: beta)


def run_scheme(f: Objective, kind: Optional[Kind], cfg: SchemeConfig) -> Trace:
    """Dispatch on ``cfg.scheme``; ``kind`` is ignored by the baselines."""
    if cfg.scheme is Scheme.GRADIENT_FLOW:
        return run_gradient_flow(f, kind, cfg)
    if cfg.scheme is Scheme.ACCEL_CONVEX:
        return run_accel_convex(f, kind, cfg)
    if cfg.scheme is Scheme.ACCEL_SC:
        return run_accel_sc(f, kind, cfg)
    if cfg.scheme is Scheme.PROXIMAL_GRADIENT:
        return run_proximal_gradient(f, cfg)
    if cfg.scheme is Scheme.NAG_C:
        return run_nag_c(f, cfg)
    if cfg.scheme is Scheme.NAG_SC:
        return run_nag_sc(f, cfg)
    raise ValueError(f"unknown scheme {cfg.scheme!r}")
