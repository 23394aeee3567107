"""Numerical verification layer: sampled inequalities, rate certificates,
Lyapunov monitors, and the strict-gradient counterexample.

Everything here is sampling or pointwise comparison at desk scale; no
symbolic reasoning.  Violations are normalized by ``1 + |f(y)| + |f(x)|``
(or the trace's initial gap) so pass/fail thresholds are scale-free across
problems.  Random streams are split deterministically from the seed in
fixed-size batches, so reports are reproducible regardless of how the
batches are processed.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import sqrt
from typing import Optional, Tuple, Union

import numpy as np

from .problems import Objective
from .schemes import InitQuantities, Scheme, Trace, ZStrategy, resolve_step_size
from .wdg import AVF_NODES, Kind, PlWdgParams, WdgKind, WdgParams, eval_wdg

__all__ = [
    "VerificationReport",
    "RateCertificate",
    "check_wdg_inequality",
    "check_strict_chain_rule",
    "check_pl_conditions",
    "counterexample_strict_dg",
    "rate_bound",
    "step_factor",
    "optimal_gf_factor",
    "optimal_accel_factor",
    "factor_formula",
    "certify_trace",
    "infer_bound_id",
    "lyapunov_series",
    "lyapunov_step_factor",
    "check_lyapunov",
    "BOUND_IDS",
]

Array = np.ndarray

BOUND_IDS = ("gf-convex", "gf-sc", "accel-convex", "accel-sc", "pl")

_BATCH = 1 << 15

# slack floor for f-gap comparisons: gaps cannot be resolved below the
# rounding noise of f near the optimum, so certificates allow this much
# absolute error relative to the initial gap scale
_GAP_FLOOR = 1e4 * np.finfo(float).eps


@dataclass(frozen=True)
class VerificationReport:
    """Outcome of a sampled inequality check.

    ``max_violation`` is the largest normalized positive residual seen;
    ``worst_case`` holds the points attaining it.  A failed check is a report
    with ``passed=False``, not an exception.
    """

    label: str
    samples: int
    max_violation: float
    worst_case: Optional[Tuple[Array, ...]]
    tol: float
    passed: bool

    def as_dict(self):
        return {
            "label": self.label,
            "samples": self.samples,
            "max_violation": self.max_violation,
            "worst_case": None if self.worst_case is None else [w.tolist() for w in self.worst_case],
            "tol": self.tol,
            "passed": self.passed,
        }


@dataclass(frozen=True, eq=False)
class RateCertificate:
    """Pointwise comparison of observed f-gaps against a closed-form bound.

    ``passed`` means每 G(k) <= B(k)*(1+slack) plus an absolute floor of
    ``1e4*eps*(1 + G(0))`` that accounts for the double-precision resolution
    limit of f-gap evaluation (geometric bounds eventually drop below it).
    ``step_within_bound`` records whether the trace's step size obeys the
    certified limit; bounds evaluated beyond it are reported but carry no
    guarantee.
    """

    bound_id: str
    params: Union[WdgParams, PlWdgParams, None]
    h: float
    k: Array
    bounds: Array
    gaps: Array
    first_violation: Optional[int]
    max_violation: float
    slack: float
    passed: bool
    step_within_bound: Optional[bool]


def _sq(v: Array) -> Array:
    return np.einsum("...i,...i->...", v, v)


def _sample_points(f: Objective, total: int, children) -> Array:
    """Uniform points in the problem's box, rejection-filtered by membership."""
    lo, hi = f.bounds
    chunks = []
    count = 0
    for child in children:
        rng = np.random.default_rng(child)
        pts = rng.uniform(lo, hi, size=(_BATCH, f.dim))
        if f.member is not None:
            pts = pts[f.member(pts)]
        chunks.append(pts)
        count += len(pts)
        if count >= total:
            break
    if count < total:
        raise RuntimeError(f"sampling produced only {count}/{total} admissible points")
    return np.concatenate(chunks)[:total]


def _spawn(seed: int, total_points: int):
    budget = 2 * (total_points // _BATCH + 2) + 8
    return iter(np.random.SeedSequence(seed).spawn(budget))


def _eig_stress_triples(f: Objective, count: int, child) -> Tuple[Array, Array, Array]:
    """Colinear triples along the extreme Hessian eigendirections of a
    quadratic; uniform sampling alone rarely probes these tight directions."""
    Q = f.quad_terms[0]
    _, vecs = np.linalg.eigh(Q)
    dirs = np.stack([vecs[:, 0], vecs[:, -1]])
    lo, hi = f.bounds
    scale = float(np.min(np.minimum(np.abs(lo), np.abs(hi))))
    rng = np.random.default_rng(child)
    coefs = rng.uniform(-scale, scale, size=(count, 3))
    main = dirs[rng.integers(0, 2, size=count)]
    other = dirs[rng.integers(0, 2, size=count)]
    x = coefs[:, 0, None] * main
    y = coefs[:, 1, None] * main
    # half the triples are fully colinear, half put z on the other direction
    colinear = rng.random(count) < 0.5
    z = np.where(colinear[:, None], coefs[:, 2, None] * main, coefs[:, 2, None] * other)
    return x, y, z


def _wdg_residuals(f: Objective, kind: Kind, params: WdgParams, x: Array, y: Array, z: Array, avf_nodes: int = AVF_NODES) -> Array:
    g = eval_wdg(kind, f, y, z, avf_nodes)
    fy = f.value(y)
    fx = f.value(x)
    rhs = (
        np.einsum("...i,...i->...", g, y - x)
        + params.alpha * _sq(y - z)
        - params.beta * _sq(z - x)
        - params.gamma * _sq(y - x)
    )
    return (fy - fx - rhs) / (1.0 + np.abs(fy) + np.abs(fx))


def check_wdg_inequality(
    f: Objective,
    kind: Kind,
    params: WdgParams,
    n: int = 100_000,
    seed: int = 0,
    tol: float = 1e-8,
    avf_nodes: int = AVF_NODES,
) -> VerificationReport:
    """Sample the defining three-point bound of a weak discrete gradient.

    Draws ``n`` triples (x, y, z) from the problem's sampling domain (for
    strongly convex quadratics a slice of the budget is spent on
    eigendirection-aligned triples) and reports the worst normalized
    violation of

        f(y) - f(x) <= <g(y,z), y-x> + alpha|y-z|^2 - beta|z-x|^2 - gamma|y-x|^2.
    """
    children = _spawn(seed, 3 * n)
    n_struct = 0
    if f.quad_terms is not None and f.strong_convexity > 0:
        n_struct = min(1024, n // 10)
    n_uniform = n - n_struct
    pts = _sample_points(f, 3 * n_uniform, children)
    x, y, z = pts[:n_uniform], pts[n_uniform : 2 * n_uniform], pts[2 * n_uniform :]
    if n_struct:
        xs_, ys_, zs_ = _eig_stress_triples(f, n_struct, next(children))
        x = np.concatenate([x, xs_])
        y = np.concatenate([y, ys_])
        z = np.concatenate([z, zs_])
    res = _wdg_residuals(f, kind, params, x, y, z, avf_nodes)
    worst = int(np.argmax(res))
    return VerificationReport(
        label=f"wdg-inequality[{f.name}]",
        samples=n,
        max_violation=float(res[worst]),
        worst_case=(x[worst].copy(), y[worst].copy(), z[worst].copy()),
        tol=tol,
        passed=bool(res[worst] <= tol),
    )


def check_strict_chain_rule(
    f: Objective,
    kind: Kind,
    n: int = 10_000,
    seed: int = 0,
    tol: float = 1e-9,
    avf_nodes: int = AVF_NODES,
) -> VerificationReport:
    """Sample the exact chain rule f(y) - f(x) = <g(y,x), y-x>.

    Only the strict kinds (AVF, Gonzalez, Itoh-Abe) satisfy it; running the
    check on other kinds simply yields a failed report.
    """
    children = _spawn(seed, 2 * n)
    pts = _sample_points(f, 2 * n, children)
    x, y = pts[:n], pts[n:]
    g = eval_wdg(kind, f, y, x, avf_nodes)
    fy = f.value(y)
    fx = f.value(x)
    res = np.abs(fy - fx - np.einsum("...i,...i->...", g, y - x)) / (1.0 + np.abs(fy) + np.abs(fx))
    worst = int(np.argmax(res))
    return VerificationReport(
        label=f"chain-rule[{f.name}]",
        samples=n,
        max_violation=float(res[worst]),
        worst_case=(x[worst].copy(), y[worst].copy()),
        tol=tol,
        passed=bool(res[worst] <= tol),
    )


def check_pl_conditions(
    f: Objective,
    kind: Kind,
    pl_params: PlWdgParams,
    n: int = 100_000,
    seed: int = 0,
    tol: float = 1e-8,
    avf_nodes: int = AVF_NODES,
) -> VerificationReport:
    """Sample the two gradient-dominance conditions of a two-point map:

        f(y) - f(x) <= <g(y,x), y-x> + alpha|y-x|^2
        -|g(y,x)|  <= -sqrt(2 mu (f(x) - f*)) + beta|y-x|
    """
    if f.pl_constant is None:
        raise ValueError(f"problem {f.name!r} has no gradient-dominance constant")
    mu = f.pl_constant
    f_star = f.f_star
    children = _spawn(seed, 2 * n)
    pts = _sample_points(f, 2 * n, children)
    x, y = pts[:n], pts[n:]
    g = eval_wdg(kind, f, y, x, avf_nodes)
    fy = f.value(y)
    fx = f.value(x)
    norm_g = np.sqrt(_sq(g))
    dist = np.sqrt(_sq(y - x))
    scale = 1.0 + np.abs(fy) + np.abs(fx)
    res_chain = (fy - fx - np.einsum("...i,...i->...", g, y - x) - pl_params.alpha * dist**2) / scale
    res_dom = (np.sqrt(2.0 * mu * np.maximum(fx - f_star, 0.0)) - pl_params.beta * dist - norm_g) / scale
    res = np.maximum(res_chain, res_dom)
    worst = int(np.argmax(res))
    return VerificationReport(
        label=f"pl-conditions[{f.name}]",
        samples=n,
        max_violation=float(res[worst]),
        worst_case=(x[worst].copy(), y[worst].copy()),
        tol=tol,
        passed=bool(res[worst] <= tol),
    )


def counterexample_strict_dg(Q, x) -> float:
    """Show a strict discrete gradient violating the convexity-type bound.

    For f(x) = x'Qx/2 (PD Q, minimizer 0) the midpoint-type strict gradient
    evaluates to Q(y+x)/2, and with y = -x the quantity

        f(x) - f* - <g(y,x), x - x*>

    equals x'Qx/2 > 0, while convexity of f would require it nonpositive if
    g were a subgradient-consistent two-point map.
    """
    Q = np.asarray(Q, dtype=float)
    x = np.asarray(x, dtype=float)
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1] or not np.allclose(Q, Q.T, rtol=1e-12, atol=1e-12):
        raise ValueError("Q must be square symmetric")
    if np.linalg.eigvalsh(Q)[0] <= 0:
        raise ValueError("Q must be positive definite")
    if not np.any(x != 0.0):
        raise ValueError("x must be nonzero")
    y = -x
    dg = (0.5 * (y + x)) @ Q
    f_x = 0.5 * x @ Q @ x
    return float(f_x - dg @ x)


# ---------------------------------------------------------------------------
# rate bounds and certificates


def step_factor(bound_id: str, params, h: float, pl_mu: Optional[float] = None) -> float:
    """Per-step contraction factor of the geometric bounds."""
    if bound_id == "gf-sc":
        s = params.beta + params.gamma
        return 1.0 - 2.0 * s * h / (1.0 + 2.0 * params.gamma * h)
    if bound_id == "accel-sc":
        s = params.beta + params.gamma
        return 1.0 / (1.0 + sqrt(2.0 * s) * h)
    if bound_id == "pl":
        if pl_mu is None:
            raise ValueError("pl bound needs the gradient-dominance constant")
        a, b = params.alpha, params.beta
        return 1.0 - 2.0 * pl_mu * h * (1.0 - a * h) / (1.0 + b * h) ** 2
    raise ValueError(f"bound {bound_id!r} has no per-step factor")


def rate_bound(bound_id: str, params, h: float, init: InitQuantities, k) -> Array:
    """Evaluate the closed-form bound B(k) for the given family.

    ``k`` may be an array.  The sublinear families (gf-convex, accel-convex)
    require k >= 1.
    """
    k = np.asarray(k, dtype=float)
    if bound_id in ("gf-convex", "accel-convex"):
        if np.any(k < 1):
            raise ValueError(f"bound {bound_id!r} is defined for k >= 1")
        if init.dist0_sq is None:
            raise ValueError("bound needs the initial distance to the optimum")
        if bound_id == "gf-convex":
            return init.dist0_sq / (2.0 * k * h)
        return 2.0 * init.dist0_sq / (k * h) ** 2
    if bound_id == "gf-sc":
        if init.dist0_sq is None:
            raise ValueError("bound needs the initial distance to the optimum")
        return step_factor(bound_id, params, h) ** k * init.dist0_sq
    if bound_id == "accel-sc":
        if init.f_gap0 is None or init.v_dist0_sq is None:
            raise ValueError("bound needs the initial gap and velocity distance")
        e0 = init.f_gap0 + params.beta * init.v_dist0_sq
        return step_factor(bound_id, params, h) ** k * e0
    if bound_id == "pl":
        if init.f_gap0 is None:
            raise ValueError("bound needs the initial gap")
        return step_factor(bound_id, params, h, init.pl_mu) ** k * init.f_gap0
    raise ValueError(f"unknown bound {bound_id!r}; known: {BOUND_IDS}")


def optimal_gf_factor(params: WdgParams) -> float:
    """Gradient-flow contraction at the largest certified step h = 1/(alpha+beta)."""
    s = params.beta + params.gamma
    return 1.0 - 2.0 * s / (params.alpha + params.beta + 2.0 * params.gamma)


def optimal_accel_factor(params: WdgParams) -> float:
    """Accelerated contraction at the largest certified step."""
    s = params.beta + params.gamma
    return 1.0 - sqrt(s / (params.alpha + params.gamma))


_GF_FORMULAS = {
    WdgKind.EXPLICIT_EULER: ("1 - 2*mu/(L + mu)", lambda L, mu, d: 1 - 2 * mu / (L + mu)),
    WdgKind.IMPLICIT_EULER: ("0", lambda L, mu, d: 0.0),
    WdgKind.MIDPOINT: ("1 - 8*mu/(L + 7*mu)", lambda L, mu, d: 1 - 8 * mu / (L + 7 * mu)),
    WdgKind.AVF: ("1 - 6*mu/(L + 5*mu)", lambda L, mu, d: 1 - 6 * mu / (L + 5 * mu)),
    WdgKind.GONZALEZ: (
        "1 - 8*mu^2/(L^2 + 7*mu^2)",
        lambda L, mu, d: 1 - 8 * mu**2 / (L**2 + 7 * mu**2),
    ),
    WdgKind.ITOH_ABE: (
        "1 - 2*mu^2/(4*d*L^2 - mu^2)",
        lambda L, mu, d: 1 - 2 * mu**2 / (4 * d * L**2 - mu**2),
    ),
}

_ACCEL_FORMULAS = {
    WdgKind.EXPLICIT_EULER: ("1 - sqrt(mu/L)", lambda L, mu, d: 1 - sqrt(mu / L)),
    WdgKind.IMPLICIT_EULER: ("0", lambda L, mu, d: 0.0),
    WdgKind.MIDPOINT: (
        "1 - sqrt(4*mu/(L + 3*mu))",
        lambda L, mu, d: 1 - sqrt(4 * mu / (L + 3 * mu)),
    ),
    WdgKind.AVF: (
        "1 - sqrt(3*mu/(L + 2*mu))",
        lambda L, mu, d: 1 - sqrt(3 * mu / (L + 2 * mu)),
    ),
    WdgKind.GONZALEZ: (
        "1 - sqrt(4*mu^2/(L^2 + 3*mu^2))",
        lambda L, mu, d: 1 - sqrt(4 * mu**2 / (L**2 + 3 * mu**2)),
    ),
    WdgKind.ITOH_ABE: (
        "1 - sqrt(mu^2/(4*d*L^2 - 2*mu^2))",
        lambda L, mu, d: 1 - sqrt(mu**2 / (4 * d * L**2 - 2 * mu**2)),
    ),
}


def factor_formula(kind: WdgKind, accelerated: bool = False) -> Tuple[str, callable]:
    """Closed-form optimal contraction factor per kind, symbolic and callable.

    These are the per-kind reductions of :func:`optimal_gf_factor` /
    :func:`optimal_accel_factor` with the certified constants substituted.
    """
    table = _ACCEL_FORMULAS if accelerated else _GF_FORMULAS
    if kind not in table:
        raise ValueError(f"no closed-form factor for kind {kind!r}")
    return table[kind]


_BOUND_SCHEME = {
    "gf-convex": Scheme.GRADIENT_FLOW,
    "gf-sc": Scheme.GRADIENT_FLOW,
    "pl": Scheme.GRADIENT_FLOW,
    "accel-convex": Scheme.ACCEL_CONVEX,
    "accel-sc": Scheme.ACCEL_SC,
}


def infer_bound_id(trace: Trace) -> str:
    if trace.scheme in (Scheme.GRADIENT_FLOW, Scheme.PROXIMAL_GRADIENT):
        return {"convex": "gf-convex", "sc": "gf-sc", "pl": "pl"}[trace.flavor]
    if trace.scheme is Scheme.ACCEL_CONVEX:
        return "accel-convex"
    if trace.scheme is Scheme.ACCEL_SC:
        return "accel-sc"
    raise ValueError(f"no certified bound for scheme {trace.scheme.value!r}")


def certify_trace(trace: Trace, bound_id: Optional[str] = None, params=None, slack: float = 1e-8) -> RateCertificate:
    """Compare a trace's f-gaps pointwise against its closed-form bound."""
    inferred = infer_bound_id(trace)
    bound_id = bound_id or inferred
    if _BOUND_SCHEME[bound_id] is not _BOUND_SCHEME.get(inferred):
        raise ValueError(f"bound {bound_id!r} does not match a {trace.scheme.value!r}/{trace.flavor!r} trace")
    params = params if params is not None else trace.params
    if bound_id in ("gf-sc", "accel-sc") and not isinstance(params, WdgParams):
        raise ValueError(f"bound {bound_id!r} needs the (alpha, beta, gamma) constants")
    if bound_id == "pl" and not isinstance(params, PlWdgParams):
        raise ValueError("pl bound needs the gradient-dominance constants")
    init = trace.init
    if init.f_gap0 is None or not np.all(np.isfinite(trace.f_gap)):
        raise ValueError("certification needs a problem with known optimum")
    K = trace.iterations
    if bound_id in ("gf-convex", "accel-convex"):
        ks = np.arange(1, K + 1)
        gaps = trace.f_gap[1:]
    else:
        ks = np.arange(0, K + 1)
        gaps = trace.f_gap
    bounds = rate_bound(bound_id, params, trace.h, init, ks)
    floor = _GAP_FLOOR * (1.0 + abs(init.f_gap0))
    excess = gaps - bounds * (1.0 + slack) - floor
    passed = bool(np.all(excess <= 0.0))
    first = None if passed else int(ks[np.argmax(excess > 0.0)])
    max_violation = float(np.max((gaps - bounds) / (1.0 + np.abs(bounds) + abs(init.f_gap0))))
    within = None
    if params is not None:
        try:
            hmax = resolve_step_size(_BOUND_SCHEME[bound_id], params, trace.z_strategy or ZStrategy.COUPLED)
            within = bool(trace.h <= hmax * (1.0 + 1e-12))
        except (ValueError, TypeError):
            within = None
    return RateCertificate(
        bound_id=bound_id,
        params=params,
        h=trace.h,
        k=ks,
        bounds=bounds,
        gaps=gaps,
        first_violation=first,
        max_violation=max_violation,
        slack=slack,
        passed=passed,
        step_within_bound=within,
    )


# ---------------------------------------------------------------------------
# Lyapunov monitors


def lyapunov_series(trace: Trace, f: Objective, discounted: bool = False) -> Array:
    """Lyapunov sequence matching the trace's scheme and flavor.

    Undiscounted, the sequences are

        gradient flow, convex:   E_k = k h (f - f*) + |x_k - x*|^2 / 2
        gradient flow, sc:       E_k = f - f* + (beta+gamma) |x_k - x*|^2
        gradient flow, pl:       E_k = f - f*
        accelerated, convex:     E_k = (kh)^2 (f - f*) + 2 |v_k - x*|^2
        accelerated, sc:         E_k = f - f* + (beta+gamma) |v_k - x*|^2

    The convex sequences are monotone as-is; the geometric ones decay by the
    per-step factor, and ``discounted=True`` multiplies out that factor (the
    discounted sequence is then monotone, but may overflow for long traces at
    extreme steps, so monotonicity checks should use :func:`check_lyapunov`).
    """
    if f.optimum is None:
        raise ValueError("Lyapunov sequences need a problem with known optimum")
    x_star = f.x_star
    gap = trace.f_gap
    K = trace.iterations
    ks = np.arange(K + 1, dtype=float)
    bound_id = infer_bound_id(trace)
    if bound_id == "gf-convex":
        dist = _sq(trace.xs - x_star)
        series = ks * trace.h * gap + 0.5 * dist
    elif bound_id == "gf-sc":
        s = trace.params.beta + trace.params.gamma
        series = gap + s * _sq(trace.xs - x_star)
    elif bound_id == "pl":
        series = gap.copy()
    elif bound_id == "accel-convex":
        series = (ks * trace.h) ** 2 * gap + 2.0 * _sq(trace.vs - x_star)
    elif bound_id == "accel-sc":
        s = trace.params.beta + trace.params.gamma
        series = gap + s * _sq(trace.vs - x_star)
    else:  # pragma: no cover
        raise ValueError(bound_id)
    if discounted:
        rho = lyapunov_step_factor(trace)
        with np.errstate(over="ignore"):
            series = series * rho ** (-ks)
    return series


def lyapunov_step_factor(trace: Trace) -> float:
    """Certified per-step decay factor of the trace's Lyapunov sequence
    (1.0 for the convex families)."""
    bound_id = infer_bound_id(trace)
    if bound_id in ("gf-convex", "accel-convex"):
        return 1.0
    pl_mu = trace.init.pl_mu if bound_id == "pl" else None
    return step_factor(bound_id, trace.params, trace.h, pl_mu)


def check_lyapunov(trace: Trace, f: Objective, slack: Optional[float] = None) -> Tuple[bool, float]:
    """Check E_{k+1} <= rho * E_k at every step.

    ``slack`` defaults to ``1e-10 * (1 + E_0)``.  Returns (passed,
    max_violation) with the violation measured as E_{k+1} - rho E_k.
    """
    series = lyapunov_series(trace, f)
    rho = lyapunov_step_factor(trace)
    if slack is None:
        slack = 1e-10 * (1.0 + abs(float(series[0])))
    viol = series[1:] - rho * series[:-1]
    max_violation = float(np.max(viol)) if len(viol) else 0.0
    return bool(max_violation <= slack), max_violation
