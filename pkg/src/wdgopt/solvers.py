"""Small dense nonlinear solvers for the implicit update equations.

Implicit weak-gradient steps couple the next iterate into its own update, so
each step needs a fixed-point iteration, a Newton solve, or (for the
coordinate-wise kind) a sequence of scalar root finds.  Problems here are
desk-scale: dense finite-difference Jacobians and bisection-grade scalar
solves are plenty.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np

__all__ = [
    "SolveConfig",
    "SolveResult",
    "NonConvergenceError",
    "SingularJacobianError",
    "NoBracketError",
    "fixed_point",
    "newton",
    "scalar_root",
]


@dataclass(frozen=True)
class SolveConfig:
    """Tolerances for the inner solves.

    The default residual tolerance sits two orders below the slack used by
    the rate certificates, so solver error never masks a bound violation.
    """

    tol: float = 1e-10
    max_iter: int = 200
    damping: float = 1.0

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not 0.0 < self.damping <= 1.0:
            raise ValueError("damping must be in (0, 1]")


class SolveResult(NamedTuple):
    x: np.ndarray
    iterations: int
    residual: float


class NonConvergenceError(RuntimeError):
    def __init__(self, message, x=None, residual=None, iterations=0):
        super().__init__(message)
        self.x = x
        self.residual = residual
        self.iterations = iterations


class SingularJacobianError(RuntimeError):
    pass


class NoBracketError(RuntimeError):
    pass


def fixed_point(func: Callable, x0, cfg: SolveConfig = SolveConfig()) -> SolveResult:
    """Damped fixed-point iteration x <- x + damping*(func(x) - x).

    Returns once ||func(x) - x|| <= tol.  Diverging or stalled iterations
    raise :class:`NonConvergenceError`; callers typically escalate to
    :func:`newton`.
    """
    x = np.asarray(x0, dtype=float).copy()
    fx = np.asarray(func(x), dtype=float)
    res = float(np.linalg.norm(fx - x))
    res0 = res
    for it in range(1, cfg.max_iter + 1):
        if res <= cfg.tol:
            return SolveResult(x, it - 1, res)
        x = x + cfg.damping * (fx - x)
        fx = np.asarray(func(x), dtype=float)
        res = float(np.linalg.norm(fx - x))
        if not np.isfinite(res) or res > 1e8 * (1.0 + res0):
            raise NonConvergenceError("fixed-point iteration diverged", x=x, residual=res, iterations=it)
    if res <= cfg.tol:
        return SolveResult(x, cfg.max_iter, res)
    raise NonConvergenceError(
        f"fixed-point iteration did not reach tol={cfg.tol:g} in {cfg.max_iter} steps (residual {res:g})",
        x=x,
        residual=res,
        iterations=cfg.max_iter,
    )


def _fd_jacobian(residual: Callable, x: np.ndarray, r: np.ndarray) -> np.ndarray:
    n = x.size
    jac = np.empty((r.size, n))
    for i in range(n):
        step = 1e-7 * (1.0 + abs(x[i]))
        xp = x.copy()
        xp[i] += step
        jac[:, i] = (np.asarray(residual(xp), dtype=float) - r) / step
    return jac


def newton(residual: Callable, x0, cfg: SolveConfig = SolveConfig(), jac: Optional[Callable] = None) -> SolveResult:
    """Newton's method on ``residual(x) = 0`` with forward-difference Jacobian.

    Terminates when ||residual(x)|| <= tol; on affine residuals that happens
    after exactly one step.
    """
    x = np.asarray(x0, dtype=float).copy()
    r = np.asarray(residual(x), dtype=float)
    res = float(np.linalg.norm(r))
    for it in range(1, cfg.max_iter + 1):
        if res <= cfg.tol:
            return SolveResult(x, it - 1, res)
        jmat = np.asarray(jac(x), dtype=float) if jac is not None else _fd_jacobian(residual, x, r)
        try:
            dx = np.linalg.solve(jmat, -r)
        except np.linalg.LinAlgError as err:
            raise SingularJacobianError(f"singular Jacobian at iteration {it}") from err
        x = x + cfg.damping * dx
        r = np.asarray(residual(x), dtype=float)
        res = float(np.linalg.norm(r))
        if not np.isfinite(res):
            raise NonConvergenceError("Newton iteration diverged", x=x, residual=res, iterations=it)
    if res <= cfg.tol:
        return SolveResult(x, cfg.max_iter, res)
    raise NonConvergenceError(
        f"Newton did not reach tol={cfg.tol:g} in {cfg.max_iter} steps (residual {res:g})",
        x=x,
        residual=res,
        iterations=cfg.max_iter,
    )


def scalar_root(func: Callable, a: float, b: float, cfg: SolveConfig = SolveConfig()) -> SolveResult:
    """Root of a scalar function by bisection with secant acceleration.

    The initial interval is expanded (doubling, up to 50 times) until it
    brackets a sign change; :class:`NoBracketError` if that fails.  Returns
    once |func(x)| <= tol.
    """
    a = float(a)
    b = float(b)
    if a > b:
        a, b = b, a
    fa = float(func(a))
    fb = float(func(b))
    expansions = 0
    while fa * fb > 0.0:
        if expansions >= 50:
            raise NoBracketError(f"no sign change in [{a:g}, {b:g}] after {expansions} expansions")
        span = max(b - a, 1e-8)
        a -= span
        b += span
        fa = float(func(a))
        fb = float(func(b))
        expansions += 1

    if abs(fa) <= cfg.tol:
        return SolveResult(np.float64(a), expansions, abs(fa))
    if abs(fb) <= cfg.tol:
        return SolveResult(np.float64(b), expansions, abs(fb))

    x, fx = (a, fa) if abs(fa) < abs(fb) else (b, fb)
    for it in range(1, cfg.max_iter + 1):
        # secant candidate, falling back to bisection when it leaves the bracket
        denom = fb - fa
        mid = 0.5 * (a + b)
        cand = a - fa * (b - a) / denom if denom != 0.0 else mid
        if not a < cand < b:
            cand = mid
        # keep strict progress: never let the interval stagnate
        if min(cand - a, b - cand) < 0.01 * (b - a):
            cand = mid
        fc = float(func(cand))
        if abs(fc) <= cfg.tol:
            return SolveResult(np.float64(cand), expansions + it, abs(fc))
        if fa * fc <= 0.0:
            b, fb = cand, fc
        else:
            a, fa = cand, fc
        x, fx = (a, fa) if abs(fa) < abs(fb) else (b, fb)
        if b - a <= 1e-17 * (1.0 + abs(a) + abs(b)):
            break
    if abs(fx) <= cfg.tol:
        return SolveResult(np.float64(x), expansions + cfg.max_iter, abs(fx))
    raise NonConvergenceError(
        f"scalar root find did not reach tol={cfg.tol:g} (best residual {abs(fx):g})",
        x=np.float64(x),
        residual=abs(fx),
        iterations=cfg.max_iter,
    )
