"""Objective catalog: differentiable test problems with exact curvature metadata.

Every problem carries the constants that the step-size rules and rate
certificates consume: the gradient Lipschitz constant ``smoothness``, the
strong-convexity modulus ``strong_convexity`` (0 means merely convex), an
optional gradient-dominance constant ``pl_constant`` and, when available in
closed form, the minimizer.  Evaluations and gradients are hand-coded (no
autodiff) and accept a single point of shape ``(d,)`` or a batch ``(..., d)``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Optional, Tuple

import numpy as np

__all__ = [
    "Objective",
    "CompositeObjective",
    "make_quadratic",
    "make_composite",
    "quadratic_2d",
    "quartic_2d",
    "pl_sine",
    "composite_2d",
    "load_quadratic",
    "get_problem",
    "problem_keys",
]

Array = np.ndarray


def _readonly(a) -> Array:
    out = np.array(a, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False, kw_only=True)
class Objective:
    """A differentiable objective together with its curvature metadata.

    Parameters
    ----------
    name : str
        Registry key / display name.
    dim : int
        Ambient dimension d.
    value : callable
        ``value(x)`` for ``x`` of shape ``(..., d)``; returns shape ``(...,)``.
    grad : callable
        ``grad(x)`` with the same batching convention; returns ``(..., d)``.
    smoothness : float
        Lipschitz constant of the gradient (``np.inf`` when unknown).
    strong_convexity : float
        Strong-convexity modulus; 0 means merely convex (or nonconvex for
        problems that only satisfy a gradient-dominance condition).
    pl_constant : float or None
        Gradient-dominance constant: ``|grad f(x)|^2 >= 2*mu*(f(x) - f_star)``
        on the declared sampling domain.
    optimum : (ndarray, float) or None
        Minimizer and minimum value, when known.
    bounds : (ndarray, ndarray)
        Sampling box (lo, hi); defaults to ``[-5, 5]^d``.
    member : callable or None
        Optional batched membership test restricting sampling to a subregion
        of the box (used by problems whose smoothness constant only holds on
        a level set).
    default_start : ndarray or None
        Conventional initial point for experiments.
    quad_terms : (Q, b, c) or None
        Exact quadratic data when ``value(x) = x'Qx/2 + b'x + c``.
    """

    name: str
    dim: int
    value: Callable[[Array], Array]
    grad: Callable[[Array], Array]
    smoothness: float
    strong_convexity: float = 0.0
    pl_constant: Optional[float] = None
    optimum: Optional[Tuple[Array, float]] = None
    bounds: Optional[Tuple[Array, Array]] = None
    member: Optional[Callable[[Array], Array]] = None
    default_start: Optional[Array] = None
    quad_terms: Optional[Tuple[Array, Array, float]] = None

    def __post_init__(self):
        if self.bounds is None:
            box = (_readonly(np.full(self.dim, -5.0)), _readonly(np.full(self.dim, 5.0)))
            object.__setattr__(self, "bounds", box)
        else:
            lo, hi = self.bounds
            object.__setattr__(self, "bounds", (_readonly(lo), _readonly(hi)))
        if self.optimum is not None:
            x_star, f_star = self.optimum
            object.__setattr__(self, "optimum", (_readonly(x_star), float(f_star)))
        if self.default_start is not None:
            object.__setattr__(self, "default_start", _readonly(self.default_start))

    @property
    def x_star(self) -> Array:
        if self.optimum is None:
            raise ValueError(f"problem {self.name!r} has no known optimum")
        return self.optimum[0]

    @property
    def f_star(self) -> float:
        if self.optimum is None:
            raise ValueError(f"problem {self.name!r} has no known optimum")
        return self.optimum[1]

    def f_gap(self, x) -> Array:
        """f(x) - f_star, batched like ``value``."""
        return self.value(x) - self.f_star


@dataclass(frozen=True, eq=False, kw_only=True)
class CompositeObjective(Objective):
    """Sum f = f1 + f2 of two objectives, with per-part metadata retained.

    The parts matter for splitting iterations where the smooth part f1 is
    treated explicitly and f2 implicitly; rate formulas then use
    (L1, mu1, mu2) rather than the combined constants.
    """

    f1: Objective
    f2: Objective

    @property
    def smoothness_1(self) -> float:
        return self.f1.smoothness

    @property
    def strong_convexity_1(self) -> float:
        return self.f1.strong_convexity

    @property
    def strong_convexity_2(self) -> float:
        return self.f2.strong_convexity


def make_quadratic(Q, b=None, c: float = 0.0, name: str = "quadratic", *, start=None) -> Objective:
    """Quadratic objective x'Qx/2 + b'x + c for symmetric PSD Q.

    The smoothness and strong-convexity constants are the extreme eigenvalues
    of Q; when Q is nonsingular the optimum is solved from Q x = -b.
    Non-symmetric or indefinite Q is rejected.
    """
    Q = np.asarray(Q, dtype=float)
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
        raise ValueError(f"Q must be square, got shape {Q.shape}")
    d = Q.shape[0]
    if not np.allclose(Q, Q.T, rtol=1e-12, atol=1e-12):
        raise ValueError("Q must be symmetric")
    b = np.zeros(d) if b is None else np.asarray(b, dtype=float)
    if b.shape != (d,):
        raise ValueError(f"b must have shape ({d},), got {b.shape}")
    w = np.linalg.eigvalsh(Q)
    scale = max(1.0, float(abs(w[-1])))
    if w[0] < -1e-10 * scale:
        raise ValueError(f"Q must be positive semidefinite (min eigenvalue {w[0]:g})")
    smoothness = float(max(w[-1], 0.0))
    mu = float(max(w[0], 0.0))

    Qr = _readonly(Q)
    br = _readonly(b)
    c = float(c)

    def value(x):
        x = np.asarray(x, dtype=float)
        return 0.5 * np.einsum("...i,...i->...", x, x @ Qr) + x @ br + c

    def grad(x):
        return np.asarray(x, dtype=float) @ Qr + br

    optimum = None
    if w[0] > 1e-12 * scale:
        x_star = np.linalg.solve(Q, -b)
        optimum = (x_star, float(value(x_star)))

    return Objective(
        name=name,
        dim=d,
        value=value,
        grad=grad,
        smoothness=smoothness,
        strong_convexity=mu,
        optimum=optimum,
        default_start=start,
        quad_terms=(Qr, br, c),
    )


def quadratic_2d() -> Objective:
    """Mildly ill-conditioned 2-D quadratic benchmark.

    f(x) = 0.001 (x1 - x2)^2 + 0.1 (x1 + x2)^2 + 0.01 x1 + 0.02 x2, i.e. a
    quadratic with Hessian [[0.202, 0.198], [0.198, 0.202]].  For a symmetric
    2x2 matrix [[a, b], [b, a]] the eigenvalues are a +/- b, so the extreme
    curvatures are exactly 0.4 and 0.004.
    """
    Q = np.array([[0.202, 0.198], [0.198, 0.202]])
    b = np.array([0.01, 0.02])
    obj = make_quadratic(Q, b, name="quadratic2d", start=(2.0, 3.0))
    # pin the closed-form constants (eigvalsh agrees to roundoff)
    return replace(obj, smoothness=0.4, strong_convexity=0.004)


def quartic_2d(anchor=(2.0, 4.0)) -> Objective:
    """Flat separable quartic f(x) = 0.1 x1^4 + 0.001 x2^4 (not strongly convex).

    The gradient is not globally Lipschitz, so the smoothness constant is
    declared over the level set {f(x) <= f(anchor)}: the Hessian is
    diag(1.2 x1^2, 0.012 x2^2) and its level-set maximum sits on the boundary,
    giving L = max(1.2 sqrt(10 f0), 0.012 sqrt(1000 f0)) for f0 = f(anchor).
    Sampling is restricted to the level set via ``member``; the function is
    never evaluated outside it in tests.
    """
    anchor = np.asarray(anchor, dtype=float)

    def value(x):
        x = np.asarray(x, dtype=float)
        return 0.1 * x[..., 0] ** 4 + 0.001 * x[..., 1] ** 4

    def grad(x):
        x = np.asarray(x, dtype=float)
        return np.stack([0.4 * x[..., 0] ** 3, 0.004 * x[..., 1] ** 3], axis=-1)

    f0 = float(value(anchor))
    if f0 <= 0:
        raise ValueError("anchor must be away from the minimizer")
    smoothness = float(max(1.2 * np.sqrt(10.0 * f0), 0.012 * np.sqrt(1000.0 * f0)))
    hi = np.array([(10.0 * f0) ** 0.25, (1000.0 * f0) ** 0.25])

    def member(x):
        return value(x) <= f0 * (1.0 + 1e-12)

    return Objective(
        name="quartic2d",
        dim=2,
        value=value,
        grad=grad,
        smoothness=smoothness,
        strong_convexity=0.0,
        optimum=(np.zeros(2), 0.0),
        bounds=(-hi, hi),
        member=member,
        default_start=anchor,
    )


def _pl_grid_constant() -> float:
    # brute-force grid oracle on [-10, 10], step 1e-4, for the gradient
    # dominance constant min |f'|^2 / (2 (f - f*))
    g = np.arange(-10.0, 10.0 + 5e-5, 1e-4)
    g = g[np.abs(g) > 1e-8]
    fv = g * g + 3.0 * np.sin(g) ** 2
    dv = 2.0 * g + 3.0 * np.sin(2.0 * g)
    return float(np.min(dv * dv / (2.0 * fv)))


def pl_sine() -> Objective:
    """Nonconvex 1-D problem f(x) = x^2 + 3 sin(x)^2 with gradient dominance.

    f''(x) = 2 + 6 cos(2x) has maximum 8, so L = 8.  The function is not
    convex (f'' dips below 0) but satisfies the gradient-dominance condition;
    the constant is computed by the grid oracle over [-10, 10].
    """

    def value(x):
        v = np.asarray(x, dtype=float)[..., 0]
        return v * v + 3.0 * np.sin(v) ** 2

    def grad(x):
        v = np.asarray(x, dtype=float)[..., 0]
        return (2.0 * v + 3.0 * np.sin(2.0 * v))[..., None]

    return Objective(
        name="plsine",
        dim=1,
        value=value,
        grad=grad,
        smoothness=8.0,
        strong_convexity=0.0,
        pl_constant=_pl_grid_constant(),
        optimum=(np.zeros(1), 0.0),
        bounds=(np.array([-10.0]), np.array([10.0])),
        default_start=np.array([3.0]),
    )


def make_composite(f1: Objective, f2: Objective, name: str = None, *, start=None) -> CompositeObjective:
    """Combine two objectives into f1 + f2.

    When both parts carry exact quadratic data the combined constants and
    optimum are computed exactly from Q1 + Q2; otherwise the combined
    smoothness/strong convexity are the sums of the parts' constants and the
    optimum is left unknown.
    """
    if f1.dim != f2.dim:
        raise ValueError(f"dimension mismatch: {f1.dim} != {f2.dim}")
    name = name or f"{f1.name}+{f2.name}"
    lo = np.maximum(f1.bounds[0], f2.bounds[0])
    hi = np.minimum(f1.bounds[1], f2.bounds[1])
    start = start if start is not None else f1.default_start

    if f1.quad_terms is not None and f2.quad_terms is not None:
        Q1, b1, c1 = f1.quad_terms
        Q2, b2, c2 = f2.quad_terms
        base = make_quadratic(Q1 + Q2, b1 + b2, c1 + c2, name=name)
        return CompositeObjective(
            name=name,
            dim=base.dim,
            value=base.value,
            grad=base.grad,
            smoothness=base.smoothness,
            strong_convexity=base.strong_convexity,
            optimum=base.optimum,
            bounds=(lo, hi),
            default_start=start,
            quad_terms=base.quad_terms,
            f1=f1,
            f2=f2,
        )

    def value(x):
        return f1.value(x) + f2.value(x)

    def grad(x):
        return f1.grad(x) + f2.grad(x)

    return CompositeObjective(
        name=name,
        dim=f1.dim,
        value=value,
        grad=grad,
        smoothness=f1.smoothness + f2.smoothness,
        strong_convexity=f1.strong_convexity + f2.strong_convexity,
        bounds=(lo, hi),
        default_start=start,
        f1=f1,
        f2=f2,
    )


def composite_2d() -> CompositeObjective:
    """Composite benchmark: smooth part with (L1, mu1) = (1, 0.1), implicit
    part (mu2/2)*|x|^2 with mu2 = 0.5."""
    f1 = make_quadratic(np.diag([1.0, 0.1]), np.array([0.3, -0.2]), name="smooth-part")
    f2 = make_quadratic(0.5 * np.eye(2), name="implicit-part")
    return make_composite(f1, f2, name="composite2d", start=(2.0, 3.0))


def load_quadratic(path) -> Objective:
    """Load a quadratic from a plain-text file: d, then Q row-major, b, c."""
    tokens = Path(path).read_text().split()
    if not tokens:
        raise ValueError(f"empty problem file {path!r}")
    vals = [float(t) for t in tokens]
    d = int(vals[0])
    need = 1 + d * d + d + 1
    if d < 1 or len(vals) != need:
        raise ValueError(f"expected {need} numbers (d, Q, b, c) in {path!r}, got {len(vals)}")
    Q = np.array(vals[1 : 1 + d * d]).reshape(d, d)
    b = np.array(vals[1 + d * d : 1 + d * d + d])
    return make_quadratic(Q, b, vals[-1], name=f"quad:{path}")


_REGISTRY = {
    "quartic2d": quartic_2d,
    "quadratic2d": quadratic_2d,
    "plsine": pl_sine,
    "composite2d": composite_2d,
}


def problem_keys():
    return sorted(_REGISTRY)


def get_problem(key: str) -> Objective:
    """Look up a cataloged problem, or load ``quad:<file>``."""
    if key.startswith("quad:"):
        return load_quadratic(key[5:])
    try:
        return _REGISTRY[key]()
    except KeyError:
        raise ValueError(f"unknown problem {key!r}; known: {', '.join(problem_keys())} or quad:<file>") from None
