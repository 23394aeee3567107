"""Weak discrete gradients: two-point gradient maps with certified constants.

A weak discrete gradient of f is a map g(y, z) that agrees with the gradient
on the diagonal, g(x, x) = grad f(x), and satisfies the three-point bound

    f(y) - f(x) <= <g(y, z), y - x> + alpha |y-z|^2 - beta |z-x|^2 - gamma |y-x|^2

for all x, y, z, for constants (alpha, beta, gamma) that depend only on the
smoothness L and strong-convexity modulus mu of f.  The bound plays a double
role: with z = x it is an inexact chain rule, and with x and y swapped it is
an inexact convexity inequality.  Both uses appear in the Lyapunov arguments
behind the step-size rules and rate certificates in :mod:`wdgopt.schemes` and
:mod:`wdgopt.verify`.

Six kinds are implemented.  Three are one-point evaluations (the explicit
Euler, implicit Euler, and midpoint gradients); three are strict discrete
gradients that satisfy the exact chain rule f(y) - f(x) = <g(y, x), y - x>
(average vector field, Gonzalez, and Itoh-Abe).  Sums of two kinds acting on
the parts of a composite objective are supported through :class:`SumWdg`.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from math import sqrt
from typing import Optional, Union

import numpy as np

from .problems import CompositeObjective, Objective

__all__ = [
    "WdgKind",
    "SumWdg",
    "Kind",
    "WdgParams",
    "PlWdgParams",
    "eval_wdg",
    "avf_quadrature",
    "wdg_params",
    "pl_wdg_params",
    "params_for",
    "pl_params_for",
    "is_strict",
    "is_explicit",
    "parse_kind",
    "kind_key",
    "AVF_NODES",
    "GONZALEZ_COINCIDENCE_RTOL",
    "ITOH_ABE_COINCIDENCE_RTOL",
]

Array = np.ndarray

# Gauss-Legendre node count for the segment-average gradient; exact for
# polynomial gradients of degree <= 2*AVF_NODES - 1.
AVF_NODES = 8

# |y - z| below this (relative) threshold switches Gonzalez to the midpoint
# gradient: the correction term is 0/0 at y = z and that is its limit.
GONZALEZ_COINCIDENCE_RTOL = 1e-8

# per-coordinate threshold under which the Itoh-Abe divided difference
# degenerates and the partial derivative at the mixed point is used instead
ITOH_ABE_COINCIDENCE_RTOL = 1e-10


class WdgKind(Enum):
    EXPLICIT_EULER = "ee"
    IMPLICIT_EULER = "ie"
    MIDPOINT = "mid"
    AVF = "avf"
    GONZALEZ = "gonzalez"
    ITOH_ABE = "itohabe"


@dataclass(frozen=True)
class SumWdg:
    """Sum of two kinds applied to the two parts of a composite objective."""

    first: WdgKind
    second: WdgKind


Kind = Union[WdgKind, SumWdg]


@dataclass(frozen=True)
class WdgParams:
    """Constants (alpha, beta, gamma) of the three-point bound.

    alpha >= 0 weights the evaluation-point error |y-z|^2; beta and gamma
    weight the curvature terms and must satisfy beta + gamma >= 0.
    """

    alpha: float
    beta: float
    gamma: float

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError(f"alpha must be nonnegative, got {self.alpha}")
        if self.beta + self.gamma < 0:
            raise ValueError(f"beta + gamma must be nonnegative, got {self.beta + self.gamma}")

    def __add__(self, other: "WdgParams") -> "WdgParams":
        return WdgParams(self.alpha + other.alpha, self.beta + other.beta, self.gamma + other.gamma)


@dataclass(frozen=True)
class PlWdgParams:
    """Constants (alpha, beta) of the gradient-dominance variant.

    alpha bounds the chain-rule error, beta the deviation of the two-point
    map from the gradient; both are nonnegative.
    """

    alpha: float
    beta: float

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise ValueError(f"alpha and beta must be nonnegative, got ({self.alpha}, {self.beta})")


def parse_kind(key: str) -> Kind:
    """Parse a CLI kind key: 'ee', 'ie', 'mid', 'avf', 'gonzalez', 'itohabe',
    or 'sum:<a>+<b>'."""
    if key.startswith("sum:"):
        parts = key[4:].split("+")
        if len(parts) != 2:
            raise ValueError(f"sum kind must look like 'sum:ee+ie', got {key!r}")
        return SumWdg(WdgKind(parts[0]), WdgKind(parts[1]))
    try:
        return WdgKind(key)
    except ValueError:
        valid = ", ".join(k.value for k in WdgKind)
        raise ValueError(f"unknown weak-gradient kind {key!r}; known: {valid}, sum:<a>+<b>") from None


def kind_key(kind: Kind) -> str:
    if isinstance(kind, SumWdg):
        return f"sum:{kind.first.value}+{kind.second.value}"
    return kind.value


def is_strict(kind: Kind) -> bool:
    """Kinds satisfying the exact discrete chain rule."""
    if isinstance(kind, SumWdg):
        return is_strict(kind.first) and is_strict(kind.second)
    return kind in (WdgKind.AVF, WdgKind.GONZALEZ, WdgKind.ITOH_ABE)


def is_explicit(kind: Kind) -> bool:
    """True when g(y, z) does not depend on y, so schemes need no inner solve."""
    if isinstance(kind, SumWdg):
        return is_explicit(kind.first) and is_explicit(kind.second)
    return kind is WdgKind.EXPLICIT_EULER


@lru_cache(maxsize=None)
def _gauss_legendre_01(nodes: int):
    x, w = np.polynomial.legendre.leggauss(nodes)
    return (x + 1.0) / 2.0, w / 2.0


def avf_quadrature(f: Objective, y, z, nodes: int = AVF_NODES) -> Array:
    """Gauss-Legendre approximation of the segment-averaged gradient
    integral of grad f over the straight line from z to y.

    Exact for polynomial gradients of degree <= 2*nodes - 1; in particular a
    single node is exact for quadratics.
    """
    if nodes < 1:
        raise ValueError("nodes must be >= 1")
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    t, w = _gauss_legendre_01(nodes)
    acc = np.zeros(np.broadcast_shapes(y.shape, z.shape))
    for tj, wj in zip(t, w):
        acc = acc + wj * f.grad(z + tj * (y - z))
    return acc


def _gonzalez(f: Objective, y: Array, z: Array) -> Array:
    mid = 0.5 * (y + z)
    gm = f.grad(mid)
    diff = y - z
    dist_sq = np.einsum("...i,...i->...", diff, diff)
    near = np.sqrt(dist_sq) < GONZALEZ_COINCIDENCE_RTOL * (1.0 + np.linalg.norm(y, axis=-1))
    num = f.value(y) - f.value(z) - np.einsum("...i,...i->...", gm, diff)
    corr = (num / np.where(near, 1.0, dist_sq))[..., None] * diff
    return np.where(near[..., None], gm, gm + corr)


def _itoh_abe(f: Objective, y: Array, z: Array) -> Array:
    y, z = np.broadcast_arrays(y, z)
    d = y.shape[-1]
    out = np.empty(y.shape)
    w = np.array(z, dtype=float)  # running mixed point (y_1..y_{i-1}, z_i..z_d)
    f_prev = f.value(w)
    for i in range(d):
        w_mixed = w.copy()
        w[..., i] = y[..., i]
        f_cur = f.value(w)
        dyz = y[..., i] - z[..., i]
        near = np.abs(dyz) < ITOH_ABE_COINCIDENCE_RTOL * (1.0 + np.abs(y[..., i]))
        dd = (f_cur - f_prev) / np.where(near, 1.0, dyz)
        if np.any(near):
            partial = f.grad(w_mixed)[..., i]
            dd = np.where(near, partial, dd)
        out[..., i] = dd
        f_prev = f_cur
    return out


def eval_wdg(kind: Kind, f: Objective, y, z, avf_nodes: int = AVF_NODES) -> Array:
    """Evaluate the weak discrete gradient g(y, z) of the given kind.

    ``y`` and ``z`` may carry leading batch dimensions.  For :class:`SumWdg`,
    ``f`` must be a :class:`~wdgopt.problems.CompositeObjective`; the two
    kinds act on the two parts.  ``avf_nodes`` controls the quadrature of the
    segment-average kind; the default is exact for polynomial gradients up to
    degree 15 but non-polynomial objectives over wide separations may need
    more nodes.
    """
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    if isinstance(kind, SumWdg):
        if not isinstance(f, CompositeObjective):
            raise TypeError("SumWdg requires a CompositeObjective")
        return eval_wdg(kind.first, f.f1, y, z, avf_nodes) + eval_wdg(kind.second, f.f2, y, z, avf_nodes)
    if kind is WdgKind.EXPLICIT_EULER:
        return f.grad(np.broadcast_to(z, np.broadcast_shapes(y.shape, z.shape)))
    if kind is WdgKind.IMPLICIT_EULER:
        return f.grad(np.broadcast_to(y, np.broadcast_shapes(y.shape, z.shape)))
    if kind is WdgKind.MIDPOINT:
        return f.grad(0.5 * (y + z))
    if kind is WdgKind.AVF:
        return avf_quadrature(f, y, z, avf_nodes)
    if kind is WdgKind.GONZALEZ:
        return _gonzalez(f, y, z)
    if kind is WdgKind.ITOH_ABE:
        return _itoh_abe(f, y, z)
    raise TypeError(f"unknown kind {kind!r}")


def wdg_params(kind: Kind, L: float, mu: float, d: Optional[int] = None) -> WdgParams:
    """Certified (alpha, beta, gamma) for a kind on an L-smooth, mu-strongly
    convex objective (mu = 0 allowed where noted).

    The Gonzalez and Itoh-Abe constants require mu > 0; the Itoh-Abe constant
    also needs the dimension d.  For a :class:`SumWdg` the triple is the
    component-wise sum with both parts read at the same (L, mu); use
    :func:`params_for` to combine per-part metadata of a composite.
    """
    if isinstance(kind, SumWdg):
        return wdg_params(kind.first, L, mu, d) + wdg_params(kind.second, L, mu, d)
    needs_L = kind in (
        WdgKind.EXPLICIT_EULER,
        WdgKind.MIDPOINT,
        WdgKind.AVF,
        WdgKind.GONZALEZ,
        WdgKind.ITOH_ABE,
    )
    if needs_L and not np.isfinite(L):
        raise ValueError(f"kind {kind.value} requires a finite smoothness constant")
    if mu < 0:
        raise ValueError("mu must be nonnegative")
    if kind is WdgKind.EXPLICIT_EULER:
        return WdgParams(L / 2.0, mu / 2.0, 0.0)
    if kind is WdgKind.IMPLICIT_EULER:
        # valid for mu = 0 as well
        return WdgParams(0.0, 0.0, mu / 2.0)
    if kind is WdgKind.MIDPOINT:
        return WdgParams((L + mu) / 8.0, mu / 4.0, mu / 4.0)
    if kind is WdgKind.AVF:
        return WdgParams(L / 6.0 + mu / 12.0, mu / 4.0, mu / 4.0)
    if kind is WdgKind.GONZALEZ:
        if mu <= 0:
            raise ValueError("Gonzalez constants require mu > 0")
        return WdgParams((L + mu) / 8.0 + (L - mu) ** 2 / (16.0 * mu), mu / 4.0, 0.0)
    if kind is WdgKind.ITOH_ABE:
        if mu <= 0:
            raise ValueError("Itoh-Abe constants require mu > 0")
        if d is None:
            raise ValueError("Itoh-Abe constants require the dimension d")
        return WdgParams(d * L * L / mu - mu / 4.0, mu / 2.0, -mu / 4.0)
    raise TypeError(f"unknown kind {kind!r}")


def pl_wdg_params(kind: Kind, L: float, d: int = 1) -> PlWdgParams:
    """Certified (alpha, beta) for the gradient-dominance variant.

    Only base kinds are supported: there is no certified sum rule for the
    gradient-dominance constants.
    """
    if isinstance(kind, SumWdg):
        raise ValueError("no certified sum rule for gradient-dominance constants")
    if not np.isfinite(L):
        raise ValueError("gradient-dominance constants require a finite smoothness constant")
    if kind is WdgKind.EXPLICIT_EULER:
        return PlWdgParams(L / 2.0, 0.0)
    if kind is WdgKind.IMPLICIT_EULER:
        return PlWdgParams(L / 2.0, L)
    if kind is WdgKind.MIDPOINT:
        return PlWdgParams(L / 8.0, L / 2.0)
    if kind is WdgKind.AVF:
        return PlWdgParams(0.0, L / 2.0)
    if kind is WdgKind.GONZALEZ:
        return PlWdgParams(0.0, 5.0 * L / 8.0)
    if kind is WdgKind.ITOH_ABE:
        return PlWdgParams(0.0, sqrt(d) * L)
    raise TypeError(f"unknown kind {kind!r}")


def params_for(f: Objective, kind: Kind, *, mu: Optional[float] = None) -> WdgParams:
    """Constants for ``kind`` on problem ``f``, from its stored metadata.

    For a sum kind on a composite the parts contribute their own constants
    and the triples add.  ``mu`` overrides the problem's strong-convexity
    modulus (pass 0 to treat a strongly convex problem as merely convex).
    """
    if isinstance(kind, SumWdg):
        if not isinstance(f, CompositeObjective):
            raise TypeError("SumWdg requires a CompositeObjective")
        return params_for(f.f1, kind.first, mu=mu) + params_for(f.f2, kind.second, mu=mu)
    mu_eff = f.strong_convexity if mu is None else mu
    return wdg_params(kind, f.smoothness, mu_eff, f.dim)


def pl_params_for(f: Objective, kind: Kind) -> PlWdgParams:
    return pl_wdg_params(kind, f.smoothness, f.dim)
