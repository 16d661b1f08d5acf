"""Operators on R^n with averagedness metadata.

An operator T is theta-averaged when T = (1 - theta) I + theta N for some
nonexpansive N.  theta = 1 means plain nonexpansive with no averagedness
claim; firmly nonexpansive maps (proximity operators, projections,
resolvents) carry theta = 1/2.  Averagedness is declared metadata, checked
by sampling in the test suite rather than inferred symbolically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

Point = np.ndarray

OPERATOR_KINDS = (
    "identity",
    "affine",
    "projection",
    "prox",
    "resolvent",
    "gradient-step",
    "fb-composition",
    "custom",
)

# Spectral-norm certificates must be reproducible run to run.
_POWER_ITER_SEED = 74123
_POWER_ITER_TOL = 1e-10
_POWER_ITER_CAP = 10_000

_SPECTRAL_SLACK = 1e-12


def as_point(x, dim: int | None = None, name: str = "point") -> Point:
    """Coerce to a finite 1-D float64 vector, optionally checking length."""
    p = np.asarray(x, dtype=float)
    if p.ndim == 0:
        p = p.reshape(1)
    if p.ndim != 1:
        raise ValueError(f"{name} must be a vector, got shape {p.shape}")
    if not np.isfinite(p).all():
        raise ValueError(f"{name} contains non-finite entries")
    if dim is not None and p.shape[0] != dim:
        raise ValueError(f"{name} has dimension {p.shape[0]}, expected {dim}")
    return p


def inner(a, b) -> float:
    """Euclidean inner product; raises on dimension mismatch."""
    if np.shape(a) != np.shape(b):
        raise ValueError(f"dimension mismatch: {np.shape(a)} vs {np.shape(b)}")
    return float(np.dot(a, b))


def norm(a) -> float:
    """Euclidean norm, sqrt(inner(a, a))."""
    return math.sqrt(inner(a, a))


@dataclass(frozen=True)
class OperatorSpec:
    """A (claimed) nonexpansive operator with declared averagedness constant."""

    apply: Callable[[Point], Point]
    theta: float
    kind: str
    dim: int | None  # None when the operator works in any dimension

    def __post_init__(self):
        if not (0.0 < self.theta <= 1.0):
            raise ValueError(f"theta must lie in (0, 1], got {self.theta}")
        if self.kind not in OPERATOR_KINDS:
            raise ValueError(f"unknown operator kind {self.kind!r}")
        if self.dim is not None and int(self.dim) < 1:
            raise ValueError("dim must be a positive integer")

    def __call__(self, x: Point) -> Point:
        return self.apply(x)


@dataclass(frozen=True)
class IsmOperator:
    """A beta-inverse-strongly-monotone (cocoercive) map, e.g. a smooth convex gradient."""

    apply: Callable[[Point], Point]
    beta: float

    def __post_init__(self):
        if not (math.isfinite(self.beta) and self.beta > 0.0):
            raise ValueError(f"beta must be a positive real, got {self.beta}")

    def __call__(self, x: Point) -> Point:
        return self.apply(x)


def spectral_norm(mat, tol: float = _POWER_ITER_TOL, max_iter: int = _POWER_ITER_CAP) -> float:
    """Largest singular value estimate via power iteration on mat^T mat.

    Deterministic: the start vector comes from a fixed seed.  Converges to
    relative tolerance ``tol`` or stops after ``max_iter`` sweeps.
    """
    a = np.asarray(mat, dtype=float)
    if a.ndim != 2:
        raise ValueError("spectral_norm expects a matrix")
    gram = a.T @ a
    rng = np.random.default_rng(_POWER_ITER_SEED)
    v = rng.standard_normal(gram.shape[0])
    v /= math.sqrt(float(v @ v))
    lam = 0.0
    for _ in range(max_iter):
        w = gram @ v
        nw = math.sqrt(float(w @ w))
        if nw == 0.0:
            return 0.0
        v = w / nw
        lam_new = float(v @ (gram @ v))
        if abs(lam_new - lam) <= tol * max(abs(lam_new), 1.0):
            lam = lam_new
            break
        lam = lam_new
    return math.sqrt(max(lam, 0.0))


def make_identity(dim: int, theta: float = 1.0) -> OperatorSpec:
    """The identity map.  It is theta-averaged for every theta, so callers may declare one."""
    return OperatorSpec(apply=lambda x: np.asarray(x, dtype=float), theta=theta, kind="identity", dim=dim)


def make_soft_threshold(gamma: float, dim: int) -> OperatorSpec:
    """Coordinatewise soft threshold, prox of gamma * l1-norm.  Firmly nonexpansive."""
    if not gamma > 0.0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    g = float(gamma)

    def apply(x):
        return np.sign(x) * np.maximum(np.abs(x) - g, 0.0)

    return OperatorSpec(apply=apply, theta=0.5, kind="prox", dim=dim)


def make_box_projection(lo, hi) -> OperatorSpec:
    """Projection onto the box [lo, hi] (componentwise).  Firmly nonexpansive."""
    lo = as_point(lo, name="lo")
    hi = as_point(hi, dim=lo.shape[0], name="hi")
    if not (lo <= hi).all():
        raise ValueError("box bounds require lo <= hi componentwise")

    def apply(x):
        return np.clip(x, lo, hi)

    return OperatorSpec(apply=apply, theta=0.5, kind="projection", dim=lo.shape[0])


def make_affine(q, b, theta: float = 1.0) -> OperatorSpec:
    """Affine map x -> q x + b, certified nonexpansive by a power-iteration bound.

    The spectral-norm estimate of q must not exceed 1 + 1e-12.  theta stays 1
    unless the caller supplies a certified smaller value.
    """
    q = np.asarray(q, dtype=float)
    if q.ndim != 2 or q.shape[0] != q.shape[1]:
        raise ValueError("q must be a square matrix")
    b = as_point(b, dim=q.shape[0], name="b")
    cert = spectral_norm(q)
    if cert > 1.0 + _SPECTRAL_SLACK:
        raise ValueError(f"spectral norm certificate failed: estimate {cert} exceeds 1 + 1e-12")

    def apply(x):
        return q @ x + b

    return OperatorSpec(apply=apply, theta=theta, kind="affine", dim=q.shape[0])


def make_gradient_step_ism(grad, beta: float | None = None) -> IsmOperator:
    """Wrap a gradient map together with its cocoercivity modulus beta.

    Accepts an existing IsmOperator (returned unchanged) or a callable plus a
    positive beta.
    """
    if isinstance(grad, IsmOperator):
        if beta is not None and float(beta) != grad.beta:
            raise ValueError("conflicting beta: operator already carries one")
        return grad
    if beta is None or not (math.isfinite(beta) and beta > 0.0):
        raise ValueError("a positive modulus beta is required")
    return IsmOperator(apply=grad, beta=float(beta))


def quadratic_gradient(m, b) -> IsmOperator:
    """Gradient of x -> 0.5 ||m x - b||^2 as an IsmOperator.

    The gradient m^T (m x - b) is Lipschitz with constant L = ||m^T m||_2, and
    a convex function with an L-Lipschitz gradient has a (1/L)-cocoercive
    gradient (Baillon-Haddad), so beta = 1 / ||m^T m||_2.
    """
    m = np.asarray(m, dtype=float)
    b = as_point(b, dim=m.shape[0], name="b")
    sigma = spectral_norm(m)
    if sigma == 0.0:
        raise ValueError("zero matrix: choose beta explicitly via make_gradient_step_ism")
    mt = np.ascontiguousarray(m.T)

    def apply(x):
        return mt @ (m @ x - b)

    return IsmOperator(apply=apply, beta=1.0 / (sigma * sigma))


def make_fb_composition(resolvent: OperatorSpec, forward: IsmOperator, rho: float) -> OperatorSpec:
    """Forward-backward map x -> resolvent(x - rho * forward(x)).

    Requires 0 < rho < 2 beta and a firmly nonexpansive backward step; the
    composition is averaged with theta = 2 beta / (4 beta - rho).
    """
    if resolvent.theta != 0.5:
        raise ValueError("resolvent must be firmly nonexpansive (theta = 1/2)")
    beta = forward.beta
    if not (0.0 < rho < 2.0 * beta):
        raise ValueError(f"rho must lie in (0, 2*beta) = (0, {2.0 * beta}), got {rho}")
    theta = 2.0 * beta / (4.0 * beta - rho)
    j = resolvent.apply
    fwd = forward.apply
    r = float(rho)

    def apply(x):
        return j(x - r * fwd(x))

    return OperatorSpec(apply=apply, theta=theta, kind="fb-composition", dim=resolvent.dim)


def unwrap_averaged(t: OperatorSpec) -> OperatorSpec:
    """Recover the nonexpansive core N = (T - (1 - theta) I) / theta of an averaged T."""
    if t.theta >= 1.0:
        raise ValueError("theta = 1: no declared averagedness to unwrap")
    th = t.theta
    f = t.apply

    def apply(x):
        return (f(x) - (1.0 - th) * x) / th

    return OperatorSpec(apply=apply, theta=1.0, kind="custom", dim=t.dim)
