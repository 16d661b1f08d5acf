"""Solvers built on the core loop, and planted instances to exercise them.

solve_ppa drives a resolvent (proximal point); solve_fbs drives the
forward-backward composition x -> J(x - rho B x).  Both accept the same
schedules, error models, and engine options as `iterate`.

Forward-backward perturbations: an error e1 inside the forward step and
an error e2 on the resolvent output fold into one scheme-level term

    e-bar^k = J(mu - rho (B mu + e1)) + e2 - J(mu - rho B mu)

whose norm is recorded as err_norm and obeys
||e-bar|| <= rho ||e1|| + ||e2|| by nonexpansiveness of the resolvent.
When both channels are zero at step k the exact operator output is
reused, so error-free runs cost one resolvent application per step and
perturbed steps cost two.  Give the two channels different seeds; equal
seeds draw identical directions at each k.

plant_lasso builds an l1-regularized least-squares instance whose exact
solution is known by construction, for end-to-end solver checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .engine import Problem, RunResult, iterate
from .operators import (
    IsmOperator,
    OperatorSpec,
    as_point,
    make_box_projection,
    make_fb_composition,
    make_soft_threshold,
    norm,
    quadratic_gradient,
)
from .schedules import ErrorModel, ParamSchedule, emit_error


def solve_ppa(
    resolvent: OperatorSpec,
    z0,
    schedule: ParamSchedule,
    errors: ErrorModel | None = None,
    *,
    z_star=None,
    route: str = "unwrap",
    name: str = "",
    **engine_options,
) -> RunResult:
    """Proximal point iteration on a firmly nonexpansive resolvent.

    Runs through the unwrapped nonexpansive core by default, which admits
    relaxations up to 2; route="direct" applies the resolvent as-is.
    """
    if resolvent.theta != 0.5:
        raise ValueError("proximal point needs a firmly nonexpansive resolvent (theta = 1/2)")
    prob = Problem(
        operator=resolvent, z0=z0, z_star=z_star, kind="inclusion", name=name or "ppa"
    )
    return iterate(prob, schedule, errors, route=route, **engine_options)


def solve_fbs(
    resolvent: OperatorSpec,
    forward: IsmOperator,
    rho: float,
    z0,
    schedule: ParamSchedule,
    *,
    forward_errors: ErrorModel | None = None,
    resolvent_errors: ErrorModel | None = None,
    z_star=None,
    route: str = "direct",
    kind: str = "fbs-inclusion",
    name: str = "",
    **engine_options,
) -> RunResult:
    """Relaxed inertial forward-backward splitting.

    The direct route with zero inertia and zero errors is exactly the
    classical iteration z <- z + lambda (J(z - rho B z) - z).
    """
    t = make_fb_composition(resolvent, forward, rho)
    prob = Problem(operator=t, z0=z0, z_star=z_star, kind=kind, name=name or "fbs")
    fe = forward_errors if forward_errors is not None else ErrorModel.zero()
    re = resolvent_errors if resolvent_errors is not None else ErrorModel.zero()
    if fe.kind == "zero" and re.kind == "zero":
        return iterate(prob, schedule, None, route=route, **engine_options)

    dim = resolvent.dim
    j = resolvent.apply
    fwd = forward.apply
    r = float(rho)

    def perturb(mu, t_mu, k):
        n1 = fe.norm_at(k)
        n2 = re.norm_at(k)
        if n1 == 0.0 and n2 == 0.0:
            return t_mu, 0.0
        b_mu = fwd(mu)
        if n1 != 0.0:
            b_mu = b_mu + emit_error(fe, k, dim)
        t_pert = j(mu - r * b_mu)
        if n2 != 0.0:
            t_pert = t_pert + emit_error(re, k, dim)
        return t_pert, norm(t_pert - t_mu)

    return iterate(prob, schedule, perturb=perturb, route=route, **engine_options)


@dataclass(frozen=True)
class LassoInstance:
    """min 0.5 ||matrix x - rhs||^2 + reg ||x||_1 with a planted exact solution."""

    matrix: np.ndarray
    rhs: np.ndarray
    reg: float
    x_star: np.ndarray
    dual: np.ndarray
    support: np.ndarray
    seed: int


def plant_lasso(
    n_samples: int = 300,
    n_features: int = 200,
    support_size: int = 20,
    reg: float = 0.5,
    seed: int = 0,
) -> LassoInstance:
    """Least-squares + l1 instance whose minimizer is known exactly.

    Draws a Gaussian design (full column rank needs n_samples >=
    n_features), a sparse x_star, and a subgradient v with v = sign(x_star)
    on the support and |v| <= 0.4 off it, then sets
    rhs = matrix @ x_star + reg * w with matrix^T w = v.  The optimality
    inclusion holds with equality and the strictly convex objective makes
    x_star unique.
    """
    if n_samples < n_features:
        raise ValueError("planting needs n_samples >= n_features for a full-rank design")
    if not 0 < support_size <= n_features:
        raise ValueError("support_size must lie in 1..n_features")
    if not reg > 0.0:
        raise ValueError("reg must be positive")
    rng = np.random.default_rng(seed)
    m = rng.standard_normal((n_samples, n_features)) / math.sqrt(n_samples)
    support = np.sort(rng.choice(n_features, size=support_size, replace=False))
    x_star = np.zeros(n_features)
    x_star[support] = rng.uniform(0.5, 1.5, size=support_size) * rng.choice(
        [-1.0, 1.0], size=support_size
    )
    dual = rng.uniform(-0.4, 0.4, size=n_features)
    dual[support] = np.sign(x_star[support])
    w = m @ np.linalg.solve(m.T @ m, dual)
    rhs = m @ x_star + reg * w
    return LassoInstance(
        matrix=m,
        rhs=rhs,
        reg=float(reg),
        x_star=x_star,
        dual=dual,
        support=support,
        seed=int(seed),
    )


def lasso_kkt_gap(inst: LassoInstance) -> float:
    """Worst violation of the optimality inclusion at the planted solution.

    Returns max over coordinates of |residual correlation - sign| on the
    support and of the excess of |correlation| over 1 off it; exact
    planting gives a value at rounding level.
    """
    corr = inst.matrix.T @ (inst.rhs - inst.matrix @ inst.x_star) / inst.reg
    on = np.abs(corr[inst.support] - np.sign(inst.x_star[inst.support]))
    mask = np.ones(corr.shape[0], dtype=bool)
    mask[inst.support] = False
    off = np.maximum(np.abs(corr[mask]) - 1.0, 0.0)
    worst_on = float(on.max()) if on.size else 0.0
    worst_off = float(off.max()) if off.size else 0.0
    return max(worst_on, worst_off)


def lasso_fbs_pieces(inst: LassoInstance, rho: float) -> tuple[OperatorSpec, IsmOperator]:
    """Resolvent and forward map for running the instance through solve_fbs.

    The forward map is the least-squares gradient with its certified
    cocoercivity modulus; the resolvent is the soft threshold at rho * reg.
    """
    forward = quadratic_gradient(inst.matrix, inst.rhs)
    resolvent = make_soft_threshold(float(rho) * inst.reg, inst.matrix.shape[1])
    return resolvent, forward


def lasso_objective(inst: LassoInstance, x) -> float:
    x = as_point(x, dim=inst.matrix.shape[1], name="x")
    r = inst.matrix @ x - inst.rhs
    return 0.5 * float(r @ r) + inst.reg * float(np.abs(x).sum())


def box_intersection_pieces(lo1, hi1, lo2, hi2) -> tuple[OperatorSpec, IsmOperator]:
    """Find a point in the intersection of two boxes as a splitting problem.

    The first box enters through its projection (the resolvent); the
    second through the 1-cocoercive displacement map x - P2 x.  With
    rho = 1 the composition is P1 after P2, averaged with theta = 2/3.
    """
    p1 = make_box_projection(lo1, hi1)
    p2 = make_box_projection(lo2, hi2)
    if p1.dim != p2.dim:
        raise ValueError(f"box dimensions differ: {p1.dim} vs {p2.dim}")
    p2_apply = p2.apply
    forward = IsmOperator(apply=lambda x: x - p2_apply(x), beta=1.0)
    return p1, forward
