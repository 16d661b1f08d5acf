"""Core loop for the inexact inertial relaxed fixed-point iteration.

One step, from the pair (z^k, z^{k-1}):

    mu^k    = z^k + alpha_k (z^k - z^{k-1})
    z^{k+1} = mu^k + lambda_k (T mu^k + e^k - mu^k)

The classical relaxed iteration is alpha_k = 0 with zero errors, the
inexact variant keeps the errors, and the inertial variant keeps the
extrapolation.  The named wrappers below delegate to this single loop
body, so those reductions are bit-identical to the general path, not
merely equivalent up to rounding.

The operator is applied once per step, at the extrapolated point, and the
recorded residual ||T mu^k - mu^k|| is measured there before any error
enters.  Errors come from an ErrorModel, or from a `perturb` callback
returning the perturbed operator output together with the error norm to
record (the forward-backward solver uses this to fold two error sources
into one term).

route="unwrap" rewrites a declared theta-averaged operator as
T = (1 - theta) I + theta N and runs the same loop on the nonexpansive
core N with relaxation theta * lambda_k and error e^k / theta.  In exact
arithmetic the z^k sequence is unchanged, but relaxations up to 1/theta
become admissible.  Recorded residuals and error norms are rescaled by
theta so both routes report the same scheme-level quantities.

Stopping: residual <= tol wins every tie, then a norm blowup past
`divergence_norm`, then the iteration budget.  A negative tol disables
the residual stop, which pins the horizon exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .operators import OperatorSpec, as_point, norm, unwrap_averaged
from .schedules import ErrorModel, ParamSchedule, constant_schedule, emit_error

STOP_REASONS = ("residual-tol", "max-iter", "diverged")

PROBLEM_KINDS = ("fixed-point", "minimization", "inclusion", "fbs-inclusion")

ROUTES = ("direct", "unwrap")

PerturbFn = Callable[[np.ndarray, np.ndarray, int], tuple[np.ndarray, float]]


@dataclass(frozen=True)
class Problem:
    """Find z with T z = z, from a given start and optional known solution."""

    operator: OperatorSpec
    z0: np.ndarray
    z_star: np.ndarray | None = None
    kind: str = "fixed-point"
    name: str = ""

    def __post_init__(self):
        if self.kind not in PROBLEM_KINDS:
            raise ValueError(f"unknown problem kind {self.kind!r}")
        object.__setattr__(self, "z0", as_point(self.z0, dim=self.operator.dim, name="z0"))
        if self.z_star is not None:
            object.__setattr__(
                self, "z_star", as_point(self.z_star, dim=self.operator.dim, name="z_star")
            )


@dataclass
class RunResult:
    """Everything recorded during one run.

    Arrays are aligned per iteration k = 0..n-1: `residuals[k]` is
    ||T mu^k - mu^k||, `err_norms[k]` the scheme-level ||e^k||,
    `step_norms[k]` is ||z^{k+1} - z^k||, and `alphas` / `lambdas` the
    realized parameters.  `dists` has one extra leading entry: dists[k]
    is ||z^k - z_star|| for k = 0..n, or None when no solution is known.
    `states` likewise holds z^0..z^n when recording is on.
    """

    stop_reason: str
    converged: bool
    iterations: int
    z: np.ndarray
    residuals: np.ndarray
    err_norms: np.ndarray
    alphas: np.ndarray
    lambdas: np.ndarray
    step_norms: np.ndarray
    dists: np.ndarray | None
    states: list[np.ndarray] | None
    max_state_norm: float
    route: str
    errors: ErrorModel | None = field(repr=False)
    problem: Problem = field(repr=False)
    schedule: ParamSchedule = field(repr=False)

    @property
    def residual(self) -> float:
        return float(self.residuals[-1]) if self.residuals.size else math.nan

    @property
    def dist_to_star(self) -> float:
        if self.dists is None or self.dists.size == 0:
            return math.nan
        return float(self.dists[-1])


def _model_perturb(model: ErrorModel, dim: int, scale: float) -> PerturbFn:
    """Perturbation from a declared law; `scale` divides the vector (unwrap route)."""

    def p(mu, t_mu, k):
        if model.norm_at(k) == 0.0:
            return t_mu, 0.0
        e = emit_error(model, k, dim)
        if scale != 1.0:
            e /= scale
        return t_mu + e, norm(e)

    return p


def _rescaled_perturb(cb: PerturbFn, theta: float) -> PerturbFn:
    """Adapt a scheme-level perturb callback to the unwrapped core.

    The callback speaks about T; the loop runs on N.  T mu is
    reconstructed from N mu, the callback's error is divided by theta,
    and the zero-error fast path is preserved exactly.
    """

    def p(mu, n_mu, k):
        t_mu = mu + theta * (n_mu - mu)
        t_eff, _ = cb(mu, t_mu, k)
        if t_eff is t_mu:
            return n_mu, 0.0
        e = (t_eff - t_mu) / theta
        return n_mu + e, norm(e)

    return p


def _core(
    apply_op,
    z0,
    z_star,
    alpha_of,
    lambda_of,
    perturb_fn,
    tol,
    max_iter,
    divergence_norm,
    record_states,
    relax_scale,
    residual_scale,
):
    z_prev = z0
    z = z0
    residuals: list[float] = []
    err_norms: list[float] = []
    alphas: list[float] = []
    lambdas: list[float] = []
    steps: list[float] = []
    dists: list[float] | None = None
    if z_star is not None:
        dists = [norm(z0 - z_star)]
    states = [z0.copy()] if record_states else None
    max_norm = norm(z0)
    stop_reason = "max-iter"

    for k in range(max_iter):
        a = float(alpha_of(k))
        lam = float(lambda_of(k))
        mu = z if a == 0.0 else z + a * (z - z_prev)
        t_mu = np.asarray(apply_op(mu), dtype=float)
        r = residual_scale * norm(t_mu - mu)
        t_eff, e_norm = perturb_fn(mu, t_mu, k)
        z_next = mu + (lam * relax_scale) * (t_eff - mu)

        residuals.append(r)
        err_norms.append(residual_scale * float(e_norm))
        alphas.append(a)
        lambdas.append(lam)
        steps.append(norm(z_next - z))
        if dists is not None:
            dists.append(norm(z_next - z_star))
        if states is not None:
            states.append(z_next.copy())

        z_prev = z
        z = z_next
        finite = bool(np.isfinite(z).all())
        zn = norm(z) if finite else math.inf
        if zn > max_norm:
            max_norm = zn
        if r <= tol:
            stop_reason = "residual-tol"
            break
        if not finite or zn >= divergence_norm:
            stop_reason = "diverged"
            break

    return {
        "stop_reason": stop_reason,
        "z": z,
        "residuals": np.asarray(residuals),
        "err_norms": np.asarray(err_norms),
        "alphas": np.asarray(alphas),
        "lambdas": np.asarray(lambdas),
        "step_norms": np.asarray(steps),
        "dists": None if dists is None else np.asarray(dists),
        "states": states,
        "max_state_norm": max_norm,
    }


def iterate(
    problem: Problem,
    schedule: ParamSchedule,
    errors: ErrorModel | None = None,
    *,
    perturb: PerturbFn | None = None,
    tol: float = 1e-10,
    max_iter: int = 1_000_000,
    divergence_norm: float = 1e12,
    record_states: bool = False,
    route: str = "direct",
) -> RunResult:
    """Run the loop until the residual stop, a blowup, or the budget.

    Exactly one error source may be given: an ErrorModel (vectors are
    drawn by `emit_error`) or a `perturb(mu, t_mu, k)` callback returning
    the perturbed operator output and the error norm to record.  With
    neither, evaluations are exact.
    """
    if route not in ROUTES:
        raise ValueError(f"unknown route {route!r}")
    if perturb is not None and errors is not None:
        raise ValueError("pass an ErrorModel or a perturb callback, not both")
    if max_iter < 0:
        raise ValueError("max_iter must be nonnegative")
    dim = problem.operator.dim

    if route == "unwrap":
        core_op = unwrap_averaged(problem.operator)
        theta = problem.operator.theta
        if perturb is not None:
            perturb_fn = _rescaled_perturb(perturb, theta)
        else:
            perturb_fn = _model_perturb(errors or ErrorModel.zero(), dim, theta)
        relax_scale = theta
    else:
        core_op = problem.operator
        theta = 1.0
        if perturb is not None:
            perturb_fn = perturb
        else:
            perturb_fn = _model_perturb(errors or ErrorModel.zero(), dim, 1.0)
        relax_scale = 1.0

    raw = _core(
        core_op.apply,
        problem.z0,
        problem.z_star,
        schedule.alpha_of,
        schedule.lambda_of,
        perturb_fn,
        tol,
        max_iter,
        divergence_norm,
        record_states,
        relax_scale,
        residual_scale=theta,
    )
    residuals = raw["residuals"]
    err_norms = raw["err_norms"]

    return RunResult(
        stop_reason=raw["stop_reason"],
        converged=raw["stop_reason"] == "residual-tol",
        iterations=int(residuals.size),
        z=raw["z"],
        residuals=residuals,
        err_norms=err_norms,
        alphas=raw["alphas"],
        lambdas=raw["lambdas"],
        step_norms=raw["step_norms"],
        dists=raw["dists"],
        states=raw["states"],
        max_state_norm=float(raw["max_state_norm"]),
        route=route,
        errors=errors,
        problem=problem,
        schedule=schedule,
    )


def _zero_inertia(relaxation) -> ParamSchedule:
    if isinstance(relaxation, ParamSchedule):
        if relaxation.alpha_cap != 0.0:
            raise ValueError("this wrapper needs a schedule with alpha identically 0")
        return relaxation
    return constant_schedule(0.0, float(relaxation))


def km(problem: Problem, relaxation, **kwargs) -> RunResult:
    """Relaxed fixed-point iteration: no inertia, exact evaluations."""
    return iterate(problem, _zero_inertia(relaxation), errors=None, **kwargs)


def inexact_km(problem: Problem, relaxation, errors: ErrorModel, **kwargs) -> RunResult:
    """Relaxed iteration with perturbed evaluations, no inertia."""
    return iterate(problem, _zero_inertia(relaxation), errors=errors, **kwargs)


def inertial_km(problem: Problem, schedule: ParamSchedule, **kwargs) -> RunResult:
    """Inertial relaxed iteration with exact evaluations."""
    return iterate(problem, schedule, errors=None, **kwargs)
