"""Parameter schedules, perturbation models, and feasibility validators.

Two validation regimes are supported, tagged "I" and "II".

Regime I checks the pointwise bounds 0 <= alpha_k <= alpha_cap < 1 and
0 <= lambda_floor <= lambda_k <= lambda_ceiling < 1.  Its remaining
hypotheses (summability of the inertia-weighted squared steps, summability
of the weighted error norms, bounded iterates) depend on the realized run
and are recorded as deferred-to-runtime; the diagnostics module monitors
them.

Regime II requires inertia that starts at zero and never decreases, a
positive relaxation floor, and scalars sigma, delta > 0 satisfying

    delta > alpha [alpha (1 + alpha) + sigma] / (1 - alpha^2)

which yields the explicit relaxation ceiling

    lambda_max = (delta - alpha [alpha (1 + alpha) + alpha delta + sigma])
                 / (delta [1 + alpha (1 + alpha) + alpha delta + sigma]).

Averaged operators admit larger relaxation: scale_ceiling_for_averaged
multiplies the ceiling by 1/theta and revalidates the same schedule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

ERROR_KINDS = ("zero", "power-decay", "geometric", "custom-list")


@dataclass(frozen=True)
class ParamSchedule:
    """Inertia and relaxation sequences with their declared bounds.

    sigma and delta are only meaningful for regime II and must be supplied
    together.  Construction never validates feasibility; the validators do.
    """

    alpha_of: Callable[[int], float]
    lambda_of: Callable[[int], float]
    alpha_cap: float
    lambda_floor: float
    lambda_ceiling: float
    sigma: float | None = None
    delta: float | None = None

    def __post_init__(self):
        if (self.sigma is None) != (self.delta is None):
            raise ValueError("sigma and delta must be provided together")

    @property
    def condition_set(self) -> str:
        return "I" if self.sigma is None else "II"


def constant_schedule(
    alpha: float,
    lam: float,
    *,
    alpha_cap: float | None = None,
    lambda_floor: float | None = None,
    lambda_ceiling: float | None = None,
    sigma: float | None = None,
    delta: float | None = None,
) -> ParamSchedule:
    """Constant alpha_k and lambda_k; caps and floor default to the constants."""
    a = float(alpha)
    l = float(lam)
    return ParamSchedule(
        alpha_of=lambda k: a,
        lambda_of=lambda k: l,
        alpha_cap=a if alpha_cap is None else float(alpha_cap),
        lambda_floor=l if lambda_floor is None else float(lambda_floor),
        lambda_ceiling=l if lambda_ceiling is None else float(lambda_ceiling),
        sigma=sigma,
        delta=delta,
    )


def delayed_inertia_schedule(
    alpha: float,
    lam: float,
    *,
    sigma: float,
    delta: float,
    lambda_floor: float | None = None,
    lambda_ceiling: float | None = None,
) -> ParamSchedule:
    """alpha_0 = 0 then constant alpha (nondecreasing), constant lambda.

    The natural constant-parameter schedule for regime II, which demands
    zero inertia at k = 0.
    """
    a = float(alpha)
    base = constant_schedule(
        a,
        lam,
        lambda_floor=lambda_floor,
        lambda_ceiling=lambda_ceiling,
        sigma=float(sigma),
        delta=float(delta),
    )
    return replace(base, alpha_of=lambda k: 0.0 if k == 0 else a)


@dataclass(frozen=True)
class ErrorModel:
    """Perturbation sequence with a declared norm law and seeded directions.

    Norm laws by kind:

    * ``zero``         ->  0
    * ``power-decay``  ->  magnitude / (k + 1) ** exponent
    * ``geometric``    ->  magnitude * exponent ** k   (exponent > 0)
    * ``custom-list``  ->  norms[k], and 0 past the end of the list

    Directions are uniform on the unit sphere, deterministic in (seed, k).
    Non-summable laws are constructible; ``summability`` flags them.
    """

    kind: str = "zero"
    magnitude: float = 0.0
    exponent: float = 0.0
    seed: int = 0
    norms: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind not in ERROR_KINDS:
            raise ValueError(f"unknown error kind {self.kind!r}")
        if self.magnitude < 0.0 or not math.isfinite(self.magnitude):
            raise ValueError("magnitude must be a finite nonnegative real")
        if not (isinstance(self.seed, int) and self.seed >= 0):
            raise ValueError("seed must be a nonnegative integer")
        if self.kind == "geometric" and not self.exponent > 0.0:
            raise ValueError("geometric law needs a positive ratio in `exponent`")
        if self.kind == "custom-list":
            if self.norms is None:
                raise ValueError("custom-list law needs explicit norms")
            object.__setattr__(self, "norms", tuple(float(v) for v in self.norms))
            if any((v < 0.0 or not math.isfinite(v)) for v in self.norms):
                raise ValueError("custom norms must be finite and nonnegative")
        elif self.norms is not None:
            raise ValueError(f"norms are only valid for custom-list, not {self.kind!r}")

    @classmethod
    def zero(cls) -> "ErrorModel":
        return cls(kind="zero")

    @classmethod
    def power_decay(cls, magnitude: float, exponent: float, seed: int = 0) -> "ErrorModel":
        return cls(kind="power-decay", magnitude=float(magnitude), exponent=float(exponent), seed=seed)

    @classmethod
    def geometric(cls, magnitude: float, ratio: float, seed: int = 0) -> "ErrorModel":
        return cls(kind="geometric", magnitude=float(magnitude), exponent=float(ratio), seed=seed)

    @classmethod
    def from_norms(cls, norms, seed: int = 0) -> "ErrorModel":
        return cls(kind="custom-list", norms=tuple(float(v) for v in norms), seed=seed)

    def norm_at(self, k: int) -> float:
        if k < 0:
            raise ValueError("k must be nonnegative")
        if self.kind == "zero":
            return 0.0
        if self.kind == "power-decay":
            return self.magnitude / float(k + 1) ** self.exponent
        if self.kind == "geometric":
            return self.magnitude * self.exponent**k
        return self.norms[k] if k < len(self.norms) else 0.0

    @property
    def summability(self) -> str:
        """Declared-law verdict: "summable" or "not-guaranteed".  Never a proof about a run."""
        if self.kind == "zero" or self.kind == "custom-list":
            return "summable"
        if self.magnitude == 0.0:
            return "summable"
        if self.kind == "power-decay":
            return "summable" if self.exponent > 1.0 else "not-guaranteed"
        return "summable" if self.exponent < 1.0 else "not-guaranteed"


def emit_error(model: ErrorModel, k: int, dim: int) -> np.ndarray:
    """The perturbation vector e^k: declared norm, seeded sphere direction.

    Pure in (model.seed, k, dim); repeated calls are bit-identical.
    """
    if k < 0:
        raise ValueError("k must be nonnegative")
    if dim < 1:
        raise ValueError("dim must be positive")
    target = model.norm_at(k)
    if target == 0.0:
        return np.zeros(dim)
    rng = np.random.default_rng(np.random.SeedSequence(entropy=model.seed, spawn_key=(k,)))
    d = rng.standard_normal(dim)
    n = math.sqrt(float(d @ d))
    if n == 0.0:
        d = np.zeros(dim)
        d[0] = 1.0
        n = 1.0
    return d * (target / n)


@dataclass(frozen=True)
class ConditionCheck:
    name: str
    margin: float
    ok: bool


@dataclass(frozen=True)
class ConditionReport:
    """Feasibility verdict for one schedule under one regime.

    ``lambda_max`` is the operative relaxation ceiling bound: 1/scaling_theta
    for regime I, the (rescaled) closed-form ceiling for regime II.  feasible
    holds exactly when ``violations`` is empty.
    """

    condition_set: str
    feasible: bool
    delta_threshold: float
    lambda_max: float
    violations: tuple[str, ...]
    warnings: tuple[str, ...]
    deferred: tuple[str, ...]
    checks: tuple[ConditionCheck, ...]
    scaling_theta: float = 1.0
    schedule: ParamSchedule | None = field(default=None, repr=False)
    horizon: int = field(default=0, repr=False)

    def to_dict(self) -> dict:
        return {
            "condition_set": self.condition_set,
            "feasible": self.feasible,
            "delta_threshold": None if math.isnan(self.delta_threshold) else self.delta_threshold,
            "lambda_max": self.lambda_max,
            "scaling_theta": self.scaling_theta,
            "violations": list(self.violations),
            "warnings": list(self.warnings),
            "deferred": list(self.deferred),
            "checks": [{"name": c.name, "margin": c.margin, "ok": c.ok} for c in self.checks],
        }


def _fmt(x: float) -> str:
    return format(x, ".12g")


def _scan_schedule(s: ParamSchedule, horizon: int):
    """Pointwise extrema of alpha_k, lambda_k over k = 0..horizon, plus monotonicity."""
    a_min = math.inf
    a_max = -math.inf
    l_min = math.inf
    l_max = -math.inf
    nondecreasing = True
    a_prev = None
    a0 = None
    for k in range(horizon + 1):
        a = float(s.alpha_of(k))
        l = float(s.lambda_of(k))
        if k == 0:
            a0 = a
        if a_prev is not None and a < a_prev:
            nondecreasing = False
        a_prev = a
        a_min = min(a_min, a)
        a_max = max(a_max, a)
        l_min = min(l_min, l)
        l_max = max(l_max, l)
    return a0, a_min, a_max, l_min, l_max, nondecreasing


_DEFERRED_I = (
    "sum_k alpha_k ||z^{k+1} - z^k||^2 < inf (deferred-to-runtime)",
    "sum_k lambda_k ||e^k|| < inf (deferred-to-runtime)",
    "bounded iterates (deferred-to-runtime)",
)

_DEFERRED_II = (
    "sum_k ||e^k|| < inf (deferred-to-runtime)",
    "bounded iterates (deferred-to-runtime)",
)


def _validate_i(s: ParamSchedule, horizon: int, scaling_theta: float) -> ConditionReport:
    bound = 1.0 / scaling_theta
    a0, a_min, a_max, l_min, l_max, _ = _scan_schedule(s, horizon)
    checks = []
    violations = []
    warnings = []

    def add(name, margin, ok, message):
        checks.append(ConditionCheck(name=name, margin=float(margin), ok=bool(ok)))
        if not ok:
            violations.append(message)

    add("alpha_cap < 1", 1.0 - s.alpha_cap, s.alpha_cap < 1.0, "alpha_cap must be < 1")
    add("alpha_cap >= 0", s.alpha_cap, s.alpha_cap >= 0.0, "alpha_cap must be >= 0")
    add("min_k alpha_k >= 0", a_min, a_min >= 0.0, f"alpha_of(k) must be >= 0 (min {_fmt(a_min)})")
    add(
        "max_k alpha_k <= alpha_cap",
        s.alpha_cap - a_max,
        a_max <= s.alpha_cap,
        f"alpha_of(k) must be <= alpha_cap (max {_fmt(a_max)} vs cap {_fmt(s.alpha_cap)})",
    )
    add("lambda_floor >= 0", s.lambda_floor, s.lambda_floor >= 0.0, "lambda_floor must be >= 0")
    add(
        "lambda_floor <= lambda_ceiling",
        s.lambda_ceiling - s.lambda_floor,
        s.lambda_floor <= s.lambda_ceiling,
        "lambda_floor must be <= lambda_ceiling",
    )
    add(
        f"lambda_ceiling < {_fmt(bound)}",
        bound - s.lambda_ceiling,
        s.lambda_ceiling < bound,
        f"lambda_ceiling must be < {_fmt(bound)}",
    )
    add(
        "min_k lambda_k >= lambda_floor",
        l_min - s.lambda_floor,
        l_min >= s.lambda_floor,
        f"lambda_of(k) must be >= lambda_floor (min {_fmt(l_min)})",
    )
    add(
        "max_k lambda_k <= lambda_ceiling",
        s.lambda_ceiling - l_max,
        l_max <= s.lambda_ceiling,
        f"lambda_of(k) must be <= lambda_ceiling (max {_fmt(l_max)})",
    )
    if s.lambda_floor == 0.0:
        warnings.append("lambda_floor = 0: the residual rate certificate requires a positive floor")
    return ConditionReport(
        condition_set="I",
        feasible=not violations,
        delta_threshold=math.nan,
        lambda_max=bound,
        violations=tuple(violations),
        warnings=tuple(warnings),
        deferred=_DEFERRED_I,
        checks=tuple(checks),
        scaling_theta=scaling_theta,
        schedule=s,
        horizon=horizon,
    )


def delta_threshold(alpha: float, sigma: float) -> float:
    """Smallest admissible delta under regime II: alpha [alpha (1 + alpha) + sigma] / (1 - alpha^2)."""
    if alpha >= 1.0:
        raise ValueError("alpha_cap must be < 1: threshold formula undefined")
    return alpha * (alpha * (1.0 + alpha) + sigma) / (1.0 - alpha * alpha)


def lambda_ceiling_ii(alpha: float, sigma: float, delta: float) -> float:
    """Closed-form regime-II relaxation ceiling for the given (alpha, sigma, delta)."""
    if alpha >= 1.0:
        raise ValueError("alpha_cap must be < 1: ceiling formula undefined")
    c = alpha * (1.0 + alpha) + alpha * delta + sigma
    return (delta - alpha * c) / (delta * (1.0 + c))


def _validate_ii(s: ParamSchedule, horizon: int, scaling_theta: float) -> ConditionReport:
    if s.sigma is None or s.delta is None:
        raise ValueError("regime II validation needs sigma and delta on the schedule")
    alpha = s.alpha_cap
    if alpha >= 1.0:
        raise ValueError("alpha_cap must be < 1: regime II formulas are undefined")
    sigma = float(s.sigma)
    delta = float(s.delta)
    a0, a_min, a_max, l_min, l_max, nondecreasing = _scan_schedule(s, horizon)

    checks = []
    violations = []
    warnings: list[str] = []

    def add(name, margin, ok, message):
        checks.append(ConditionCheck(name=name, margin=float(margin), ok=bool(ok)))
        if not ok:
            violations.append(message)

    add("alpha_cap >= 0", alpha, alpha >= 0.0, "alpha_cap must be >= 0")
    add("sigma > 0", sigma, sigma > 0.0, "sigma must be > 0")
    add("delta > 0", delta, delta > 0.0, "delta must be > 0")

    thr = delta_threshold(alpha, sigma)
    add(
        "delta > alpha[alpha(1+alpha)+sigma]/(1-alpha^2)",
        delta - thr,
        delta > thr,
        f"delta must exceed the threshold {_fmt(thr)} (got {_fmt(delta)})",
    )
    lam_max = lambda_ceiling_ii(alpha, sigma, delta) / scaling_theta if delta > 0.0 else math.nan
    add("alpha_of(0) == 0", -abs(a0), a0 == 0.0, f"alpha_of(0) must be 0 (got {_fmt(a0)})")
    add("alpha_of nondecreasing", 0.0 if nondecreasing else -1.0, nondecreasing, "alpha_of must be nondecreasing")
    add("min_k alpha_k >= 0", a_min, a_min >= 0.0, f"alpha_of(k) must be >= 0 (min {_fmt(a_min)})")
    add(
        "max_k alpha_k <= alpha_cap",
        alpha - a_max,
        a_max <= alpha,
        f"alpha_of(k) must be <= alpha_cap (max {_fmt(a_max)})",
    )
    add("lambda_floor > 0", s.lambda_floor, s.lambda_floor > 0.0, "lambda_floor must be > 0")
    add(
        "min_k lambda_k >= lambda_floor",
        l_min - s.lambda_floor,
        l_min >= s.lambda_floor,
        f"lambda_of(k) must be >= lambda_floor (min {_fmt(l_min)})",
    )
    if math.isnan(lam_max):
        add("max_k lambda_k <= lambda_max", math.nan, False, "lambda_max undefined (delta <= 0)")
    else:
        add(
            "max_k lambda_k <= lambda_max",
            lam_max - l_max,
            l_max <= lam_max,
            f"lambda_of(k) must be <= lambda_max = {_fmt(lam_max)} (max {_fmt(l_max)})",
        )
    return ConditionReport(
        condition_set="II",
        feasible=not violations,
        delta_threshold=thr,
        lambda_max=lam_max,
        violations=tuple(violations),
        warnings=tuple(warnings),
        deferred=_DEFERRED_II,
        checks=tuple(checks),
        scaling_theta=scaling_theta,
        schedule=s,
        horizon=horizon,
    )


def validate_conditions_i(s: ParamSchedule, horizon: int = 1000) -> ConditionReport:
    """Regime I feasibility: pointwise bounds now, summability and boundedness at runtime."""
    return _validate_i(s, horizon, scaling_theta=1.0)


def validate_conditions_ii(s: ParamSchedule, horizon: int = 1000) -> ConditionReport:
    """Regime II feasibility: threshold on delta plus the closed-form relaxation ceiling."""
    return _validate_ii(s, horizon, scaling_theta=1.0)


def validate_schedule(s: ParamSchedule, horizon: int = 1000) -> ConditionReport:
    """Dispatch on the schedule: regime II when sigma/delta are present, else regime I."""
    if s.condition_set == "II":
        return _validate_ii(s, horizon, scaling_theta=1.0)
    return _validate_i(s, horizon, scaling_theta=1.0)


def scale_ceiling_for_averaged(report: ConditionReport, theta: float) -> ConditionReport:
    """Revalidate with the relaxation ceiling multiplied by 1/theta.

    For a theta-averaged operator the admissible relaxation extends to
    1/theta times the plain-operator ceiling; theta must lie strictly in
    (0, 1) and the scaling factor is recorded on the returned report.
    """
    if not (0.0 < theta < 1.0):
        raise ValueError(f"theta must lie in (0, 1), got {theta}")
    if report.schedule is None:
        raise ValueError("report does not carry its schedule; cannot rescale")
    if report.condition_set == "I":
        return _validate_i(report.schedule, report.horizon, scaling_theta=theta)
    return _validate_ii(report.schedule, report.horizon, scaling_theta=theta)
