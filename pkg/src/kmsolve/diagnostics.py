"""Post-run certificates and hypothesis monitors.

Three layers, all computed from recorded run quantities:

* a per-iteration residual rate certificate, when a known solution and a
  feasible schedule make it meaningful;
* a distance quasi-monotonicity check for zero-inertia runs, where each
  step may increase the distance to a fixed point by at most
  lambda_k ||e^k||;
* a consistency report for the hypotheses that validation deferred to
  runtime (summable weighted errors, summable inertia-weighted squared
  steps, bounded iterates).

The certificate bounds the best residual seen so far:

    min_{1 <= i <= k} ||T mu^i - mu^i||^2
        <= (dist_1 + Delta_k) / (k * lambda_floor * (1 - ceiling))

with dist_1 = ||z^1 - z_star|| and

    Delta_k = alpha_cap * sum_i [psi_i - psi_{i-1}]_+
            + sum_i 2 ||z^{i+1} - z_star|| lambda_i ||e^i||
            + sum_i alpha_i (1 + alpha_i) ||z^i - z^{i-1}||^2

where psi_i = ||z^i - z_star||^2 and sums run over i = 1..k.  Two
variants are reported: the one above ("printed") and the same right-hand
side with dist_1 squared ("squared").  They coincide at dist_1 = 1; the
squared variant is the tighter of the two exactly when dist_1 < 1, and
the printed variant can fail when dist_1 > 1, so `tighter` names the one
to trust.

The ceiling entering 1 / (1 - ceiling) is the scheme-level relaxation
bound: the declared lambda_ceiling for regime I, the closed-form maximum
for regime II.  No certificate is issued when that ceiling reaches 1, so
a run justified only through the averaged rescaling (effective ceiling
1/theta > 1) gets no certificate even though it may well converge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .engine import RunResult
from .schedules import lambda_ceiling_ii, validate_schedule


@dataclass(frozen=True)
class RateCertificate:
    """Arrays indexed by k = ks[j]; empty with a reason when not issued."""

    valid: bool
    reason: str
    theta: float
    lambda_floor: float
    dist1: float
    ks: np.ndarray
    min_residual_sq: np.ndarray
    delta: np.ndarray
    rhs_printed: np.ndarray
    rhs_squared: np.ndarray
    tighter: str

    @property
    def rhs_tighter(self) -> np.ndarray:
        return self.rhs_squared if self.tighter == "squared" else self.rhs_printed

    def holds(self, variant: str = "tighter") -> bool:
        if not self.valid:
            return False
        rhs = {
            "printed": self.rhs_printed,
            "squared": self.rhs_squared,
            "tighter": self.rhs_tighter,
        }[variant]
        return bool(np.all(self.min_residual_sq <= rhs))


def _refused(reason: str) -> RateCertificate:
    empty = np.asarray([], dtype=float)
    return RateCertificate(
        valid=False,
        reason=reason,
        theta=math.nan,
        lambda_floor=math.nan,
        dist1=math.nan,
        ks=np.asarray([], dtype=int),
        min_residual_sq=empty,
        delta=empty,
        rhs_printed=empty,
        rhs_squared=empty,
        tighter="squared",
    )


def certificate_ceiling(result: RunResult) -> float:
    """Scheme-level relaxation ceiling used by the certificate."""
    s = result.schedule
    if s.condition_set == "II":
        return lambda_ceiling_ii(s.alpha_cap, float(s.sigma), float(s.delta))
    return s.lambda_ceiling


def rate_certificate(result: RunResult) -> RateCertificate:
    """Residual rate certificate for a finished run, or the reason there is none."""
    s = result.schedule
    report = validate_schedule(s)
    if not report.feasible:
        return _refused("schedule infeasible under its declared regime")
    theta = certificate_ceiling(result)
    if not theta < 1.0:
        return _refused("relaxation ceiling is not below 1")
    if not s.lambda_floor > 0.0:
        return _refused("needs a positive relaxation floor")
    if result.dists is None:
        return _refused("needs a known solution")
    n = result.iterations
    if n < 2:
        return _refused("needs at least two iterations")

    d = result.dists
    lam = result.lambdas
    err = result.err_norms
    al = result.alphas
    st = result.step_norms
    kk = np.arange(1, n)

    psi = d * d
    inc = np.maximum(psi[1:n] - psi[: n - 1], 0.0)
    drift = s.alpha_cap * np.cumsum(inc)
    err_term = np.cumsum(2.0 * d[2 : n + 1] * lam[1:n] * err[1:n])
    step_term = np.cumsum(al[1:n] * (1.0 + al[1:n]) * st[0 : n - 1] ** 2)
    delta = drift + err_term + step_term

    denom = kk * s.lambda_floor * (1.0 - theta)
    dist1 = float(d[1])
    rhs_printed = (dist1 + delta) / denom
    rhs_squared = (dist1 * dist1 + delta) / denom
    min_res_sq = np.minimum.accumulate(result.residuals[1:n] ** 2)

    return RateCertificate(
        valid=True,
        reason="",
        theta=theta,
        lambda_floor=s.lambda_floor,
        dist1=dist1,
        ks=kk,
        min_residual_sq=min_res_sq,
        delta=delta,
        rhs_printed=rhs_printed,
        rhs_squared=rhs_squared,
        tighter="squared" if dist1 < 1.0 else "printed",
    )


def quasi_fejer_violations(result: RunResult, tol: float = 1e-10) -> np.ndarray:
    """Steps k where ||z^{k+1} - z*|| exceeds ||z^k - z*|| + lambda_k ||e^k|| + tol.

    Meaningful for zero-inertia runs only; extrapolated runs are refused
    because the inequality is not theirs to satisfy.
    """
    if result.dists is None:
        raise ValueError("needs a known solution to measure distances")
    if result.alphas.size and float(np.max(result.alphas)) != 0.0:
        raise ValueError("distance quasi-monotonicity applies to zero-inertia runs")
    d = result.dists
    allowed = d[:-1] + result.lambdas * result.err_norms + tol
    return np.flatnonzero(d[1:] > allowed)


@dataclass(frozen=True)
class ConsistencyItem:
    name: str
    value: float
    verdict: str
    detail: str


@dataclass(frozen=True)
class ConsistencyReport:
    items: tuple[ConsistencyItem, ...]

    @property
    def consistent(self) -> bool:
        return all(i.verdict == "consistent" for i in self.items)

    @property
    def verdict(self) -> str:
        return "consistent" if self.consistent else "not-consistent"

    def item(self, name: str) -> ConsistencyItem:
        for i in self.items:
            if i.name == name:
                return i
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "items": [
                {"name": i.name, "value": i.value, "verdict": i.verdict, "detail": i.detail}
                for i in self.items
            ],
        }


def _tail_verdict(partial: np.ndarray) -> tuple[str, str]:
    """Crude convergence heuristic on a partial-sum curve.

    Compares the mass added over the last half against the preceding
    quarter; a divergent-log curve adds about the same over both, a
    convergent one markedly less.  Conservative: slowly convergent series
    can be flagged.  Used only when no declared law is available.
    """
    n = partial.size
    total = float(partial[-1]) if n else 0.0
    if n < 8 or total <= 1e-12:
        return "consistent", "negligible total"
    i1 = float(partial[-1] - partial[n // 2 - 1])
    i2 = float(partial[n // 2 - 1] - partial[n // 4 - 1])
    if i1 <= max(1e-12, 1e-9 * total):
        return "consistent", "tail increment negligible"
    if i1 >= 0.8 * i2:
        return "not-consistent", f"tail not flattening (last-half gain {i1:.3g} vs prior {i2:.3g})"
    return "consistent", "tail flattening"


def consistency_report(result: RunResult) -> ConsistencyReport:
    """Verdicts for the hypotheses deferred to runtime.

    The weighted-error item trusts the declared error law when the run
    carried one; otherwise, and always for the inertia term, a tail
    heuristic on the partial sums decides.  Verdicts describe hypothesis
    consistency, not convergence of the run itself.
    """
    items = []

    bounded_ok = result.stop_reason != "diverged" and math.isfinite(result.max_state_norm)
    items.append(
        ConsistencyItem(
            name="bounded-iterates",
            value=result.max_state_norm,
            verdict="consistent" if bounded_ok else "not-consistent",
            detail="largest state norm seen",
        )
    )

    s1 = np.cumsum(result.alphas * result.step_norms**2)
    if result.alphas.size == 0 or float(np.max(result.alphas)) == 0.0:
        v1, d1 = "consistent", "no inertia"
    else:
        v1, d1 = _tail_verdict(s1)
    items.append(
        ConsistencyItem(
            name="inertia-weighted-step-sum",
            value=float(s1[-1]) if s1.size else 0.0,
            verdict=v1,
            detail=d1,
        )
    )

    s2 = np.cumsum(result.lambdas * result.err_norms)
    if result.errors is not None:
        summ = result.errors.summability
        v2 = "consistent" if summ == "summable" else "not-consistent"
        d2 = f"declared error law is {summ}"
    elif s2.size == 0 or float(s2[-1]) == 0.0:
        v2, d2 = "consistent", "no errors recorded"
    else:
        v2, d2 = _tail_verdict(s2)
    items.append(
        ConsistencyItem(
            name="weighted-error-sum",
            value=float(s2[-1]) if s2.size else 0.0,
            verdict=v2,
            detail=d2,
        )
    )
    return ConsistencyReport(items=tuple(items))


def effective_error_bound(alpha: float, lam: float, step: float, err: float) -> float:
    """Error norm budget when inertia is recast as a perturbation.

    Viewing the inertial step as a plain relaxed step at z^k with a lumped
    perturbation, the lumped norm is at most
    alpha * step + 2 * lam * alpha * step + lam * err, where step is
    ||z^k - z^{k-1}|| and err is ||e^k||.
    """
    return alpha * step + 2.0 * lam * alpha * step + lam * err


def effective_error_bounds(result: RunResult) -> np.ndarray:
    """Per-iteration lumped-perturbation budgets for a finished run."""
    n = result.iterations
    steps_in = np.concatenate(([0.0], result.step_norms[: max(n - 1, 0)]))
    return (
        result.alphas * steps_in
        + 2.0 * result.lambdas * result.alphas * steps_in
        + result.lambdas * result.err_norms
    )
