"""Resolvent and forward-backward front ends, plus the planted lasso."""

import dataclasses

import numpy as np
import pytest

from kmsolve.applications import (
    box_intersection_pieces,
    lasso_fbs_pieces,
    lasso_kkt_gap,
    lasso_objective,
    plant_lasso,
    solve_fbs,
    solve_ppa,
)
from kmsolve.engine import Problem, iterate
from kmsolve.operators import make_affine, make_fb_composition, make_soft_threshold, quadratic_gradient
from kmsolve.schedules import ErrorModel, constant_schedule


def test_ppa_requires_a_firmly_nonexpansive_resolvent():
    with pytest.raises(ValueError):
        solve_ppa(make_affine(np.eye(2), np.zeros(2)), np.ones(2), constant_schedule(0.0, 0.5))


def test_ppa_converges_to_the_prox_fixed_point():
    # prox of gamma*|.| has the origin as its only fixed point
    rng = np.random.default_rng(40)
    run = solve_ppa(
        make_soft_threshold(0.4, 6),
        rng.uniform(-2, 2, 6),
        constant_schedule(0.1, 1.2),
        z_star=np.zeros(6),
    )
    assert run.converged
    assert run.problem.kind == "inclusion"
    assert run.route == "unwrap"  # the default for this front end
    assert np.linalg.norm(run.z) <= 1e-8


def test_fbs_zero_error_path_matches_manual_composition():
    inst = plant_lasso(n_samples=60, n_features=40, support_size=6, reg=0.4, seed=50)
    rho = 0.8 * quadratic_gradient(inst.matrix, inst.rhs).beta
    resolvent, forward = lasso_fbs_pieces(inst, rho)
    z0 = np.zeros(40)
    sched = constant_schedule(0.1, 0.9)
    opts = dict(tol=-1.0, max_iter=50, record_states=True)
    via_front_end = solve_fbs(resolvent, forward, rho, z0, sched, **opts)
    manual = iterate(
        Problem(operator=make_fb_composition(resolvent, forward, rho), z0=z0),
        sched,
        **opts,
    )
    for a, b in zip(via_front_end.states, manual.states):
        assert np.array_equal(a, b)
    assert via_front_end.problem.kind == "fbs-inclusion"


def test_fbs_folded_error_respects_the_rho_bound():
    # ||folded error|| <= rho*||e1|| + ||e2|| because the resolvent is nonexpansive
    inst = plant_lasso(n_samples=60, n_features=40, support_size=6, reg=0.4, seed=51)
    rho = quadratic_gradient(inst.matrix, inst.rhs).beta
    resolvent, forward = lasso_fbs_pieces(inst, rho)
    e1 = ErrorModel.power_decay(0.3, 1.5, seed=52)
    e2 = ErrorModel.geometric(0.2, 0.9, seed=53)
    run = solve_fbs(
        resolvent,
        forward,
        rho,
        np.zeros(40),
        constant_schedule(0.1, 0.9),
        forward_errors=e1,
        resolvent_errors=e2,
        tol=-1.0,
        max_iter=40,
    )
    for k in range(40):
        bound = rho * e1.norm_at(k) + e2.norm_at(k)
        assert run.err_norms[k] <= bound + 1e-12


def test_fbs_resolvent_call_counts():
    # exact steps reuse the unperturbed image; perturbed steps pay a second call
    inst = plant_lasso(n_samples=30, n_features=20, support_size=4, reg=0.4, seed=54)
    rho = quadratic_gradient(inst.matrix, inst.rhs).beta
    resolvent, forward = lasso_fbs_pieces(inst, rho)
    calls = {"n": 0}
    base_apply = resolvent.apply

    def counting(x):
        calls["n"] += 1
        return base_apply(x)

    counted = dataclasses.replace(resolvent, apply=counting)
    solve_fbs(counted, forward, rho, np.zeros(20), constant_schedule(0.0, 0.9), tol=-1.0, max_iter=25)
    assert calls["n"] == 25
    calls["n"] = 0
    solve_fbs(
        counted,
        forward,
        rho,
        np.zeros(20),
        constant_schedule(0.0, 0.9),
        forward_errors=ErrorModel.power_decay(0.1, 2.0, seed=55),
        tol=-1.0,
        max_iter=25,
    )
    assert calls["n"] == 50


def test_plant_lasso_produces_a_certified_minimizer():
    inst = plant_lasso(n_samples=120, n_features=80, support_size=10, reg=0.5, seed=56)
    assert lasso_kkt_gap(inst) <= 1e-10
    assert inst.support.shape == (10,)
    off = np.setdiff1d(np.arange(80), inst.support)
    assert np.all(inst.x_star[off] == 0.0)
    assert np.all(np.abs(inst.x_star[inst.support]) >= 0.5)
    assert np.all(np.abs(inst.dual) <= 1.0)
    assert np.array_equal(inst.dual[inst.support], np.sign(inst.x_star[inst.support]))


def test_plant_lasso_validation():
    with pytest.raises(ValueError):
        plant_lasso(n_samples=10, n_features=20)
    with pytest.raises(ValueError):
        plant_lasso(support_size=0)
    with pytest.raises(ValueError):
        plant_lasso(reg=0.0)


def test_kkt_gap_detects_a_corrupted_solution():
    inst = plant_lasso(n_samples=60, n_features=40, support_size=6, reg=0.4, seed=57)
    off = dataclasses.replace(inst, x_star=inst.x_star + 0.05)
    assert lasso_kkt_gap(off) > 1e-3


def test_lasso_objective_is_minimal_at_the_planted_point():
    inst = plant_lasso(n_samples=60, n_features=40, support_size=6, reg=0.4, seed=58)
    base = lasso_objective(inst, inst.x_star)
    rng = np.random.default_rng(59)
    for _ in range(30):
        probe = inst.x_star + rng.standard_normal(40) * 10.0 ** rng.uniform(-4, 0)
        assert lasso_objective(inst, probe) >= base


def test_lasso_fbs_pieces_wire_the_right_operators():
    inst = plant_lasso(n_samples=30, n_features=20, support_size=4, reg=0.5, seed=60)
    rho = 0.7
    resolvent, forward = lasso_fbs_pieces(inst, rho)
    x = np.linspace(-1, 1, 20)
    want = np.sign(x) * np.maximum(np.abs(x) - rho * inst.reg, 0.0)
    assert np.array_equal(resolvent(x), want)
    assert np.allclose(forward(x), inst.matrix.T @ (inst.matrix @ x - inst.rhs), atol=1e-14)


def test_box_intersection_composition_is_the_projection_product():
    lo1, hi1 = np.full(4, -1.0), np.full(4, 0.5)
    lo2, hi2 = np.full(4, -0.2), np.full(4, 1.3)
    proj, displacement = box_intersection_pieces(lo1, hi1, lo2, hi2)
    comp = make_fb_composition(proj, displacement, 1.0)
    assert comp.theta == 2.0 / 3.0
    rng = np.random.default_rng(61)
    for _ in range(20):
        x = rng.uniform(-3, 3, 4)
        p2 = np.clip(x, lo2, hi2)
        # x - rho*(x - p2) reassociates, so allow one ulp of drift
        assert np.allclose(comp(x), np.clip(p2, lo1, hi1), rtol=0, atol=1e-14)
    with pytest.raises(ValueError):
        box_intersection_pieces(lo1, hi1, np.zeros(3), np.ones(3))


def test_box_intersection_solve_lands_in_both_boxes():
    lo1, hi1 = np.full(5, -1.0), np.full(5, 0.5)
    lo2, hi2 = np.full(5, -0.2), np.full(5, 1.3)
    proj, displacement = box_intersection_pieces(lo1, hi1, lo2, hi2)
    rng = np.random.default_rng(62)
    run = solve_fbs(proj, displacement, 1.0, rng.uniform(2, 3, 5), constant_schedule(0.1, 1.0))
    assert run.converged
    assert np.all(run.z >= lo1 - 1e-9) and np.all(run.z <= hi1 + 1e-9)
    assert np.all(run.z >= lo2 - 1e-9) and np.all(run.z <= hi2 + 1e-9)
