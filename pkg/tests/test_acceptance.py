"""Acceptance gate: one test per numbered criterion.

Each test delegates to the package's built-in check (also reachable via
``kmsolve bench``), prints its one-line verdict, and asserts the result.
Run with ``pytest -v tests/test_acceptance.py`` to get one pass/fail
line per criterion.
"""

from kmsolve import acceptance


def _check(result):
    print(result.line())
    assert result.passed, result.line()


def test_criterion_1_reduction_bit_identity():
    _check(acceptance.criterion_1())


def test_criterion_2_residual_rate_certificate():
    _check(acceptance.criterion_2())


def test_criterion_3_distance_quasi_monotonicity():
    _check(acceptance.criterion_3())


def test_criterion_4_feasibility_validator_grid():
    _check(acceptance.criterion_4())


def test_criterion_5_prox_grid_oracle():
    _check(acceptance.criterion_5())


def test_criterion_6_lasso_end_to_end():
    _check(acceptance.criterion_6())


def test_criterion_7_route_equivalence():
    _check(acceptance.criterion_7())


def test_criterion_8_honest_failure_modes():
    _check(acceptance.criterion_8())


def test_criterion_9_inertia_comparison_cli():
    _check(acceptance.criterion_9())
