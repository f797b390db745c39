from fractions import Fraction

import numpy as np
import pytest
import sympy

from regdyn.errors import ConvergenceError, DomainError
from regdyn.experiments import monotonicity_certificate
from regdyn.games import (
    GAME_IDS,
    make_appendixE_minmax,
    make_bilinear_saddle,
    make_cournot,
    make_game,
    make_matching_pennies,
    make_quadratic_saddle,
    monotonicity_gap,
    solve_cournot_equilibrium,
    symmetrized_jacobian_eigenvalues,
)


def test_bilinear_examples():
    g = make_bilinear_saddle()
    assert g.gradient_field([1.0, 2.0]).tolist() == [-2.0, 1.0]
    assert g.gradient_field([0.0, 0.0]).tolist() == [0.0, 0.0]
    assert monotonicity_gap(g, [1.0, 0.0], [0.0, 1.0]) == 0
    assert g.monotonicity.kind == "null"


def test_quadratic_examples():
    g = make_quadratic_saddle()
    assert g.gradient_field([1.0, 2.0]).tolist() == [-1.0, -2.0]
    assert monotonicity_gap(g, [1.0, 0.0], [0.0, 0.0]) == -1
    assert monotonicity_gap(g, [0.0, 0.0], [1.0, 1.0]) == -2
    assert g.beta == 1


def test_appendixE_examples():
    g = make_appendixE_minmax()
    assert g.equilibrium == (Fraction(20, 33), Fraction(14, 33))
    assert np.linalg.norm(g.gradient_field(g.x_star)) <= 1e-12
    # exact stationarity in rational arithmetic
    for i in range(2):
        assert sum(g.jacobian[i][j] * g.equilibrium[j] for j in range(2)) + g.offset[i] == 0
    assert g.beta == 2
    assert symmetrized_jacobian_eigenvalues(g).tolist() == [-4.0, -2.0]
    x = np.array([0.3, 0.8])
    assert np.allclose(g.gradient_field(x), [-2 * (x[0] - 0.5) + 0.5 * x[1], -0.5 * x[0] - 4 * (x[1] - 0.5)])


def test_matching_pennies_examples():
    g = make_matching_pennies()
    assert g.x_star.tolist() == [0.5, 0.5, 0.5, 0.5]
    assert g.gradient_field(g.x_star).tolist() == [0.0, 0.0, 0.0, 0.0]
    rng = np.random.default_rng(0)
    x, x2 = g.sample_feasible(rng, 2), g.sample_feasible(rng, 2)
    assert np.all(np.abs(monotonicity_gap(g, x, x2)) <= 1e-12)


def test_cournot_examples():
    g = make_cournot(N=3, b=1)
    H = sympy.Matrix(g.symmetrized_jacobian())
    assert H.eigenvals() == {-1: 2, -4: 1}
    g = make_cournot(N=2, a=3, b=1, costs=[1, 1], budgets=[10, 10])
    assert g.equilibrium == (Fraction(2, 3), Fraction(2, 3))
    assert g.gradient_field([0.0, 0.0]).tolist() == [2.0, 2.0]
    g = make_cournot(N=5, a=6, b=1)
    assert g.equilibrium == (1,) * 5


@pytest.mark.parametrize("N", [2, 3, 5])
@pytest.mark.parametrize("b", [1, Fraction(1, 2), 3])
def test_cournot_spectrum_exact(N, b):
    g = make_cournot(N=N, a=10, b=b)
    H = sympy.Matrix(g.symmetrized_jacobian())
    b = sympy.Rational(b.numerator, b.denominator) if isinstance(b, Fraction) else sympy.Integer(b)
    assert H.eigenvals() == {-b: N - 1, -(N + 1) * b: 1}
    assert g.lipschitz == pytest.approx(float((N + 1) * b), rel=1e-12)


def test_cournot_equilibrium_against_sympy_solve():
    g = make_cournot(N=3, a=7, b=2, costs=[1, 2, 0.5])
    J = sympy.Matrix(g.jacobian)
    sol = J.LUsolve(-sympy.Matrix(g.offset))
    assert [Fraction(str(v)) for v in sol] == list(g.equilibrium)


def test_cournot_binding_budgets_solve_variational_inequality():
    g = make_cournot(N=2, a=100, b=1, costs=[0, 0], budgets=[1, 1])
    assert np.allclose(g.x_star, [1.0, 1.0], atol=1e-9)
    rng = np.random.default_rng(1)
    x = g.sample_feasible(rng, 1000)
    assert np.all((x - g.x_star) @ g.gradient_field(g.x_star) <= 1e-9)


def test_cournot_partially_binding_budget():
    g = make_cournot(N=3, a=10, b=1, budgets=[0.5, 20, 20])
    rng = np.random.default_rng(2)
    x = g.sample_feasible(rng, 1000)
    assert np.all((x - g.x_star) @ g.gradient_field(g.x_star) <= 1e-9)


def test_cournot_rejections():
    with pytest.raises(DomainError):
        make_cournot(N=1)
    with pytest.raises(DomainError):
        make_cournot(N=2, b=0)
    with pytest.raises(DomainError):
        make_cournot(N=2, b=-1)
    with pytest.raises(DomainError):
        make_cournot(N=2, a=1, costs=[1, 0])


def test_projected_solver_reports_non_convergence():
    g = make_cournot(N=3, a=10, b=1, budgets=[0.5, 20, 20])
    with pytest.raises(ConvergenceError):
        solve_cournot_equilibrium(g, tol=1e-14, max_iter=3)


def test_unknown_game():
    with pytest.raises(DomainError, match="valid games"):
        make_game("prisoners")


@pytest.mark.parametrize("gid", GAME_IDS)
def test_gradient_field_matches_payoff_finite_difference(gid):
    g = make_game(gid)
    rng = np.random.default_rng(3)
    x = g.sample_interior(rng, 100)
    v = g.gradient_field(x)
    for i, sl in enumerate(g.slices):
        for c in range(sl.start, sl.stop):
            e = np.zeros(g.dim)
            e[c] = 1e-5
            fd = (g.payoff(i, x + e) - g.payoff(i, x - e)) / 2e-5
            assert np.all(np.abs(fd - v[:, c]) <= 1e-6 * np.maximum(np.abs(v[:, c]), 1.0))


@pytest.mark.parametrize("gid", GAME_IDS)
def test_declared_monotonicity_is_certified(gid):
    g = make_game(gid)
    viol, ratio = monotonicity_certificate(g, n_pairs=1000, seed=4)
    if g.monotonicity.kind == "null":
        assert viol <= 1e-12
    else:
        assert viol <= 1e-9
        assert ratio == pytest.approx(1.0, rel=0.01)


@pytest.mark.parametrize("gid", ["bilinear", "quadratic", "appendixE", "matching_pennies", "cournot"])
def test_interior_equilibria_are_stationary(gid):
    g = make_game(gid)
    assert g.equilibrium_is_interior
    assert np.linalg.norm(g.gradient_field(g.x_star)) <= 1e-12


def test_payoffs_are_zero_sum_where_declared():
    rng = np.random.default_rng(5)
    for g in (make_bilinear_saddle(), make_quadratic_saddle(), make_appendixE_minmax(), make_matching_pennies()):
        x = g.sample_feasible(rng, 50)
        assert np.allclose(g.payoff(0, x), -g.payoff(1, x), atol=1e-12)


def test_appendixE_payoff_is_the_stated_function():
    g = make_appendixE_minmax()
    rng = np.random.default_rng(6)
    x = g.sample_feasible(rng, 50)
    f = -((x[:, 0] - 0.5) ** 2) + 0.5 * x[:, 0] * x[:, 1] + 2 * (x[:, 1] - 0.5) ** 2
    assert np.allclose(g.payoff(0, x), f, atol=1e-12)


def test_monotonicity_gap_rejects_infeasible():
    with pytest.raises(DomainError):
        monotonicity_gap(make_appendixE_minmax(), [1.5, 0.5], [0.5, 0.5])


def test_gradient_field_is_row_independent():
    g = make_cournot(N=5, a=6, b=1)
    rng = np.random.default_rng(7)
    x = g.sample_feasible(rng, 9)
    batch = g.gradient_field(x)
    for i in range(9):
        assert np.array_equal(batch[i], g.gradient_field(x[i]))
