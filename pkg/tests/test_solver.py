import numpy as np
import pytest

from lagmc import Grid, InvalidFamilyError, InvalidInputError, ScalarField, StabilityError
from lagmc.phase import Constant, Rotator, ShrinkerExpander, Translator
from lagmc.potentials import Quadratic, Quartic
from lagmc.solver import (DirichletProblem, SolverConfig, flow_evolve, harmonic_extension,
                          manufactured_problem, newton_solve, self_similar_residual)


def _sup_error(u, pot):
    return float(np.abs(u.values - pot.value(u.grid.coords)).max())


def test_quadratic_recovered_exactly():
    g = Grid.cube(2, 1.0, 17)
    pot = Quadratic(1.3)
    u, rep = newton_solve(manufactured_problem(pot, g))
    assert rep.converged and rep.residual <= 1e-8
    assert _sup_error(u, pot) < 1e-10
    assert rep.hessian_origin == pytest.approx(1.3)
    assert not rep.subcritical


def test_constant_phase_quadratic():
    g = Grid.cube(2, 1.0, 13)
    prob = DirichletProblem(g, Constant(2 * np.arctan(0.5)), Quadratic(0.5).value)
    u, rep = newton_solve(prob)
    assert rep.converged
    assert _sup_error(u, Quadratic(0.5)) < 1e-9


@pytest.mark.parametrize("wrap", ["pure-x", "z-coupled", "p-coupled"])
def test_manufactured_second_order(wrap):
    pot = Quartic(0.05)
    errs = []
    for m in (17, 33):
        g = Grid.cube(2, 1.0, m)
        u, rep = newton_solve(manufactured_problem(pot, g, wrap))
        assert rep.converged and rep.iterations <= 15
        errs.append(_sup_error(u, pot))
    assert 3.5 <= errs[0] / errs[1] <= 4.5


def test_newton_converges_quadratically():
    g = Grid.cube(2, 1.0, 17)
    _, rep = newton_solve(manufactured_problem(Quartic(0.05), g, "z-coupled"))
    h = rep.history
    assert rep.converged and len(h) >= 3
    assert h[-1] / h[-2] <= 0.1
    # damping only in the early iterations; the tail takes full steps
    assert rep.steps[-2:] == [1.0, 1.0]


def test_iteration_limit_reports_not_converged():
    g = Grid.cube(2, 1.0, 17)
    _, rep = newton_solve(manufactured_problem(Quartic(0.05), g), SolverConfig(max_iter=1, tol=1e-14))
    assert not rep.converged
    assert rep.iterations == 1
    assert rep.message == "iteration limit reached"


def test_subcritical_trap_flagged():
    g = Grid.cube(3, 1.0, 9)
    _, rep = newton_solve(DirichletProblem(g, Constant(0.3), Quadratic(0.1).value))
    assert rep.converged
    assert rep.subcritical and rep.margin_min < 0


def test_initial_guess_used():
    g = Grid.cube(2, 1.0, 9)
    pot = Quadratic(1.0)
    prob = DirichletProblem(g, Constant(np.pi / 2), pot.value, initial=pot.value(g.coords))
    _, rep = newton_solve(prob)
    assert rep.iterations == 0 and rep.converged


def test_problem_validation():
    g = Grid.cube(2, 1.0, 9)
    with pytest.raises(InvalidInputError):
        DirichletProblem(g, "not a model", np.zeros(g.shape))
    with pytest.raises(InvalidInputError):
        DirichletProblem(g, Constant(0.0, 3), np.zeros(g.shape))
    with pytest.raises(InvalidInputError):
        DirichletProblem(g, Constant(0.0), np.zeros((3, 3)))
    bad = np.zeros(g.shape)
    bad[0, 0] = np.nan
    with pytest.raises(InvalidInputError):
        DirichletProblem(g, Constant(0.0), bad)
    with pytest.raises(InvalidInputError):
        SolverConfig(backtrack=1.5)
    with pytest.raises(InvalidInputError):
        SolverConfig(tol=0.0)


def test_harmonic_extension_linear():
    g = Grid.cube(3, 1.0, 7)
    lin = g.evaluate(lambda x: x[..., 0] - 2 * x[..., 1] + 0.5 * x[..., 2])
    b = lin.copy()
    b[g.interior(1)] = 5.0
    assert np.abs(harmonic_extension(g, b) - lin).max() < 1e-10


def test_manufactured_phase_examples():
    g = Grid.cube(2, 1.0, 9)
    prob = manufactured_problem(Quadratic(1.0), g)
    d = prob.model.evaluate(g.coords.reshape(-1, 2), np.zeros(81), np.zeros((81, 2)))
    assert np.allclose(d.value, np.pi / 2)
    assert np.allclose(d.x, 0.0)

    g3 = Grid.cube(3, 0.5, 9)
    prob = manufactured_problem(Quartic(0.05), g3)
    x = g3.coords.reshape(-1, 3)
    d = prob.model.evaluate(x, np.zeros(len(x)), np.zeros_like(x))
    assert d.value.min() > np.pi / 2

    prob = manufactured_problem(Quartic(0.05), g, "z-coupled")
    x = g.coords.reshape(-1, 2)
    d = prob.model.evaluate(x, np.ones(len(x)), np.zeros_like(x))
    assert np.all(d.z == 1.0)


def test_manufactured_validation():
    g = Grid.cube(2, 1.0, 9)
    with pytest.raises(InvalidInputError):
        manufactured_problem(Quadratic(1.0), g, "p-coupled", eta=0.2)
    with pytest.raises(InvalidInputError):
        manufactured_problem(Quadratic(1.0), g, "sideways")


def test_flow_quadratic_drift():
    g = Grid.cube(2, 1.0, 21)
    pot = Quadratic(1.0)
    u0 = ScalarField(g, pot.value(g.coords))
    dt = g.h ** 2 / 4
    traj = flow_evolve(u0, dt, 50, lambda grid, t: pot.value(grid.coords) + np.pi / 2 * t)
    assert len(traj) == 51
    for k, uk in enumerate(traj):
        assert np.abs(uk.values - (u0.values + np.pi / 2 * k * dt)).max() < 1e-12


def test_flow_zero_fixed_point():
    g = Grid.cube(2, 1.0, 11)
    traj = flow_evolve(ScalarField(g, np.zeros(g.shape)), 0.001, 20)
    assert all(np.array_equal(t.values, np.zeros(g.shape)) for t in traj)


def test_flow_first_order_in_time():
    g = Grid.cube(1, 1.0, 11)
    u0 = ScalarField(g, Quartic(0.5).value(g.coords))
    dt, T = g.h ** 2 / 2, 0.04
    finals = []
    for k in (1, 2, 4):
        steps = int(round(T / (dt / k)))
        finals.append(flow_evolve(u0, dt / k, steps)[-1].values)
    e1 = np.abs(finals[0] - finals[2]).max()
    e2 = np.abs(finals[1] - finals[2]).max()
    assert 2.5 < e1 / e2 < 3.5


def test_flow_stability_bound():
    g = Grid.cube(2, 1.0, 11)
    u0 = ScalarField(g, np.zeros(g.shape))
    with pytest.raises(StabilityError):
        flow_evolve(u0, g.h ** 2 / 4 * 1.01, 1)
    with pytest.raises(StabilityError):
        flow_evolve(u0, 0.0, 1)


def test_self_similar_residuals():
    a = 0.8
    g1 = Grid.cube(1, 1.0, 11)
    u = ScalarField(g1, Quadratic(a).value(g1.coords))
    res = self_similar_residual(u, ShrinkerExpander(np.arctan(a), 0.7))
    assert np.nanmax(res) < 1e-12

    g = Grid.cube(2, 1.0, 11)
    u = ScalarField(g, Quadratic(a).value(g.coords))
    g3 = np.array([0.3, -0.2])
    res = self_similar_residual(u, Translator(2 * np.arctan(a), -a * g3, g3))
    assert np.nanmax(res) < 1e-12

    res = self_similar_residual(u, Rotator(0.0, 1.0))
    assert np.nanmax(res) > 0.1


def test_self_similar_rejects_non_soliton():
    g = Grid.cube(2, 1.0, 7)
    with pytest.raises(InvalidFamilyError):
        self_similar_residual(ScalarField(g, np.zeros(g.shape)), Constant(0.0))
