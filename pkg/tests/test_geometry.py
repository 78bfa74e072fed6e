import numpy as np
import pytest

from lagmc import Grid, InvalidInputError, ScalarField
from lagmc.geometry import (C0, b_lower_bound, differentiate, graph_diagnostics, induced_metric,
                            jacobi_diagnostic, laplace_beltrami, mean_curvature, slope_potential,
                            sigma_divergence_residual, wide_laplacian)
from lagmc.phase import Constant, Custom, Translator
from lagmc.potentials import MongeAmpereLift, Quadratic


def _field(grid, f):
    return ScalarField(grid, grid.evaluate(f))


def _interior_max(a):
    return np.nanmax(np.abs(a))


def test_quadratic_hessian_exact():
    g = Grid.cube(2, 1.0, 11)
    u = _field(g, lambda x: 0.5 * 1.7 * (x ** 2).sum(axis=-1))
    d = differentiate(u)
    inner = g.interior(1)
    assert np.abs(d.hess[inner] - 1.7 * np.eye(2)).max() < 1e-12
    assert _interior_max(d.third) < 1e-9


def test_cubic_second_difference():
    g = Grid([0.0], [2.0], [21])
    u = _field(g, lambda x: x[..., 0] ** 3)
    d = differentiate(u)
    i = g.nearest_node([1.0])
    assert d.hess[i][0, 0] == pytest.approx(6.0, abs=1e-10)
    assert d.third[(10,)][0, 0, 0] == pytest.approx(6.0, abs=1e-9)


def test_hessian_second_order():
    errs = []
    for m in (21, 41):
        g = Grid.cube(1, 1.0, m)
        d = differentiate(_field(g, lambda x: np.sin(x[..., 0])), third=False)
        exact = -np.sin(g.coords[..., 0])
        errs.append(np.nanmax(np.abs(d.hess[..., 0, 0] - exact)))
    assert 3.5 < errs[0] / errs[1] < 4.5


def test_too_small_grid():
    g = Grid.cube(2, 1.0, 4)
    with pytest.raises(InvalidInputError):
        differentiate(ScalarField(g, np.zeros(g.shape)))


def test_metric_examples():
    m = induced_metric(np.zeros((2, 2)))
    assert np.allclose(m.g, np.eye(2)) and m.V == 1.0
    m = induced_metric(np.eye(2))
    assert np.allclose(m.g, 2 * np.eye(2)) and m.V == pytest.approx(2.0)
    m = induced_metric(np.diag([3.0, 1.0, -0.2]))
    assert m.V == pytest.approx(np.sqrt(10 * 2 * 1.04), abs=1e-12)
    assert m.V == pytest.approx(4.5607017, abs=1e-7)
    rng = np.random.default_rng(1)
    H = rng.normal(size=(200, 3, 3))
    H = H + np.swapaxes(H, 1, 2)
    m = induced_metric(H)
    assert np.all(m.V >= 1.0)
    assert np.all(np.linalg.eigvalsh(m.g) > 0)
    assert np.allclose(m.ginv @ m.g, np.eye(3), atol=1e-10)


def test_laplace_beltrami_flat():
    g = Grid.cube(2, 1.0, 17)
    flat = induced_metric(np.zeros(g.shape + (2, 2)))
    v = g.evaluate(lambda x: 0.5 * (x ** 2).sum(axis=-1))
    lap = laplace_beltrami(v, flat, g.h)
    assert np.nanmax(np.abs(lap - 2.0)) < 1e-12
    w = g.evaluate(lambda x: x[..., 0] * x[..., 1])
    assert np.nanmax(np.abs(laplace_beltrami(w, flat, g.h))) < 1e-12
    rng = np.random.default_rng(0)
    r = rng.normal(size=g.shape)
    assert np.allclose(laplace_beltrami(r, flat, g.h), wide_laplacian(r, g.h, 2), equal_nan=True)


@pytest.mark.parametrize("n,a", [(2, 0.5), (3, 2.0)])
def test_laplace_beltrami_constant_metric(n, a):
    g = Grid.cube(n, 1.0, 9)
    u = _field(g, lambda x: 0.5 * a * (x ** 2).sum(axis=-1))
    metric = induced_metric(differentiate(u, third=False).hess)
    lap = laplace_beltrami(g.evaluate(lambda x: 0.5 * (x ** 2).sum(axis=-1)), metric, g.h)
    assert np.nanmax(np.abs(lap - n / (1 + a * a))) < 1e-11


def test_mean_curvature_constant_phase():
    g = Grid.cube(2, 1.0, 11)
    u = _field(g, lambda x: np.cos(x[..., 0]) + x[..., 0] * x[..., 1] ** 2)
    _, mag = mean_curvature(u, Constant(1.0))
    assert np.nanmax(mag) == 0.0


def test_mean_curvature_translator():
    g = Grid.cube(2, 1.0, 11)
    u = _field(g, lambda x: 0.5 * (x ** 2).sum(axis=-1))
    vec, mag = mean_curvature(u, Translator(0.0, (1, 0), (0, 1)))
    assert np.nanmax(np.abs(mag - 1.0)) < 1e-12
    assert vec.shape == g.shape + (4,)


def test_mean_curvature_one_dimensional():
    a, eps = 2.0, 0.3
    g = Grid.cube(1, 1.0, 11)
    u = _field(g, lambda x: 0.5 * a * x[..., 0] ** 2)
    model = Custom(1, lambda x, z, p: {"value": np.arctan(a) + eps * x[:, 0], "x": eps, "z": 0, "p": 0})
    _, mag = mean_curvature(u, model)
    assert np.nanmax(np.abs(mag - eps / np.sqrt(1 + a * a))) < 1e-12


def test_slope_potential_examples():
    assert slope_potential(np.array([0.0, -1.0]), 1) == 0.0
    assert slope_potential(np.array([1.0, 0.5]), 1) == pytest.approx(0.346574, abs=1e-6)
    assert slope_potential(np.array([3.0, 1.0]), 2) == pytest.approx(0.7489331, abs=1e-7)
    with pytest.raises(InvalidInputError):
        slope_potential(np.array([1.0, 2.0]), 3)


def test_b_floor_on_supercritical_nodes():
    g = Grid([1.0, -0.5, -0.5], [2.0, 0.5, 0.5], [9, 9, 9])
    pot = MongeAmpereLift(0.1)
    u = ScalarField(g, pot.value(g.coords))
    diag = graph_diagnostics(u, Constant(pot.phase(3)))
    ok = np.isfinite(diag.phase) & (diag.phase >= np.pi / 2 - 1e-9)
    assert ok.any()
    assert np.all(diag.b[ok] >= b_lower_bound(3) - 1e-9)
    assert diag.c0 == C0 == pytest.approx(np.log(4 / 3) / 8)
    assert np.nanmax(diag.mean_curvature) == 0.0


def test_h_frame_quadratic_vanishes():
    g = Grid.cube(2, 1.0, 9)
    u = _field(g, lambda x: x[..., 0] ** 2 + 0.3 * x[..., 1] ** 2)
    diag = graph_diagnostics(u, Constant(1.0))
    assert np.nanmax(np.abs(diag.h_frame)) < 1e-9
    assert np.nanmin(diag.b) >= 0


def test_jacobi_quadratic():
    g = Grid.cube(2, 1.0, 13)
    u = _field(g, lambda x: 0.5 * (x[..., 0] ** 2 + 3 * x[..., 1] ** 2))
    rep = jacobi_diagnostic(u)
    ev = rep.status == 0
    assert ev.any()
    assert np.abs(rep.lap_b[ev]).max() < 1e-10
    assert np.abs(rep.grad_b_sq[ev]).max() < 1e-20
    assert rep.C_emp < 1e-10


def test_jacobi_ma_lift():
    g = Grid([1.0, -0.5, -0.5], [2.0, 0.5, 0.5], [17, 17, 17])
    pot = MongeAmpereLift(0.1)
    rep = jacobi_diagnostic(ScalarField(g, pot.value(g.coords)), Constant(pot.phase(3)))
    assert (rep.status == 0).sum() > 0
    assert rep.c_emp > 0 and np.isfinite(rep.C_emp)
    assert rep.C_ref == 1.0


def test_jacobi_subcritical_not_applicable():
    g = Grid.cube(3, 1.0, 9)
    u = _field(g, lambda x: -0.5 * (x ** 2).sum(axis=-1) + 0.1 * x[..., 0] ** 2)
    rep = jacobi_diagnostic(u)
    inner = np.isfinite(rep.lap_b)
    assert np.all(rep.status[inner] == 2)


def test_jacobi_skips_eigenvalue_crossings():
    g = Grid.cube(2, 1.0, 13)
    u = _field(g, lambda x: 0.5 * (x ** 2).sum(axis=-1))
    rep = jacobi_diagnostic(u)
    inner = np.isfinite(rep.lap_b)
    assert np.all(rep.status[inner] == 1)


def test_sigma_divergence_quadratic():
    g = Grid.cube(3, 1.0, 9)
    u = _field(g, lambda x: 0.5 * (x ** 2).sum(axis=-1))
    assert np.nanmax(sigma_divergence_residual(u, 2)) < 1e-12
    g = Grid.cube(2, 1.0, 11)
    u = _field(g, lambda x: x[..., 0] ** 2 * x[..., 1])
    assert np.nanmax(sigma_divergence_residual(u, 1)) < 1e-12
    with pytest.raises(InvalidInputError):
        sigma_divergence_residual(u, 3)


def test_sigma_divergence_second_order():
    res = []
    for m in (17, 33):
        g = Grid.cube(2, 1.0, m)
        u = _field(g, lambda x: x[..., 0] ** 4 + x[..., 0] ** 2 * x[..., 1] ** 2 + 0.5 * x[..., 1] ** 4)
        r = sigma_divergence_residual(u, 2)
        # compare on the common sub-box away from the faces
        mask = np.all(np.abs(g.coords) <= 0.75 + 1e-12, axis=-1)
        res.append(np.nanmax(r[mask]))
    assert 3.5 < res[0] / res[1] < 4.5
