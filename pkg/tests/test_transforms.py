from fractions import Fraction
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from lagmc import DimensionError, Grid, InvalidInputError, RotationDegenerateError, ScalarField
from lagmc.potentials import Quadratic, Quartic
from lagmc.spectral import sigma_all
from lagmc.transforms import (concavified_hessian_check, concavified_pd_batch, concavify_constant,
                              default_rotation_angle, det_identity_residual, rotate_potential,
                              rotated_hessian, rotation_params, rotation_phase_shift_check,
                              rotation_round_trip, sample_constrained, sigma_floor_batch,
                              sigma_floor_check)


def test_concavify_constants():
    p = concavify_constant(3, 1.0)
    assert p.T == pytest.approx(np.pi / 4) and p.C == pytest.approx(0.5)
    assert p.raw_threshold == pytest.approx(4.0) and p.A == pytest.approx(4.4)
    p = concavify_constant(3, 2.0)
    assert p.C == pytest.approx(0.125) and p.raw_threshold == pytest.approx(128.0)
    assert p.A == pytest.approx(128 * 1.1)
    assert p.printed_threshold == pytest.approx(32.0)
    p = concavify_constant(4, 1.0)
    assert p.C == pytest.approx(0.5) and p.raw_threshold == pytest.approx(4.0)
    assert p.eps == pytest.approx(p.s / 3)


def test_concavify_rejects_low_dimension():
    for n in (1, 2):
        with pytest.raises(DimensionError):
            concavify_constant(n, 1.0)
    with pytest.raises(InvalidInputError):
        concavify_constant(3, 0.0)


def test_hessian_check_examples():
    c = concavified_hessian_check([1.0, 1.0, 0.0], 4.0)
    assert c.positive_definite and c.applicable
    assert np.allclose(c.minors, (6.0, 20.0, 16.0))
    c = concavified_hessian_check([2.0, 2.0, -0.25], 0.5)
    assert c.applicable and not c.positive_definite
    assert c.det == pytest.approx(-2.0) and c.det_formula == pytest.approx(-2.0)
    assert concavified_hessian_check([2.0, 2.0, -0.25], concavify_constant(3, 2.0).A).positive_definite
    assert not concavified_hessian_check([1.0, -1.0, -1.0], 4.0).applicable


@given(arrays(np.float64, 4, elements=st.floats(0.01, 20)), st.floats(0.01, 100))
def test_positive_spectra_always_pd(lam, A):
    assert concavified_hessian_check(lam, A).positive_definite


@settings(max_examples=100)
@given(st.integers(1, 6).flatmap(lambda n: arrays(np.float64, n, elements=st.floats(-10, 10))),
       st.floats(0.0, 200.0))
def test_det_identity(lam, A):
    assert det_identity_residual(lam, A) <= 1e-10


def _exact_det(rows):
    # fraction-free elimination on exact rationals
    m = [list(r) for r in rows]
    n = len(m)
    det = Fraction(1)
    for k in range(n):
        piv = next((i for i in range(k, n) if m[i][k] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != k:
            m[k], m[piv] = m[piv], m[k]
            det = -det
        det *= m[k][k]
        for i in range(k + 1, n):
            f = m[i][k] / m[k][k]
            m[i] = [a - f * b for a, b in zip(m[i], m[k])]
    return det


@settings(max_examples=60)
@given(st.integers(1, 5).flatmap(lambda n: arrays(np.float64, n, elements=st.floats(-10, 10))),
       st.floats(0.0, 200.0))
def test_det_closed_form_exact(lam, A):
    fl = [Fraction(float(v)) for v in lam]
    fA = Fraction(float(A))
    n = len(fl)
    rows = [[fA + (2 * fl[i] if i == j else 0) for j in range(n)] for i in range(n)]

    def sig(k):
        return sum((np.prod(c) if c else Fraction(1)) for c in combinations(fl, k)) if k >= 0 else 0

    assert _exact_det(rows) == 2 ** (n - 1) * (fA * sig(n - 1) + 2 * sig(n))


def test_pd_batch_matches_scalar(rng):
    lam = sample_constrained(rng, 500, 3, 2.0)
    batch = concavified_pd_batch(lam, 10.0)
    for i in range(0, 500, 25):
        assert batch[i] == concavified_hessian_check(lam[i], 10.0).positive_definite


def test_sigma_floor_examples():
    r = sigma_floor_check([1.0, 1.0, 0.0], 1.0)
    assert r.applicable and r.passed and r.sigma == 1.0 and r.floor == pytest.approx(0.5)
    assert sigma_floor_check([1.0, 1.0, 1.0], 1.0).passed
    assert not sigma_floor_check([3.0, 1.0, 1.0], 1.0).applicable
    assert not sigma_floor_check([1.0, 1.0], 1.0).applicable


@pytest.mark.parametrize("n,K", [(3, 1.0), (3, 2.0), (4, 1.5), (5, 3.0)])
def test_constrained_samples(rng, n, K):
    lam = sample_constrained(rng, 20000, n, K)
    assert lam.shape == (20000, n)
    assert np.abs(lam).max() <= K * (1 + 1e-12)
    assert np.all(np.arctan(lam).sum(axis=1) >= (n - 2) * np.pi / 2 - 1e-9)
    assert sigma_floor_batch(lam, K).min() >= -1e-10
    A = concavify_constant(n, K).A
    assert concavified_pd_batch(lam, A).all()


def test_constrained_empty_set(rng):
    with pytest.raises(InvalidInputError):
        sample_constrained(rng, 10, 3, 0.5)


def test_sigma_all_positive_on_constrained(rng):
    lam = sample_constrained(rng, 5000, 4, 2.0)
    assert np.all(sigma_all(lam)[:, 1:4] >= -1e-12)


def test_rotation_params():
    p = rotation_params(0.3, 1.0)
    assert p.contraction == pytest.approx(np.cos(0.3) - np.sin(0.3))
    with pytest.raises(RotationDegenerateError):
        rotation_params(np.pi / 4, 1.0)
    with pytest.raises(RotationDegenerateError):
        rotation_params(-1.6, 0.0)
    assert default_rotation_angle(1.0) == pytest.approx(np.pi / 8)


@given(st.floats(-5, 5), st.floats(-0.6, 0.6))
def test_rotated_hessian_tan_addition(a, gamma):
    if abs(np.arctan(a) + gamma) > 1.45:
        return
    H = rotated_hessian(np.diag([a, 0.0]), gamma)
    assert H[0, 0] == pytest.approx(np.tan(np.arctan(a) + gamma), rel=1e-10, abs=1e-10)
    assert H[1, 1] == pytest.approx(np.tan(gamma), rel=1e-10, abs=1e-12)


def test_quadratic_rotation():
    g = Grid.cube(2, 1.0, 33)
    u = ScalarField(g, Quadratic(1.0).value(g.coords))
    rot = rotate_potential(u, np.pi / 8, 1.0)
    assert rot.injective and rot.lipschitz_ok
    # the image of x is (cos g - sin g) x and ybar = tan(3pi/8) xbar exactly
    mask = np.abs(rot.xbar) > 1e-8
    assert np.allclose(rot.ybar[mask] / rot.xbar[mask], 1 + np.sqrt(2), atol=1e-8)
    shift = rotation_phase_shift_check(u, None, np.pi / 8, 1.0)
    assert shift.residual < 1e-8 and shift.evaluated > 0


def test_zero_angle_is_identity():
    g = Grid.cube(2, 1.0, 17)
    u = ScalarField(g, Quartic(0.05).value(g.coords))
    rot = rotate_potential(u, 0.0)
    assert np.allclose(rot.xbar, rot.source_coords)
    assert rotation_phase_shift_check(u, None, 0.0).residual < 1e-9


def test_flat_graph_rotates_to_plane():
    g = Grid.cube(2, 1.0, 17)
    u = ScalarField(g, np.zeros(g.shape))
    gamma = 0.4
    rot = rotate_potential(u, gamma)
    assert np.allclose(rot.ybar, np.tan(gamma) * rot.xbar, atol=1e-14)
    shift = rotation_phase_shift_check(u, None, gamma)
    assert shift.residual < 1e-9


def test_rotation_degenerate_angle():
    g = Grid.cube(2, 1.0, 17)
    u = ScalarField(g, Quadratic(2.0).value(g.coords))
    with pytest.raises(RotationDegenerateError):
        rotate_potential(u, np.arctan(0.5) + 0.01)
    with pytest.raises(InvalidInputError):
        rotation_phase_shift_check(u)


def test_round_trip_converges():
    errs = []
    for m in (33, 65):
        g = Grid.cube(2, 1.0, m)
        u = ScalarField(g, Quartic(0.05).value(g.coords))
        rt = rotation_round_trip(u, np.pi / 8)
        assert rt.error <= 10 * g.h
        errs.append(rt.error)
    assert errs[1] < errs[0]
