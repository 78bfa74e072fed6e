import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from lagmc import InvalidInputError
from lagmc.potentials import (Affine, MongeAmpereLift, Polynomial, Quadratic, Quartic, Radial,
                              Scaled, potential_from_config)

POTENTIALS = [Quadratic(1.5), Quadratic((1.0, 2.0, -0.5)), Quartic(0.05), Radial(0.7),
              Polynomial(((1.0, (2, 1, 0)), (-0.5, (0, 0, 3)), (2.0, (1, 1, 1)))),
              Affine(Scaled(Quartic(0.1), 2.0), (0.3, 0.0, -1.0), 4.0)]


def _fd(f, x, step=1e-6):
    n = x.shape[-1]
    cols = []
    for k in range(n):
        e = np.zeros(n)
        e[k] = step
        cols.append((f(x + e) - f(x - e)) / (2 * step))
    return np.stack(cols, axis=-1)


@pytest.mark.parametrize("pot", POTENTIALS, ids=lambda p: p.name)
@settings(max_examples=20, deadline=None)
@given(x=arrays(np.float64, 3, elements=st.floats(-1, 1)))
def test_derivatives_consistent(pot, x):
    assert np.allclose(pot.grad(x), _fd(pot.value, x), atol=1e-6)
    assert np.allclose(pot.hess(x), _fd(pot.grad, x), atol=1e-6)
    assert np.allclose(pot.third(x), _fd(pot.hess, x), atol=1e-6)


def test_ma_lift_constant_phase():
    pot = MongeAmpereLift(0.1)
    rng = np.random.default_rng(0)
    x = np.column_stack([rng.uniform(0.5, 2, 50), rng.uniform(-1, 1, (50, 2))])
    phase = np.arctan(np.linalg.eigvalsh(pot.hess(x))).sum(axis=1)
    assert np.allclose(phase, pot.phase(3), atol=1e-13)
    assert np.allclose(pot.grad(x), _fd(pot.value, x), atol=1e-6)
    assert np.allclose(pot.third(x), _fd(pot.hess, x), atol=1e-5)
    with pytest.raises(InvalidInputError):
        pot.value(np.array([[-1.0, 0.0, 0.0]]))


def test_quadratic_shapes():
    x = np.zeros((4, 2))
    assert Quadratic(2.0).hess(x).shape == (4, 2, 2)
    with pytest.raises(InvalidInputError):
        Quadratic((1.0, 2.0, 3.0)).hess(x)


def test_polynomial_validation():
    with pytest.raises(InvalidInputError):
        Polynomial(((1.0, (1, -1)),))
    with pytest.raises(InvalidInputError):
        Polynomial(((1.0, (1, 1)), (1.0, (1,))))


def test_from_config():
    p = potential_from_config({"type": "custom_table", "terms": "1: 2 0; 0.5: 0 2"})
    assert p(np.array([1.0, 2.0])) == pytest.approx(3.0)
    p = potential_from_config({"type": "quartic", "c": "0.1", "scale": "2", "linear": "1 0", "offset": "1"})
    assert p(np.array([1.0, 0.0])) == pytest.approx(2 * (0.5 + 0.1) + 1 + 1)
    assert potential_from_config({}).a == 1.0
    with pytest.raises(InvalidInputError):
        potential_from_config({"type": "custom_table"})
    with pytest.raises(InvalidInputError):
        potential_from_config({"type": "sextic"})
