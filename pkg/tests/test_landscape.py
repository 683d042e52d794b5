from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eslab.errors import InputError
from eslab.landscape import Potential, gradient, gradient_check, value


def mixture(dim=1):
    bumps = [
        {"w": 1.5, "c": [1.0] * dim, "rho": 0.5},
        {"w": 0.8, "c": [-2.0] + [0.5] * (dim - 1), "rho": 0.9},
    ]
    return Potential.gaussian_mixture_well(0.5, bumps, dim)


def test_value_examples():
    q = Potential.quadratic(1.0)
    assert value(q, [0.0]) == 0.0
    assert value(q, [2.0]) == 2.0
    assert value(Potential.double_well(1.0), [1.0]) == 0.0


def test_gradient_examples():
    assert gradient(Potential.quadratic(1.0), [2.0])[0] == 2.0
    assert gradient(Potential.double_well(1.0), [0.0])[0] == 0.0
    dw = Potential.double_well(1.0)
    h = 1e-5
    fd = (value(dw, [2.0 + h]) - value(dw, [2.0 - h])) / (2 * h)
    # phi = (x^2 - a)^2 / 4 gives phi'(2) = 2 * (4 - 1) = 6; the finite-difference oracle agrees
    assert gradient(dw, [2.0])[0] == pytest.approx(fd, abs=1e-8)
    assert gradient(dw, [2.0])[0] == 6.0


@pytest.mark.parametrize("dim", [1, 2, 3])
def test_gradient_check_all_kinds(rng, dim):
    probes = rng.uniform(-3, 3, size=(100, dim))
    assert gradient_check(Potential.quadratic(1.3, dim), probes, 1e-4) <= 1e-6
    assert gradient_check(Potential.double_well(1.0, dim), probes, 1e-4) <= 1e-5
    assert gradient_check(mixture(dim), probes, 1e-4) <= 1e-5


def test_quadratic_exact(rng):
    q = Potential.quadratic(2.5, 3)
    x = rng.normal(size=(50, 3))
    np.testing.assert_allclose(q.value(x), 1.25 * np.sum(x * x, axis=1), rtol=1e-15)
    np.testing.assert_allclose(q.gradient(x), 2.5 * x, rtol=1e-15)


def test_dimension_mismatch_and_bad_params():
    with pytest.raises(InputError):
        value(Potential.quadratic(1.0, 2), [1.0])
    with pytest.raises(InputError):
        Potential.quadratic(-1.0)
    with pytest.raises(InputError):
        Potential("Cubic", {}, 1)
    with pytest.raises(InputError):
        gradient_check(Potential.quadratic(1.0), [[0.0]], h=0.0)
    with pytest.raises(InputError):
        Potential.gaussian_mixture_well(1.0, [{"w": -1, "c": [0.0], "rho": 1.0}])


def test_lower_bound_below_grid_scan():
    xs = np.linspace(-6, 6, 4001)[:, None]
    for p in (Potential.quadratic(1.0), Potential.double_well(2.0), mixture()):
        assert p.lower_bound() <= p.value(xs).min() + 1e-12


def test_confining():
    for p in (Potential.quadratic(0.5), Potential.double_well(1.0), mixture()):
        assert p.value([50.0]) > p.value([5.0]) > p.lower_bound()


def test_config_round_trip_and_scaling():
    for p in (Potential.quadratic(1.5, 2), Potential.double_well(0.7), mixture(2)):
        again = Potential.from_config(p.to_config())
        x = np.array([[0.3] * p.dim, [-1.2] * p.dim])
        np.testing.assert_array_equal(again.value(x), p.value(x))
    s = Potential.quadratic(2.0).scaled(0.25)
    assert s.stiffness == 0.5
    assert s.value([2.0]) == pytest.approx(1.0)
    assert Potential.from_config(s.to_config()).stiffness == 0.5
    with pytest.raises(InputError):
        Potential.double_well(1.0).stiffness


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-4, 4), min_size=2, max_size=2), st.floats(0.2, 3.0))
def test_gradient_matches_fd_property(x, a):
    assert gradient_check(Potential.double_well(a, 2), [x], 1e-4) <= 1e-5
