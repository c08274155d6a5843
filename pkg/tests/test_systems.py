import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from robust_periodic.bounds import estimate_constants
from robust_periodic.core import Box
from robust_periodic.systems import (BIOREACTOR_DOMAIN, SYSTEM_NAMES, BioreactorParams, bioreactor_field,
                                     bioreactor_spec, finite_difference_jacobian, get_system, growth_rate,
                                     linear_solution, linear_test_spec, mode_table)

P = BioreactorParams()


def test_params_validation():
    with pytest.raises(ValueError):
        BioreactorParams(D=0.0)
    with pytest.raises(ValueError):
        BioreactorParams(S_f_min=41.0)
    assert P.S_f_bar == 32.9


def test_growth_rate_at_z0():
    assert growth_rate(P, 12.5, 22.4) == pytest.approx(0.159213372664700098, rel=1e-14)
    assert growth_rate(P, 12.5, 22.4) == pytest.approx(0.15921, abs=5e-6)


def test_washout_dynamics():
    y = np.array([0.0, 10.0, 20.0])
    np.testing.assert_allclose(bioreactor_field(y, 35.0), [0.0, 0.15 * 25.0, -0.15 * 20.0], rtol=1e-15)


def test_additive_perturbation():
    y = np.array([6.0, 12.0, 22.0])
    w = np.array([0.001, -0.002, 0.003])
    np.testing.assert_allclose(bioreactor_field(y, 30.0, w) - bioreactor_field(y, 30.0), w, atol=1e-15)


def test_mode_table():
    assert mode_table(28.7, 40.0, 1).tolist() == [34.35]
    t = mode_table(28.7, 40.0, 300)
    assert len(t) == 300 and t[0] == 28.7 and t[-1] == 40.0
    assert np.allclose(np.diff(t), 11.3 / 299)
    with pytest.raises(ValueError):
        mode_table(0, 1, 0)


def test_bioreactor_spec_shape():
    s = bioreactor_spec(300)
    assert s.n_modes == 300 and s.n == 3 and s.d == 3
    np.testing.assert_array_equal(s.domain.lower, [4.8, 11.0, 17.5])
    np.testing.assert_array_equal(s.domain.upper, [7.5, 26.0, 26.0])
    np.testing.assert_allclose(s.enclosure.lower, BIOREACTOR_DOMAIN.lower - 0.1 * BIOREACTOR_DOMAIN.widths)
    assert s.enclosure.contains_box(s.domain)
    assert s.additive_perturbation


def test_productivity_integrand_constant_p():
    s = bioreactor_spec(3)
    states = np.tile([6.0, 12.0, 23.0], (10, 1))
    np.testing.assert_allclose(s.integrands["productivity"].fn(states), 0.15 * 23.0)


@given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1), st.floats(28.7, 40.0))
def test_jacobian_matches_finite_differences(a, b, c, sf):
    s = bioreactor_spec(1)
    enc = s.enclosure
    y = enc.lower + np.array([a, b, c]) * enc.widths
    J = s.jacobian(y, np.array([sf]))
    Jfd = finite_difference_jacobian(lambda z: bioreactor_field(z, sf), y)
    scale = max(1.0, np.abs(J).max())
    np.testing.assert_allclose(J, Jfd, atol=1e-6 * scale)


def test_field_finite_on_enclosure():
    s = bioreactor_spec(5)
    rng = np.random.default_rng(0)
    y = s.enclosure.lower + rng.random((5000, 3)) * s.enclosure.widths
    for m in range(5):
        assert np.all(np.isfinite(s.f(y, m)))


def test_linear_spec_and_solution():
    s = linear_test_spec([-1.0], [[0.0]])
    assert linear_solution([-1.0], [0.0], [1.0], 1.0)[0] == pytest.approx(np.exp(-1.0))
    with pytest.raises(ValueError):
        linear_test_spec([1.0], [[0.0]])
    c = estimate_constants(s, 0, s.domain, samples=32, margin=0.0)
    assert c.lam == pytest.approx(-1.0) and c.L == pytest.approx(1.0)


def test_linear_estimate_within_margin(lin2d):
    exact = -1.0
    c = estimate_constants(lin2d, 1, lin2d.domain, margin=0.05)
    assert exact <= c.lam <= exact + 0.05 * abs(exact) + 1e-15


def test_registry():
    assert set(SYSTEM_NAMES) == {"bioreactor", "linear1d", "linear2d"}
    for name in SYSTEM_NAMES:
        assert get_system(name).name == name
    s = get_system("bioreactor", n_modes=4, D=0.2)
    assert s.n_modes == 4 and s.params["D"] == 0.2
    d = get_system("linear2d", domain={"lower": [0, 0], "upper": [2, 2]})
    np.testing.assert_array_equal(d.domain.upper, [2.0, 2.0])
    with pytest.raises(KeyError):
        get_system("pendulum")


def test_with_modes_subsets(bio10):
    sub = bio10.with_modes([0, 9])
    np.testing.assert_array_equal(sub.modes[:, 0], [28.7, 40.0])


def test_jac_falls_back_to_finite_differences(lin2d):
    from dataclasses import replace
    s = replace(lin2d, jacobian=None)
    J = s.jac(np.array([[0.3, 0.4]]), 0)
    np.testing.assert_allclose(J[0], np.diag([-1.0, -2.0]), atol=1e-8)
