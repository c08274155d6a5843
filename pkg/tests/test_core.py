import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from robust_periodic.core import (Ball, Box, Certificate, Grid, Pattern, TimingConfig, Trace, Tube,
                                  as_state, ball_contains, paper_epsilon, representative,
                                  tube_radius_at)
from robust_periodic.errors import DimensionMismatch, DomainError, OffLattice
from robust_periodic.systems import BIOREACTOR_DOMAIN

unit = st.floats(0.0, 1.0, allow_nan=False)


def test_as_state_rejects_nonfinite():
    with pytest.raises(ValueError):
        as_state([1.0, np.nan])
    with pytest.raises(DimensionMismatch):
        as_state([1.0, 2.0], 3)


def test_box_validation_and_queries():
    with pytest.raises(ValueError):
        Box([1.0], [0.0])
    b = Box([0.0, 0.0], [2.0, 4.0])
    assert b.contains([2.0, 0.0])
    assert not b.contains([2.0 + 1e-12, 0.0])
    np.testing.assert_array_equal(b.widths, [2.0, 4.0])
    np.testing.assert_array_equal(b.center, [1.0, 2.0])
    assert b.contains_ball(Ball([1.0, 1.0], 1.0))
    assert not b.contains_ball(Ball([1.0, 1.0], 1.01))
    big = b.inflate(0.1)
    np.testing.assert_allclose(big.lower, [-0.2, -0.4])
    assert big.contains_box(b) and not b.contains_box(big)
    assert len(b.corners()) == 4
    b2 = Box.from_dict(b.to_dict())
    assert np.array_equal(b2.lower, b.lower) and np.array_equal(b2.upper, b.upper)


def test_ball_rejects_negative_radius():
    with pytest.raises(ValueError):
        Ball([0.0], -1e-3)


def test_ball_contains_examples():
    a = Ball([1.0, 2.0, 3.0], 0.5)
    assert ball_contains(a, a)
    outer = Ball([6.77663937, 12.62347387, 23.95516391], 0.2475)
    inner = Ball([6.77670354, 12.62331389, 23.95558776], 0.24533)
    assert ball_contains(outer, inner)
    assert not ball_contains(Ball([0.0, 0.0], 1.0), Ball([0.6, 0.0], 0.5))
    with pytest.raises(DimensionMismatch):
        ball_contains(Ball([0.0], 1.0), Ball([0.0, 0.0], 0.1))


def test_ball_contains_margin():
    outer, inner = Ball([0.0], 1.0), Ball([0.5], 0.5)
    assert ball_contains(outer, inner)
    assert not ball_contains(outer, inner, margin=1e-9)


@given(st.lists(st.floats(-5, 5), min_size=2, max_size=2), st.floats(0, 3), st.floats(0, 1), st.floats(0, 1))
def test_ball_contains_reflexive_and_transitive(c, r, s1, s2):
    c = np.array(c)
    a = Ball(c, r)
    b = Ball(c + np.array([s1 * r * 0.3, 0.0]), r * 0.6)
    d = Ball(b.center, b.radius * s2)
    assert ball_contains(a, a)
    if ball_contains(a, b) and ball_contains(b, d):
        assert ball_contains(a, d)


def test_grid_nodes_and_index():
    g = Grid(Box([0.0, -1.0], [1.0, 1.0]), 5)
    nodes = g.nodes()
    assert nodes.shape == (25, 2)
    for i in (0, 7, 24):
        np.testing.assert_array_equal(g.node(i), nodes[i])
    np.testing.assert_array_equal(g.index_of(nodes), np.arange(25))
    assert nodes[-1].tolist() == [1.0, 1.0]
    assert Grid.from_dict(g.to_dict()).kappa == 5


def test_grid_kappa_validation():
    with pytest.raises(ValueError):
        Grid(Box([0.0], [1.0]), 1)


def test_representative_examples():
    g = Grid(Box([0.0], [1.0]), 2)
    z = representative(g, [0.4])
    assert z.tolist() == [0.0]
    assert 0.4 <= g.epsilon == 0.5
    g5 = Grid(Box([0.0, 0.0], [1.0, 1.0]), 5)
    np.testing.assert_array_equal(representative(g5, [0.25, 0.75]), [0.25, 0.75])
    with pytest.raises(DomainError):
        representative(g5, [1.1, 0.5])


def test_bioreactor_grid_epsilon_scale():
    # quoted value sqrt(3)/400 refers to the unit-cube convention; our cell half-diagonal is on S itself
    assert paper_epsilon(3, 200) == pytest.approx(math.sqrt(3) / 400)
    assert paper_epsilon(3, 200) == pytest.approx(0.004, abs=5e-4)
    g = Grid(BIOREACTOR_DOMAIN, 200)
    h = BIOREACTOR_DOMAIN.widths / 199
    assert g.epsilon == pytest.approx(0.5 * np.linalg.norm(h))


@given(unit, unit, unit, st.integers(2, 12))
def test_representative_within_epsilon_and_idempotent(a, b, c, kappa):
    g = Grid(Box([0.0, -2.0, 1.0], [1.0, 3.0, 1.5]), kappa)
    y = g.domain.lower + np.array([a, b, c]) * g.domain.widths
    z = representative(g, y)
    assert np.linalg.norm(y - z) <= g.epsilon * (1 + 1e-12)
    np.testing.assert_array_equal(representative(g, z), z)


def test_timing_config():
    t = TimingConfig(1.0, 1 / 400, 48)
    assert t.substeps == 400 and t.K == 19200 and t.T == 48
    with pytest.raises(ValueError):
        TimingConfig(1.0, 0.3, 2)
    with pytest.raises(ValueError):
        TimingConfig(1.0, 0.1, 0)
    assert TimingConfig.from_dict(t.to_dict()) == t


def test_pattern_step_modes():
    p = Pattern((2, 0, 1), 0.5)
    np.testing.assert_array_equal(p.step_modes(2, 8), [2, 2, 0, 0, 1, 1, 2, 2])
    with pytest.raises(ValueError):
        Pattern((), 1.0)
    with pytest.raises(ValueError):
        Pattern((0,), 0.0)


def test_trace_requires_increasing_times():
    with pytest.raises(ValueError):
        Trace(np.array([0.0, 0.0]), np.zeros((2, 1)), np.zeros(1, int))


def _toy_tube(n=4):
    return Tube(0.0, 0.5, np.zeros((n, 1)), np.linspace(1, 0.7, n), -np.ones(n - 1), np.ones(n - 1),
                np.ones(n - 1, bool))


def test_tube_lattice_queries():
    tube = _toy_tube()
    assert tube_radius_at(tube, 0.0) == 1.0
    assert tube_radius_at(tube, 1.5) == pytest.approx(0.7)
    with pytest.raises(OffLattice):
        tube_radius_at(tube, 0.25)
    with pytest.raises(OffLattice):
        tube_radius_at(tube, 5.0)
    with pytest.raises(ValueError):
        Tube(0.0, 0.5, np.zeros((3, 1)), np.ones(3), np.ones(3), np.ones(2), np.ones(2, bool))


def test_certificate_flag():
    assert Certificate("Certified", 1, 0.1).certified
    assert not Certificate("NotFound", 1, 0.1).certified
