import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rmwave import ode
from rmwave.errors import DivergenceError, DomainError, GrazingError, StiffnessError
from rmwave.ode import Orientation, Section


def rotation(y):
    # counterclockwise rotation: y1' = -y2, y2' = y1
    return np.array([-y[1], y[0]])


def oscillator(y):
    return np.array([y[1], -y[0]])


def logistic(y):
    return y * (1.6 - y)


def logistic_exact(t, u0=0.1, r=1.6):
    return r / (1 + (r / u0 - 1) * math.exp(-r * t))


def test_rk4_constant_field():
    y = np.array([1.0, -2.0, 3.0])
    assert np.array_equal(ode.step_rk4(lambda z: np.zeros(3), y, 0.7), y)


def test_rk4_exponential():
    y = ode.step_rk4(lambda z: -z, np.array([1.0]), 0.1)
    assert abs(y[0] - math.exp(-0.1)) <= 1e-7


def test_rk4_full_rotation():
    y = np.array([1.0, 0.0])
    h = 2 * math.pi / 1000
    for _ in range(1000):
        y = ode.step_rk4(oscillator, y, h)
    assert np.linalg.norm(y - [1.0, 0.0]) <= 1e-8


def test_rk4_rejects_nonpositive_step():
    with pytest.raises(DomainError):
        ode.step_rk4(oscillator, np.array([1.0, 0.0]), 0.0)


def test_rk4_order():
    def err(h):
        y = np.array([1.0])
        for _ in range(int(round(1.0 / h))):
            y = ode.step_rk4(lambda z: -z, y, h)
        return abs(y[0] - math.exp(-1.0))

    ratio = err(0.1) / err(0.05)
    assert 14 <= ratio <= 18


def test_adaptive_logistic():
    tr = ode.integrate_adaptive(logistic, np.array([0.1]), 50.0, 1e-8, 1e-10)
    assert abs(tr.y_final[0] - 1.6) <= 1e-6
    assert np.all(np.diff(tr.times) > 0)
    assert len(tr.times) == len(tr.states) == len(tr.derivs)


def test_adaptive_matches_closed_form_midway():
    tr = ode.integrate_adaptive(logistic, np.array([0.1]), 5.0, 1e-10, 1e-12)
    assert tr.y_final[0] == pytest.approx(logistic_exact(5.0), abs=1e-8)


def test_adaptive_energy_drift():
    tr = ode.integrate_adaptive(oscillator, np.array([1.0, 0.0]), 200 * math.pi, 1e-9, 1e-12)
    energy = 0.5 * np.sum(tr.states**2, axis=1)
    assert np.max(np.abs(energy - 0.5)) <= 1e-5


def test_adaptive_zero_span():
    tr = ode.integrate_adaptive(oscillator, np.array([1.0, 0.0]), 0.0)
    assert len(tr) == 1 and np.array_equal(tr.states[0], [1.0, 0.0])


@pytest.mark.parametrize("rtol", [0.0, 0.5, -1e-6])
def test_adaptive_rejects_bad_tolerance(rtol):
    with pytest.raises(DomainError):
        ode.integrate_adaptive(oscillator, np.array([1.0, 0.0]), 1.0, rtol, 1e-10)


def test_adaptive_half_tolerance_rerun():
    a = ode.integrate_adaptive(oscillator, np.array([1.0, 0.0]), 10.0, 1e-8, 1e-10)
    b = ode.integrate_adaptive(oscillator, np.array([1.0, 0.0]), 10.0, 5e-9, 5e-11)
    exact = np.array([math.cos(10.0), -math.sin(10.0)])
    assert np.linalg.norm(a.y_final - exact) <= 1e-6
    assert np.linalg.norm(a.y_final - b.y_final) <= 1e-6


def test_blowup_is_reported():
    # y' = y**2 from 1 blows up at t = 1
    with pytest.raises((StiffnessError, DivergenceError)):
        ode.integrate_adaptive(lambda y: y * y, np.array([1.0]), 2.0, 1e-8, 1e-10)


def test_nonfinite_start_is_divergence():
    with pytest.raises(DivergenceError):
        ode.integrate_adaptive(lambda y: np.array([np.nan]), np.array([1.0]), 1.0)


def test_stops_are_hit_exactly():
    stops = [0.3, 1.7, 2.5]
    tr = ode.integrate_adaptive(oscillator, np.array([1.0, 0.0]), 3.0, stops=stops)
    for s in stops:
        assert s in tr.times


def test_stop_when_terminates():
    tr = ode.integrate_adaptive(logistic, np.array([0.1]), 50.0, stop_when=lambda t, y: y[0] > 1.0)
    assert tr.terminated and tr.t_final < 50.0 and tr.y_final[0] > 1.0


def test_trajectory_is_immutable():
    tr = ode.integrate_adaptive(oscillator, np.array([1.0, 0.0]), 1.0)
    with pytest.raises(ValueError):
        tr.states[0, 0] = 2.0


def test_no_teleportation():
    tr = ode.integrate_adaptive(oscillator, np.array([1.0, 0.0]), 20.0, max_step=0.1)
    jumps = np.linalg.norm(np.diff(tr.states, axis=0), axis=1)
    # Lipschitz constant of the field is 1 and |y| = 1
    assert np.all(jumps <= 0.1 * 1.0 + 1e-12)


def test_dense_output_accuracy():
    tr = ode.integrate_adaptive(oscillator, np.array([1.0, 0.0]), 10.0, 1e-10, 1e-12, max_step=0.05)
    for t in np.linspace(0.01, 9.99, 37):
        assert np.allclose(tr.interpolate(t), [math.cos(t), -math.sin(t)], atol=1e-7)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.5, 5.0), st.floats(-2.0, 2.0), st.floats(-2.0, 2.0))
def test_adaptive_consistency(t_end, a, b):
    y0 = np.array([a, b])
    rtol = 1e-7
    coarse = ode.integrate_adaptive(oscillator, y0, t_end, rtol, 1e-10)
    fine = ode.integrate_adaptive(oscillator, y0, t_end, rtol / 10, 1e-11)
    assert np.linalg.norm(coarse.y_final - fine.y_final) <= 10 * rtol * max(np.linalg.norm(fine.y_final), 1e-3)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.5, 5.0), st.floats(-2.0, 2.0), st.floats(-2.0, 2.0))
def test_time_reversal(t_end, a, b):
    rtol = 1e-9
    y0 = np.array([a, b])
    fwd = ode.integrate_adaptive(oscillator, y0, t_end, rtol, 1e-12)
    back = ode.integrate_adaptive(ode.reverse(oscillator), fwd.y_final, t_end, rtol, 1e-12)
    assert np.linalg.norm(back.y_final - y0) <= 10 * rtol * max(1.0, np.linalg.norm(y0))


# --- sections -------------------------------------------------------------------


def test_section_rejects_zero_normal():
    with pytest.raises(DomainError):
        Section((0.0, 0.0), 0.0)


def test_rotation_first_crossing():
    tr = ode.integrate_adaptive(rotation, np.array([1.0, 0.0]), 7.0, 1e-10, 1e-12)
    sec = Section((0.0, 1.0), 0.0, Orientation.INCREASING)
    hits = ode.find_crossings(rotation, tr, sec)
    assert len(hits) == 1
    t, y = hits[0]
    assert t == pytest.approx(2 * math.pi, abs=1e-8)
    assert abs(sec.value(y)) <= 1e-10


def test_one_sided_trajectory_has_no_crossings():
    tr = ode.integrate_adaptive(logistic, np.array([0.1]), 10.0)
    assert ode.find_crossings(logistic, tr, Section((1.0,), 2.0)) == []


def test_logistic_crossing_time():
    tr = ode.integrate_adaptive(logistic, np.array([0.1]), 50.0, 1e-10, 1e-12)
    hits = ode.find_crossings(logistic, tr, Section((1.0,), 0.5, Orientation.BOTH))
    assert len(hits) == 1
    # invert u(t) = 0.5
    t_exact = math.log((1.6 / 0.1 - 1) / (1.6 / 0.5 - 1)) / 1.6
    assert hits[0].t == pytest.approx(t_exact, abs=1e-8)


def test_crossing_residuals_and_order():
    tr = ode.integrate_adaptive(rotation, np.array([1.0, 0.0]), 40.0, 1e-9, 1e-12)
    sec = Section((1.0, 1.0), 0.3, Orientation.BOTH)
    hits = ode.find_crossings(rotation, tr, sec)
    assert len(hits) == 2 * 6 + 1 or len(hits) == 2 * 6
    assert all(abs(sec.value(c.y)) <= 1e-10 for c in hits)
    assert all(a.t < b.t for a, b in zip(hits, hits[1:]))


def test_grazing_is_flagged():
    # the section value changes sign at rate 1e-10, below the transversality floor
    def creep(y):
        return np.array([1e-10])

    tr = ode.integrate_adaptive(creep, np.array([0.5 - 1e-10]), 2.0, 1e-10, 1e-12)
    with pytest.raises(GrazingError):
        ode.find_crossings(creep, tr, Section((1.0,), 0.5, Orientation.INCREASING))
