import types

import numpy as np
import pytest

from rmwave import cycles, model, ode, wave
from rmwave.errors import DomainError, SingularityError
from rmwave.model import ModelParams
from rmwave.wave import WaveParams


def test_wave_params():
    w = WaveParams.from_speed(10)
    assert w.epsilon == pytest.approx(0.01, abs=1e-15)
    assert WaveParams.from_epsilon(0.25).c == pytest.approx(2.0)
    with pytest.raises(DomainError):
        WaveParams(10.0, 0.02)
    with pytest.raises(DomainError):
        WaveParams.from_speed(0.5)  # epsilon = 4 > 1


def test_wave_rhs_examples(sink_params):
    w = WaveParams.from_speed(10)
    p = sink_params
    assert np.allclose(wave.wave_rhs_4d(p, w, (p.gamma, 0, 0, 0)), 0.0, atol=1e-15)
    assert np.allclose(wave.wave_rhs_4d(p, w, wave.WaveState4(1, 0, 1, 0)), [0, -0.1, 0, -0.5], atol=1e-15)
    frozen = types.SimpleNamespace(epsilon=0.0)
    out = wave.wave_rhs_4d(p, frozen, (0.7, 2.0, 1.1, -3.0))
    assert out[0] == 0.0 and out[2] == 0.0
    with pytest.raises(SingularityError):
        wave.wave_rhs_4d(p, w, (-1.0, 0, 0, 0))


def test_wave_field_matches_rhs(sink_params, rng):
    w = WaveParams.from_speed(7)
    f = wave.wave_field(sink_params, w)
    for s in rng.uniform(0, 3, size=(20, 4)):
        assert np.allclose(f(s), wave.wave_rhs_4d(sink_params, w, s), atol=1e-15)


def test_wave_jacobian_finite_differences(cycle_params, rng):
    w = WaveParams.from_speed(10)
    f = wave.wave_field(cycle_params, w)
    h = 1e-6
    for s in rng.uniform(0.1, 3, size=(20, 4)):
        J = wave.wave_jacobian_4d(cycle_params, w, s)
        fd = np.column_stack([(f(s + h * e) - f(s - h * e)) / (2 * h) for e in np.eye(4)])
        assert np.allclose(J, fd, atol=1e-6)


def test_spectrum_4x4_against_numpy(rng):
    for _ in range(50):
        J = rng.normal(size=(4, 4))
        lam, right, left = wave.spectrum_4x4(J)
        ref = np.linalg.eigvals(J)
        assert np.allclose(np.sort_complex(lam), np.sort_complex(ref), atol=1e-8)
        for k in range(4):
            assert np.linalg.norm(J @ right[:, k] - lam[k] * right[:, k]) < 1e-6
            assert np.linalg.norm(J.T @ left[:, k] - lam[k] * left[:, k]) < 1e-6


def test_spectrum_at_boundary_equilibrium(cycle_params):
    p, w = cycle_params, WaveParams.from_speed(10)
    lam, _, _ = wave.spectrum_4x4(wave.wave_jacobian_4d(p, w, (p.gamma, 0, 0, 0)))
    lam = np.sort(lam.real)
    # one slow unstable root near eps*alpha*gamma, three stable roots in profile time
    assert np.sum(lam > 0) == 1
    assert lam[-1] == pytest.approx(w.epsilon * p.alpha * p.gamma, rel=0.05)


def test_profile_reparametrize():
    t = np.array([0.0, 10.0, 50.0])
    states = np.arange(6.0).reshape(3, 2)
    tr = ode.Trajectory(t, states, np.ones((3, 2)))
    w1 = WaveParams.from_speed(1.0)
    out = wave.profile_reparametrize(tr, w1)
    assert np.array_equal(out.times, [-50.0, -10.0, 0.0])
    assert np.array_equal(out.states, states[::-1])
    back = wave.profile_unreparametrize(out, w1)
    assert np.array_equal(back.times, t) and np.array_equal(back.states, states)
    w10 = WaveParams.from_speed(10.0)
    out = wave.profile_reparametrize(tr, w10)
    assert out.times[0] == pytest.approx(-5.0)
    assert np.array_equal(out.states[0], states[2])


def test_transform_examples(sink_params):
    p = sink_params
    t = wave.transform_uv(p, (p.gamma, 0, 0, 0))
    assert t.Y == (0.0, 0.0)
    t = wave.transform_uv(p, (1, 0, 1, 0))
    assert t.Y == pytest.approx((0.1, 0.5), abs=1e-15)


def test_transform_roundtrip(cycle_params, rng):
    for s in rng.uniform(0, 5, size=(1000, 4)) * [1, 2, 1, 2] - [0, 1, 0, 1]:
        back = wave.inverse_transform_uv(cycle_params, wave.transform_uv(cycle_params, s)).as_array()
        assert np.max(np.abs(back - s)) <= 1e-13


def test_pq_terms(sink_params, rng):
    p = sink_params
    F, G = model.kinetic_rhs(p, (1.0, 1.0))
    assert wave.pq_terms(p, (1.0, 1.0, F, G)) == (0.0, 0.0)
    # X = (1, 1), Y = 0: brackets (-0.1, -0.5), partials F_u=-0.65, F_v=-0.5, G_u=0.75, G_v=0.5
    P, Q = wave.pq_terms(p, (1.0, 1.0, 0.0, 0.0))
    assert P == pytest.approx(-0.65 * -0.1 + -0.5 * -0.5, abs=1e-14)
    assert Q == pytest.approx(0.75 * -0.1 + 0.5 * -0.5, abs=1e-14)
    h = 1e-6
    for u, v in rng.uniform(0.1, 4, size=(100, 2)):
        fd = np.column_stack([
            (np.array(model.kinetic_rhs(p, (u + h, v))) - model.kinetic_rhs(p, (u - h, v))) / (2 * h),
            (np.array(model.kinetic_rhs(p, (u, v + h))) - model.kinetic_rhs(p, (u, v - h))) / (2 * h),
        ])
        Y = np.array([0.3, -0.2])
        H = np.array(model.kinetic_rhs(p, (u, v)))
        ref = fd @ (Y - H)
        assert np.allclose(wave.pq_terms(p, (u, v, *Y)), ref, atol=1e-5)


def test_slow_manifold_examples(cycle_params):
    eq = model.interior_equilibrium(cycle_params)
    for eps in (0.0, 1e-3, 1e-2):
        assert np.allclose(wave.slow_manifold_first_order(cycle_params, eps, (eq.U, eq.V)), 0.0, atol=1e-15)
    assert wave.slow_manifold_first_order(cycle_params, 0.0, (1.3, 0.7)) == (0.0, 0.0)


def test_reduced_rhs_limits(cycle_params, rng):
    p = cycle_params
    for X in rng.uniform(0, 4, size=(20, 2)):
        assert wave.reduced_rhs(p, 0.0, X) == model.kinetic_rhs(p, X)
        assert np.allclose(wave.reduced_field(p, 1e-3)(X), wave.reduced_rhs(p, 1e-3, X), atol=1e-14)


@pytest.mark.parametrize("eps", [0.0, 1e-4, 1e-3, 1e-2])
def test_reduced_equilibria_preserved(cycle_params, eps):
    for e in model.equilibria(cycle_params):
        assert np.allclose(wave.reduced_rhs(cycle_params, eps, (e.location.U, e.location.V)), 0.0, atol=1e-12)


@pytest.mark.parametrize("eps", [1e-4, 1e-3, 1e-2])
def test_reduced_saddles(cycle_params, eps):
    p = cycle_params
    for X in ((0.0, 0.0), (p.gamma, 0.0)):
        lam = np.linalg.eigvals(wave.reduced_jacobian(p, eps, X)).real
        assert lam.min() < 0 < lam.max()


def test_reduced_interior_spectrum_is_order_eps(cycle_params):
    p, eps = cycle_params, 1e-3
    eq = model.interior_equilibrium(p)
    base = np.sort_complex(np.linalg.eigvals(model.interior_jacobian(p)))
    pert = np.sort_complex(np.linalg.eigvals(wave.reduced_jacobian(p, eps, (eq.U, eq.V))))
    shift = np.max(np.abs(pert - base))
    assert 1e-6 < shift < 10 * eps


def test_conjugacy(cycle_params):
    p, w = cycle_params, WaveParams.from_speed(10)
    s0 = np.array([0.8, 0.1, 2.0, -0.2])
    a = ode.integrate_adaptive(wave.wave_field(p, w), s0, 50.0, 1e-11, 1e-13)
    b = ode.integrate_adaptive(wave.transformed_field(p, w), wave.transform_uv(p, s0).as_array(), 50.0, 1e-11, 1e-13)
    assert np.max(np.abs(wave.transform_uv(p, a.y_final).as_array() - b.y_final)) <= 1e-8


def test_crossing_level_and_line_check(cycle_params, kinetic_cycle):
    assert wave.crossing_level(cycle_params) == pytest.approx(0.6)
    assert wave.cycle_crosses_line_check(kinetic_cycle, cycle_params)
    th = np.linspace(0, 2 * np.pi, 200)
    eq = kinetic_cycle.encloses
    pts = np.column_stack([eq.U + 1e-3 * np.cos(th), eq.V + 1e-3 * np.sin(th)])
    tiny = cycles.LimitCycle(th, pts, 2 * np.pi, 0.0, -1.0, eq)
    assert not wave.cycle_crosses_line_check(tiny, cycle_params)


def test_reduced_cycle_requires_small_eps(cycle_params):
    with pytest.raises(DomainError):
        wave.reduced_limit_cycle(cycle_params, 0.5)


def test_shoot_requires_large_speed(cycle_params):
    with pytest.raises(DomainError):
        wave.shoot_heteroclinic_4d(cycle_params, 2.0)


def test_boundary_profile(cycle_params):
    shot = wave.shoot_boundary_heteroclinic(cycle_params, 10.0)
    st = shot.trajectory.states
    assert shot.verdict is wave.Verdict.TO_EQUILIBRIUM
    assert np.all(st[:, 2] == 0.0) and np.all(st[:, 3] == 0.0)
    assert st[0, 0] == pytest.approx(1e-7, rel=1e-6)
    assert st[:, 0].min() >= -1e-9
    # the predator-free profile rises monotonically from 0 to gamma
    assert np.all(np.diff(st[:, 0]) >= -1e-9)
