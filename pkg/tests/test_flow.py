"""Magnetic flow integration cross-validated against the algebraic flow."""

import numpy as np
import pytest

from magflows import fields, flow, sl2, surfaces


def algebraic_orbit(x0, y0, phi0, lam, ts):
    """Half-plane magnetic orbit through frame multiplication."""
    g0 = sl2.phase_to_frame(x0, y0, phi0)
    X = sl2.magnetic_generator(lam)
    out = np.empty((len(ts), 3))
    for i, t in enumerate(ts):
        out[i] = sl2.frame_to_phase(g0 @ sl2.exp_generator(X, t))
    return out


def test_half_plane_integration_matches_algebraic_flow(half_plane):
    p0 = flow.UnitPhasePoint(0.2, 1.3, 0.7)
    for lam in (0.0, 0.5, 1.0, 1.3):
        orbit = flow.integrate(half_plane, fields.ConstantField(lam), p0,
                               T=3.0, dt=1e-3)
        ref = algebraic_orbit(p0.x, p0.y, p0.phi, lam, orbit.ts)
        assert np.max(np.abs(orbit.xs - ref[:, 0])) <= 1e-9
        assert np.max(np.abs(orbit.ys - ref[:, 1])) <= 1e-9
        dphi = np.angle(np.exp(1j * (orbit.phis - ref[:, 2])))
        assert np.max(np.abs(dphi)) <= 1e-9


def test_orbit_satisfies_chart_equations(half_plane, torus):
    for model, p0, field in (
            (half_plane, flow.UnitPhasePoint(0.0, 1.0, 0.4), fields.ConstantField(0.8)),
            (torus, flow.UnitPhasePoint(0.3, 0.6, 1.1),
             fields.torus_trig_field())):
        orbit = flow.integrate(model, field, p0, T=2.0, dt=1e-3, reduce="none")
        ts, xs, ys, phis = orbit.ts, orbit.xs, orbit.ys, orbit.phis
        dt = ts[1] - ts[0]
        mid = slice(1, -1)
        xdot = (xs[2:] - xs[:-2]) / (2 * dt)
        ydot = (ys[2:] - ys[:-2]) / (2 * dt)
        phidot = (np.unwrap(phis)[2:] - np.unwrap(phis)[:-2]) / (2 * dt)
        sig = model.sigma(xs[mid], ys[mid])
        sx, sy = model.grad_sigma(xs[mid], ys[mid])
        f = field.value(xs[mid], ys[mid])
        e = np.exp(-sig)
        assert np.max(np.abs(xdot - e * np.cos(phis[mid]))) <= 5e-6
        assert np.max(np.abs(ydot - e * np.sin(phis[mid]))) <= 5e-6
        ref = f + e * (sy * np.cos(phis[mid]) - sx * np.sin(phis[mid]))
        assert np.max(np.abs(phidot - ref)) <= 5e-5


def test_unit_speed_is_preserved(half_plane):
    p0 = flow.UnitPhasePoint(-0.4, 0.7, 2.0)
    orbit = flow.integrate(half_plane, fields.ConstantField(0.9), p0, T=5.0, dt=2e-3)
    dt = orbit.ts[1] - orbit.ts[0]
    xdot = (orbit.xs[2:] - orbit.xs[:-2]) / (2 * dt)
    ydot = (orbit.ys[2:] - orbit.ys[:-2]) / (2 * dt)
    speed = model_speed = np.hypot(xdot, ydot) / orbit.ys[1:-1]
    assert np.max(np.abs(speed - 1.0)) <= 1e-5


def test_reduction_tracks_deck_words_on_torus(torus):
    p0 = flow.UnitPhasePoint(0.25, 0.5, 0.0)
    orbit = flow.integrate(torus, fields.ConstantField(0.0), p0, T=2.5, dt=1e-3,
                           reduce="step")
    # straight horizontal line crosses x = 1 at t = 0.75 and t = 1.75
    assert np.all(orbit.xs < 1.0 + 1e-9)
    lengths = orbit.word_lengths()
    assert lengths[0] == 0
    assert lengths[-1] == 2
    assert len(orbit.events) == 2
    cover = flow.integrate(torus, fields.ConstantField(0.0), p0, T=2.5, dt=1e-3,
                           reduce="none")
    gap = np.abs(cover.xs - np.floor(cover.xs) - orbit.xs)
    assert np.max(np.minimum(gap, 1.0 - gap)) <= 1e-9


def test_batch_integration_matches_scalar(half_plane):
    rng = np.random.default_rng(60)
    x0 = rng.uniform(-1, 1, 5)
    y0 = rng.uniform(0.5, 2.0, 5)
    phi0 = rng.uniform(0, 2 * np.pi, 5)
    field = fields.ConstantField(0.6)
    bx, by, bphi, _, _ = flow.integrate_batch(half_plane, field, x0, y0, phi0,
                                              T=1.5, dt=2e-3)
    for i in range(5):
        orbit = flow.integrate(half_plane, field,
                               flow.UnitPhasePoint(x0[i], y0[i], phi0[i]),
                               T=1.5, dt=2e-3, reduce="none")
        assert abs(bx[i] - orbit.xs[-1]) <= 1e-12
        assert abs(by[i] - orbit.ys[-1]) <= 1e-12
        dphi = np.angle(np.exp(1j * (bphi[i] - orbit.phis[-1])))
        assert abs(dphi) <= 1e-12


def test_accumulators_integrate_along_the_orbit(half_plane):
    p0 = flow.UnitPhasePoint(0.0, 1.0, 0.3)
    c = 1.7
    orbit = flow.integrate(half_plane, fields.ConstantField(0.5), p0, T=2.0,
                           dt=1e-3, accumulators=(lambda x, y, phi: c + 0.0 * x,))
    assert abs(orbit.accumulated[0] - c * 2.0) <= 1e-10


def test_backward_integration_retraces(half_plane):
    p0 = flow.UnitPhasePoint(0.1, 1.2, 0.9)
    field = fields.ConstantField(0.7)
    fwd = flow.integrate(half_plane, field, p0, T=2.0, dt=1e-3)
    end = flow.UnitPhasePoint(fwd.xs[-1], fwd.ys[-1], fwd.phis[-1])
    back = flow.integrate(half_plane, field, end, T=-2.0, dt=1e-3)
    assert abs(back.xs[-1] - p0.x) <= 1e-8
    assert abs(back.ys[-1] - p0.y) <= 1e-8


def test_liouville_samples_are_deterministic_and_in_domain(genus2, torus):
    for model in (genus2, torus):
        xs, ys, phis = flow.liouville_samples(model, seed=9, n=400)
        xs2, ys2, phis2 = flow.liouville_samples(model, seed=9, n=400)
        assert np.array_equal(xs, xs2) and np.array_equal(phis, phis2)
        assert np.all(model.contains(xs, ys))
        assert np.all((phis >= 0.0) & (phis < 2 * np.pi))


def test_liouville_angles_cover_uniformly(torus):
    xs, ys, phis = flow.liouville_samples(torus, seed=10, n=20000)
    m = np.mean(np.exp(1j * phis))
    assert abs(m) <= 4.0 / np.sqrt(20000)
    assert abs(np.mean(xs) - 0.5) <= 5.0 / np.sqrt(20000)


def test_integration_guards():
    h = surfaces.make_half_plane()
    p0 = flow.UnitPhasePoint(0.0, 1.0, 0.0)
    with pytest.raises(flow.DegenerateInputError):
        flow.integrate(h, fields.ConstantField(1.0), p0, T=1.0, dt=0.0)
    with pytest.raises(flow.StepSizeError):
        flow.integrate(h, fields.ConstantField(200.0), p0, T=1.0, dt=0.1)
