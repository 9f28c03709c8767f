"""Strength fields and primitive 1-forms: exact derivatives, curls, averaging."""

import numpy as np
import pytest

import oracles
from magflows import fields, sl2, surfaces


def _sweep_points(rng, n, kind):
    if kind == "uhp":
        return rng.uniform(-2.0, 2.0, n), rng.uniform(0.2, 3.0, n)
    if kind == "disk":
        r = rng.uniform(0.0, 0.9, n)
        t = rng.uniform(0.0, 2.0 * np.pi, n)
        return r * np.cos(t), r * np.sin(t)
    return rng.uniform(-1.0, 2.0, n), rng.uniform(-1.0, 2.0, n)


def test_exact_jacobians_match_finite_differences():
    cases = [
        (fields.torus_trig_primitive(), "flat"),
        (fields.torus_trig_primitive(a=-1.1, b=0.2, c=0.6), "flat"),
        (fields.disk_constant_norm_primitive(0.5), "disk"),
        (fields.uhp_scaling_invariant_primitive(0.8), "uhp"),
    ]
    rng = np.random.default_rng(50)
    for form, kind in cases:
        x, y = _sweep_points(rng, 40, kind)
        exact = form.jacobian(x, y)
        approx = oracles.fd_jacobian(form, x, y)
        for e, a in zip(exact, approx):
            assert np.max(np.abs(np.asarray(e) - a)) <= 2e-6


def test_trig_primitive_curl_recovers_strength():
    f = fields.torus_trig_field(a=0.9, b=-0.3, c=0.45)
    theta = fields.torus_trig_primitive(a=0.9, b=-0.3, c=0.45)
    rng = np.random.default_rng(51)
    x, y = _sweep_points(rng, 200, "flat")
    assert np.max(np.abs(theta.curl(x, y) - f.value(x, y))) <= 1e-10


def test_trig_strength_has_zero_mean():
    t = surfaces.make_flat_torus()
    f = fields.torus_trig_field()
    assert abs(f.area_integral(t)) <= 1e-12


def test_hyperbolic_primitives_have_constant_norm_and_constant_curl():
    g = sl2.Sl2Element(surfaces.make_genus2_octagon().deck.generators["b"])
    rng = np.random.default_rng(52)
    for lam in (0.3, 0.5, 1.2):
        for form in (fields.uhp_scaling_invariant_primitive(lam),
                     fields.uhp_axis_invariant_primitive(g, lam)):
            x, y = _sweep_points(rng, 60, "uhp")
            p, q = form.components(x, y)
            norm = np.hypot(p, q) * y  # dual metric norm on the half-plane
            assert np.max(np.abs(norm - abs(lam))) <= 1e-10
            # d theta = lam dA means curl = lam e^{2 sigma} = lam / y^2
            curl = form.curl(x, y)
            assert np.max(np.abs(curl - lam / y ** 2)) <= 1e-7 * max(1.0, lam)
    disk = fields.disk_constant_norm_primitive(0.7)
    x, y = _sweep_points(rng, 60, "disk")
    p, q = disk.components(x, y)
    conf = 2.0 / (1.0 - x ** 2 - y ** 2)
    assert np.max(np.abs(np.hypot(p, q) / conf - 0.7)) <= 1e-10
    assert np.max(np.abs(disk.curl(x, y) / conf ** 2 - 0.7)) <= 1e-8


def test_axis_invariant_primitive_is_invariant_under_its_element():
    g = sl2.Sl2Element(surfaces.make_genus2_octagon().deck.generators["a"])
    form = fields.uhp_axis_invariant_primitive(g, 0.5)
    pulled = fields.PulledBackOneForm(form, matrix=g.matrix)
    rng = np.random.default_rng(53)
    x, y = _sweep_points(rng, 80, "uhp")
    p0, q0 = form.components(x, y)
    p1, q1 = pulled.components(x, y)
    assert np.max(np.abs(p0 - p1)) <= 1e-10
    assert np.max(np.abs(q0 - q1)) <= 1e-10


def test_constant_field_basics():
    f = fields.ConstantField(1.5)
    t = surfaces.make_flat_torus(v1=(2.0, 0.0), v2=(0.0, 1.0))
    x = np.array([0.1, 0.9])
    y = np.array([0.4, 0.2])
    assert np.all(f.value(x, y) == 1.5)
    gx, gy = f.gradient(x, y)
    assert np.all(gx == 0.0) and np.all(gy == 0.0)
    assert abs(f.area_integral(t) - 1.5 * t.area) <= 1e-12


def test_zero_sum_scaled_form_algebra():
    theta = fields.torus_trig_primitive()
    zero = fields.ZeroOneForm()
    rng = np.random.default_rng(54)
    x, y = _sweep_points(rng, 30, "flat")
    assert np.all(zero.at(x, y, 1.0, 2.0) == 0.0)
    s = fields.SumOneForm(theta, fields.ScaledOneForm(theta, -1.0))
    p, q = s.components(x, y)
    assert np.max(np.abs(p)) <= 1e-15 and np.max(np.abs(q)) <= 1e-15
    half = fields.ScaledOneForm(theta, 0.5)
    p1, q1 = theta.components(x, y)
    p2, q2 = half.components(x, y)
    assert np.max(np.abs(p1 - 2.0 * p2)) <= 1e-15


def test_grid_forms_interpolate_their_samples():
    # values[i, j] samples (x0 + j hx, y0 + i hy)
    n = 96
    xs = np.linspace(0.0, 1.0, n, endpoint=False)
    xx, yy = np.meshgrid(xs, xs)
    vals = np.cos(2 * np.pi * xx) * np.sin(2 * np.pi * yy)
    gf = fields.GridField(vals, bbox=(0.0, 1.0, 0.0, 1.0), periodic=True)
    rng = np.random.default_rng(55)
    px, py = rng.uniform(0.0, 1.0, size=(2, 50))
    ref = np.cos(2 * np.pi * px) * np.sin(2 * np.pi * py)
    assert np.max(np.abs(gf.value(px, py) - ref)) <= 5e-3


def test_fft_poisson_primitive_curl_matches_density():
    n = 128
    xs = np.arange(n) / n
    xx, yy = np.meshgrid(xs, xs)
    dens = np.cos(2 * np.pi * xx) - 0.5 * np.sin(2 * np.pi * (xx + yy))
    theta = fields.torus_fft_poisson_primitive(dens, bbox=(0.0, 1.0, 0.0, 1.0))
    rng = np.random.default_rng(56)
    px, py = rng.uniform(0.05, 0.95, size=(2, 40))
    ref = np.cos(2 * np.pi * px) - 0.5 * np.sin(2 * np.pi * (px + py))
    curl = oracles.fd_curl(theta, px, py, h=1e-4)
    assert np.max(np.abs(curl - ref)) <= 5e-2


def test_folner_average_fixes_invariant_forms():
    # the trig primitive is unit-cell periodic, so lattice averaging is a no-op
    theta = fields.torus_trig_primitive()
    avg = fields.folner_average(theta, [np.array([1.0, 0.0]), np.array([0.0, 1.0])],
                                shifts=True)
    rng = np.random.default_rng(57)
    x, y = _sweep_points(rng, 50, "flat")
    p0, q0 = theta.components(x, y)
    p1, q1 = avg.components(x, y)
    assert np.max(np.abs(p0 - p1)) <= 1e-12
    assert np.max(np.abs(q0 - q1)) <= 1e-12


def test_bump_family_strength_is_base_plus_laplacian():
    field, form, data = fields.hyperbolic_bump_family(base=1.0, amplitude=0.3)
    rng = np.random.default_rng(58)
    x, y = _sweep_points(rng, 60, "uhp")
    # d(star dW) = Lap_hyp(W) dA, so curl / e^{2 sigma} + base = field strength
    curl = form.curl(x, y)
    strength = field.value(x, y)
    assert np.max(np.abs(curl * y ** 2 + 1.0 - strength)) <= 5e-5
    far_x = np.full(5, 30.0)
    far_y = np.linspace(0.5, 2.0, 5)
    assert np.max(np.abs(field.value(far_x, far_y) - 1.0)) <= 1e-12


def test_callable_one_form_rejects_bad_jacobian_shapes():
    form = fields.CallableOneForm(lambda x, y: (y, x))
    jac = form.jacobian(0.3, 0.4)
    assert len(jac) == 4
    # default centered differences: p_y = 1, q_x = 1 here
    assert abs(jac[1] - 1.0) <= 1e-7 and abs(jac[2] - 1.0) <= 1e-7
    assert abs(form.curl(0.3, 0.4)) <= 1e-7
