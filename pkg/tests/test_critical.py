"""Action potentials, critical values, closed-orbit search."""

import numpy as np
import pytest

import oracles
from magflows import critical, fields, sl2, surfaces
from magflows.critical import CoverDomain, DiscretizedCurve, PrimitiveField


def _flat_theta(a=0.7, b=-0.4, c=0.3):
    return PrimitiveField(fields.torus_trig_primitive(a, b, c),
                          CoverDomain("flat-cell"))


def _zero_flat():
    return PrimitiveField(fields.ZeroOneForm(), CoverDomain("flat-cell"))


def test_lagrangian_action_of_straight_segments():
    theta = _flat_theta()
    rng = np.random.default_rng(80)
    for _ in range(10):
        p = rng.uniform(0.0, 1.0, 2)
        q = rng.uniform(0.0, 1.0, 2)
        T = rng.uniform(0.4, 2.0)
        k = rng.uniform(0.1, 1.0)
        n = 800
        ts = np.linspace(0.0, T, n)
        xs = p[0] + (q[0] - p[0]) * ts / T
        ys = p[1] + (q[1] - p[1]) * ts / T
        val = critical.lagrangian_action(theta, DiscretizedCurve(xs, ys, ts), k)
        ref = oracles.straight_segment_action(theta.form, p, q, T, k)
        assert abs(val - ref) <= 5e-6 * max(1.0, abs(ref))


def test_action_potential_equals_distance_for_zero_field():
    theta = _zero_flat()
    rng = np.random.default_rng(81)
    for _ in range(6):
        x = rng.uniform(0.0, 1.0, 2)
        y = rng.uniform(0.0, 1.0, 2)
        if np.hypot(*(y - x)) < 0.05:
            continue
        q = critical.action_potential(theta, x, y, k=0.5)
        d = np.hypot(*(y - x))
        # at k = 1/2 the free-time value is sqrt(2k) d = d
        assert abs(q.value - d) <= 1e-6
        assert q.diagnostics["lower_bound"] <= q.value + 1e-12


def test_action_potential_triangle_inequality():
    theta = _flat_theta(0.5, -0.3, 0.2)
    rng = np.random.default_rng(82)
    for _ in range(5):
        pts = rng.uniform(0.0, 1.0, (3, 2))
        if min(np.hypot(*(pts[i] - pts[(i + 1) % 3])) for i in range(3)) < 0.05:
            continue
        k = 0.5
        pot = {}
        for i in range(3):
            for j in range(3):
                if i != j:
                    pot[i, j] = critical.action_potential(
                        theta, pts[i], pts[j], k).value
        for i, j, m in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
            assert pot[i, j] <= pot[i, m] + pot[m, j] + 1e-3


def test_deck_shift_of_exact_form_telescopes():
    # theta = dF pulled back by a lattice shift: f_psi(x) = F(x) - F(psi x) + const
    F = lambda x, y: 0.05 * np.cos(np.pi * x) * np.cos(np.pi * y)
    def comps(x, y):
        s = 0.05 * np.pi
        return (-s * np.sin(np.pi * x) * np.cos(np.pi * y),
                -s * np.cos(np.pi * x) * np.sin(np.pi * y))
    theta = PrimitiveField(fields.CallableOneForm(comps), CoverDomain("flat-cell"))
    psi = surfaces.DeckWord((("t1", 1),), shift=np.array([1.0, 0.0]))
    base = np.array([0.5, 0.5])
    rng = np.random.default_rng(83)
    for _ in range(8):
        p = rng.uniform(0.0, 1.0, 2)
        got = critical.deck_potential_shift(theta, psi, p, base_point=base)
        moved = psi.apply(p[0], p[1])
        moved_b = psi.apply(base[0], base[1])
        ref = (F(p[0], p[1]) - F(*moved)) - (F(base[0], base[1]) - F(*moved_b))
        assert abs(got - ref) <= 1e-9


def test_equivariance_defect_small_for_invariant_primitive():
    theta = _flat_theta()
    psi = surfaces.DeckWord((("t1", 1), ("t2", -1)),
                            shift=np.array([1.0, -1.0]))
    defect = critical.equivariance_defect(theta, psi, (0.2, 0.3), (0.7, 0.6),
                                          k=0.5)
    assert defect <= 1e-4


def test_critical_value_of_zero_form_is_zero():
    cert = critical.critical_value_solve(
        surfaces.make_flat_torus(), fields.ConstantField(0.0),
        _zero_flat(), resolution=24)
    assert cert.c_upper <= 1e-12
    assert cert.c_lower == 0.0


def test_critical_value_sandwich_on_hyperbolic_disk():
    lam = 0.5
    model = surfaces.make_genus2_octagon(k=1.0)
    theta0 = PrimitiveField(fields.disk_constant_norm_primitive(lam),
                            CoverDomain("disk-ball"))
    cert = critical.critical_value_solve(model, fields.ConstantField(lam),
                                         theta0, resolution=96)
    ref = 0.5 * lam * lam
    assert cert.c_lower <= cert.c_upper + 1e-12
    assert abs(cert.c_upper - ref) <= 0.05 * ref
    assert cert.method["cell_max"] <= cert.c_upper + 1e-12


def test_critical_value_on_torus_brackets_the_lp_bound():
    model = surfaces.make_flat_torus()
    field = fields.torus_trig_field()
    cert = critical.critical_value_solve(model, field, _flat_theta(),
                                         resolution=32)
    assert cert.c_lower <= cert.c_upper + 1e-12
    # independently frozen LP minimax value on the same strength field
    ref = 0.0075444283095106625
    assert cert.c_upper >= ref * 0.98
    assert cert.c_upper <= ref * 1.35


def test_folner_average_keeps_curl_and_shrinks_bound():
    theta = PrimitiveField(
        fields.SumOneForm(fields.torus_trig_primitive(),
                          fields.CallableOneForm(lambda x, y: (
                              0.1 * np.sin(2 * np.pi * y), 0.0 * x))),
        CoverDomain("flat-cell"))
    deck = surfaces.make_flat_torus().deck
    averaged = critical.folner_average_primitive(theta, deck, N=3)
    rng = np.random.default_rng(84)
    x, y = rng.uniform(0.0, 1.0, (2, 40))
    c0 = theta.form.curl(x, y)
    c1 = averaged.form.curl(x, y)
    assert np.max(np.abs(c0 - c1)) <= 1e-6
    assert averaged.bound <= theta.bound + 1e-12


def test_closed_orbit_search_flat_translation():
    model = surfaces.make_flat_torus()
    field = fields.ConstantField(0.0)
    theta = _zero_flat()
    word = surfaces.DeckWord((("t1", 1),), shift=np.array([1.0, 0.0]))
    res = critical.closed_orbit_search(model, field, theta, word, k=0.5)
    assert res.ok
    assert abs(res.length - 1.0) <= 1e-8
    assert res.closing_defect <= 1e-6


def test_closed_orbit_search_hyperbolic_geodesic(genus2):
    a_mat = genus2.deck.generators["a"]
    ell = 2.0 * np.arccosh(abs(np.trace(a_mat)) / 2.0)
    theta = PrimitiveField(fields.ZeroOneForm(), CoverDomain("uhp"))
    res = critical.closed_orbit_search(genus2, fields.ConstantField(0.0),
                                       theta, a_mat, k=0.5)
    assert res.ok
    assert abs(res.length - ell) <= 1e-4
    assert res.closing_defect <= 1e-3


def test_degenerate_inputs():
    theta = _zero_flat()
    q = critical.action_potential(theta, (0.2, 0.2), (0.2, 0.2), k=0.5)
    assert q.value == 0.0
    assert q.diagnostics["degenerate"]
    with pytest.raises(critical.DegenerateInputError):
        critical.action_potential(theta, (0.1, 0.1), (0.8, 0.8), k=-1.0)
    strong = PrimitiveField(fields.uhp_scaling_invariant_primitive(2.0),
                            CoverDomain("uhp"))
    with pytest.raises(critical.DegenerateInputError):
        # k below the supercritical threshold bound^2 / 2 = 2
        critical.action_potential(strong, (0.0, 1.0), (1.0, 1.0), k=1.0)
