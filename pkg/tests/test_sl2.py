"""Algebraic layer: generators, exponentials, conjugation, frame charts."""

import numpy as np
import pytest
from scipy.linalg import expm

from magflows import sl2


def test_magnetic_generator_determinant_identity():
    for lam in np.linspace(-2.0, 2.0, 161):
        X = sl2.magnetic_generator(lam)
        assert abs(X.det - (-0.25 * (1.0 - lam * lam))) <= 1e-15
        assert abs(np.trace(X.m)) == 0.0


def _random_traceless(rng, scale=2.0):
    a, b, c = rng.uniform(-scale, scale, size=3)
    return sl2.Sl2Generator(np.array([[a, b], [c, -a]]))


def test_generator_rejects_nonzero_trace():
    with pytest.raises(sl2.DegenerateInputError):
        sl2.Sl2Generator(np.array([[2.0, 1.0], [3.0, 4.0]]))


def test_exp_matches_dense_matrix_exponential():
    # elements are projective classes, so compare up to the overall sign
    rng = np.random.default_rng(5)
    for _ in range(200):
        X = _random_traceless(rng)
        t = rng.uniform(-3.0, 3.0)
        g = sl2.exp_generator(X, t)
        ref = expm(t * X.m)
        scale = max(1.0, float(np.max(np.abs(ref))))
        assert g.distance(sl2.Sl2Element(ref)) <= 1e-10 * scale
        assert abs(g.det - 1.0) <= 1e-10 * scale * scale


def test_exp_one_parameter_group_property():
    rng = np.random.default_rng(6)
    for _ in range(100):
        X = _random_traceless(rng, scale=1.5)
        s, t = rng.uniform(-2.0, 2.0, size=2)
        lhs = sl2.exp_generator(X, s + t)
        rhs = sl2.exp_generator(X, s) @ sl2.exp_generator(X, t)
        scale = max(1.0, float(np.max(np.abs(lhs.matrix))))
        assert lhs.distance(rhs) <= 1e-11 * scale


def test_classifier_follows_determinant_sign():
    cases = [(0.0, "geodesic-like"), (0.5, "geodesic-like"),
             (1.0, "horocyclic"), (-1.0, "horocyclic"),
             (1.5, "elliptic"), (2.0, "elliptic")]
    for lam, label in cases:
        kind, det = sl2.classify_generator(sl2.magnetic_generator(lam))
        assert kind == label
        assert abs(det - (-0.25 * (1.0 - lam * lam))) <= 1e-15


def test_horocycle_commutation_residual_vanishes():
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(500):
        t, s = rng.uniform(-5.0, 5.0, size=2)
        worst = max(worst, sl2.horocycle_commutation_residual(t, s))
    assert worst <= 1e-12


def test_conjugation_to_standard_horocycle_generator():
    N = sl2.nilpotent_generator().m
    rng = np.random.default_rng(3)
    for _ in range(50):
        # random horocyclic generator: conjugate kappa N by a random frame
        g = sl2.exp_generator(_random_traceless(rng, scale=1.0), 1.0)
        kappa0 = rng.uniform(0.2, 3.0) * rng.choice([-1.0, 1.0])
        X = sl2.Sl2Generator(g.matrix @ (kappa0 * N) @ g.inv().matrix)
        c, kappa = sl2.conjugate_to_standard_horocycle(X)
        res = c.inv().matrix @ X.m @ c.matrix / kappa - N
        assert np.max(np.abs(res)) <= 1e-10
        assert abs(c.det - 1.0) <= 1e-12


def test_frame_phase_round_trip():
    rng = np.random.default_rng(11)
    for _ in range(200):
        x = rng.uniform(-4.0, 4.0)
        y = rng.uniform(0.1, 5.0)
        phi = rng.uniform(0.0, 2.0 * np.pi)
        g = sl2.phase_to_frame(x, y, phi)
        assert abs(g.det - 1.0) <= 1e-12
        x2, y2, phi2 = sl2.frame_to_phase(g)
        assert abs(x2 - x) <= 1e-10
        assert abs(y2 - y) <= 1e-10 * max(1.0, y)
        dphi = (phi2 - phi + np.pi) % (2.0 * np.pi) - np.pi
        assert abs(dphi) <= 1e-10


def test_mobius_action_matches_complex_arithmetic():
    rng = np.random.default_rng(12)
    for _ in range(100):
        m = rng.uniform(-2.0, 2.0, size=(2, 2))
        m /= np.sqrt(abs(np.linalg.det(m)))
        z = complex(rng.uniform(-2, 2), rng.uniform(0.1, 3.0))
        w = sl2.mobius_point(m, z.real, z.imag)
        ref = (m[0, 0] * z + m[0, 1]) / (m[1, 0] * z + m[1, 1])
        assert abs(complex(w[0], w[1]) - ref) <= 1e-12 * max(1.0, abs(ref))


def test_quotient_flow_step_stays_in_domain(genus2):
    deck = genus2.deck
    g = sl2.phase_to_frame(0.05, 1.1, 0.3)
    X = sl2.magnetic_generator(0.7)
    for _ in range(40):
        g = sl2.quotient_flow_step(deck, g, X, 0.25)
        z = g.mobius(1j)
        _, word = deck.reduce(np.array([z.real, z.imag]))
        assert word.is_identity
        assert abs(g.det - 1.0) <= 1e-9


def test_quotient_flow_step_rejects_lattice_decks(torus):
    g = sl2.phase_to_frame(0.0, 1.0, 0.0)
    X = sl2.magnetic_generator(0.5)
    with pytest.raises(sl2.UnsupportedModelError):
        sl2.quotient_flow_step(torus.deck, g, X, 0.1)
