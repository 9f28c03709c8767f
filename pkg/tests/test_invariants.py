"""Liouville action and Maslov rate: formulas, estimators, classification."""

import numpy as np
import pytest

from magflows import fields, flow, invariants, surfaces


def test_action_formula_exact_values(genus2):
    assert invariants.liouville_action_formula(genus2, fields.ConstantField(1.0)) == 0.0
    assert invariants.liouville_action_formula(genus2, fields.ConstantField(0.5)) == -0.75
    assert abs(invariants.liouville_action_formula(genus2, fields.ConstantField(2.0))
               - 3.0) <= 1e-14
    assert invariants.liouville_action_formula(genus2, fields.ConstantField(0.0)) == -1.0


def test_action_formula_requires_negative_euler_characteristic(torus, sphere):
    for model in (torus, sphere):
        with pytest.raises(invariants.UnsupportedModelError):
            invariants.liouville_action_formula(model, fields.ConstantField(1.0))


def test_contact_value_is_constant_for_constant_fields(genus2):
    rng = np.random.default_rng(70)
    for lam in (0.0, 0.5, 1.0, 1.6):
        field = fields.ConstantField(lam)
        pe = invariants.build_primitive_evaluator(genus2, field)
        xs, ys = genus2.sample_base_points(rng, 20)
        for x, y in zip(xs, ys):
            p = flow.UnitPhasePoint(x, y, rng.uniform(0, 2 * np.pi))
            assert abs(invariants.contact_value(pe, field, p)
                       - (lam * lam - 1.0)) <= 1e-12


def test_montecarlo_action_agrees_with_formula(genus2):
    field = fields.ConstantField(0.5)
    pe = invariants.build_primitive_evaluator(genus2, field)
    est = invariants.liouville_action_montecarlo(genus2, field, pe, N=4000, seed=1)
    ref = invariants.liouville_action_formula(genus2, field)
    assert est.within_sigma(ref, n_sigma=3.0, floor=1e-9)
    again = invariants.liouville_action_montecarlo(genus2, field, pe, N=4000, seed=1)
    assert est.value == again.value and est.stderr == again.stderr


def test_montecarlo_action_with_bump_field(genus2):
    # nonconstant field: exercises the curvature-multiple + exact-form split
    field, _, _ = fields.hyperbolic_bump_family(base=0.8, amplitude=0.25)
    pe = invariants.build_primitive_evaluator(genus2, field)
    assert pe.consistency_residual(field, resolution=32) <= 1e-6
    est = invariants.liouville_action_montecarlo(genus2, field, pe, N=6000, seed=2)
    ref = invariants.liouville_action_formula(genus2, field)
    assert est.within_sigma(ref, n_sigma=4.0, floor=1e-6)


def test_maslov_rate_for_strong_constant_field(genus2):
    est = invariants.maslov_index_estimate(genus2, fields.ConstantField(2.0),
                                           N=50, T=49.0, seed=13)
    ref = np.sqrt(3.0) / np.pi
    assert abs(est.value - ref) <= 0.02 * ref


def test_maslov_rate_vanishes_below_threshold(genus2):
    est = invariants.maslov_index_estimate(genus2, fields.ConstantField(0.8),
                                           N=20, T=20.0, seed=4)
    assert est.value == 0.0
    assert est.stderr == 0.0


def test_cycle_estimate_exact_form_averages_to_zero(genus2):
    bump = fields.HyperbolicBumpData()
    form = fields.CallableOneForm(lambda x, y: bump.grad_w(x, y))
    out = invariants.asymptotic_cycle_estimate(genus2, fields.ConstantField(1.0),
                                               [form], N=64, T=20.0, seed=5)
    est = out[0]
    # dW averages to (W(end) - W(start)) / T plus sampling noise
    assert abs(est.value) <= 3.0 * est.stderr + 2.0 * np.exp(-1.0) / 20.0


def test_cycle_estimate_on_torus_homology_basis(torus):
    one = lambda x, y: (np.ones(np.broadcast_shapes(np.shape(x), np.shape(y))),
                        np.zeros(np.broadcast_shapes(np.shape(x), np.shape(y))))
    form = fields.CallableOneForm(one)
    out = invariants.asymptotic_cycle_estimate(torus, fields.ConstantField(0.0),
                                               [form], N=400, T=10.0, seed=6)
    est = out[0]
    assert abs(est.value) <= 4.0 * est.stderr + 1e-12


def test_cycle_estimate_rejects_nonclosed_forms(torus):
    swirl = fields.CallableOneForm(lambda x, y: (-y, x))
    with pytest.raises(invariants.DegenerateInputError):
        invariants.asymptotic_cycle_estimate(torus, fields.ConstantField(0.0),
                                             [swirl], N=4, T=1.0)


def test_characterization_verdicts(genus2):
    budget = {"n_action": 2000, "n_maslov": 60, "n_cycle": 30,
              "T": 20.0, "dt": 2e-3, "seed": 3}
    rep1 = invariants.horocycle_characterization_test(
        genus2, fields.ConstantField(1.0), budget)
    assert rep1.horocycle_verdict == "horocyclic"
    assert rep1.action_formula == 0.0
    rep2 = invariants.horocycle_characterization_test(
        genus2, fields.ConstantField(0.5), budget)
    assert rep2.horocycle_verdict != "horocyclic"
    assert rep2.action_formula == -0.75


def test_conjugacy_identity_residuals():
    for a in (0.5, 1.0, 2.0, 3.5):
        res = invariants.conjugacy_action_identity_check(1.0, 1.0, a)
        assert res.residual <= 1e-12
        assert res.scaled_residual <= 1e-12
    # a general conjugacy rescales the invariants; only the scaled identity holds
    res = invariants.conjugacy_action_identity_check(0.7, 2.0, 1.5)
    assert res.scaled_residual <= 1e-12
    assert abs(res.k2 - 2.0 / 1.5) <= 1e-14


def test_value_with_error_sigma_window():
    v = invariants.ValueWithError(1.0, 0.1)
    assert v.within_sigma(1.25, n_sigma=3.0)
    assert not v.within_sigma(1.5, n_sigma=3.0)
    exact = invariants.ValueWithError(0.5, 0.0)
    assert exact.within_sigma(0.5)
    assert exact.within_sigma(0.5 + 1e-12, floor=1e-9)
