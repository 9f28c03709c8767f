"""Release gate: the numbered acceptance checks, shared by pytest and the CLI.

Each criterion function runs its checks and returns a plain dict:
{"criterion": n, "title": str, "passed": bool, "details": dict,
 "elapsed": seconds, "limit": seconds}.  Runtime limits are part of the
pass condition.  Criterion 9 records what is deliberately out of scope.
"""

from __future__ import annotations

import time

import numpy as np
from scipy import optimize, sparse

from . import fields as fields_mod
from . import invariants, sl2
from .critical import (
    CoverDomain,
    PrimitiveField,
    action_potential,
    closed_orbit_search,
    critical_value_solve,
    equivariance_defect,
)
from .flow import UnitPhasePoint, integrate, liouville_samples
from .surfaces import DeckWord, make_flat_torus, make_genus2_octagon, make_half_plane
from .variation import (
    conjugate_points,
    green_bundle_trace,
    green_bundle_trace_batch,
    jacobi_integrate,
)


def _result(n, title, passed, details, t0, limit):
    elapsed = time.perf_counter() - t0
    return {
        "criterion": n,
        "title": title,
        "passed": bool(passed) and elapsed < limit,
        "details": details,
        "elapsed": elapsed,
        "limit": limit,
    }


# ---------------------------------------------------------------------------


def criterion_1():
    """Exact algebraic identities of the magnetic generator family."""
    t0 = time.perf_counter()
    lams = np.linspace(-2.0, 2.0, 101)
    det_resid = 0.0
    for lam in lams:
        det = sl2.magnetic_generator(lam).det
        det_resid = max(det_resid, abs(det - (-0.25 * (1.0 - lam * lam))))
    rng = np.random.default_rng(0)
    ts = rng.uniform(-5.0, 5.0, 1000)
    ss = rng.uniform(-5.0, 5.0, 1000)
    comm_resid = max(
        sl2.horocycle_commutation_residual(float(t), float(s))
        for t, s in zip(ts, ss)
    )
    c, kappa = sl2.conjugate_to_standard_horocycle(sl2.magnetic_generator(1.0))
    conj = c.inv().matrix @ sl2.magnetic_generator(1.0).m @ c.matrix
    conj_resid = float(np.abs(conj / kappa - sl2.nilpotent_generator().m).max())
    details = {
        "det_residual": det_resid,
        "commutation_residual": comm_resid,
        "conjugacy_residual": conj_resid,
        "kappa": kappa,
    }
    passed = det_resid <= 1e-15 and comm_resid <= 1e-12 and conj_resid <= 1e-10
    return _result(1, "algebraic flow identities", passed, details, t0, 1.0)


def criterion_2():
    """Invariant-based horocycle characterization on the genus-2 quotient."""
    t0 = time.perf_counter()
    model = make_genus2_octagon(1.0)
    budget = {"n_action": 4000, "n_maslov": 1000, "n_cycle": 60,
              "T": 50.0, "dt": 2e-3, "seed": 11}
    r1 = invariants.horocycle_characterization_test(
        model, fields_mod.ConstantField(1.0), budget)
    r2 = invariants.horocycle_characterization_test(
        model, fields_mod.ConstantField(0.5), budget)
    r3 = invariants.horocycle_characterization_test(
        model, fields_mod.ConstantField(2.0), budget)
    # the Maslov rate of the strength-2 flow against sqrt(3)/pi; the count is
    # constant over orbits, so the horizon is chosen off the resonance grid
    m2 = invariants.maslov_index_estimate(model, fields_mod.ConstantField(2.0),
                                          N=1000, T=49.0, dt=2e-3, seed=13)
    target = np.sqrt(3.0) / np.pi
    maslov_rel = abs(m2.value - target) / target
    details = {
        "f1_action_formula": r1.action_formula,
        "f1_action_mc": r1.action_montecarlo.value,
        "f1_action_stderr": r1.action_montecarlo.stderr,
        "f1_maslov": r1.maslov_rate.value,
        "f1_verdict": r1.horocycle_verdict,
        "f05_action_formula": r2.action_formula,
        "f05_verdict": r2.horocycle_verdict,
        "f2_maslov_rate": m2.value,
        "f2_maslov_target": target,
        "f2_maslov_rel_err": maslov_rel,
        "f2_verdict": r3.horocycle_verdict,
    }
    passed = (
        r1.action_formula == 0.0
        and r1.action_montecarlo.value == 0.0
        and r1.action_montecarlo.stderr == 0.0
        and r1.maslov_rate.value == 0.0
        and r1.horocycle_verdict == "horocyclic"
        and r2.action_formula == -0.75
        and r2.horocycle_verdict == "not-horocyclic"
        and maslov_rel <= 0.02
        and r3.horocycle_verdict == "not-horocyclic"
    )
    return _result(2, "horocycle characterization", passed, details, t0, 300.0)


def criterion_3():
    """Constant-coefficient Jacobi/Riccati closed forms and Green limits."""
    t0 = time.perf_counter()
    model = make_half_plane(1.0)
    p0 = UnitPhasePoint(0.0, 1.0, 0.3)
    details = {}
    ok = True

    closed_forms = {
        0.0: lambda t: np.sinh(t),
        1.0: lambda t: t,
        2.0: lambda t: np.sin(np.sqrt(3.0) * t) / np.sqrt(3.0),
    }
    for f, exact in closed_forms.items():
        orbit = integrate(model, fields_mod.ConstantField(f), p0, 5.0, dt=1e-3)
        vs = jacobi_integrate(orbit, 0.0, 1.0)
        ref = exact(vs.ts)
        rel = float(np.abs(vs.y - ref).max() / np.abs(ref).max())
        details[f"jacobi_rel_err_f{f:g}"] = rel
        ok = ok and rel <= 1e-6

    orbit2 = integrate(model, fields_mod.ConstantField(2.0), p0, 5.0, dt=1e-3)
    times = conjugate_points(orbit2, 5.0)
    expected = [k * np.pi / np.sqrt(3.0) for k in (1, 2)]
    conj_err = (max(abs(a - b) for a, b in zip(times, expected))
                if len(times) == len(expected) else np.inf)
    details["conjugate_times"] = list(times)
    details["conjugate_err"] = conj_err
    ok = ok and conj_err <= 1e-8

    # the backward Jacobi solve is smooth here, so a coarser step keeps the
    # Green traces far below the tolerance slack while staying in budget
    for T in (3.0, 6.0, 10.0):
        u0 = green_bundle_trace(model, fields_mod.ConstantField(0.0), p0, T,
                                dt=4e-3)
        u1 = green_bundle_trace(model, fields_mod.ConstantField(1.0), p0, T,
                                dt=4e-3)
        uh = green_bundle_trace(model, fields_mod.ConstantField(0.5), p0, T,
                                dt=4e-3)
        g0 = abs(u0 + 1.0) <= 3.0 * np.exp(-2.0 * T)
        g1 = abs(u1) <= 2.0 / T and abs(u1 + 1.0 / T) <= 1e-9
        mu = np.sqrt(0.75)
        gh = abs(uh + mu) <= 3.0 * np.exp(-2.0 * mu * T) + 1e-12
        details[f"green_T{T:g}"] = {"f0": u0, "f1": u1, "f05": uh}
        ok = ok and g0 and g1 and gh
    return _result(3, "variation closed forms", ok, details, t0, 10.0)


def criterion_4():
    """Monte-Carlo vanishing of u_E^2 + K + f^2 under the Liouville measure."""
    t0 = time.perf_counter()
    model = make_genus2_octagon(1.0)
    T, dt, n = 20.0, 5e-3, 10000
    details = {}
    ok = True
    for f in (0.0, 1.0, 0.5):
        x, y, phi = liouville_samples(model, seed=int(10 * f) + 1, n=n)
        u_e = green_bundle_trace_batch(model, fields_mod.ConstantField(f),
                                       x, y, phi, T, dt=dt)
        vals = u_e * u_e + (-1.0) + f * f
        mean = float(vals.mean())
        stderr = float(vals.std(ddof=1) / np.sqrt(n))
        # the finite-horizon trace carries a deterministic O(1/T) tail, so
        # the tolerance is floored at the square of the contract bound 2/T
        tol = max(3.0 * stderr, (2.0 / T) ** 2 + 1e-9)
        details[f"f{f:g}"] = {"mean": mean, "stderr": stderr, "tol": tol}
        ok = ok and abs(mean) <= tol
    return _result(4, "integrated Riccati identity", ok, details, t0, 120.0)


def _lp_critical_value(theta_x, theta_y, hx, hy, n, n_dirs=16):
    """Coarse LP bracket of the torus critical value.

    Minimizes the maximum over cells of a 16-direction polyhedral norm of
    grad u + theta on the same cell-center stencil as the main solver; the
    inscribed-polygon norm underestimates the Euclidean norm by at most
    sec(pi/16) - 1 (about 2 percent).
    """
    idx = np.arange(n * n).reshape(n, n)
    i00 = idx.ravel()
    i01 = np.roll(idx, -1, axis=1).ravel()
    i10 = np.roll(idx, -1, axis=0).ravel()
    i11 = np.roll(np.roll(idx, -1, axis=0), -1, axis=1).ravel()
    rows = np.arange(n * n)

    def stencil(w00, w01, w10, w11):
        data = np.concatenate([np.full(n * n, w00), np.full(n * n, w01),
                               np.full(n * n, w10), np.full(n * n, w11)])
        cols = np.concatenate([i00, i01, i10, i11])
        return sparse.coo_matrix(
            (data, (np.tile(rows, 4), cols)), shape=(n * n, n * n)
        ).tocsr()

    gx = stencil(-1.0, 1.0, -1.0, 1.0) / (2.0 * hx)
    gy = stencil(-1.0, -1.0, 1.0, 1.0) / (2.0 * hy)
    tx = theta_x.ravel()
    ty = theta_y.ravel()
    blocks = []
    rhs = []
    minus_t = sparse.csr_matrix(-np.ones((n * n, 1)))
    for ang in np.arange(n_dirs) * (2.0 * np.pi / n_dirs):
        ca, sa = np.cos(ang), np.sin(ang)
        blocks.append(sparse.hstack([ca * gx + sa * gy, minus_t]))
        rhs.append(-(ca * tx + sa * ty))
    a_ub = sparse.vstack(blocks).tocsr()
    b_ub = np.concatenate(rhs)
    cost = np.zeros(n * n + 1)
    cost[-1] = 1.0
    bounds = [(None, None)] * (n * n) + [(0.0, None)]
    bounds[0] = (0.0, 0.0)  # pin the gauge freedom
    res = optimize.linprog(cost, A_ub=a_ub, b_ub=b_ub, bounds=bounds,
                           method="highs")
    if not res.success:
        raise RuntimeError(f"LP oracle failed: {res.message}")
    return 0.5 * float(res.x[-1]) ** 2


def criterion_5():
    """Critical-value brackets: constant-curvature family, LP oracle, zero."""
    t0 = time.perf_counter()
    details = {}
    ok = True
    genus2 = make_genus2_octagon(1.0)
    for lam in (0.5, 1.0, 1.5):
        theta0 = PrimitiveField(fields_mod.disk_constant_norm_primitive(lam),
                                CoverDomain("disk-ball"))
        cert = critical_value_solve(genus2, fields_mod.ConstantField(lam),
                                    theta0, resolution=256)
        target = 0.5 * lam * lam
        rel = abs(cert.c_upper - target) / target
        details[f"hyperbolic_lam{lam:g}"] = {
            "c_upper": cert.c_upper, "c_lower": cert.c_lower,
            "target": target, "rel_err": rel,
        }
        ok = ok and rel <= 0.05 and cert.c_lower <= cert.c_upper + 1e-12

    torus = make_flat_torus()
    field = fields_mod.torus_trig_field()
    theta_t = PrimitiveField(fields_mod.torus_trig_primitive(),
                             CoverDomain("flat-cell"))
    cert_t = critical_value_solve(torus, field, theta_t, resolution=64)
    n = 32
    centers = (np.arange(n) + 0.5) / n
    ccx, ccy = np.meshgrid(centers, centers)
    tx, ty = theta_t.form.components(ccx, ccy)
    c_lp = _lp_critical_value(tx, ty, 1.0 / n, 1.0 / n, n)
    lp_rel = abs(cert_t.c_upper - c_lp) / max(c_lp, 1e-12)
    details["torus"] = {"c_upper": cert_t.c_upper, "c_lower": cert_t.c_lower,
                        "lp_oracle": c_lp, "rel_diff": lp_rel}
    ok = ok and lp_rel <= 0.10

    theta_z = PrimitiveField(fields_mod.ZeroOneForm(), CoverDomain("disk-ball"))
    cert_z = critical_value_solve(genus2, fields_mod.ConstantField(0.0),
                                  theta_z, resolution=128)
    details["zero_field"] = {"c_upper": cert_z.c_upper, "c_lower": cert_z.c_lower}
    ok = ok and cert_z.c_upper <= 1e-10 and cert_z.c_lower == 0.0
    return _result(5, "critical value brackets", ok, details, t0, 600.0)


def criterion_6():
    """Closed orbits against algebraic lengths, and flat-torus potentials."""
    t0 = time.perf_counter()
    details = {}
    ok = True
    genus2 = make_genus2_octagon(1.0)
    a_mat = genus2.deck.generators["a"]
    ell_a = 2.0 * np.arccosh(abs(np.trace(a_mat)) / 2.0)

    theta_geo = PrimitiveField(fields_mod.ZeroOneForm(), CoverDomain("uhp"))
    geo = closed_orbit_search(genus2, fields_mod.ConstantField(0.0),
                              theta_geo, a_mat, k=0.5)
    geo_err = abs(geo.length - ell_a)
    details["geodesic"] = {
        "length": geo.length, "expected": ell_a, "err": geo_err,
        "closing_defect": geo.closing_defect, "flow_defect": geo.flow_defect,
        "ok": geo.ok,
    }
    ok = ok and geo_err <= 1e-4 and geo.closing_defect <= 1e-3 and geo.ok

    lam = 0.5
    theta_mag = PrimitiveField(
        fields_mod.uhp_axis_invariant_primitive(sl2.Sl2Element(a_mat), lam),
        CoverDomain("uhp"))
    mag = closed_orbit_search(genus2, fields_mod.ConstantField(lam),
                              theta_mag, a_mat, k=0.5)
    period_target = ell_a / np.sqrt(1.0 - lam * lam)
    mag_err = abs(mag.period - period_target)
    details["magnetic"] = {
        "period": mag.period, "expected": period_target, "err": mag_err,
        "closing_defect": mag.closing_defect, "flow_defect": mag.flow_defect,
        "ok": mag.ok,
    }
    ok = ok and mag_err <= 1e-3 and mag.closing_defect <= 1e-3 and mag.ok

    theta_flat = PrimitiveField(fields_mod.ZeroOneForm(), CoverDomain("flat-cell"))
    rng = np.random.default_rng(42)
    worst = 0.0
    for _ in range(50):
        while True:
            za = rng.uniform(0.0, 1.0, 2)
            zb = rng.uniform(0.0, 1.0, 2)
            d = float(np.hypot(*(zb - za)))
            if d >= 0.05:
                break
        q = action_potential(theta_flat, za, zb, k=0.5)
        worst = max(worst, abs(q.value - d))
    details["torus_potential_max_err"] = worst
    ok = ok and worst <= 1e-6
    return _result(6, "closed orbits", ok, details, t0, 600.0)


def criterion_7():
    """Triangle inequality, deck equivariance, and the linear lower bound."""
    t0 = time.perf_counter()
    theta = PrimitiveField(
        fields_mod.SumOneForm(
            fields_mod.torus_trig_primitive(),
            _noninvariant_exact_form(),
        ),
        CoverDomain("flat-cell"))
    torus = make_flat_torus()
    k = 0.5
    rng = np.random.default_rng(2024)
    details = {"bound": theta.bound}
    ok = True
    lower_ok = True
    tri_worst = -np.inf
    eq_worst = 0.0

    def solve(a, b):
        nonlocal lower_ok
        q = action_potential(theta, a, b, k)
        lb = q.diagnostics["lower_bound"]
        if q.value < lb - 1e-9:
            lower_ok = False
        return q.value

    def sample_point():
        return rng.uniform(0.05, 0.95, 2)

    for _ in range(20):
        while True:
            xa, xb, xc = sample_point(), sample_point(), sample_point()
            dists = [np.hypot(*(u - v)) for u, v in
                     ((xa, xb), (xa, xc), (xc, xb))]
            if min(dists) >= 0.05:
                break
        gap = solve(xa, xb) - solve(xa, xc) - solve(xc, xb)
        tri_worst = max(tri_worst, gap)

    v1 = torus.deck.v1
    v2 = torus.deck.v2
    for _ in range(20):
        while True:
            p, q = int(rng.integers(-2, 3)), int(rng.integers(-2, 3))
            if (p, q) != (0, 0):
                break
        word = DeckWord((("t1", p), ("t2", q)), shift=p * v1 + q * v2)
        while True:
            xa, xb = sample_point(), sample_point()
            if np.hypot(*(xa - xb)) >= 0.05:
                break
        defect = equivariance_defect(theta, word, xa, xb, k)
        eq_worst = max(eq_worst, defect)

    details["triangle_worst_gap"] = tri_worst
    details["equivariance_worst_defect"] = eq_worst
    details["lower_bound_ok"] = lower_ok
    ok = tri_worst <= 1e-3 and eq_worst <= 1e-3 and lower_ok
    return _result(7, "action potential properties", ok, details, t0, 600.0)


def _noninvariant_exact_form():
    """d of 0.05 cos(pi x) cos(pi y): period 2, so not lattice-invariant."""
    amp = 0.05
    pi = np.pi

    def comps(x, y):
        x = np.asarray(x, dtype=float)
        return (-amp * pi * np.sin(pi * x) * np.cos(pi * y),
                -amp * pi * np.cos(pi * x) * np.sin(pi * y))

    def jac(x, y):
        x = np.asarray(x, dtype=float)
        cc = amp * pi * pi * np.cos(pi * x) * np.cos(pi * y)
        ss = amp * pi * pi * np.sin(pi * x) * np.sin(pi * y)
        return -cc, ss, ss, -cc

    return fields_mod.CallableOneForm(comps, jac)


def criterion_8():
    """Closed-formula conjugacy identity for the metric-scaling family."""
    t0 = time.perf_counter()
    details = {}
    ok = True
    for a in (0.25, 0.5, 1.0, 2.0, 4.0):
        r = invariants.conjugacy_action_identity_check(1.0, 1.0, a)
        details[f"a{a:g}"] = {"residual": r.residual,
                              "scaled_residual": r.scaled_residual,
                              "action1": r.action1, "action2": r.action2}
        ok = ok and r.residual <= 1e-12
    return _result(8, "conjugacy action identity", ok, details, t0, 1.0)


def criterion_9():
    """Desk-scale exclusions, recorded for honesty; nothing is computed."""
    t0 = time.perf_counter()
    details = {
        "excluded": [
            "unique ergodicity of the horocycle flow",
            "rigidity conclusions for conjugacies (covered by the invariant "
            "property suites)",
            "almost-every-energy existence of closed orbits (covered by the "
            "closed-orbit searches at fixed supercritical energies)",
        ]
    }
    return _result(9, "excluded large-scale results", True, details, t0, 1.0)


CRITERIA = {
    1: criterion_1,
    2: criterion_2,
    3: criterion_3,
    4: criterion_4,
    5: criterion_5,
    6: criterion_6,
    7: criterion_7,
    8: criterion_8,
    9: criterion_9,
}


def run(numbers=None) -> list:
    selected = sorted(numbers) if numbers else sorted(CRITERIA)
    return [CRITERIA[n]() for n in selected]


def summary_line(result: dict) -> str:
    status = "PASS" if result["passed"] else "FAIL"
    return (f"criterion {result['criterion']}: {status}  {result['title']}"
            f"  ({result['elapsed']:.1f}s)")
