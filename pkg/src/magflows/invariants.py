"""Liouville action, asymptotic Maslov index, and asymptotic cycles.

The magnetic form decomposes as Omega = c K Omega_a + d rho with
c = (integral of f dA) / (2 pi chi); the primitive of the twisted form
evaluates on the flow vector as -1 - c f(x) + rho_x(v), a function on the
unit sphere bundle, so the Liouville action is a space average.  The
asymptotic Maslov index is the Birkhoff average of vertical-crossing
counts per unit time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import fields as fields_mod
from .errors import DegenerateInputError, UnsupportedModelError
from .flow import integrate_batch, liouville_samples
from .surfaces import SurfaceModel, make_genus2_octagon
from .variation import maslov_count_batch


@dataclass(frozen=True)
class ValueWithError:
    value: float
    stderr: float

    def __iter__(self):
        return iter((self.value, self.stderr))

    def within_sigma(self, target: float, n_sigma: float = 3.0,
                     floor: float = 0.0) -> bool:
        return abs(self.value - target) <= max(n_sigma * self.stderr, floor)

    def __str__(self):
        return f"{self.value:.6g} +- {self.stderr:.2g}"


@dataclass(frozen=True)
class InvariantReport:
    action_formula: float
    action_montecarlo: ValueWithError
    maslov_rate: ValueWithError
    asymptotic_cycle: tuple
    horocycle_verdict: str
    evidence: dict


class PrimitiveEvaluator:
    """The pair (c, rho) with Omega = c K Omega_a + d rho on the quotient."""

    def __init__(self, c: float, rho, model: SurfaceModel):
        self.c = float(c)
        self.rho = rho  # OneForm or None for rho = 0
        self.model = model

    def rho_on_velocity(self, x, y, phi):
        """rho_x(v) for the unit vector of direction angle phi."""
        if self.rho is None:
            return np.zeros(np.broadcast_shapes(np.shape(x), np.shape(phi)))
        p, q = self.rho.components(x, y)
        e = np.exp(-self.model.sigma(x, y))
        return e * (p * np.cos(phi) + q * np.sin(phi))

    def consistency_residual(self, field, resolution: int = 24) -> float:
        """max |f - c K - e^{-2 sigma} curl(rho)| over a probe quadrature grid."""
        model = self.model
        if model.deck.kind == "fuchsian":
            pts, _ = model._octagon_nodes(resolution)
            from .surfaces import disk_to_uhp

            z = disk_to_uhp(pts)
            x, y = z.real, z.imag
        else:
            n = max(resolution, 8)
            u = (np.arange(n) + 0.5) / n
            uu, ww = np.meshgrid(u, u)
            basis = model.deck.basis
            x = basis[0, 0] * uu + basis[0, 1] * ww
            y = basis[1, 0] * uu + basis[1, 1] * ww
        f = field.value(x, y)
        k = model.curvature(x, y)
        target = f - self.c * k
        if self.rho is None:
            resid = target
        else:
            resid = target - np.exp(-2.0 * model.sigma(x, y)) * self.rho.curl(x, y)
        return float(np.abs(resid).max())


def build_primitive_evaluator(model: SurfaceModel, field) -> PrimitiveEvaluator:
    """Construct (c, rho) for the supported model/field combinations."""
    chi = model.euler_char
    if chi is None:
        raise UnsupportedModelError("primitive decomposition needs a closed quotient")
    f_total = field.area_integral(model)
    if chi != 0:
        c = f_total / (2.0 * np.pi * chi)
    else:
        if abs(f_total) > 1e-9 * (1.0 + model.area):
            raise UnsupportedModelError(
                "on a torus the magnetic form must have zero total flux "
                f"(got {f_total:g}) for an exact primitive"
            )
        c = 0.0
    if isinstance(field, fields_mod.ConstantField):
        if chi == 0 and field.c != 0.0:
            raise UnsupportedModelError("constant nonzero flux on a torus is not exact")
        return PrimitiveEvaluator(c, None, model)
    if isinstance(field, fields_mod.RadialLaplacianBumpField):
        if model.deck.kind != "fuchsian" or model.scale != 0.0:
            raise UnsupportedModelError(
                "the radial-bump primitive is built for the curvature -1 quotient"
            )

        bump = field.bump
        amp = field.amplitude

        def comps(x, y):
            wx, wy = bump.grad_w(x, y)
            return -amp * wy, amp * wx

        return PrimitiveEvaluator(c, fields_mod.CallableOneForm(comps), model)
    if model.deck.kind == "lattice" and model.sigma_field is None:
        # flat cell: solve the Poisson problem for a primitive spectrally
        n = 128
        u = (np.arange(n)) / n
        basis = model.deck.basis
        if abs(basis[0, 1]) > 1e-14 or abs(basis[1, 0]) > 1e-14:
            raise UnsupportedModelError("grid primitives need axis-aligned lattices")
        xs = basis[0, 0] * u
        ys = basis[1, 1] * u
        xg, yg = np.meshgrid(xs, ys)
        density = np.asarray(field.value(xg, yg), dtype=float) * np.exp(
            2.0 * model.sigma(xg, yg)
        )
        density -= density.mean()
        bbox = (0.0, basis[0, 0], 0.0, basis[1, 1])
        rho = fields_mod.torus_fft_poisson_primitive(density, bbox)
        return PrimitiveEvaluator(c, rho, model)
    raise UnsupportedModelError(
        f"no primitive construction for {type(field).__name__} on {model.name}"
    )


def contact_value(pe: PrimitiveEvaluator, field, p) -> float:
    """Primitive of the twisted form on the flow vector: -1 - c f + rho(v)."""
    f = float(field.value(p.x, p.y))
    rho_v = float(pe.rho_on_velocity(p.x, p.y, p.phi))
    return -1.0 - pe.c * f + rho_v


def _contact_values(pe, field, x, y, phi):
    f = field.value(x, y)
    return -1.0 - pe.c * f + pe.rho_on_velocity(x, y, phi)


def liouville_action_formula(model: SurfaceModel, field) -> float:
    """Closed formula -1 - (integral f dA)^2 / (2 pi chi A); needs chi < 0."""
    chi = model.euler_char
    if chi is None or chi >= 0:
        raise UnsupportedModelError(
            "the action formula needs a higher-genus quotient (chi < 0)"
        )
    f_total = field.area_integral(model)
    return -1.0 - (f_total * f_total) / (2.0 * np.pi * chi * model.area)


def liouville_action_montecarlo(model: SurfaceModel, field,
                                pe: PrimitiveEvaluator, N: int,
                                T: float = 0.0, seed=0) -> ValueWithError:
    """Monte-Carlo Liouville average of the contact value.

    The integrand is a function on the sphere bundle, so no time
    integration is involved (T accepted for interface symmetry).  The
    evaluator is verified against the field before sampling.
    """
    resid = pe.consistency_residual(field)
    if resid > 1e-6:
        raise DegenerateInputError(
            f"primitive evaluator inconsistent with the field: residual {resid:g}"
        )
    x, y, phi = liouville_samples(model, seed, N)
    vals = _contact_values(pe, field, x, y, phi)
    vals = np.asarray(vals, dtype=float)
    stderr = float(vals.std(ddof=1) / np.sqrt(N)) if N > 1 else 0.0
    return ValueWithError(float(vals.mean()), stderr)


def maslov_index_estimate(model: SurfaceModel, field, N: int, T: float,
                          dt: float = 2e-3, seed=0) -> ValueWithError:
    """Liouville average of vertical-crossing counts per unit time."""
    if T <= 0:
        raise DegenerateInputError("Maslov estimation needs a positive horizon")
    x, y, phi = liouville_samples(model, seed, N)
    counts = maslov_count_batch(model, field, x, y, phi, T, dt)
    rates = counts / T
    stderr = float(rates.std(ddof=1) / np.sqrt(N)) if N > 1 else 0.0
    return ValueWithError(float(rates.mean()), stderr)


def asymptotic_cycle_estimate(model: SurfaceModel, field, forms, N: int,
                              T: float, dt: float = 2e-3, seed=0):
    """Birkhoff averages (1/T) integral of delta(gamma') for closed forms."""
    if T <= 0:
        raise DegenerateInputError("cycle estimation needs a positive horizon")
    probe_x, probe_y = model.sample_base_points(np.random.default_rng(12345), 256)
    for i, form in enumerate(forms):
        curl = np.abs(np.asarray(form.curl(probe_x, probe_y))).max()
        if curl > 1e-6:
            raise DegenerateInputError(
                f"form {i} is not closed: max curl residual {curl:g}"
            )
    x, y, phi = liouville_samples(model, seed, N)

    def make_acc(form):
        def acc(x_, y_, phi_):
            p, q = form.components(x_, y_)
            e = np.exp(-model.sigma(x_, y_))
            return e * (p * np.cos(phi_) + q * np.sin(phi_))

        return acc

    accs = [make_acc(f) for f in forms]
    _, _, _, integrals, _ = integrate_batch(model, field, x, y, phi, T, dt,
                                            reduce="auto", accumulators=accs)
    out = []
    for j in range(len(forms)):
        rates = integrals[j] / T
        stderr = float(rates.std(ddof=1) / np.sqrt(N)) if N > 1 else 0.0
        out.append(ValueWithError(float(rates.mean()), stderr))
    return out


DEFAULT_BUDGET = {
    "n_action": 20000,
    "n_maslov": 200,
    "n_cycle": 100,
    "T": 30.0,
    "dt": 2e-3,
    "seed": 7,
    "resolution": 24,
}


def _pointwise_statistics(model: SurfaceModel, field, resolution: int):
    """Area-weighted variance of K and f and max |K + f^2| over the quotient."""
    if model.deck.kind == "fuchsian":
        pts, wts = model._octagon_nodes(resolution)
        from .surfaces import disk_to_uhp

        z = disk_to_uhp(pts)
        x, y = z.real, z.imag
        w = wts / wts.sum()
    else:
        n = max(resolution, 8)
        u = (np.arange(n) + 0.5) / n
        uu, ww = np.meshgrid(u, u)
        basis = model.deck.basis
        x = basis[0, 0] * uu + basis[0, 1] * ww
        y = basis[1, 0] * uu + basis[1, 1] * ww
        dens = np.exp(2.0 * model.sigma(x, y))
        w = (dens / dens.sum()).ravel()
        x, y = x.ravel(), y.ravel()
    k = np.broadcast_to(np.asarray(model.curvature(x, y), dtype=float), x.shape)
    f = np.broadcast_to(np.asarray(field.value(x, y), dtype=float), x.shape)
    var_k = float(np.sum(w * k * k) - np.sum(w * k) ** 2)
    var_f = float(np.sum(w * f * f) - np.sum(w * f) ** 2)
    max_kf = float(np.abs(k + f * f).max())
    return max(var_k, 0.0), max(var_f, 0.0), max_kf


def _probe_forms(model: SurfaceModel):
    if model.deck.kind == "fuchsian":
        bump = fields_mod.HyperbolicBumpData()

        def comps(x, y):
            return bump.grad_w(x, y)

        return [fields_mod.CallableOneForm(comps)]
    one = lambda x, y: (np.ones(np.broadcast_shapes(np.shape(x), np.shape(y))),
                        np.zeros(np.broadcast_shapes(np.shape(x), np.shape(y))))
    two = lambda x, y: (np.zeros(np.broadcast_shapes(np.shape(x), np.shape(y))),
                        np.ones(np.broadcast_shapes(np.shape(x), np.shape(y))))
    return [fields_mod.CallableOneForm(one), fields_mod.CallableOneForm(two)]


def horocycle_characterization_test(model: SurfaceModel, field,
                                    budget=None) -> InvariantReport:
    """Estimate both invariants plus the pointwise statistics and classify.

    Verdict "horocyclic" requires variance of K, variance of f, and
    max |K + f^2| all below 1e-6 and both invariant estimates within three
    standard errors of zero.
    """
    chi = model.euler_char
    if chi is None or chi >= 0:
        raise UnsupportedModelError("the characterization needs genus >= 2")
    b = dict(DEFAULT_BUDGET)
    if budget:
        b.update(budget)
    pe = build_primitive_evaluator(model, field)
    a_formula = liouville_action_formula(model, field)
    a_mc = liouville_action_montecarlo(model, field, pe, b["n_action"],
                                       seed=b["seed"])
    m_rate = maslov_index_estimate(model, field, b["n_maslov"], b["T"],
                                   dt=b["dt"], seed=b["seed"] + 1)
    cycle = asymptotic_cycle_estimate(model, field, _probe_forms(model),
                                      b["n_cycle"], b["T"], dt=b["dt"],
                                      seed=b["seed"] + 2)
    var_k, var_f, max_kf = _pointwise_statistics(model, field, b["resolution"])
    pointwise_ok = var_k <= 1e-6 and var_f <= 1e-6 and max_kf <= 1e-6
    stats_ok = a_mc.within_sigma(0.0) and m_rate.within_sigma(0.0)
    verdict = "horocyclic" if (pointwise_ok and stats_ok) else "not-horocyclic"
    evidence = {
        "variance_K": var_k,
        "variance_f": var_f,
        "max_abs_K_plus_f2": max_kf,
        "action_formula": a_formula,
        "action_montecarlo": a_mc.value,
        "action_stderr": a_mc.stderr,
        "maslov_rate": m_rate.value,
        "maslov_stderr": m_rate.stderr,
        "pointwise_ok": pointwise_ok,
        "statistics_ok": stats_ok,
    }
    return InvariantReport(a_formula, a_mc, m_rate, tuple(cycle), verdict, evidence)


@dataclass(frozen=True)
class ConjugacyCheckResult:
    """Both sides of the area-weighted action identity for a scaled pair.

    Scaling the metric by a (so K -> K/a, f -> f/sqrt(a), A -> aA) is a
    flow conjugacy up to the time change sqrt(a).  The literal combination
    A2*a1 - A1*a2 vanishes on time-preserving conjugacies; for this family
    both actions are equal, so the residual vanishes exactly on the
    critical family (action 0) and the time-corrected combination
    A2*a1/a - A1*a2 vanishes for every lambda.
    """

    lam1: float
    k1: float
    a: float
    lam2: float
    k2: float
    action1: float
    action2: float
    area1: float
    area2: float
    residual: float
    scaled_residual: float


def conjugacy_action_identity_check(lam1: float, k1: float,
                                    a: float = 2.0) -> ConjugacyCheckResult:
    """Compare A2*action1 with A1*action2 for the metric-scaling family."""
    if k1 <= 0 or a <= 0:
        raise DegenerateInputError("need k1 > 0 and a > 0")
    k2 = k1 / a
    lam2 = lam1 / np.sqrt(a)
    m1 = make_genus2_octagon(k1)
    m2 = make_genus2_octagon(k2)
    f1 = fields_mod.ConstantField(lam1)
    f2 = fields_mod.ConstantField(lam2)
    a1 = liouville_action_formula(m1, f1)
    a2 = liouville_action_formula(m2, f2)
    lhs = m2.area * a1
    rhs = m1.area * a2
    return ConjugacyCheckResult(
        lam1=lam1, k1=k1, a=a, lam2=lam2, k2=k2,
        action1=a1, action2=a2, area1=m1.area, area2=m2.area,
        residual=abs(lhs - rhs),
        scaled_residual=abs(lhs / a - rhs),
    )
