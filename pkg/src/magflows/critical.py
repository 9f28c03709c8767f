"""Critical values, action potentials, and closed magnetic geodesics.

Everything here lives on the universal cover.  A primitive theta of the
lifted magnetic form defines the Lagrangian L = 1/2 |v|^2 - theta(v); the
critical value is the inf over gauge shifts theta - du of sup 1/2
|theta - du|^2, bracketed from above by grid potentials (any feasible u
certifies an upper bound) and from below by loop holonomy: for every
closed loop, |loop integral of theta| <= length * sup |theta - du|, so
c >= 1/2 (holonomy / length)^2 regardless of u.

Action potentials Phi_k are free-time minima of A_{L+k} over discretized
curves: an inner fixed-time curve optimization nested in a 1-D search over
the duration.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field

import numpy as np
from scipy import optimize

from . import fields as fields_mod
from .errors import (
    BracketError,
    ConvergenceError,
    DegenerateInputError,
    UnsupportedModelError,
)

GOLDEN_BRACKET_EXTENSIONS = 12


# ---------------------------------------------------------------------------
# Cover domains


class CoverDomain:
    """Chart region of a universal cover with its conformal factor.

    kinds: "uhp" (upper half-plane, sigma = -ln y), "disk-ball" (Poincare
    disk restricted to a centered hyperbolic ball), "flat-cell" (periodic
    unit cell of a torus cover).
    """

    def __init__(self, kind, *, hyperbolic_radius=6.0, bbox=(0.0, 1.0, 0.0, 1.0)):
        if kind not in ("uhp", "disk-ball", "flat-cell"):
            raise DegenerateInputError(f"unknown cover domain kind {kind!r}")
        self.kind = kind
        self.hyperbolic_radius = float(hyperbolic_radius)
        self.chart_radius = float(np.tanh(0.5 * self.hyperbolic_radius))
        self.bbox = tuple(float(b) for b in bbox)

    def sigma(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.kind == "uhp":
            return -np.log(y)
        if self.kind == "disk-ball":
            return np.log(2.0) - np.log1p(-(x * x + y * y))
        return np.zeros(np.broadcast_shapes(x.shape, y.shape))

    def grad_sigma(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.kind == "uhp":
            z = np.zeros(np.broadcast_shapes(x.shape, y.shape))
            return z, np.broadcast_to(-1.0 / y, z.shape)
        if self.kind == "disk-ball":
            den = 1.0 - (x * x + y * y)
            return 2.0 * x / den, 2.0 * y / den
        z = np.zeros(np.broadcast_shapes(x.shape, y.shape))
        return z, z

    def probe_points(self, n=64):
        """Grid of chart points covering the working region."""
        if self.kind == "disk-ball":
            r = np.linspace(0.0, self.chart_radius * 0.999, n)
            t = np.linspace(0.0, 2 * np.pi, 2 * n, endpoint=False)
            rr, tt = np.meshgrid(r, t)
            return (rr * np.cos(tt)).ravel(), (rr * np.sin(tt)).ravel()
        if self.kind == "uhp":
            # hyperbolic box around i: |x| <= sinh(R), y in e^{+-R}
            r = self.hyperbolic_radius / 2.0
            xs = np.linspace(-np.sinh(r), np.sinh(r), n)
            ys = np.exp(np.linspace(-r, r, n))
            xx, yy = np.meshgrid(xs, ys)
            return xx.ravel(), yy.ravel()
        x0, x1, y0, y1 = self.bbox
        xs = x0 + (x1 - x0) * (np.arange(n) + 0.5) / n
        ys = y0 + (y1 - y0) * (np.arange(n) + 0.5) / n
        xx, yy = np.meshgrid(xs, ys)
        return xx.ravel(), yy.ravel()

    def form_bound(self, form, n=64) -> float:
        """sup of the metric norm e^{-sigma} |theta| over the probe grid."""
        x, y = self.probe_points(n)
        p, q = form.components(x, y)
        return float((np.exp(-self.sigma(x, y)) * np.hypot(p, q)).max())

    def base_point(self):
        if self.kind == "uhp":
            return (0.0, 1.0)
        if self.kind == "flat-cell":
            x0, x1, y0, y1 = self.bbox
            return (0.5 * (x0 + x1), 0.5 * (y0 + y1))
        return (0.0, 0.0)


class PrimitiveField:
    """A 1-form primitive of the lifted magnetic form on a cover domain."""

    def __init__(self, form, domain: CoverDomain, bound=None):
        self.form = form
        self.domain = domain
        self.bound = float(domain.form_bound(form) if bound is None else bound)

    def components(self, x, y):
        return self.form.components(x, y)

    def metric_norm(self, x, y):
        p, q = self.form.components(x, y)
        return np.exp(-self.domain.sigma(x, y)) * np.hypot(p, q)


def primitive_residual(theta: PrimitiveField, strength_fn, n=48) -> float:
    """max |e^{-2 sigma} curl(theta) - f| over the domain probe grid.

    Zero when d theta equals the lifted magnetic form f e^{2 sigma} dx^dy.
    """
    x, y = theta.domain.probe_points(n)
    curl = theta.form.curl(x, y)
    f = strength_fn(x, y) if callable(strength_fn) else strength_fn.value(x, y)
    return float(np.abs(np.exp(-2.0 * theta.domain.sigma(x, y)) * curl - f).max())


# ---------------------------------------------------------------------------
# Discretized curves and the Lagrangian action


@dataclass
class DiscretizedCurve:
    """Nodes on the cover with strictly increasing node times."""

    xs: np.ndarray
    ys: np.ndarray
    ts: np.ndarray

    def __post_init__(self):
        self.xs = np.asarray(self.xs, dtype=float)
        self.ys = np.asarray(self.ys, dtype=float)
        self.ts = np.asarray(self.ts, dtype=float)
        if len(self.xs) < 2 or len(self.ys) != len(self.xs) or len(self.ts) != len(self.xs):
            raise DegenerateInputError("curve needs matching node arrays, >= 2 nodes")
        if np.any(np.diff(self.ts) <= 0.0):
            raise DegenerateInputError("node times must be strictly increasing")

    @property
    def duration(self) -> float:
        return float(self.ts[-1] - self.ts[0])

    def speeds(self, domain: CoverDomain) -> np.ndarray:
        """Metric speed on each segment (midpoint conformal factor)."""
        dx = np.diff(self.xs)
        dy = np.diff(self.ys)
        dt = np.diff(self.ts)
        mx = 0.5 * (self.xs[1:] + self.xs[:-1])
        my = 0.5 * (self.ys[1:] + self.ys[:-1])
        return np.exp(domain.sigma(mx, my)) * np.hypot(dx, dy) / dt


def lagrangian_action(theta: PrimitiveField, curve: DiscretizedCurve,
                      k: float) -> float:
    """Midpoint-rule action of L + k = 1/2 |v|^2 - theta(v) + k."""
    dx = np.diff(curve.xs)
    dy = np.diff(curve.ys)
    dt = np.diff(curve.ts)
    if np.any(dt <= 0.0):
        raise DegenerateInputError("degenerate curve segment (non-positive time)")
    mx = 0.5 * (curve.xs[1:] + curve.xs[:-1])
    my = 0.5 * (curve.ys[1:] + curve.ys[:-1])
    e2s = np.exp(2.0 * theta.domain.sigma(mx, my))
    p, q = theta.form.components(mx, my)
    kinetic = 0.5 * e2s * (dx * dx + dy * dy) / dt
    magnetic = p * dx + q * dy
    return float(np.sum(kinetic - magnetic + k * dt))


# ---------------------------------------------------------------------------
# Critical value: inf-sup over grid potentials


@dataclass
class CriticalCertificate:
    u_grid: np.ndarray
    c_upper: float
    c_lower: float
    method: dict
    loop_witness: dict | None = None


def _cell_values(u, theta_x, theta_y, inv_e2s, hx, hy, periodic):
    """1/2 e^{-2 sigma} |grad u + theta|^2 at cell centers, plus gradient data."""
    if periodic:
        u01 = np.roll(u, -1, axis=1)
        u10 = np.roll(u, -1, axis=0)
        u11 = np.roll(u10, -1, axis=1)
        u00 = u
    else:
        u00 = u[:-1, :-1]
        u01 = u[:-1, 1:]
        u10 = u[1:, :-1]
        u11 = u[1:, 1:]
    gx = ((u01 + u11) - (u00 + u10)) / (2.0 * hx) + theta_x
    gy = ((u10 + u11) - (u00 + u01)) / (2.0 * hy) + theta_y
    q = 0.5 * inv_e2s * (gx * gx + gy * gy)
    return q, gx, gy


def _scatter_cell_gradient(wx, wy, hx, hy, periodic, shape):
    """Accumulate d(cells)/d(nodes) contributions back onto the node grid."""
    c00 = -wx / (2 * hx) - wy / (2 * hy)
    c01 = +wx / (2 * hx) - wy / (2 * hy)
    c10 = -wx / (2 * hx) + wy / (2 * hy)
    c11 = +wx / (2 * hx) + wy / (2 * hy)
    grad = np.zeros(shape)
    if periodic:
        grad += c00
        grad += np.roll(c01, 1, axis=1)
        grad += np.roll(c10, 1, axis=0)
        grad += np.roll(np.roll(c11, 1, axis=0), 1, axis=1)
    else:
        grad[:-1, :-1] += c00
        grad[:-1, 1:] += c01
        grad[1:, :-1] += c10
        grad[1:, 1:] += c11
    return grad


_SUP_SUBSAMPLE = 5


def _interpolated_sup(u, form, domain, nodes_x, nodes_y, hx, hy, periodic,
                      active):
    """Sup of 1/2 e^{-2 sigma}|grad u + theta|^2 for the bilinear interpolant.

    Every active cell is subsampled on a closed grid; the interpolant's
    gradient is exact per sub-point, theta and sigma are evaluated there.
    This dominates the cell-center max wherever the geometry varies inside
    a cell (the chart rim of the hyperbolic ball in particular).
    """
    if periodic:
        u00 = u
        u01 = np.roll(u, -1, axis=1)
        u10 = np.roll(u, -1, axis=0)
        u11 = np.roll(np.roll(u, -1, axis=0), -1, axis=1)
        bx, by = nodes_x, nodes_y
    else:
        u00 = u[:-1, :-1]
        u01 = u[:-1, 1:]
        u10 = u[1:, :-1]
        u11 = u[1:, 1:]
        bx, by = nodes_x[:-1], nodes_y[:-1]
    base_x, base_y = np.meshgrid(bx, by)
    best = 0.0
    fractions = np.linspace(0.0, 1.0, _SUP_SUBSAMPLE)
    for eta in fractions:
        gx = ((u01 - u00) * (1.0 - eta) + (u11 - u10) * eta) / hx
        py = base_y + eta * hy
        for xi in fractions:
            gy = ((u10 - u00) * (1.0 - xi) + (u11 - u01) * xi) / hy
            px = base_x + xi * hx
            tx, ty = form.components(px, py)
            with np.errstate(invalid="ignore", divide="ignore"):
                w = np.exp(-2.0 * domain.sigma(px, py))
            q = 0.5 * w * ((gx + tx) ** 2 + (gy + ty) ** 2)
            q = np.where(active, q, 0.0)
            best = max(best, float(q.max()))
    return best


def critical_value_solve(model, field, theta0: PrimitiveField,
                         resolution: int = None,
                         p_schedule=(2, 4, 8, 16, 32, 64)) -> CriticalCertificate:
    """Upper/lower bracket of the critical value c = inf_u sup 1/2 |theta - du|^2.

    The L^p schedule drives the max-cell value down with a convex inner
    problem per stage, tracking the best (smallest) iterate seen, u = 0
    included.  The reported upper value is the subsampled sup of the
    functional of that iterate's bilinear interpolant, which certifies an
    achieved value of the continuous functional; the raw cell-center max
    is kept in the method metadata.  The lower bound is the best
    loop-holonomy witness.
    """
    domain = theta0.domain
    if domain.kind == "uhp":
        raise UnsupportedModelError(
            "solve the inf-sup on the disk-ball domain (uhp has no finite grid)"
        )
    periodic = domain.kind == "flat-cell"
    if periodic:
        if model.deck.kind != "lattice":
            raise UnsupportedModelError("flat-cell domain needs a lattice deck")
        basis = model.deck.basis
        if abs(basis[0, 1]) > 1e-14 or abs(basis[1, 0]) > 1e-14:
            raise UnsupportedModelError("critical grid needs axis-aligned lattices")
        n = resolution or 32
        x0, x1, y0, y1 = domain.bbox
        grid_bbox = (x0, x1, y0, y1)
        hx = (x1 - x0) / n
        hy = (y1 - y0) / n
        nodes_x = x0 + hx * np.arange(n)
        nodes_y = y0 + hy * np.arange(n)
        cx = nodes_x + 0.5 * hx
        cy = nodes_y + 0.5 * hy
        ccx, ccy = np.meshgrid(cx, cy)
        active = np.ones((n, n), dtype=bool)
        shape = (n, n)
    else:
        if model.scale != 0.0:
            raise UnsupportedModelError(
                "hyperbolic inf-sup grid is built for base curvature -1"
            )
        if not isinstance(field, fields_mod.ConstantField):
            raise UnsupportedModelError(
                "hyperbolic inf-sup supports constant magnetic strengths"
            )
        n = resolution or 256
        r = domain.chart_radius
        xs = np.linspace(-r, r, n)
        grid_bbox = (-r, r, -r, r)
        hx = hy = xs[1] - xs[0]
        nodes_x = nodes_y = xs
        ccx, ccy = np.meshgrid(0.5 * (xs[1:] + xs[:-1]), 0.5 * (xs[1:] + xs[:-1]))
        rr = np.hypot(ccx, ccy)
        active = rr <= r - hx  # keep cells strictly inside the ball
        shape = (n, n)
    resid = primitive_residual(theta0, field, n=32)
    if resid > 1e-6 * (1.0 + theta0.bound):
        raise DegenerateInputError(
            f"theta0 does not reconstruct the magnetic form: residual {resid:g}"
        )
    theta_x, theta_y = theta0.form.components(ccx, ccy)
    theta_x = np.where(active, theta_x, 0.0)
    theta_y = np.where(active, theta_y, 0.0)
    # sigma is evaluated on the full center grid, whose inactive corners can
    # fall outside the chart; zero them exactly so no NaN leaks into gradients
    with np.errstate(invalid="ignore", divide="ignore"):
        inv_e2s = np.exp(-2.0 * domain.sigma(ccx, ccy))
    inv_e2s = np.where(active, inv_e2s, 0.0)
    n_active = int(active.sum())
    best = {"c": np.inf, "u": np.zeros(shape)}

    def qmax(u):
        q, _, _ = _cell_values(u, theta_x, theta_y, inv_e2s, hx, hy, periodic)
        return float(q[active].max())

    def refined_sup(u):
        return _interpolated_sup(u, theta0.form, domain, nodes_x, nodes_y,
                                 hx, hy, periodic, active)

    c0 = qmax(best["u"])
    best["c"] = c0
    sup0 = refined_sup(np.zeros(shape))
    certified = {"sup": sup0, "u": np.zeros(shape)}
    history = [{"p": 0, "c_upper": c0, "sup": sup0}]
    u = np.zeros(shape)
    for stage, p in enumerate(p_schedule):
        P = p / 2.0
        q_now, _, _ = _cell_values(u, theta_x, theta_y, inv_e2s, hx, hy, periodic)
        M = max(float(q_now[active].max()), 1e-300)

        def objective(u_flat, P=P, M=M):
            u2 = u_flat.reshape(shape)
            q, gx, gy = _cell_values(u2, theta_x, theta_y, inv_e2s, hx, hy, periodic)
            s = np.where(active, q / M, 0.0)
            f = float(np.sum(s**P)) / n_active
            cmax = float(q[active].max())
            if cmax < best["c"]:
                best["c"] = cmax
                best["u"] = u2.copy()
            w = (P / (M * n_active)) * np.where(active, s ** (P - 1.0), 0.0) * inv_e2s
            grad = _scatter_cell_gradient(w * gx, w * gy, hx, hy, periodic, shape)
            return f, grad.ravel()

        res = optimize.minimize(
            objective, u.ravel(), jac=True, method="L-BFGS-B",
            options={"maxiter": 400 if periodic else 200, "maxcor": 12},
        )
        if stage == 0:
            # status 1 is plain iteration-budget exhaustion and is fine; a
            # genuine stall is an abnormal line-search exit at high residual
            gnorm = float(np.abs(res.jac).max())
            if not np.isfinite(gnorm) or (
                res.status == 2 and gnorm > 1e-6 * max(1.0, abs(res.fun))
            ):
                raise ConvergenceError(
                    f"inner convex stage (p=2) stalled: grad norm {gnorm:g}"
                )
        u = res.x.reshape(shape)
        # certify each stage iterate by the sup of its bilinear interpolant;
        # the raw cell-center max can undershoot that sup near the chart rim,
        # so the discrete search value is kept as metadata only
        stage_sup = refined_sup(u)
        if stage_sup < certified["sup"]:
            certified["sup"] = stage_sup
            certified["u"] = u.copy()
        history.append({"p": p, "c_upper": best["c"], "sup": stage_sup,
                        "f": float(res.fun), "iterations": int(res.nit)})
    witness = _loop_lower_bound(theta0)
    c_lower = max(0.0, witness["value"])
    method = {
        "resolution": n,
        "p_schedule": list(p_schedule),
        "domain": domain.kind,
        "bbox": grid_bbox,
        "history": history,
        "u0_value": c0,
        "cell_max": best["c"],
        "sup_subsample": _SUP_SUBSAMPLE,
    }
    return CriticalCertificate(certified["u"], certified["sup"], c_lower,
                               method, witness)


def _loop_integral(form, xs, ys):
    """Trapezoid line integral of a 1-form around a closed polyline."""
    x = np.append(xs, xs[0])
    y = np.append(ys, ys[0])
    mx = 0.5 * (x[1:] + x[:-1])
    my = 0.5 * (y[1:] + y[:-1])
    p, q = form.components(mx, my)
    return float(np.sum(p * np.diff(x) + q * np.diff(y)))


def _loop_lower_bound(theta: PrimitiveField) -> dict:
    """Best loop-holonomy witness: c >= 1/2 (holonomy / metric length)^2."""
    domain = theta.domain
    n = 512
    t = 2.0 * np.pi * np.arange(n) / n
    best = {"value": 0.0, "loop": None}
    if domain.kind in ("disk-ball", "uhp"):
        # metric circles about the disk center
        for rh in np.linspace(0.75, domain.hyperbolic_radius * 0.995, 12):
            rc = np.tanh(0.5 * rh)
            xs = rc * np.cos(t)
            ys = rc * np.sin(t)
            if domain.kind == "uhp":
                z = 1j * (1.0 + (xs + 1j * ys)) / (1.0 - (xs + 1j * ys))
                xs, ys = z.real, z.imag
            hol = abs(_loop_integral(theta.form, xs, ys))
            length = 2.0 * np.pi * np.sinh(rh)
            val = 0.5 * (hol / length) ** 2
            if val > best["value"]:
                best = {"value": val, "loop": {"kind": "circle", "radius": rh}}
        return best
    x0, x1, y0, y1 = domain.bbox
    for axis in (0, 1):
        for off in (np.arange(8) + 0.5) / 8.0:
            if axis == 0:
                xs = x0 + (x1 - x0) * np.arange(n) / n
                ys = np.full(n, y0 + (y1 - y0) * off)
                length = x1 - x0
            else:
                ys = y0 + (y1 - y0) * np.arange(n) / n
                xs = np.full(n, x0 + (x1 - x0) * off)
                length = y1 - y0
            hol = abs(_loop_integral(theta.form, xs, ys))
            val = 0.5 * (hol / length) ** 2
            if val > best["value"]:
                best = {"value": val, "loop": {"kind": "period", "axis": axis,
                                               "offset": float(off)}}
    return best


# ---------------------------------------------------------------------------
# Folner averaging


def folner_average_primitive(theta: PrimitiveField, group, N: int) -> PrimitiveField:
    """Average of psi^* theta over a symmetric Folner box of an abelian group.

    group: a lattice deck (box = {i v1 + j v2 : |i|,|j| <= N}) or a single
    Moebius element g (box = {g^j : |j| <= N}).  The averaged form has the
    same exterior derivative and a sup-norm bounded by that of theta.
    """
    if N < 0:
        raise DegenerateInputError("box radius must be nonnegative")
    domain = theta.domain
    kind = getattr(group, "kind", None)
    if kind == "fuchsian":
        raise UnsupportedModelError(
            "Folner averaging needs an abelian group; a surface group is not"
        )
    pulled = []
    if kind == "lattice":
        for i in range(-N, N + 1):
            for j in range(-N, N + 1):
                shift = i * group.v1 + j * group.v2
                if i == 0 and j == 0:
                    pulled.append(theta.form)
                else:
                    pulled.append(fields_mod.PulledBackOneForm(theta.form, shift=shift))
    else:
        g = np.asarray(getattr(group, "matrix", group), dtype=float)
        if g.shape != (2, 2):
            raise DegenerateInputError("cyclic group needs a 2x2 Moebius generator")
        mats = {0: np.eye(2)}
        for j in range(1, N + 1):
            mats[j] = mats[j - 1] @ g
            mats[-j] = np.linalg.inv(mats[j])
        for j in range(-N, N + 1):
            if j == 0:
                pulled.append(theta.form)
            else:
                pulled.append(fields_mod.PulledBackOneForm(theta.form, matrix=mats[j]))
    averaged = fields_mod.AveragedOneForm(pulled)
    return PrimitiveField(averaged, domain)


# ---------------------------------------------------------------------------
# Action potential


@dataclass
class PotentialQuery:
    x: tuple
    y: tuple
    k: float
    value: float
    minimizer: DiscretizedCurve
    diagnostics: dict = dataclass_field(default_factory=dict)

    @property
    def duration(self) -> float:
        return self.minimizer.duration


DEFAULT_POTENTIAL_BUDGET = {
    "nodes": 48,
    "refine_nodes": 192,
    "maxiter": 200,
    "t_tol": 1e-7,
    "scan": 7,
}


def _domain_ok(domain, xs, ys):
    """True when every node is strictly inside the chart domain."""
    if domain.kind == "uhp":
        return bool(np.all(ys > 0.0))
    if domain.kind == "disk-ball":
        return bool(np.all(xs * xs + ys * ys < 1.0))
    return True


def _fixed_time_action(theta: PrimitiveField, za, zb, k, T, m, init=None,
                       maxiter=200):
    """Minimize the action over interior nodes of an m-segment curve.

    Returns (value, xs, ys).  Gradients of the midpoint action are exact
    given the form's Jacobian.
    """
    domain = theta.domain
    tau = T / m
    if init is None:
        s = np.linspace(0.0, 1.0, m + 1)
        xs = za[0] + (zb[0] - za[0]) * s
        ys = za[1] + (zb[1] - za[1]) * s
        if domain.kind == "uhp":
            # geometric interpolation of heights is much closer to geodesics
            ys = za[1] * (zb[1] / za[1]) ** s
    else:
        xs, ys = init
        xs = xs.copy()
        ys = ys.copy()
        xs[0], ys[0] = za
        xs[-1], ys[-1] = zb

    def unpack(z):
        xs_i = np.empty(m + 1)
        ys_i = np.empty(m + 1)
        xs_i[0], ys_i[0] = za
        xs_i[-1], ys_i[-1] = zb
        xs_i[1:-1] = z[: m - 1]
        ys_i[1:-1] = z[m - 1 :]
        return xs_i, ys_i

    def fg(z):
        X, Y = unpack(z)
        if not _domain_ok(domain, X, Y):
            # infinite barrier: the line search backs off cleanly instead of
            # propagating NaN from sigma outside the chart
            return np.inf, np.zeros(2 * (m - 1))
        dx = np.diff(X)
        dy = np.diff(Y)
        mx = 0.5 * (X[1:] + X[:-1])
        my = 0.5 * (Y[1:] + Y[:-1])
        sig = domain.sigma(mx, my)
        gsx, gsy = domain.grad_sigma(mx, my)
        e2s = np.exp(2.0 * sig)
        p, q = theta.form.components(mx, my)
        px, py, qx, qy = theta.form.jacobian(mx, my)
        d2 = dx * dx + dy * dy
        val = float(np.sum(0.5 * e2s * d2 / tau - (p * dx + q * dy) + k * tau))
        # segment-value partials w.r.t. endpoints (a = left node, b = right);
        # the midpoint shifts by half the endpoint shift
        sig_x = e2s * gsx * d2 / (2.0 * tau)
        sig_y = e2s * gsy * d2 / (2.0 * tau)
        jx = 0.5 * (px * dx + qx * dy)
        jy = 0.5 * (py * dx + qy * dy)
        bx = sig_x + e2s * dx / tau - jx
        by = sig_y + e2s * dy / tau - jy
        ax = sig_x - e2s * dx / tau - jx
        ay = sig_y - e2s * dy / tau - jy
        gx = np.zeros(m + 1)
        gy = np.zeros(m + 1)
        gx[1:] += bx - p
        gy[1:] += by - q
        gx[:-1] += ax + p
        gy[:-1] += ay + q
        return val, np.concatenate([gx[1:-1], gy[1:-1]])

    z0 = np.concatenate([xs[1:-1], ys[1:-1]])
    res = optimize.minimize(fg, z0, jac=True, method="L-BFGS-B",
                            options={"maxiter": maxiter, "maxcor": 12})
    X, Y = unpack(res.x)
    return float(res.fun), X, Y


def action_potential(theta: PrimitiveField, x, y, k: float,
                     budget=None) -> PotentialQuery:
    """Free-time action potential Phi_k(x, y) with its minimizing curve.

    Supercritical regime only: requires k > 1/2 bound(theta)^2 so the
    action of long curves grows linearly and the time profile has a
    minimum.  Phi_k(x, x) = 0 by convention.
    """
    b = dict(DEFAULT_POTENTIAL_BUDGET)
    if budget:
        b.update(budget)
    za = (float(x[0]), float(x[1]))
    zb = (float(y[0]), float(y[1]))
    k = float(k)
    eps = k - 0.5 * theta.bound**2
    if eps <= 0.0:
        raise DegenerateInputError(
            f"k={k:g} is not supercritical for bound {theta.bound:g} "
            f"(need k > {0.5 * theta.bound ** 2:g})"
        )
    d = _domain_distance(theta.domain, za, zb)
    if d == 0.0:
        ts = np.array([0.0, 1.0])
        curve = DiscretizedCurve(np.array([za[0], zb[0]]),
                                 np.array([za[1], zb[1]]), ts)
        return PotentialQuery(za, zb, k, 0.0, curve,
                              {"degenerate": True, "epsilon": eps,
                               "lower_bound": 0.0})
    m = int(b["nodes"])
    sqrt2k = np.sqrt(2.0 * k)
    t_lo = d / (2.0 * sqrt2k)
    t_hi = 4.0 * d / sqrt2k
    warm = {}

    def profile(T):
        init = None
        if warm:
            nearest = min(warm, key=lambda s: abs(s - T))
            init = warm[nearest]
        val, X, Y = _fixed_time_action(theta, za, zb, k, T, m, init,
                                       maxiter=b["maxiter"])
        warm[T] = (X, Y)
        return val, (X, Y)

    # coarse scan; extend the bracket while the minimum sits on an edge
    extensions = 0
    scan_hist = []
    while True:
        ts = np.geomspace(t_lo, t_hi, b["scan"])
        vals = []
        for T in ts:
            v, _ = profile(T)
            vals.append(v)
        scan_hist.append({"t": list(map(float, ts)), "v": list(map(float, vals))})
        imin = int(np.argmin(vals))
        if imin == 0:
            t_lo *= 0.5
        elif imin == len(ts) - 1:
            t_hi *= 2.0
        else:
            t_lo, t_hi = ts[imin - 1], ts[imin + 1]
            break
        extensions += 1
        if extensions > GOLDEN_BRACKET_EXTENSIONS:
            raise BracketError(
                f"no interior minimum over T in [{t_lo:g}, {t_hi:g}]; "
                f"profile: {scan_hist}"
            )

    res = optimize.minimize_scalar(
        lambda T: profile(T)[0], bounds=(t_lo, t_hi), method="bounded",
        options={"xatol": b["t_tol"] * max(1.0, t_hi)},
    )
    t_star = float(res.x)
    # refinement pass at higher node count
    m2 = int(b["refine_nodes"])
    _, (X, Y) = profile(t_star)
    s_old = np.linspace(0.0, 1.0, m + 1)
    s_new = np.linspace(0.0, 1.0, m2 + 1)
    X2 = np.interp(s_new, s_old, X)
    Y2 = np.interp(s_new, s_old, Y)
    val2, X2, Y2 = _fixed_time_action(theta, za, zb, k, t_star, m2, (X2, Y2),
                                      maxiter=b["maxiter"])

    def refine_profile(T):
        v, _, _ = _fixed_time_action(theta, za, zb, k, T, m2, (X2, Y2),
                                     maxiter=b["maxiter"] // 2)
        return v

    span = 0.05 * t_star
    res2 = optimize.minimize_scalar(
        refine_profile, bounds=(max(t_star - span, 0.25 * t_star), t_star + span),
        method="bounded", options={"xatol": b["t_tol"] * max(1.0, t_star)},
    )
    if res2.fun < val2:
        t_star = float(res2.x)
        val2, X2, Y2 = _fixed_time_action(theta, za, zb, k, t_star, m2, (X2, Y2),
                                          maxiter=b["maxiter"])
    curve = DiscretizedCurve(X2, Y2, np.linspace(0.0, t_star, m2 + 1))
    lower = (eps / sqrt2k) * d
    diag = {
        "epsilon": eps,
        "chart_distance": d,
        "lower_bound": lower,
        "duration": t_star,
        "profile_scans": scan_hist,
        "bracket": (float(t_lo), float(t_hi)),
    }
    return PotentialQuery(za, zb, k, float(val2), curve, diag)


def _domain_distance(domain: CoverDomain, za, zb) -> float:
    if domain.kind == "flat-cell":
        return float(np.hypot(zb[0] - za[0], zb[1] - za[1]))
    if domain.kind == "uhp":
        from .surfaces import uhp_distance

        return float(uhp_distance(complex(*za), complex(*zb)))
    from .surfaces import disk_distance

    return float(disk_distance(complex(*za), complex(*zb)))


# ---------------------------------------------------------------------------
# Equivariance


def _apply_deck(psi, x, y):
    """Apply a deck element given as DeckWord, matrix, shift, or wrapper."""
    if hasattr(psi, "apply"):
        return psi.apply(x, y)
    arr = np.asarray(getattr(psi, "matrix", psi), dtype=float)
    if arr.shape == (2,):
        return x + arr[0], y + arr[1]
    if arr.shape == (2, 2):
        z = np.asarray(x, dtype=float) + 1j * np.asarray(y, dtype=float)
        w = (arr[0, 0] * z + arr[0, 1]) / (arr[1, 0] * z + arr[1, 1])
        return w.real, w.imag
    raise DegenerateInputError("deck element must be a word, 2-vector, or 2x2 matrix")


def _pullback_form(psi, form):
    if hasattr(psi, "shift") and getattr(psi, "shift", None) is not None:
        return fields_mod.PulledBackOneForm(form, shift=psi.shift)
    if hasattr(psi, "apply") and getattr(psi, "matrix", None) is None:
        return form  # identity word
    arr = np.asarray(getattr(psi, "matrix", psi), dtype=float)
    if arr.shape == (2,):
        return fields_mod.PulledBackOneForm(form, shift=arr)
    return fields_mod.PulledBackOneForm(form, matrix=arr)


def deck_potential_shift(theta: PrimitiveField, psi, point,
                         base_point=None, n_nodes=32) -> float:
    """f_psi(point): line integral of theta - psi^* theta from the base point.

    Well-defined (path independent) because the integrand is closed with
    vanishing periods on the simply connected cover.  The orientation is
    the one that makes Phi_k(psi x, psi y) = Phi_k(x, y) + f_psi(y) -
    f_psi(x) hold for the action with the minus-theta coupling: moving a
    curve by psi changes its action by the integral of theta - psi^* theta
    along the original curve.
    """
    domain = theta.domain
    x0, y0 = base_point if base_point is not None else domain.base_point()
    x1, y1 = float(point[0]), float(point[1])
    diff = _pullback_form(psi, theta.form)
    gl_x, gl_w = np.polynomial.legendre.leggauss(n_nodes)
    s = 0.5 * (gl_x + 1.0)
    w = 0.5 * gl_w
    xs = x0 + (x1 - x0) * s
    ys = y0 + (y1 - y0) * s
    p1, q1 = diff.components(xs, ys)
    p0, q0 = theta.form.components(xs, ys)
    return float(np.sum(w * ((p0 - p1) * (x1 - x0) + (q0 - q1) * (y1 - y0))))


def equivariance_defect(theta: PrimitiveField, psi, x, y, k: float,
                        budget=None) -> float:
    """|Phi_k(psi x, psi y) - Phi_k(x, y) - f_psi(y) + f_psi(x)|."""
    phi_xy = action_potential(theta, x, y, k, budget).value
    px = _apply_deck(psi, float(x[0]), float(x[1]))
    py = _apply_deck(psi, float(y[0]), float(y[1]))
    phi_psi = action_potential(theta, px, py, k, budget).value
    f_y = deck_potential_shift(theta, psi, y)
    f_x = deck_potential_shift(theta, psi, x)
    return abs(phi_psi - phi_xy - f_y + f_x)


# ---------------------------------------------------------------------------
# Closed-orbit search


@dataclass
class ClosedOrbitResult:
    ok: bool
    base_point: tuple
    value: float
    period: float
    length: float
    closing_defect: float
    flow_defect: float
    energy_residual: float
    minimizer: DiscretizedCurve
    diagnostics: dict = dataclass_field(default_factory=dict)


def _default_uhp_grid():
    pts = [(0.0, 1.0)]
    for rh in (0.5, 1.0, 1.5):
        rc = np.tanh(0.5 * rh)
        for ang in np.arange(8) * np.pi / 4:
            w = rc * np.exp(1j * ang)
            z = 1j * (1 + w) / (1 - w)
            pts.append((float(z.real), float(z.imag)))
    return pts


def closed_orbit_search(model, field, theta: PrimitiveField, phi_word, k: float,
                        x_grid=None, budget=None, closing_tol=1e-3) -> ClosedOrbitResult:
    """Closed magnetic geodesic in the free homotopy class of a deck element.

    Minimizes x -> Phi_k(x, phi x) over a coarse grid plus a local simplex
    refinement, extracts the minimizing curve, and checks the closing
    condition |d phi(gamma'(0)) - gamma'(R)| <= closing_tol in the metric
    at the junction.  The curve, run at speed sqrt(2k), is a unit-speed
    magnetic geodesic for the strength field scaled by 1/sqrt(2k).
    """
    b = dict(DEFAULT_POTENTIAL_BUDGET)
    b["nodes"] = 40
    if budget:
        b.update(budget)
    domain = theta.domain
    mat = getattr(phi_word, "matrix", phi_word)
    if hasattr(mat, "matrix"):
        mat = mat.matrix
    deck_map = phi_word if mat is None else np.asarray(mat, dtype=float)

    def F(pt):
        image = _apply_deck(deck_map, pt[0], pt[1])
        q = action_potential(theta, pt, image, k, b)
        return q

    if x_grid is None:
        x_grid = _default_uhp_grid() if domain.kind == "uhp" else \
            [(ix / 4.0, iy / 4.0) for ix in range(4) for iy in range(4)]
    best_pt, best_val = None, np.inf
    for pt in x_grid:
        try:
            val = F(pt).value
        except (BracketError, DegenerateInputError):
            continue
        if val < best_val:
            best_pt, best_val = pt, val
    if best_pt is None:
        raise BracketError("no feasible starting point on the search grid")

    nm = optimize.minimize(
        lambda p: F((p[0], p[1])).value, np.asarray(best_pt, dtype=float),
        method="Nelder-Mead",
        options={"xatol": 1e-5, "fatol": 1e-9, "maxiter": 80},
    )
    x_star = (float(nm.x[0]), float(nm.x[1]))
    query = F(x_star)
    curve = query.minimizer
    tau = curve.ts[1] - curve.ts[0]
    z = curve.xs + 1j * curve.ys
    v0 = (-3.0 * z[0] + 4.0 * z[1] - z[2]) / (2.0 * tau)
    vR = (3.0 * z[-1] - 4.0 * z[-2] + z[-3]) / (2.0 * tau)
    if isinstance(deck_map, np.ndarray) and deck_map.shape == (2, 2):
        a, bb, c, dd = deck_map.ravel()
        dpsi = (a * dd - bb * c) / (c * z[0] + dd) ** 2
    else:
        dpsi = 1.0  # translation
    junction_sigma = float(domain.sigma(z[-1].real, z[-1].imag))
    closing_defect = float(np.exp(junction_sigma) * abs(dpsi * v0 - vR))
    sqrt2k = np.sqrt(2.0 * k)
    period = sqrt2k * query.duration
    speeds = curve.speeds(domain)
    interior = speeds[1:-1]
    energy_residual = float(np.abs(0.5 * interior**2 - k).max() / k)
    flow_defect = _flow_closing_defect(model, field, curve, domain, sqrt2k,
                                       deck_map, closing_defect)
    ok = closing_defect <= closing_tol
    return ClosedOrbitResult(
        ok=ok, base_point=x_star, value=float(query.value), period=period,
        length=period, closing_defect=closing_defect, flow_defect=flow_defect,
        energy_residual=energy_residual, minimizer=curve,
        diagnostics={"nm_iterations": int(nm.nit), "phi_value": float(query.value),
                     "grid_value": float(best_val), "epsilon": query.diagnostics.get("epsilon")},
    )


def _flow_closing_defect(model, field, curve, domain, sqrt2k, deck_map,
                         closing_defect):
    """Re-integrate the unit-speed magnetic flow along the found orbit and
    measure how far it lands from the deck image of the start."""
    from .flow import UnitPhasePoint, integrate

    if closing_defect > 0.1:
        return np.inf
    tau = curve.ts[1] - curve.ts[0]
    z = curve.xs + 1j * curve.ys
    v0 = (-3.0 * z[0] + 4.0 * z[1] - z[2]) / (2.0 * tau)
    phi0 = float(np.angle(v0))
    scale = 1.0 / sqrt2k

    def scaled_value(x, y):
        return scale * field.value(x, y)

    def scaled_gradient(x, y):
        gx, gy = field.gradient(x, y)
        return scale * gx, scale * gy

    scaled = fields_mod.CallableField(scaled_value, scaled_gradient)
    scaled.chart_global = getattr(field, "chart_global", True)
    p0 = UnitPhasePoint(float(curve.xs[0]), float(curve.ys[0]), phi0)
    length = sqrt2k * curve.duration
    try:
        orbit = integrate(model, scaled, p0, length, dt=min(1e-3, length / 200),
                          reduce="none")
    except Exception:
        return np.inf
    end = orbit.end
    tx, ty = _apply_deck(deck_map, curve.xs[0], curve.ys[0])
    gap = np.hypot(end.x - tx, end.y - ty)
    return float(np.exp(domain.sigma(tx, ty)) * gap)
