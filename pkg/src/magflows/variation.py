"""Linearized magnetic flow: Jacobi fields, Riccati traces, Maslov counts.

Along a unit-speed magnetic geodesic, a variation field J = xc * T + y * N
(tangential and normal components in the oriented orbit frame) satisfies

    xc' = f(gamma) y
    y'' + Q(t) y = 0,    Q = K(gamma) - <grad f, i gamma'> + f(gamma)^2

with the metric pairing <grad f, i gamma'> = e^{-sigma}(-f_x sin phi
+ f_y cos phi) in a conformal chart.  The Riccati variable u = y'/y
satisfies u' + u^2 + Q = 0 and is tracked projectively so poles are data,
not failures.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field as dataclass_field

import numpy as np

from .errors import ConjugatePointError, DegenerateInputError
from .flow import OrbitSegment, _step_plan, phase_rhs

DEGENERATE_YDOT = 1e-10


@dataclass
class VariationState:
    """Traces of a scalar magnetic Jacobi field along an orbit."""

    ts: np.ndarray
    xcomp: np.ndarray
    y: np.ndarray
    ydot: np.ndarray
    along: OrbitSegment

    def wronskian_with(self, other: "VariationState") -> np.ndarray:
        return self.y * other.ydot - other.y * self.ydot


@dataclass
class RiccatiTrace:
    """Riccati samples u(t) with pole (blow-up) times."""

    ts: np.ndarray
    u: np.ndarray
    blowups: list = dataclass_field(default_factory=list)


def _jacobi_q(model, field, x, y, phi):
    """Q = K - <grad f, i gamma'> + f^2 at phase points (vectorized)."""
    k = model.curvature(x, y)
    f = field.value(x, y)
    fx, fy = field.gradient(x, y)
    cross = np.exp(-model.sigma(x, y)) * (-fx * np.sin(phi) + fy * np.cos(phi))
    return k - cross + f * f


def _joint_rhs(model, field, x, y, phi, xc, yj, vj):
    dx, dy, dphi = phase_rhs(model, field, x, y, phi)
    f = field.value(x, y)
    q = _jacobi_q(model, field, x, y, phi)
    return dx, dy, dphi, f * yj, vj, -q * yj


def _reintegrate_joint(orbit: OrbitSegment, y0, ydot0, x0):
    """March the base orbit again, carrying (xc, y, y') as extra state.

    Replays the same step plan and reduction policy as the stored orbit, so
    the base path reproduces orbit.xs/ys/phis; the scalar Jacobi data is
    invariant under the (isometric) deck reductions.
    """
    model, fld = orbit.model, orbit.field
    steps, _ = _step_plan(orbit.duration, orbit.dt)
    from .flow import _should_reduce

    do_reduce = _should_reduce(model, fld, orbit.reduce_mode)
    n = len(steps)
    ts = np.empty(n + 1)
    yjs = np.empty(n + 1)
    vjs = np.empty(n + 1)
    xcs = np.empty(n + 1)
    ts[0] = orbit.ts[0]
    x, y, phi = orbit.xs[0], orbit.ys[0], orbit.phis[0]
    xc, yj, vj = float(x0), float(y0), float(ydot0)
    xcs[0], yjs[0], vjs[0] = xc, yj, vj
    state = np.array([x, y, phi, xc, yj, vj])
    for i, h in enumerate(steps):
        state = _rk4_vec(model, fld, state, h)
        if do_reduce:
            (xr, yr), word = model.deck.reduce((state[0], state[1]))
            if not word.is_identity:
                state[2] += float(word.derivative_angle(state[0], state[1]))
                state[0], state[1] = xr, yr
        ts[i + 1] = ts[i] + h
        xcs[i + 1], yjs[i + 1], vjs[i + 1] = state[3], state[4], state[5]
    return ts, xcs, yjs, vjs


def _rk4_vec(model, fld, state, h):
    def rhs(s):
        return np.array(_joint_rhs(model, fld, *s))

    k1 = rhs(state)
    k2 = rhs(state + 0.5 * h * k1)
    k3 = rhs(state + 0.5 * h * k2)
    k4 = rhs(state + h * k3)
    return state + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def jacobi_integrate(orbit: OrbitSegment, y0: float, ydot0: float,
                     x0: float = 0.0) -> VariationState:
    """Scalar magnetic Jacobi field along a stored orbit."""
    if orbit.dt > 1e-2:
        raise DegenerateInputError(
            f"orbit resolution dt={orbit.dt:g} too coarse for variation work"
        )
    ts, xcs, yjs, vjs = _reintegrate_joint(orbit, y0, ydot0, x0)
    return VariationState(ts, xcs, yjs, vjs, orbit)


def _hermite_zero(t0, t1, y0, y1, v0, v1, tol=1e-9):
    """Zero of the cubic Hermite interpolant on [t0, t1] with y0*y1 < 0."""
    h = t1 - t0

    def val(t):
        s = (t - t0) / h
        h00 = (1 + 2 * s) * (1 - s) ** 2
        h10 = s * (1 - s) ** 2
        h01 = s * s * (3 - 2 * s)
        h11 = s * s * (s - 1)
        return h00 * y0 + h10 * h * v0 + h01 * y1 + h11 * h * v1

    a, b = t0, t1
    fa = y0
    for _ in range(80):
        m = 0.5 * (a + b)
        fm = val(m)
        if fm == 0.0 or (b - a) < tol:
            return m
        if (fa < 0) == (fm < 0):
            a, fa = m, fm
        else:
            b = m
    return 0.5 * (a + b)


def _hermite_derivative(t, t0, t1, y0, y1, v0, v1):
    h = t1 - t0
    s = (t - t0) / h
    d00 = (6 * s * s - 6 * s) / h
    d10 = 3 * s * s - 4 * s + 1
    d01 = (6 * s - 6 * s * s) / h
    d11 = 3 * s * s - 2 * s
    return d00 * y0 + d10 * v0 + d01 * y1 + d11 * v1


def _zero_crossings(ts, ys, vs, t_max, skip_initial_zero=True):
    """(times, derivatives) of zeros of the sampled solution on (0, t_max]."""
    times = []
    derivs = []
    n = len(ts)
    i0 = 1 if skip_initial_zero and ys[0] == 0.0 else 0
    for i in range(i0, n - 1):
        if ts[i] >= t_max - 1e-12:
            break
        y0, y1 = ys[i], ys[i + 1]
        if y0 == 0.0:
            if i > i0 or not skip_initial_zero:
                times.append(ts[i])
                derivs.append(vs[i])
            continue
        if y0 * y1 < 0.0:
            t_hi = min(ts[i + 1], t_max)
            tz = _hermite_zero(ts[i], ts[i + 1], y0, y1, vs[i], vs[i + 1])
            if tz <= t_hi + 1e-12:
                times.append(min(tz, t_max))
                derivs.append(_hermite_derivative(tz, ts[i], ts[i + 1],
                                                  y0, y1, vs[i], vs[i + 1]))
    if n and abs(ys[-1]) == 0.0 and ts[-1] <= t_max + 1e-12:
        times.append(ts[-1])
        derivs.append(vs[-1])
    return times, derivs


def conjugate_points(orbit: OrbitSegment, T: float) -> list:
    """Times in (0, T] conjugate to 0 along the orbit (zeros of the
    vertical Jacobi solution), refined to 1e-9."""
    if T > orbit.duration + 1e-9:
        raise DegenerateInputError("requested horizon exceeds the orbit length")
    vs = jacobi_integrate(orbit, 0.0, 1.0, 0.0)
    times, _ = _zero_crossings(vs.ts, vs.y, vs.ydot, T)
    return times


def riccati_integrate(orbit: OrbitSegment, u0: float) -> RiccatiTrace:
    """Riccati trace u' = -(u^2 + Q) along the orbit, tracked projectively.

    Carries (a, b) with u = b/a and a' = b, b' = -Q a; zeros of a are the
    poles of u, recorded in blowups.  Renormalized each step, so poles are
    crossed smoothly.
    """
    ts, a, b = _projective_trace(orbit, 1.0, float(u0))
    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.where(a != 0.0, b / np.where(a == 0.0, 1.0, a), np.inf)
    pole_times, _ = _zero_crossings(ts, a, b, ts[-1], skip_initial_zero=False)
    return RiccatiTrace(ts, u, list(pole_times))


def _projective_trace(orbit: OrbitSegment, a0, b0):
    model, fld = orbit.model, orbit.field
    steps, _ = _step_plan(orbit.duration, orbit.dt)
    from .flow import _should_reduce

    do_reduce = _should_reduce(model, fld, orbit.reduce_mode)
    n = len(steps)
    ts = np.empty(n + 1)
    aa = np.empty(n + 1)
    bb = np.empty(n + 1)
    ts[0] = orbit.ts[0]
    state = np.array([orbit.xs[0], orbit.ys[0], orbit.phis[0], 0.0, a0, b0])
    aa[0], bb[0] = a0, b0
    scale = 1.0
    for i, h in enumerate(steps):
        state = _rk4_vec(model, fld, state, h)
        if do_reduce:
            (xr, yr), word = model.deck.reduce((state[0], state[1]))
            if not word.is_identity:
                state[2] += float(word.derivative_angle(state[0], state[1]))
                state[0], state[1] = xr, yr
        m = max(abs(state[4]), abs(state[5]))
        if m > 0:
            state[4] /= m
            state[5] /= m
        ts[i + 1] = ts[i] + h
        aa[i + 1], bb[i + 1] = state[4], state[5]
    return ts, aa, bb


def green_bundle_trace(model, field, p, T: float, dt: float = 1e-3) -> float:
    """Finite-horizon Green-bundle Riccati value u_E^{(T)} at the start point.

    Transports the vertical plane at time T back to time 0 along the orbit
    and returns its slope u = y'/y there.  Requires no conjugate points on
    (0, T], which is checked first.
    """
    from .flow import integrate

    orbit = integrate(model, field, p, T, dt, reduce="auto")
    vert = jacobi_integrate(orbit, 0.0, 1.0, 0.0)
    zeros, _ = _zero_crossings(vert.ts, vert.y, vert.ydot, T)
    if zeros:
        raise ConjugatePointError(
            f"conjugate point at t={zeros[0]:.6g} inside the horizon [0, {T:g}]"
        )
    # backward transport of the vertical plane at the endpoint
    back = integrate(model, field, orbit.end, -T, dt, reduce="auto")
    vb = jacobi_integrate(back, 0.0, 1.0, 0.0)
    y_end, v_end = vb.y[-1], vb.ydot[-1]
    if y_end == 0.0:
        raise ConjugatePointError("vertical plane returned vertical at time 0")
    return float(v_end / y_end)


def green_bundle_trace_batch(model, field, x0, y0, phi0, T: float,
                             dt: float = 1e-3):
    """Vectorized u_E^{(T)} over many start phase points.

    Forward pass checks for conjugate points (error if any orbit has one);
    backward pass transports the endpoint vertical plane to time 0.
    """
    x, y, phi, yj, vj, crossings = _batch_joint(model, field, x0, y0, phi0,
                                                T, dt, 0.0, 1.0)
    if int(crossings.max(initial=0)) > 0:
        raise ConjugatePointError("conjugate points inside the horizon for "
                                  f"{int((crossings > 0).sum())} orbits")
    xb, yb, phib, yjb, vjb, _ = _batch_joint(model, field, x, y, phi,
                                             -T, dt, 0.0, 1.0)
    if np.any(yjb == 0.0):
        raise ConjugatePointError("vertical plane returned vertical at time 0")
    return vjb / yjb


def _batch_joint(model, field, x0, y0, phi0, T, dt, yj0, vj0):
    """March (x, y, phi, yj, vj) for a batch; count sign changes of yj."""
    x = np.array(x0, dtype=float, copy=True)
    y = np.array(y0, dtype=float, copy=True)
    phi = np.array(phi0, dtype=float, copy=True)
    yj = np.full_like(x, float(yj0))
    vj = np.full_like(x, float(vj0))
    steps, _ = _step_plan(T, dt)
    from .flow import _should_reduce

    do_reduce = _should_reduce(model, field, "auto")
    crossings = np.zeros(x.shape, dtype=int)

    def rhs(x_, y_, phi_, yj_, vj_):
        dx, dy, dphi = phase_rhs(model, field, x_, y_, phi_)
        q = _jacobi_q(model, field, x_, y_, phi_)
        return dx, dy, dphi, vj_, -q * yj_

    for h in steps:
        k1 = rhs(x, y, phi, yj, vj)
        k2 = rhs(x + 0.5 * h * k1[0], y + 0.5 * h * k1[1], phi + 0.5 * h * k1[2],
                 yj + 0.5 * h * k1[3], vj + 0.5 * h * k1[4])
        k3 = rhs(x + 0.5 * h * k2[0], y + 0.5 * h * k2[1], phi + 0.5 * h * k2[2],
                 yj + 0.5 * h * k2[3], vj + 0.5 * h * k2[4])
        k4 = rhs(x + h * k3[0], y + h * k3[1], phi + h * k3[2],
                 yj + h * k3[3], vj + h * k3[4])
        x = x + h / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        y = y + h / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        phi = phi + h / 6.0 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
        yj_new = yj + h / 6.0 * (k1[3] + 2 * k2[3] + 2 * k3[3] + k4[3])
        vj = vj + h / 6.0 * (k1[4] + 2 * k2[4] + 2 * k3[4] + k4[4])
        crossings += (yj * yj_new < 0.0).astype(int)
        yj = yj_new
        if do_reduce:
            x, y, dphi_red, _ = model.deck.reduce_points(x, y)
            phi = phi + dphi_red
    return x, y, phi, yj, vj, crossings


def maslov_count(orbit: OrbitSegment, T: float, E0=(0.0, 1.0)) -> int:
    """Crossings of the transported Lagrangian line E0 with the vertical
    on (0, T], one per transverse crossing.

    E0 = (y0, y'0) encodes the initial line in the Jacobi phase plane; the
    default is the vertical itself (so the count equals the number of
    conjugate points).  A crossing with |y'| < 1e-10 is degenerate: counted
    once, with a warning.
    """
    y0, v0 = float(E0[0]), float(E0[1])
    if y0 == 0.0 and v0 == 0.0:
        raise DegenerateInputError("E0 must be a nonzero direction")
    vs = jacobi_integrate(orbit, y0, v0, 0.0)
    times, derivs = _zero_crossings(vs.ts, vs.y, vs.ydot, T,
                                    skip_initial_zero=(y0 == 0.0))
    return _count_with_degenerate_warnings(times, derivs)


def _count_with_degenerate_warnings(times, derivs) -> int:
    count = 0
    for tz, dz in zip(times, derivs):
        if abs(dz) < DEGENERATE_YDOT:
            warnings.warn(
                f"degenerate (non-transverse) vertical crossing at t={tz:.6g}; "
                "counted once", RuntimeWarning, stacklevel=2,
            )
        count += 1
    return count


def maslov_count_batch(model, field, x0, y0, phi0, T: float,
                       dt: float = 1e-3, E0=(0.0, 1.0)) -> np.ndarray:
    """Vertical-crossing counts for a batch of orbits (transverse counting
    on the step grid; no degeneracy refinement)."""
    e_y, e_v = float(E0[0]), float(E0[1])
    _, _, _, _, _, crossings = _batch_joint(model, field, x0, y0, phi0, T, dt,
                                            e_y, e_v)
    return crossings
