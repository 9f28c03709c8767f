"""Magnetic flow on the unit sphere bundle of a conformal surface chart.

States are (x, y, phi) with phi the direction angle of the unit tangent
vector in the chart; the angle representation keeps |v|_g = 1 exactly, so
the flow's energy residual vanishes identically.  The equations in a
conformal chart e^{2 sigma}(dx^2 + dy^2) with magnetic strength f:

    x'   = e^{-sigma} cos phi
    y'   = e^{-sigma} sin phi
    phi' = f + e^{-sigma}(sigma_y cos phi - sigma_x sin phi)

so magnetic geodesics have geodesic curvature f(x, y) pointwise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, StepSizeError, UnsupportedModelError

DEFAULT_DT = 1e-3
MAX_TURN_PER_STEP = np.pi / 4


@dataclass(frozen=True)
class UnitPhasePoint:
    x: float
    y: float
    phi: float

    def as_tuple(self):
        return (self.x, self.y, self.phi)


def phase_rhs(model, field, x, y, phi):
    """Time derivatives (x', y', phi') of the magnetic flow; vectorized."""
    sig = model.sigma(x, y)
    e = np.exp(-sig)
    c = np.cos(phi)
    s = np.sin(phi)
    gx, gy = model.grad_sigma(x, y)
    f = field.value(x, y)
    return e * c, e * s, f + e * (gy * c - gx * s)


def vector_field(model, field, p: UnitPhasePoint):
    """Flow vector at a phase point: ((x', y'), phi')."""
    model.require_in_chart(p.x, p.y)
    dx, dy, dphi = phase_rhs(model, field, p.x, p.y, p.phi)
    return (float(dx), float(dy)), float(dphi)


class OrbitSegment:
    """Sampled magnetic-flow orbit with its integration context.

    Stores the full (t, x, y, phi) traces, the deck reductions applied
    (events), and enough context (model, field, dt, reduce mode) for the
    variation module to re-run the same path jointly with linearized data.
    """

    __slots__ = (
        "model", "field", "ts", "xs", "ys", "phis", "events",
        "dt", "reduce_mode", "accumulated", "diagnostics",
    )

    def __init__(self, model, field, ts, xs, ys, phis, events, dt, reduce_mode,
                 accumulated=(), diagnostics=None):
        self.model = model
        self.field = field
        self.ts = np.asarray(ts)
        self.xs = np.asarray(xs)
        self.ys = np.asarray(ys)
        self.phis = np.asarray(phis)
        self.events = events
        self.dt = dt
        self.reduce_mode = reduce_mode
        self.accumulated = tuple(accumulated)
        self.diagnostics = diagnostics or {}

    def __len__(self):
        return len(self.ts)

    @property
    def duration(self) -> float:
        return float(self.ts[-1] - self.ts[0])

    def state(self, i: int) -> UnitPhasePoint:
        return UnitPhasePoint(float(self.xs[i]), float(self.ys[i]), float(self.phis[i]))

    @property
    def start(self) -> UnitPhasePoint:
        return self.state(0)

    @property
    def end(self) -> UnitPhasePoint:
        return self.state(len(self.ts) - 1)

    def word_lengths(self) -> np.ndarray:
        """Cumulative deck-word letters applied up to each sample."""
        out = np.zeros(len(self.ts), dtype=int)
        for i, word in self.events:
            out[i:] += word.length
        return out


def _step_plan(T: float, dt: float):
    if dt <= 0:
        raise DegenerateInputError(f"dt must be positive, got {dt:g}")
    span = abs(T)
    if span == 0.0:
        return np.array([]), 1.0
    sign = 1.0 if T > 0 else -1.0
    n_full = int(np.floor(span / dt + 1e-9))
    rem = span - n_full * dt
    steps = np.full(n_full, dt)
    if rem > 1e-12 * max(1.0, span):
        steps = np.append(steps, rem)
    return sign * steps, sign


def _should_reduce(model, field, mode: str) -> bool:
    if mode == "none":
        return False
    if model.deck.kind == "trivial":
        if mode == "step":
            return False
        return False
    if mode == "step":
        return True
    if mode == "auto":
        return not getattr(field, "chart_global", True)
    raise DegenerateInputError(f"unknown reduce mode {mode!r}")


def integrate(model, field, p0: UnitPhasePoint, T: float, dt: float = DEFAULT_DT,
              reduce: str = "step", accumulators=()) -> OrbitSegment:
    """Fixed-step 4th-order integration of the magnetic flow.

    reduce: "step" applies fundamental-domain reduction after every step
    (no-op for trivial deck groups), "none" stays on the cover, "auto"
    reduces only when the field requires in-domain evaluation.  Negative T
    integrates backward.  accumulators are scalar integrands g(x, y, phi)
    whose time integrals are carried as extra state (same order as the
    flow itself).
    """
    model.require_in_chart(p0.x, p0.y)
    steps, _ = _step_plan(T, dt)
    do_reduce = _should_reduce(model, field, reduce)
    n = len(steps)
    ts = np.empty(n + 1)
    xs = np.empty(n + 1)
    ys = np.empty(n + 1)
    phis = np.empty(n + 1)
    ts[0] = 0.0
    xs[0], ys[0], phis[0] = p0.x, p0.y, p0.phi
    acc = np.zeros(len(accumulators))
    events = []
    max_turn = 0.0
    x, y, phi = p0.x, p0.y, p0.phi
    for i, h in enumerate(steps):
        x, y, phi, acc, turn = _rk4_step(model, field, x, y, phi, acc, accumulators, h)
        if turn > MAX_TURN_PER_STEP:
            raise StepSizeError(
                f"turning angle {turn:.3g} rad in one step exceeds pi/4; reduce dt"
            )
        max_turn = max(max_turn, turn)
        if do_reduce:
            (xr, yr), word = model.deck.reduce((x, y))
            if not word.is_identity:
                phi = phi + float(word.derivative_angle(x, y))
                x, y = xr, yr
                events.append((i + 1, word))
        ts[i + 1] = ts[i] + h
        xs[i + 1], ys[i + 1], phis[i + 1] = x, y, phi
    diagnostics = {
        "energy_residual_max": 0.0,  # exact in the angle chart
        "max_turn_per_step": float(max_turn),
        "reduction_events": len(events),
    }
    return OrbitSegment(model, field, ts, xs, ys, phis, events, dt, reduce,
                        accumulated=acc, diagnostics=diagnostics)


def _rk4_step(model, field, x, y, phi, acc, accumulators, h):
    def full_rhs(x_, y_, phi_):
        dx, dy, dphi = phase_rhs(model, field, x_, y_, phi_)
        da = [g(x_, y_, phi_) for g in accumulators]
        return dx, dy, dphi, da

    k1 = full_rhs(x, y, phi)
    k2 = full_rhs(x + 0.5 * h * k1[0], y + 0.5 * h * k1[1], phi + 0.5 * h * k1[2])
    k3 = full_rhs(x + 0.5 * h * k2[0], y + 0.5 * h * k2[1], phi + 0.5 * h * k2[2])
    k4 = full_rhs(x + h * k3[0], y + h * k3[1], phi + h * k3[2])
    x1 = x + h / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
    y1 = y + h / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    dphi = h / 6.0 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
    if accumulators:
        da = np.array([
            k1[3][j] + 2 * k2[3][j] + 2 * k3[3][j] + k4[3][j]
            for j in range(len(accumulators))
        ])
        acc = acc + (h / 6.0) * da
    return x1, y1, phi + dphi, acc, abs(dphi)


def integrate_batch(model, field, x0, y0, phi0, T: float, dt: float = DEFAULT_DT,
                    reduce: str = "auto", accumulators=()):
    """Vectorized integration of many orbits at once (final states only).

    Returns (x, y, phi, acc, info) where acc has one row per accumulator
    holding its time integral along each orbit.
    """
    x = np.array(x0, dtype=float, copy=True)
    y = np.array(y0, dtype=float, copy=True)
    phi = np.array(phi0, dtype=float, copy=True)
    if not (x.shape == y.shape == phi.shape):
        raise DegenerateInputError("batch initial arrays must share a shape")
    model.require_in_chart(x, y)
    steps, _ = _step_plan(T, dt)
    do_reduce = _should_reduce(model, field, reduce)
    acc = np.zeros((len(accumulators),) + x.shape)
    max_turn = 0.0
    reductions = 0

    def full_rhs(x_, y_, phi_):
        dx, dy, dphi = phase_rhs(model, field, x_, y_, phi_)
        da = [np.asarray(g(x_, y_, phi_), dtype=float) for g in accumulators]
        return dx, dy, dphi, da

    for h in steps:
        k1 = full_rhs(x, y, phi)
        k2 = full_rhs(x + 0.5 * h * k1[0], y + 0.5 * h * k1[1], phi + 0.5 * h * k1[2])
        k3 = full_rhs(x + 0.5 * h * k2[0], y + 0.5 * h * k2[1], phi + 0.5 * h * k2[2])
        k4 = full_rhs(x + h * k3[0], y + h * k3[1], phi + h * k3[2])
        x = x + h / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        y = y + h / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        dphi = h / 6.0 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
        turn = float(np.max(np.abs(dphi))) if dphi.shape else abs(float(dphi))
        if turn > MAX_TURN_PER_STEP:
            raise StepSizeError(
                f"turning angle {turn:.3g} rad in one step exceeds pi/4; reduce dt"
            )
        max_turn = max(max_turn, turn)
        phi = phi + dphi
        for j in range(len(accumulators)):
            acc[j] += (h / 6.0) * (k1[3][j] + 2 * k2[3][j] + 2 * k3[3][j] + k4[3][j])
        if do_reduce:
            x, y, dphi_red, nsteps = model.deck.reduce_points(x, y)
            phi = phi + dphi_red
            reductions += int(np.sum(nsteps > 0))
    info = {"max_turn_per_step": max_turn, "reduction_events": reductions}
    return x, y, phi, acc, info


# ---------------------------------------------------------------------------
# Liouville sampling


def liouville_samples(model, seed, n: int):
    """n independent Liouville-measure samples as arrays (x, y, phi)."""
    if not model.is_compact:
        raise UnsupportedModelError(f"{model.name} has no Liouville probability measure")
    rng = np.random.default_rng(seed)
    x, y = model.sample_base_points(rng, n)
    phi = rng.uniform(0.0, 2.0 * np.pi, n)
    return x, y, phi


def liouville_sample(model, seed) -> UnitPhasePoint:
    """One Liouville sample: base point uniform for the area form, angle uniform."""
    x, y, phi = liouville_samples(model, seed, 1)
    return UnitPhasePoint(float(x[0]), float(y[0]), float(phi[0]))
