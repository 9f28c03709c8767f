"""Scalar fields and 1-forms on chart domains.

Scalar fields represent magnetic strengths f and conformal factors; 1-forms
represent primitives of area-form multiples.  All evaluations are
vectorized over numpy arrays of chart coordinates.  Components of a 1-form
are chart components (p, q) meaning p dx + q dy; metric quantities are
formed by the callers, which know the conformal factor.
"""

from __future__ import annotations

import numpy as np

from .errors import DegenerateInputError

_FD_H = 1e-5


class ScalarField:
    """Base scalar field; subclasses implement value()."""

    #: fields that can be evaluated anywhere in the chart (no fundamental
    #: domain reduction needed before evaluation)
    chart_global = True

    def value(self, x, y):
        raise NotImplementedError

    def gradient(self, x, y):
        """Chart partial derivatives (f_x, f_y); centered differences by default."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        h = _FD_H
        fx = (self.value(x + h, y) - self.value(x - h, y)) / (2 * h)
        fy = (self.value(x, y + h) - self.value(x, y - h)) / (2 * h)
        return fx, fy

    def laplacian(self, x, y):
        """Chart (Euclidean) Laplacian; centered differences by default."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        h = 1e-4
        f0 = self.value(x, y)
        return (
            self.value(x + h, y)
            + self.value(x - h, y)
            + self.value(x, y + h)
            + self.value(x, y - h)
            - 4.0 * f0
        ) / (h * h)

    def area_integral(self, model) -> float:
        """Integral of the field against the area form of the model."""
        return model.quadrature(self.value)


class ConstantField(ScalarField):
    def __init__(self, c: float):
        self.c = float(c)

    def value(self, x, y):
        return np.broadcast_to(np.float64(self.c), np.broadcast_shapes(np.shape(x), np.shape(y))).copy() if np.ndim(x) or np.ndim(y) else self.c

    def gradient(self, x, y):
        z = np.zeros(np.broadcast_shapes(np.shape(x), np.shape(y)))
        return z, z.copy()

    def laplacian(self, x, y):
        return np.zeros(np.broadcast_shapes(np.shape(x), np.shape(y)))

    def area_integral(self, model) -> float:
        return self.c * model.area

    def __repr__(self):
        return f"ConstantField({self.c!r})"


class CallableField(ScalarField):
    """Closed-form scalar field with optional analytic derivatives."""

    def __init__(self, fn, grad_fn=None, laplacian_fn=None):
        self._fn = fn
        self._grad = grad_fn
        self._lap = laplacian_fn

    def value(self, x, y):
        return self._fn(np.asarray(x, dtype=float), np.asarray(y, dtype=float))

    def gradient(self, x, y):
        if self._grad is not None:
            return self._grad(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        return super().gradient(x, y)

    def laplacian(self, x, y):
        if self._lap is not None:
            return self._lap(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        return super().laplacian(x, y)


class GridField(ScalarField):
    """Uniform-grid samples with bilinear interpolation.

    values[i, j] is the sample at (x0 + j hx, y0 + i hy).  Periodic grids
    wrap around the bounding box; non-periodic evaluation clamps to the box.
    Gradients interpolate centered differences of the node values, and the
    Laplacian interpolates a 4th-order centered stencil (periodic only).
    """

    chart_global = False

    def __init__(self, values, bbox, periodic=False):
        v = np.asarray(values, dtype=float)
        if v.ndim != 2 or v.shape[0] < 4 or v.shape[1] < 4:
            raise DegenerateInputError("grid field needs a 2-d array, at least 4x4")
        self.values = v
        self.x0, self.x1, self.y0, self.y1 = (float(b) for b in bbox)
        self.periodic = bool(periodic)
        ny, nx = v.shape
        if self.periodic:
            # node j = nx maps back to node 0: spacing divides the box evenly
            self.hx = (self.x1 - self.x0) / nx
            self.hy = (self.y1 - self.y0) / ny
        else:
            self.hx = (self.x1 - self.x0) / (nx - 1)
            self.hy = (self.y1 - self.y0) / (ny - 1)
        self._grad_grids = None
        self._lap_grid = None

    @property
    def chart_global(self):  # periodic grids are evaluable anywhere
        return self.periodic

    def _interp(self, grid, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        gx = (x - self.x0) / self.hx
        gy = (y - self.y0) / self.hy
        ny, nx = grid.shape
        if self.periodic:
            gx = np.mod(gx, nx)
            gy = np.mod(gy, ny)
        else:
            gx = np.clip(gx, 0.0, nx - 1 - 1e-12)
            gy = np.clip(gy, 0.0, ny - 1 - 1e-12)
        j0 = np.floor(gx).astype(int)
        i0 = np.floor(gy).astype(int)
        tx = gx - j0
        ty = gy - i0
        j1 = (j0 + 1) % nx if self.periodic else np.minimum(j0 + 1, nx - 1)
        i1 = (i0 + 1) % ny if self.periodic else np.minimum(i0 + 1, ny - 1)
        v00 = grid[i0, j0]
        v01 = grid[i0, j1]
        v10 = grid[i1, j0]
        v11 = grid[i1, j1]
        return (
            v00 * (1 - tx) * (1 - ty)
            + v01 * tx * (1 - ty)
            + v10 * (1 - tx) * ty
            + v11 * tx * ty
        )

    def value(self, x, y):
        return self._interp(self.values, x, y)

    def _node_gradients(self):
        if self._grad_grids is None:
            v = self.values
            if self.periodic:
                gx = (np.roll(v, -1, axis=1) - np.roll(v, 1, axis=1)) / (2 * self.hx)
                gy = (np.roll(v, -1, axis=0) - np.roll(v, 1, axis=0)) / (2 * self.hy)
            else:
                gy, gx = np.gradient(v, self.hy, self.hx)
            self._grad_grids = (gx, gy)
        return self._grad_grids

    def gradient(self, x, y):
        gx, gy = self._node_gradients()
        return self._interp(gx, x, y), self._interp(gy, x, y)

    def _node_laplacian(self):
        if self._lap_grid is None:
            if not self.periodic:
                raise DegenerateInputError("grid Laplacian implemented for periodic grids")
            v = self.values

            def d2(arr, axis, h):
                return (
                    -np.roll(arr, 2, axis)
                    + 16 * np.roll(arr, 1, axis)
                    - 30 * arr
                    + 16 * np.roll(arr, -1, axis)
                    - np.roll(arr, -2, axis)
                ) / (12 * h * h)

            self._lap_grid = d2(v, 1, self.hx) + d2(v, 0, self.hy)
        return self._lap_grid

    def laplacian(self, x, y):
        return self._interp(self._node_laplacian(), x, y)

    def area_integral(self, model) -> float:
        return model.quadrature(self.value)


# ---------------------------------------------------------------------------
# 1-forms


class OneForm:
    """Base 1-form on a chart; components (p, q) represent p dx + q dy."""

    def components(self, x, y):
        raise NotImplementedError

    def at(self, x, y, vx, vy):
        """Evaluate on a chart tangent vector (vx, vy)."""
        p, q = self.components(x, y)
        return p * vx + q * vy

    def jacobian(self, x, y):
        """Chart derivatives (p_x, p_y, q_x, q_y); centered differences by default."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        h = _FD_H
        pxp, qxp = self.components(x + h, y)
        pxm, qxm = self.components(x - h, y)
        pyp, qyp = self.components(x, y + h)
        pym, qym = self.components(x, y - h)
        return (
            (pxp - pxm) / (2 * h),
            (pyp - pym) / (2 * h),
            (qxp - qxm) / (2 * h),
            (qyp - qym) / (2 * h),
        )

    def curl(self, x, y):
        """Chart exterior-derivative density q_x - p_y (coefficient of dx^dy)."""
        _, py, qx, _ = self.jacobian(x, y)
        return qx - py


class ZeroOneForm(OneForm):
    def components(self, x, y):
        z = np.zeros(np.broadcast_shapes(np.shape(x), np.shape(y)))
        return z, z.copy()

    def jacobian(self, x, y):
        z = np.zeros(np.broadcast_shapes(np.shape(x), np.shape(y)))
        return z, z.copy(), z.copy(), z.copy()


class CallableOneForm(OneForm):
    def __init__(self, components_fn, jacobian_fn=None):
        self._components = components_fn
        self._jacobian = jacobian_fn

    def components(self, x, y):
        return self._components(np.asarray(x, dtype=float), np.asarray(y, dtype=float))

    def jacobian(self, x, y):
        if self._jacobian is not None:
            return self._jacobian(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        return super().jacobian(x, y)


class GridOneForm(OneForm):
    """Componentwise grid 1-form (two GridFields sharing a box)."""

    def __init__(self, p_field: GridField, q_field: GridField):
        self.p_field = p_field
        self.q_field = q_field

    def components(self, x, y):
        return self.p_field.value(x, y), self.q_field.value(x, y)

    def jacobian(self, x, y):
        px, py = self.p_field.gradient(x, y)
        qx, qy = self.q_field.gradient(x, y)
        return px, py, qx, qy


class PulledBackOneForm(OneForm):
    """Pullback psi^* theta of a 1-form under a chart map.

    Supports translations (shift) and Moebius maps (2x2 real matrix acting on
    z = x + i y); the derivative of a Moebius map is complex multiplication,
    which acts on covectors by the transposed rotation-scaling.
    """

    def __init__(self, form: OneForm, *, matrix=None, shift=None):
        if (matrix is None) == (shift is None):
            raise DegenerateInputError("specify exactly one of matrix or shift")
        self.form = form
        self.matrix = None if matrix is None else np.asarray(matrix, dtype=float)
        self.shift = None if shift is None else np.asarray(shift, dtype=float)

    def components(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.shift is not None:
            return self.form.components(x + self.shift[0], y + self.shift[1])
        a, b, c, d = self.matrix.ravel()
        z = x + 1j * y
        den = c * z + d
        w = (a * z + b) / den
        dpsi = (a * d - b * c) / den**2
        p, q = self.form.components(w.real, w.imag)
        # (psi^* theta)(v) = theta(dpsi . v) with dpsi acting as complex mult
        re, im = dpsi.real, dpsi.imag
        return p * re + q * im, -p * im + q * re


class AveragedOneForm(OneForm):
    """Lazy convex combination of 1-forms (used for Cesaro/Folner means)."""

    def __init__(self, forms, weights=None):
        if not forms:
            raise DegenerateInputError("need at least one form to average")
        self.forms = list(forms)
        n = len(self.forms)
        self.weights = np.full(n, 1.0 / n) if weights is None else np.asarray(weights, float)
        if self.weights.shape != (n,) or abs(self.weights.sum() - 1.0) > 1e-12:
            raise DegenerateInputError("weights must sum to one, one per form")

    def components(self, x, y):
        p_tot, q_tot = 0.0, 0.0
        for w, form in zip(self.weights, self.forms):
            p, q = form.components(x, y)
            p_tot = p_tot + w * p
            q_tot = q_tot + w * q
        return p_tot, q_tot

    def jacobian(self, x, y):
        out = [0.0, 0.0, 0.0, 0.0]
        for w, form in zip(self.weights, self.forms):
            for i, comp in enumerate(form.jacobian(x, y)):
                out[i] = out[i] + w * comp
        return tuple(out)


class ScaledOneForm(OneForm):
    def __init__(self, form: OneForm, factor: float):
        self.form = form
        self.factor = float(factor)

    def components(self, x, y):
        p, q = self.form.components(x, y)
        return self.factor * p, self.factor * q

    def jacobian(self, x, y):
        return tuple(self.factor * c for c in self.form.jacobian(x, y))


class SumOneForm(OneForm):
    def __init__(self, *forms):
        self.forms = forms

    def components(self, x, y):
        p_tot, q_tot = 0.0, 0.0
        for form in self.forms:
            p, q = form.components(x, y)
            p_tot, q_tot = p_tot + p, q_tot + q
        return p_tot, q_tot

    def jacobian(self, x, y):
        out = [0.0, 0.0, 0.0, 0.0]
        for form in self.forms:
            for i, comp in enumerate(form.jacobian(x, y)):
                out[i] = out[i] + comp
        return tuple(out)


class ExactOneForm(OneForm):
    """dW for a scalar field W (always closed)."""

    def __init__(self, w_field: ScalarField):
        self.w_field = w_field

    def components(self, x, y):
        return self.w_field.gradient(x, y)


class StarDifferentialOneForm(OneForm):
    """Hodge star of dW in a conformal chart: (-W_y) dx + W_x dy.

    The star on 1-forms is conformally invariant in two dimensions, so the
    chart components do not involve the conformal factor.  Its exterior
    derivative is the metric Laplacian of W times the area form.
    """

    def __init__(self, w_field: ScalarField):
        self.w_field = w_field

    def components(self, x, y):
        wx, wy = self.w_field.gradient(x, y)
        return -wy, wx


# ---------------------------------------------------------------------------
# Hyperbolic radial bump family (upper half-plane chart, curvature -1)


def _bump_h(s, a):
    """exp(-1/(1 - s/a)) on s < a, extended by zero; smooth on the line."""
    s = np.asarray(s, dtype=float)
    inside = s < a * (1.0 - 1e-12)
    p = np.where(inside, 1.0 / np.maximum(1.0 - s / a, 1e-300), 0.0)
    return np.where(inside, np.exp(-p), 0.0), p, inside


def _bump_derivatives(s, a):
    """h, h', h'', h''' of the bump profile as functions of s = d^2."""
    h, p, inside = _bump_h(s, a)
    zero = np.zeros_like(h)
    h1 = np.where(inside, -h * p * p / a, zero)
    h2 = np.where(inside, h * p**3 * (p - 2.0) / a**2, zero)
    h3 = np.where(inside, h * p**4 * (-(p * p) + 6.0 * p - 6.0) / a**3, zero)
    return h, h1, h2, h3


def _uhp_distance_bits(x, y, cx, cy):
    """cosh d, d, and chart gradient of d to the point (cx, cy), on y > 0."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    dx = x - cx
    dy = y - cy
    q = 1.0 + (dx * dx + dy * dy) / (2.0 * y * cy)
    d = np.arccosh(np.maximum(q, 1.0))
    sinh_d = np.sqrt(np.maximum(q * q - 1.0, 0.0))
    qx = dx / (y * cy)
    qy = (y * y - dx * dx - cy * cy) / (2.0 * y * y * cy)
    # chart gradient of d: grad(q)/sinh(d); regular limit 0 at the center
    safe = np.where(sinh_d > 1e-14, sinh_d, 1.0)
    gx = np.where(sinh_d > 1e-14, qx / safe, 0.0)
    gy = np.where(sinh_d > 1e-14, qy / safe, 0.0)
    return q, d, gx, gy


def _coth_combo(d):
    """2 (coth d - d coth^2 d + d) with a series branch near zero."""
    d = np.asarray(d, dtype=float)
    small = d < 0.02
    dd = np.where(small, 1.0, d)
    coth = np.cosh(dd) / np.sinh(dd)
    direct = 2.0 * (coth - dd * coth * coth + dd)
    series = 2.0 * ((2.0 / 3.0) * d - (4.0 / 45.0) * d**3)
    return np.where(small, series, direct)


def _two_d_coth(d):
    """2 d coth d with the regular value 2 at d = 0."""
    d = np.asarray(d, dtype=float)
    small = d < 1e-8
    dd = np.where(small, 1.0, d)
    return np.where(small, 2.0 + 2.0 * d * d / 3.0, 2.0 * dd * np.cosh(dd) / np.sinh(dd))


class HyperbolicBumpData:
    """Radially symmetric bump W = h(d(z, center)^2) on the hyperbolic plane.

    Provides W, its chart gradient, the metric Laplacian and its chart
    gradient, all in closed form.  support_radius bounds the geodesic
    distance of the support from the center.
    """

    def __init__(self, center=(0.0, 1.0), support_radius=1.2):
        self.cx, self.cy = float(center[0]), float(center[1])
        self.r0 = float(support_radius)
        self.a = self.r0 * self.r0

    def w(self, x, y):
        _, d, _, _ = _uhp_distance_bits(x, y, self.cx, self.cy)
        h, _, _ = _bump_h(d * d, self.a)
        return h

    def grad_w(self, x, y):
        _, d, gx, gy = _uhp_distance_bits(x, y, self.cx, self.cy)
        _, h1, _, _ = _bump_derivatives(d * d, self.a)
        factor = 2.0 * d * h1
        return factor * gx, factor * gy

    def metric_laplacian_w(self, x, y):
        """Laplace-Beltrami of W for curvature -1: 4 s h'' + h'(2 + 2 d coth d)."""
        _, d, _, _ = _uhp_distance_bits(x, y, self.cx, self.cy)
        s = d * d
        _, h1, h2, _ = _bump_derivatives(s, self.a)
        return 4.0 * s * h2 + h1 * (2.0 + _two_d_coth(d))

    def grad_metric_laplacian_w(self, x, y):
        _, d, gx, gy = _uhp_distance_bits(x, y, self.cx, self.cy)
        s = d * d
        _, h1, h2, h3 = _bump_derivatives(s, self.a)
        dfdd = (
            8.0 * d * h2
            + 8.0 * d**3 * h3
            + 2.0 * d * h2 * (2.0 + _two_d_coth(d))
            + h1 * _coth_combo(d)
        )
        return dfdd * gx, dfdd * gy


class RadialLaplacianBumpField(ScalarField):
    """f = base + amplitude * Laplacian(W) for a hyperbolic radial bump W.

    The perturbation integrates to zero against the area form, so the field
    integral over a closed quotient is exactly base * area.  The single-lift
    formula is only valid inside the fundamental domain, so orbits must be
    reduced as they go.
    """

    chart_global = False

    def __init__(self, bump: HyperbolicBumpData, base=1.0, amplitude=0.3):
        self.bump = bump
        self.base = float(base)
        self.amplitude = float(amplitude)

    def value(self, x, y):
        return self.base + self.amplitude * self.bump.metric_laplacian_w(x, y)

    def gradient(self, x, y):
        gx, gy = self.bump.grad_metric_laplacian_w(x, y)
        return self.amplitude * gx, self.amplitude * gy

    def area_integral(self, model) -> float:
        # the Laplacian term integrates to zero over any region containing
        # the support of the bump
        return self.base * model.area


def hyperbolic_bump_family(center=(0.0, 1.0), support_radius=1.2, base=1.0, amplitude=0.3):
    """Field f = base + amplitude * Lap(W) and primitive rho = amplitude * star dW.

    On a curvature -1 surface containing the bump support, f integrates to
    base * area and d rho = (f - base) dA, so (c = base / K, rho) reproduces
    the decomposition of f dA into a curvature multiple plus an exact form.
    """
    bump = HyperbolicBumpData(center, support_radius)
    field = RadialLaplacianBumpField(bump, base, amplitude)

    def rho_components(x, y):
        wx, wy = bump.grad_w(x, y)
        return -amplitude * wy, amplitude * wx

    rho = CallableOneForm(rho_components)
    return field, rho, bump


# ---------------------------------------------------------------------------
# Constant-norm primitives of hyperbolic area-form multiples


def disk_constant_norm_primitive(lam: float) -> CallableOneForm:
    """Primitive of lam times the hyperbolic area form on the Poincare disk.

    The pullback of lam dx / y under a disk-to-half-plane Cayley map; it has
    constant metric norm lam everywhere, which is what makes it the optimal
    starting primitive for the critical-value inf-sup.
    """

    def comps(x, y):
        w = x + 1j * y
        one_minus = (1.0 - w) ** 2
        beta = np.angle(one_minus)
        denom = 1.0 - (x * x + y * y)
        factor = 2.0 * lam / denom
        return factor * np.sin(beta), -factor * np.cos(beta)

    def jac(x, y):
        # p + i q = -2 i lam (1-w) / ((1-conj(w)) (1-|w|^2)); Wirtinger rule
        w = np.asarray(x, dtype=float) + 1j * np.asarray(y, dtype=float)
        wb = np.conj(w)
        u = 1.0 - w
        ub = 1.0 - wb
        den = 1.0 - (w * wb).real
        c = -2j * lam
        p_w = c * (-1.0 / (ub * den) + u * wb / (ub * den * den))
        p_wb = c * u * (1.0 / (ub * ub * den) + w / (ub * den * den))
        d_x = p_w + p_wb
        d_y = 1j * (p_w - p_wb)
        return d_x.real, d_y.real, d_x.imag, d_y.imag

    return CallableOneForm(comps, jac)


def uhp_scaling_invariant_primitive(lam: float) -> CallableOneForm:
    """lam dx / y on the upper half-plane: constant norm lam, invariant under
    z -> e^l z and z -> z + s."""

    def comps(x, y):
        p = lam / np.asarray(y, dtype=float)
        return p, np.zeros_like(p)

    def jac(x, y):
        y = np.asarray(y, dtype=float)
        z = np.zeros_like(y)
        return z, -lam / (y * y), z.copy(), z.copy()

    return CallableOneForm(comps, jac)


def uhp_axis_invariant_primitive(g, lam: float) -> CallableOneForm:
    """Constant-norm primitive of lam dA invariant under the hyperbolic element g.

    Conjugates lam dx / y by the Moebius map sending the axis of g to the
    imaginary axis, along which dx / y is invariant under uniform scalings.
    """
    mat = g.matrix
    a, b, c, d = mat.ravel()
    if abs(a + d) <= 2.0:
        raise DegenerateInputError("axis-adapted primitive needs a hyperbolic element")
    if abs(c) < 1e-14:
        # axis already through infinity: fixed points b/(d-a) and infinity
        if abs(d - a) < 1e-14:
            return uhp_scaling_invariant_primitive(lam)  # axis is the imaginary axis family
        p_min = b / (d - a)
        h = np.array([[1.0, -p_min], [0.0, 1.0]])
    else:
        disc = np.sqrt((a + d) ** 2 - 4.0)
        r1 = ((a - d) + disc) / (2.0 * c)
        r2 = ((a - d) - disc) / (2.0 * c)
        if r1 < r2:
            r1, r2 = r2, r1  # keep det(h) = r1 - r2 positive: h preserves y > 0
        # h sends (r1, r2) to (0, infinity)
        h = np.array([[1.0, -r1], [1.0, -r2]])
    base = uhp_scaling_invariant_primitive(lam)
    return CallableOneForm(PulledBackOneForm(base, matrix=h).components)


def folner_average(form: OneForm, elements, *, shifts=False) -> AveragedOneForm:
    """Average of pullbacks of a 1-form over a finite symmetric box of deck
    elements (matrices for Moebius actions, 2-vectors for translations)."""
    pulled = []
    for e in elements:
        if shifts:
            pulled.append(PulledBackOneForm(form, shift=np.asarray(e, dtype=float)))
        else:
            mat = e.matrix if hasattr(e, "matrix") else np.asarray(e, dtype=float)
            if np.allclose(mat, np.eye(2)):
                pulled.append(form)
            else:
                pulled.append(PulledBackOneForm(form, matrix=mat))
    return AveragedOneForm(pulled)


def torus_fft_poisson_primitive(density_grid, bbox) -> GridOneForm:
    """Grid primitive theta with d theta = F dx^dy on a periodic cell.

    Solves Lap(psi) = F by FFT (F must have zero mean on the grid) and
    returns theta = -psi_y dx + psi_x dy sampled on the same grid, with
    spectral derivatives, so the construction is exact for band-limited F.
    """
    f = np.asarray(density_grid, dtype=float)
    ny, nx = f.shape
    x0, x1, y0, y1 = (float(b) for b in bbox)
    lx, ly = x1 - x0, y1 - y0
    mean = f.mean()
    if abs(mean) > 1e-10 * (abs(f).max() + 1.0):
        raise DegenerateInputError(f"density must have zero mean, got {mean:g}")
    kx = 2j * np.pi * np.fft.fftfreq(nx, d=lx / nx)
    ky = 2j * np.pi * np.fft.fftfreq(ny, d=ly / ny)
    kxg, kyg = np.meshgrid(kx, ky)
    lap = kxg**2 + kyg**2
    fh = np.fft.fft2(f - mean)
    with np.errstate(divide="ignore", invalid="ignore"):
        psih = np.where(lap != 0.0, fh / lap, 0.0)
    psi_x = np.real(np.fft.ifft2(kxg * psih))
    psi_y = np.real(np.fft.ifft2(kyg * psih))
    p = GridField(-psi_y, bbox, periodic=True)
    q = GridField(psi_x, bbox, periodic=True)
    return GridOneForm(p, q)


def torus_trig_field(a=0.7, b=-0.4, c=0.3) -> CallableField:
    """Zero-mean strength F = a cos 2pi x + b sin 2pi y + c cos 2pi (x+y)."""
    tp = 2.0 * np.pi

    def value(x, y):
        return a * np.cos(tp * x) + b * np.sin(tp * y) + c * np.cos(tp * (x + y))

    def grad(x, y):
        s = tp * c * np.sin(tp * (x + y))
        return -tp * a * np.sin(tp * x) - s, tp * b * np.cos(tp * y) - s

    def lap(x, y):
        return -tp * tp * (a * np.cos(tp * x) + b * np.sin(tp * y)
                           + 2.0 * c * np.cos(tp * (x + y)))

    return CallableField(value, grad, lap)


def torus_trig_primitive(a=0.7, b=-0.4, c=0.3) -> CallableOneForm:
    """Closed-form Poisson primitive theta with d theta = F dx^dy on the unit
    cell, for the band-limited F of torus_trig_field.  theta = -psi_y dx +
    psi_x dy for the periodic solution of Lap(psi) = F."""
    tp = 2.0 * np.pi

    def comps(x, y):
        s = np.sin(tp * (np.asarray(x, dtype=float) + y)) * (c / (2.0 * tp))
        p = np.cos(tp * y) * (b / tp) - s
        q = np.sin(tp * x) * (a / tp) + s
        return p, q

    def jac(x, y):
        cxy = np.cos(tp * (np.asarray(x, dtype=float) + y)) * (c / 2.0)
        p_x = -cxy
        p_y = -b * np.sin(tp * y) - cxy
        q_x = a * np.cos(tp * x) + cxy
        q_y = cxy
        return p_x, p_y, q_x, q_y

    return CallableOneForm(comps, jac)
