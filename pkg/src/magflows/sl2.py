"""Exact algebraic flows on quotients of PSL(2, R).

Matrices act on the upper half-plane by Moebius transformations.  The unit
sphere bundle of the hyperbolic plane is identified with PSL(2, R) by sending
a matrix g to the unit tangent vector obtained by pushing forward the upward
vector at i, so the identity corresponds to (i, up).  Right multiplication by
one-parameter subgroups exp(t X) gives the geodesic flow (X diagonal), the
horocycle flow (X nilpotent) and the constant-curvature magnetic flows in
between.
"""

from __future__ import annotations

import numpy as np

from .errors import ClassificationError, DegenerateInputError, UnsupportedModelError

# det X counts as zero below this fraction of the squared Frobenius norm;
# exponential branch selection needs a hard threshold.
DET_ZERO_RTOL = 1e-14


def _as_2x2(m):
    a = np.array(m, dtype=float)
    if a.shape != (2, 2):
        raise DegenerateInputError(f"expected a 2x2 real matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise DegenerateInputError("matrix entries must be finite")
    return a


class Sl2Generator:
    """Trace-free 2x2 real matrix, an element of sl(2, R).

    The trace is forced to be exactly zero at construction: the diagonal is
    stored as (d, -d) with d the antisymmetrized diagonal of the input.
    Inputs whose trace is not small compared to their size are rejected.
    """

    __slots__ = ("m",)

    def __init__(self, m):
        a = _as_2x2(m)
        tr = a[0, 0] + a[1, 1]
        scale = max(float(np.abs(a).max()), 1.0)
        if abs(tr) > 1e-9 * scale:
            raise DegenerateInputError(f"generator must be trace-free, got trace {tr:g}")
        d = 0.5 * (a[0, 0] - a[1, 1])
        mat = np.array([[d, a[0, 1]], [a[1, 0], -d]])
        mat.setflags(write=False)
        self.m = mat

    @property
    def det(self) -> float:
        m = self.m
        return float(m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0])

    @property
    def norm2(self) -> float:
        """Squared Frobenius norm."""
        return float((self.m * self.m).sum())

    def scaled(self, c: float) -> "Sl2Generator":
        return Sl2Generator(c * self.m)

    def __repr__(self):
        return f"Sl2Generator({self.m.tolist()})"


def geodesic_generator() -> Sl2Generator:
    """diag(1/2, -1/2); exp gives the geodesic one-parameter subgroup."""
    return Sl2Generator([[0.5, 0.0], [0.0, -0.5]])


def vertical_generator() -> Sl2Generator:
    """Antisymmetric generator with entries +-1/2; rotates the fiber at unit rate."""
    return Sl2Generator([[0.0, 0.5], [-0.5, 0.0]])


def magnetic_generator(lam: float) -> Sl2Generator:
    """Geodesic generator plus lam times the vertical one.

    Its flow projects to curves of constant geodesic curvature lam on the
    hyperbolic plane; det = -(1 - lam^2)/4.
    """
    return Sl2Generator([[0.5, 0.5 * lam], [-0.5 * lam, -0.5]])


def nilpotent_generator() -> Sl2Generator:
    """Upper-triangular nilpotent [[0,1],[0,0]]; exp gives the horocycle subgroup."""
    return Sl2Generator([[0.0, 1.0], [0.0, 0.0]])


def _psl_canonical(a: np.ndarray) -> np.ndarray:
    """Fix the projective sign: first non-zero entry (row-major) positive."""
    for v in a.ravel():
        if v != 0.0:
            return -a if v < 0.0 else a
    return a


class Sl2Element:
    """2x2 real matrix of determinant one, identified with its negative.

    The stored representative has determinant renormalized to 1 and the sign
    fixed so that the first non-zero entry is positive, which makes equality
    checks deterministic.
    """

    __slots__ = ("g",)

    def __init__(self, g):
        a = _as_2x2(g)
        det = a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
        if not det > 0.0:
            raise DegenerateInputError(f"matrix must have positive determinant, got {det:g}")
        if abs(det - 1.0) > 4e-16:
            a = a / np.sqrt(det)
        a = _psl_canonical(a)
        a.setflags(write=False)
        self.g = a

    @classmethod
    def identity(cls) -> "Sl2Element":
        return cls(np.eye(2))

    @property
    def matrix(self) -> np.ndarray:
        return self.g

    @property
    def det(self) -> float:
        g = self.g
        return float(g[0, 0] * g[1, 1] - g[0, 1] * g[1, 0])

    @property
    def trace(self) -> float:
        return float(self.g[0, 0] + self.g[1, 1])

    def __matmul__(self, other: "Sl2Element") -> "Sl2Element":
        return Sl2Element(self.g @ other.g)

    def inv(self) -> "Sl2Element":
        a, b, c, d = self.g.ravel()
        return Sl2Element([[d, -b], [-c, a]])

    def distance(self, other: "Sl2Element") -> float:
        """Max-abs distance between projective classes (min over the sign)."""
        d1 = float(np.abs(self.g - other.g).max())
        d2 = float(np.abs(self.g + other.g).max())
        return min(d1, d2)

    def mobius(self, z: complex) -> complex:
        a, b, c, d = self.g.ravel()
        return (a * z + b) / (c * z + d)

    def mobius_derivative(self, z: complex) -> complex:
        _, _, c, d = self.g.ravel()
        return 1.0 / (c * z + d) ** 2

    def __repr__(self):
        return f"Sl2Element({self.g.tolist()})"


def mobius_point(mat: np.ndarray, x, y):
    """Vectorized Moebius action of a real matrix on chart points (x, y)."""
    a, b, c, d = np.asarray(mat, dtype=float).ravel()
    z = np.asarray(x, dtype=float) + 1j * np.asarray(y, dtype=float)
    w = (a * z + b) / (c * z + d)
    return w.real, w.imag


def exp_generator(X: Sl2Generator, t: float) -> Sl2Element:
    """Closed-form matrix exponential of t X, branch chosen by sign of det X.

    det < 0 gives the cosh/sinh branch, det > 0 the cos/sin branch, and
    |det| <= DET_ZERO_RTOL * ||X||_F^2 the truncated series I + t X (exact
    for nilpotent X since X^2 = -det(X) I vanishes).
    """
    m = X.m
    det = X.det
    disc = -det  # X^2 = disc * I for trace-free X
    if abs(det) <= DET_ZERO_RTOL * X.norm2:
        coef_i, coef_m = 1.0, t
    elif disc > 0.0:
        r = np.sqrt(disc)
        coef_i, coef_m = np.cosh(r * t), np.sinh(r * t) / r
    else:
        w = np.sqrt(-disc)
        coef_i, coef_m = np.cos(w * t), np.sin(w * t) / w
    if not np.isfinite(coef_i):
        raise DegenerateInputError(f"exp overflow for |t|={abs(t):g}, det={det:g}")
    return Sl2Element(coef_i * np.eye(2) + coef_m * m)


def classify_generator(X: Sl2Generator):
    """Return (class, det X): geodesic-like (det<0), horocyclic (det=0), elliptic (det>0).

    det is treated as zero when |det| <= DET_ZERO_RTOL * ||X||_F^2.
    """
    det = X.det
    norm2 = X.norm2
    if norm2 == 0.0 or abs(det) <= DET_ZERO_RTOL * norm2:
        return "horocyclic", det
    if det < 0.0:
        return "geodesic-like", det
    return "elliptic", det


def horocycle_commutation_residual(t: float, s: float) -> float:
    """Residual of the geodesic/horocycle commutation relation.

    Compares exp(s N) exp(t X0) with exp(t X0) exp(s e^{-t} N), where X0 is
    the geodesic generator and N the nilpotent one.  Exact algebra makes the
    two products equal; the return value is the max-abs entry difference.
    """
    x0 = geodesic_generator()
    n = nilpotent_generator()
    lhs = exp_generator(n, s).matrix @ exp_generator(x0, t).matrix
    rhs = exp_generator(x0, t).matrix @ exp_generator(n, s * np.exp(-t)).matrix
    return float(np.abs(lhs - rhs).max())


def conjugate_to_standard_horocycle(X: Sl2Generator):
    """Conjugate a determinant-zero generator onto the standard nilpotent N.

    Returns (c, kappa) with c in PSL(2, R) and c^{-1} X c = kappa N,
    constructed from the kernel vector of X.  For X = N the identity with
    kappa = 1 is returned.
    """
    m = X.m
    norm2 = X.norm2
    if norm2 == 0.0:
        raise DegenerateInputError("zero generator has no horocycle conjugacy")
    if abs(X.det) > 1e-12 * norm2:
        raise ClassificationError(
            f"generator determinant {X.det:g} is not zero; only det = 0 flows "
            "are conjugate to the standard horocycle"
        )
    # kernel vector from the larger row; for rank-one trace-free X the image
    # is spanned by the kernel, so X p is automatically proportional to k
    r0 = abs(m[0, 0]) + abs(m[0, 1])
    r1 = abs(m[1, 0]) + abs(m[1, 1])
    if r0 >= r1:
        k = np.array([m[0, 1], -m[0, 0]])
    else:
        k = np.array([m[1, 1], -m[1, 0]])
    k = k / np.hypot(k[0], k[1])
    first = k[0] if k[0] != 0.0 else k[1]
    if first < 0.0:
        k = -k
    p = np.array([-k[1], k[0]])
    c = np.column_stack([k, p])  # det = |k|^2 = 1
    kappa = float(k @ (m @ p))
    return Sl2Element(c), kappa


def frame_to_phase(g: Sl2Element) -> np.ndarray:
    """Map a frame to (x, y, phi): base point g(i) and direction angle.

    The direction is that of the pushforward of the upward unit vector at i,
    measured as a chart angle in the upper half-plane.
    """
    a, b, c, d = g.matrix.ravel()
    den = c * 1j + d
    z = (a * 1j + b) / den
    w = 1j / den**2
    return np.array([z.real, z.imag, np.angle(w)])


def phase_to_frame(x: float, y: float, phi: float) -> Sl2Element:
    """Inverse of frame_to_phase: the frame at (x, y) with direction angle phi."""
    if not y > 0.0:
        raise DegenerateInputError(f"phase point needs y > 0, got y = {y:g}")
    ry = np.sqrt(y)
    g0 = Sl2Element([[ry, x / ry], [0.0, 1.0 / ry]])
    return g0 @ exp_generator(vertical_generator(), phi - 0.5 * np.pi)


def quotient_flow_step(deck, g: Sl2Element, X: Sl2Generator, t: float) -> Sl2Element:
    """Right-multiply by exp(t X), then reduce the frame over the quotient.

    The frame's base point g(i) is reduced to the fundamental domain and the
    same deck word is applied to the frame on the left, so the result
    represents the same coset with an in-domain base point.
    """
    if getattr(deck, "kind", None) != "fuchsian":
        raise UnsupportedModelError("quotient flow steps need a Fuchsian deck group")
    moved = g @ exp_generator(X, t)
    z = moved.mobius(1j)
    _, word = deck.reduce(np.array([z.real, z.imag]))
    if word.is_identity:
        return moved
    return Sl2Element(word.matrix) @ moved
