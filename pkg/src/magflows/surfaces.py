"""Surface models: constant-curvature charts, deck groups, reduction.

A surface is a conformal chart e^{2 sigma}(dx^2 + dy^2) together with a deck
group identifying chart points.  Supported charts:

* ``upper-half-plane``   sigma = -ln y + s        curvature -e^{-2s}
* ``poincare-disk``      sigma = ln 2/(1-r^2) + s curvature -e^{-2s}
* ``flat-plane``         sigma = s (+ optional field on a torus)
* ``sphere-chart``       sigma = ln 2/(1+r^2) + s curvature +e^{-2s}

The genus-2 quotient is the regular hyperbolic octagon with its standard
side pairings; the generator matrices are computed from the octagon
geometry in the disk, moved to the upper half-plane by a Cayley map, and
verified against the surface-group relation at build time.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .errors import (
    ChartDomainError,
    DegenerateInputError,
    ReductionError,
    UnsupportedModelError,
)

CHART_KINDS = ("upper-half-plane", "poincare-disk", "flat-plane", "sphere-chart")


# ---------------------------------------------------------------------------
# Deck words and deck groups


class DeckWord:
    """Composition of deck generators mapping an input point to its reduction.

    factors is a list of (name, exponent) pairs in application order: the
    first factor acts first.  Exactly one of matrix (Moebius) or shift
    (translation) carries the total map.
    """

    __slots__ = ("factors", "matrix", "shift")

    def __init__(self, factors=(), matrix=None, shift=None):
        self.factors = tuple(factors)
        self.matrix = None if matrix is None else np.asarray(matrix, dtype=float)
        self.shift = None if shift is None else np.asarray(shift, dtype=float)

    @property
    def is_identity(self) -> bool:
        return not self.factors

    @property
    def length(self) -> int:
        return int(sum(abs(e) for _, e in self.factors))

    def apply(self, x, y):
        """Apply the word's chart map to points."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.shift is not None:
            return x + self.shift[0], y + self.shift[1]
        if self.matrix is None:
            return x, y
        a, b, c, d = self.matrix.ravel()
        z = x + 1j * y
        w = (a * z + b) / (c * z + d)
        return w.real, w.imag

    def derivative_angle(self, x, y):
        """Argument of the complex derivative of the word's chart map."""
        if self.matrix is None:
            return np.zeros(np.broadcast_shapes(np.shape(x), np.shape(y)))
        a, b, c, d = self.matrix.ravel()
        z = np.asarray(x, dtype=float) + 1j * np.asarray(y, dtype=float)
        return np.angle((a * d - b * c) / (c * z + d) ** 2)

    def inverse(self) -> "DeckWord":
        factors = tuple((nm, -e) for nm, e in reversed(self.factors))
        if self.shift is not None:
            return DeckWord(factors, shift=-self.shift)
        if self.matrix is None:
            return DeckWord(factors)
        a, b, c, d = self.matrix.ravel()
        inv = np.array([[d, -b], [-c, a]]) / (a * d - b * c)
        return DeckWord(factors, matrix=inv)

    def __str__(self):
        if not self.factors:
            return "e"
        parts = []
        for nm, e in self.factors:
            parts.append(nm if e == 1 else f"{nm}^{e}")
        return " ".join(parts)

    def __repr__(self):
        return f"DeckWord({self})"


def _merge_factor(factors, name, exponent):
    if factors and factors[-1][0] == name:
        total = factors[-1][1] + exponent
        factors.pop()
        if total != 0:
            factors.append((name, total))
    elif exponent != 0:
        factors.append((name, exponent))


class TrivialDeck:
    kind = "trivial"
    generators = {}

    def reduce(self, point):
        raise UnsupportedModelError("trivial deck group has no fundamental domain")

    def __repr__(self):
        return "TrivialDeck()"


class LatticeDeck:
    """Z^2 lattice of translations; fundamental cell = unit cell of the basis."""

    kind = "lattice"

    def __init__(self, v1=(1.0, 0.0), v2=(0.0, 1.0)):
        self.v1 = np.asarray(v1, dtype=float)
        self.v2 = np.asarray(v2, dtype=float)
        self.basis = np.column_stack([self.v1, self.v2])
        det = float(np.linalg.det(self.basis))
        if abs(det) < 1e-12:
            raise DegenerateInputError("lattice vectors are linearly dependent")
        self.inv_basis = np.linalg.inv(self.basis)
        self.cell_area = abs(det)
        self.generators = {
            "t1": DeckWord((("t1", 1),), shift=self.v1),
            "t2": DeckWord((("t2", 1),), shift=self.v2),
        }

    def lattice_coords(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        u = self.inv_basis[0, 0] * x + self.inv_basis[0, 1] * y
        w = self.inv_basis[1, 0] * x + self.inv_basis[1, 1] * y
        return u, w

    def reduce(self, point):
        x, y = float(point[0]), float(point[1])
        u, w = self.lattice_coords(x, y)
        n1 = int(np.floor(u))
        n2 = int(np.floor(w))
        shift = -(n1 * self.v1 + n2 * self.v2)
        factors = []
        _merge_factor(factors, "t1", -n1)
        _merge_factor(factors, "t2", -n2)
        word = DeckWord(factors, shift=shift) if factors else DeckWord()
        return (x + shift[0], y + shift[1]), word

    def reduce_points(self, x, y):
        """Vectorized reduction; returns (x, y, zero angle shifts, word lengths)."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        u, w = self.lattice_coords(x, y)
        n1 = np.floor(u)
        n2 = np.floor(w)
        sx = -(n1 * self.v1[0] + n2 * self.v2[0])
        sy = -(n1 * self.v1[1] + n2 * self.v2[1])
        lengths = np.abs(n1) + np.abs(n2)
        return x + sx, y + sy, np.zeros_like(x), lengths.astype(int)

    def __repr__(self):
        return f"LatticeDeck({tuple(self.v1)}, {tuple(self.v2)})"


def _uhp_cosh_distance(z, w):
    return 1.0 + np.abs(z - w) ** 2 / (2.0 * z.imag * w.imag)


def uhp_distance(z, w):
    """Hyperbolic distance on the upper half-plane (curvature -1)."""
    return np.arccosh(np.maximum(_uhp_cosh_distance(np.asarray(z), np.asarray(w)), 1.0))


def disk_distance(z, w):
    """Hyperbolic distance on the Poincare disk (curvature -1)."""
    z = np.asarray(z)
    w = np.asarray(w)
    num = 2.0 * np.abs(z - w) ** 2
    den = (1.0 - np.abs(z) ** 2) * (1.0 - np.abs(w) ** 2)
    return np.arccosh(np.maximum(1.0 + num / den, 1.0))


class FuchsianDeck:
    """Cocompact surface group acting on the upper half-plane.

    generators maps single-letter names to real 2x2 unit-determinant
    matrices.  Reduction is greedy Dirichlet reduction about the center:
    while some neighbor center is closer than the center itself, apply the
    inverse of that neighbor.
    """

    kind = "fuchsian"

    def __init__(self, generators: dict, center=1j, relation=None, cap=64):
        self.generators = {nm: np.asarray(m, dtype=float) for nm, m in generators.items()}
        self.center = complex(center)
        self.cap = int(cap)
        self.relation = relation
        neighbors = []
        for nm, mat in self.generators.items():
            inv = _inv2(mat)
            neighbors.append((nm, 1, mat, inv))
            neighbors.append((nm, -1, inv, mat))
        self._neighbors = neighbors
        self._neighbor_centers = np.array(
            [_mobius_c(mat, self.center) for _, _, mat, _ in neighbors]
        )
        self._neighbor_mats = np.array([mat for _, _, mat, _ in neighbors])
        self._neighbor_invs = np.array([inv for _, _, _, inv in neighbors])

    def relation_residual(self) -> float:
        """Max-abs distance of the defining relation word from +-identity."""
        if self.relation is None:
            return 0.0
        r = np.eye(2)
        for nm, e in self.relation:
            m = self.generators[nm]
            r = r @ (m if e == 1 else _inv2(m))
        return float(
            min(np.abs(r - np.eye(2)).max(), np.abs(r + np.eye(2)).max())
        )

    def reduce(self, point):
        x, y = float(point[0]), float(point[1])
        if not np.isfinite(x) or not np.isfinite(y) or y <= 0.0:
            raise ReductionError(f"cannot reduce chart point ({x:g}, {y:g})")
        z = complex(x, y)
        factors = []
        mat = np.eye(2)
        moved = False
        for _ in range(self.cap):
            d0 = _uhp_cosh_distance(z, self.center)
            ds = 1.0 + np.abs(z - self._neighbor_centers) ** 2 / (
                2.0 * z.imag * self._neighbor_centers.imag
            )
            k = int(np.argmin(ds))
            if ds[k] >= d0 - 1e-14:
                break
            nm, e, _, inv = self._neighbors[k]
            z = _mobius_c(inv, z)
            if not np.isfinite(z.real) or not np.isfinite(z.imag) or z.imag <= 0:
                raise ReductionError("reduction produced a non-finite point")
            _merge_factor(factors, nm, -e)
            mat = inv @ mat
            moved = True
        else:
            raise ReductionError(f"no convergence within {self.cap} reduction steps")
        if not moved:
            return (x, y), DeckWord()
        return (z.real, z.imag), DeckWord(factors, matrix=mat)

    def reduce_points(self, x, y):
        """Vectorized greedy reduction.

        Returns reduced coordinates, the accumulated argument of the chart
        derivative of the applied word at each point (for transporting
        direction angles), and the number of letters applied.
        """
        x = np.array(x, dtype=float, copy=True)
        y = np.array(y, dtype=float, copy=True)
        dphi = np.zeros_like(x)
        steps = np.zeros(x.shape, dtype=int)
        centers = self._neighbor_centers
        for _ in range(self.cap):
            z = x + 1j * y
            d0 = 1.0 + (np.abs(z - self.center) ** 2) / (2.0 * y * self.center.imag)
            ds = 1.0 + np.abs(z[..., None] - centers) ** 2 / (
                2.0 * y[..., None] * centers.imag
            )
            k = np.argmin(ds, axis=-1)
            best = np.take_along_axis(ds, k[..., None], axis=-1)[..., 0]
            active = best < d0 - 1e-14
            if not np.any(active):
                return x, y, dphi, steps
            mats = self._neighbor_invs[k[active]]
            za = z[active]
            a, b = mats[:, 0, 0], mats[:, 0, 1]
            c, d = mats[:, 1, 0], mats[:, 1, 1]
            den = c * za + d
            w = (a * za + b) / den
            x[active] = w.real
            y[active] = w.imag
            dphi[active] += np.angle((a * d - b * c) / den**2)
            steps[active] += 1
        raise ReductionError(f"no convergence within {self.cap} batch reduction steps")

    def __repr__(self):
        return f"FuchsianDeck({sorted(self.generators)})"


def _inv2(m):
    a, b, c, d = np.asarray(m).ravel()
    return np.array([[d, -b], [-c, a]]) / (a * d - b * c)


def _mobius_c(m, z):
    a, b, c, d = np.asarray(m).ravel()
    return (a * z + b) / (c * z + d)


# ---------------------------------------------------------------------------
# Regular hyperbolic octagon (genus-2 fundamental domain)


class OctagonGeometry:
    """Geometry of the regular octagon with vertex angle pi/4 in the disk.

    Hyperbolic area is exactly 4 pi (Gauss-Bonnet for genus 2).  The key
    integration device: with u = 2/(1 - r^2) the hyperbolic area element is
    du d(theta), so area integrals become elementary double integrals with
    the polar boundary u_b(theta).
    """

    def __init__(self):
        self.cosh_v = 1.0 / np.tan(np.pi / 8.0) ** 2  # vertex distance: 3 + 2 sqrt(2)
        self.v = np.arccosh(self.cosh_v)
        self.vertex_r = np.tanh(self.v / 2.0)
        self.apothem = np.arccosh(1.0 + np.sqrt(2.0))
        self.side_mid_r = np.tanh(self.apothem / 2.0)
        self.vertices = np.array(
            [self.vertex_r * np.exp(1j * (-np.pi / 8 + j * np.pi / 4)) for j in range(8)]
        )
        # boundary circle for each side: center distance D on the side axis
        rho = self.side_mid_r
        self.side_circle_center = 0.5 * (rho + 1.0 / rho)
        self.u_max = 1.0 + self.cosh_v
        self.area = 4.0 * np.pi

    def fold_angle(self, theta):
        """Angle measured from the nearest side axis, in [-pi/8, pi/8)."""
        return np.mod(np.asarray(theta) + np.pi / 8, np.pi / 4) - np.pi / 8

    def boundary_r(self, theta):
        """Euclidean radius of the octagon boundary in direction theta."""
        c = self.side_circle_center * np.cos(self.fold_angle(theta))
        return c - np.sqrt(c * c - 1.0)

    def boundary_u(self, theta):
        rb = self.boundary_r(theta)
        return 2.0 / (1.0 - rb * rb)

    def contains(self, w, slack=0.0):
        """Points of the disk inside the octagon (radial test per direction)."""
        w = np.asarray(w)
        return np.abs(w) <= self.boundary_r(np.angle(w)) + slack

    def sample(self, rng, n):
        """Uniform hyperbolic-area samples in the octagon (disk points).

        Rejection in (theta, u): the target region {2 <= u <= u_b(theta)}
        has area 4 pi inside the box of area 2 pi (u_max - 2), acceptance
        1/(1 + sqrt 2).
        """
        out = np.empty(n, dtype=complex)
        filled = 0
        while filled < n:
            m = max(int((n - filled) * 2.7) + 16, 16)
            theta = rng.uniform(0.0, 2.0 * np.pi, m)
            u = rng.uniform(2.0, self.u_max, m)
            keep = u <= self.boundary_u(theta)
            took = min(int(keep.sum()), n - filled)
            r = np.sqrt(1.0 - 2.0 / u[keep][:took])
            out[filled : filled + took] = r * np.exp(1j * theta[keep][:took])
            filled += took
        return out

    def quadrature_nodes(self, n_theta=40, n_u=40):
        """Product Gauss-Legendre rule per sector; weights sum to the area.

        Returns disk points (complex) and weights for integrating smooth
        functions against the hyperbolic area form (curvature -1).
        """
        gt, wt = np.polynomial.legendre.leggauss(n_theta)
        gu, wu = np.polynomial.legendre.leggauss(n_u)
        pts = []
        wts = []
        for sector in range(8):
            lo = -np.pi / 8 + sector * np.pi / 4
            theta = lo + (gt + 1.0) * (np.pi / 8)
            w_theta = wt * (np.pi / 8)
            ub = self.boundary_u(theta)
            # u in [2, ub]: affine map of the GL nodes per theta node
            half = 0.5 * (ub - 2.0)
            u = 2.0 + np.outer(half, gu + 1.0)
            w = np.outer(w_theta * half, wu)
            r = np.sqrt(1.0 - 2.0 / u)
            pts.append((r * np.exp(1j * theta[:, None])).ravel())
            wts.append(w.ravel())
        return np.concatenate(pts), np.concatenate(wts)


def uhp_to_disk(z):
    z = np.asarray(z)
    return (z - 1j) / (z + 1j)


def disk_to_uhp(w):
    w = np.asarray(w)
    return 1j * (1.0 + w) / (1.0 - w)


def _octagon_disk_generators():
    """Side-pairing generators of the regular octagon, in disk (SU(1,1)) form.

    Sides are labeled counterclockwise a, b, a^-1, b^-1, c, d, c^-1, d^-1;
    each generator maps its inverse-labeled side onto the direct side with
    reversed orientation.  The published generators (A, B, C, D) =
    (d^-1, c, b^-1, a) satisfy the genus-2 relation [A,B][C,D] = 1.
    """
    geom = OctagonGeometry()
    V = geom.vertices

    def translate_to_zero(p):
        den = np.sqrt(1.0 - abs(p) ** 2)
        return np.array([[1.0, -p], [-np.conj(p), 1.0]], dtype=complex) / den

    def rotation(phi):
        return np.array(
            [[np.exp(1j * phi / 2), 0], [0, np.exp(-1j * phi / 2)]], dtype=complex
        )

    def mob(M, z):
        return (M[0, 0] * z + M[0, 1]) / (M[1, 0] * z + M[1, 1])

    def seg_std(P, Q):
        T = translate_to_zero(P)
        return rotation(-np.angle(mob(T, Q))) @ T

    def seg_map(P, Q, Pp, Qp):
        return np.linalg.inv(seg_std(Pp, Qp)) @ seg_std(P, Q)

    def side(j):
        return V[(j - 1) % 8], V[j % 8]

    labels = [
        ("ga", 1), ("gb", 1), ("ga", -1), ("gb", -1),
        ("gc", 1), ("gd", 1), ("gc", -1), ("gd", -1),
    ]
    pos = {}
    for s, (nm, e) in enumerate(labels, start=1):
        pos.setdefault(nm, {})[e] = s
    geo = {}
    for nm, d in pos.items():
        i, j = d[1], d[-1]
        Pj, Qj = side(j)
        Pi, Qi = side(i)
        geo[nm] = seg_map(Pj, Qj, Qi, Pi)  # minus side onto plus side, reversed
    inv = np.linalg.inv
    published = {
        "a": inv(geo["gd"]),
        "b": geo["gc"],
        "c": inv(geo["gb"]),
        "d": geo["ga"],
    }
    return geom, published


GENUS2_RELATION = (
    ("a", 1), ("b", 1), ("a", -1), ("b", -1),
    ("c", 1), ("d", 1), ("c", -1), ("d", -1),
)


@lru_cache(maxsize=1)
def octagon_deck() -> tuple:
    """(FuchsianDeck over the upper half-plane, OctagonGeometry).

    The disk generators are conjugated to real matrices by the Cayley map
    and the construction is verified: real up to 1e-12 dust, surface-group
    relation within 1e-9, and the eight generator images of the center are
    the Dirichlet neighbors at distance twice the apothem.
    """
    geom, disk_gens = _octagon_disk_generators()
    cayley = np.array([[1.0, -1j], [1.0, 1j]], dtype=complex) / (1.0 + 1j)
    cayley_inv = np.linalg.inv(cayley)
    gens = {}
    for nm, gd in disk_gens.items():
        gr = cayley_inv @ gd @ cayley
        dust = float(np.abs(gr.imag).max())
        if dust > 1e-12:
            raise RuntimeError(f"octagon generator {nm} not real: dust {dust:g}")
        m = gr.real
        m = m / np.sqrt(np.linalg.det(m))
        gens[nm] = m
    deck = FuchsianDeck(gens, center=1j, relation=GENUS2_RELATION)
    res = deck.relation_residual()
    if res > 1e-9:
        raise RuntimeError(f"surface-group relation residual {res:g}")
    two_m = 2.0 * geom.apothem
    dists = uhp_distance(deck._neighbor_centers, 1j)
    if float(np.abs(dists - two_m).max()) > 1e-9:
        raise RuntimeError("octagon Dirichlet neighbors not at twice the apothem")
    for nm, m in gens.items():
        if abs(abs(np.trace(m)) - (2.0 + np.sqrt(2.0))) > 1e-9:
            raise RuntimeError(f"octagon generator {nm} has wrong trace")
    return deck, geom


# ---------------------------------------------------------------------------
# Surface models


class SurfaceModel:
    """Immutable conformal surface chart with a deck group.

    scale shifts the conformal factor by a constant s, multiplying the
    metric by e^{2s} and the curvature by e^{-2s}.  sigma_field is an
    additional conformal deformation, supported on the flat torus only.
    """

    __slots__ = (
        "chart_kind", "deck", "scale", "sigma_field", "name",
        "geometry", "_area", "_sample_bound",
    )

    def __init__(self, chart_kind, deck, scale=0.0, sigma_field=None, name="",
                 geometry=None):
        if chart_kind not in CHART_KINDS:
            raise DegenerateInputError(f"unknown chart kind {chart_kind!r}")
        if sigma_field is not None and chart_kind != "flat-plane":
            raise UnsupportedModelError(
                "conformal deformation fields are supported on the flat chart only"
            )
        object.__setattr__(self, "chart_kind", chart_kind)
        object.__setattr__(self, "deck", deck)
        object.__setattr__(self, "scale", float(scale))
        object.__setattr__(self, "sigma_field", sigma_field)
        object.__setattr__(self, "name", name or chart_kind)
        object.__setattr__(self, "geometry", geometry)
        object.__setattr__(self, "_area", None)
        object.__setattr__(self, "_sample_bound", None)

    def __setattr__(self, key, value):
        raise AttributeError("SurfaceModel is immutable")

    def __repr__(self):
        return f"SurfaceModel({self.name!r})"

    # -- chart domain ------------------------------------------------------

    def contains(self, x, y):
        if self.chart_kind == "upper-half-plane":
            return np.asarray(y) > 0.0
        if self.chart_kind == "poincare-disk":
            return np.asarray(x) ** 2 + np.asarray(y) ** 2 < 1.0
        return np.broadcast_to(True, np.broadcast_shapes(np.shape(x), np.shape(y)))

    def require_in_chart(self, x, y):
        ok = self.contains(x, y)
        if not np.all(ok):
            raise ChartDomainError(f"point outside the {self.chart_kind} chart domain")

    # -- conformal factor and curvature -------------------------------------

    def sigma(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        k = self.chart_kind
        if k == "upper-half-plane":
            base = -np.log(y)
        elif k == "poincare-disk":
            base = np.log(2.0) - np.log1p(-(x * x + y * y))
        elif k == "sphere-chart":
            base = np.log(2.0) - np.log1p(x * x + y * y)
        else:
            base = np.zeros(np.broadcast_shapes(x.shape, y.shape))
        if self.sigma_field is not None:
            base = base + self.sigma_field.value(x, y)
        return base + self.scale

    def grad_sigma(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        k = self.chart_kind
        if k == "upper-half-plane":
            gx = np.zeros(np.broadcast_shapes(x.shape, y.shape))
            gy = -1.0 / y
            gy = np.broadcast_to(gy, gx.shape).copy() if gx.shape else gy
        elif k == "poincare-disk":
            den = 1.0 - (x * x + y * y)
            gx, gy = 2.0 * x / den, 2.0 * y / den
        elif k == "sphere-chart":
            den = 1.0 + x * x + y * y
            gx, gy = -2.0 * x / den, -2.0 * y / den
        else:
            z = np.zeros(np.broadcast_shapes(x.shape, y.shape))
            gx, gy = z, z.copy() if hasattr(z, "copy") else z
        if self.sigma_field is not None:
            fx, fy = self.sigma_field.gradient(x, y)
            gx = gx + fx
            gy = gy + fy
        return gx, gy

    @property
    def base_curvature(self) -> float:
        """Curvature of the undeformed chart at scale 0."""
        return {"upper-half-plane": -1.0, "poincare-disk": -1.0,
                "flat-plane": 0.0, "sphere-chart": 1.0}[self.chart_kind]

    def curvature(self, x, y):
        self.require_in_chart(x, y)
        k0 = self.base_curvature * np.exp(-2.0 * self.scale)
        if self.sigma_field is None:
            return k0 * np.ones(np.broadcast_shapes(np.shape(x), np.shape(y))) \
                if (np.ndim(x) or np.ndim(y)) else k0
        # K = -e^{-2 sigma} (chart Laplacian of sigma); flat base contributes 0
        lap = self.sigma_field.laplacian(x, y)
        return -np.exp(-2.0 * self.sigma(x, y)) * lap

    @property
    def is_compact(self) -> bool:
        return self.chart_kind == "sphere-chart" or self.deck.kind in ("lattice", "fuchsian")

    @property
    def euler_char(self):
        if self.chart_kind == "sphere-chart":
            return 2
        if self.deck.kind == "lattice":
            return 0
        if self.deck.kind == "fuchsian":
            return -2
        return None

    # -- area and quadrature -------------------------------------------------

    @property
    def area(self) -> float:
        if self._area is None:
            object.__setattr__(self, "_area", self._compute_area())
        return self._area

    def _compute_area(self) -> float:
        if not self.is_compact:
            raise UnsupportedModelError(f"{self.name} is not a compact quotient")
        s2 = np.exp(2.0 * self.scale)
        if self.chart_kind == "sphere-chart":
            return 4.0 * np.pi * s2
        if self.deck.kind == "fuchsian":
            return 4.0 * np.pi * s2
        if self.sigma_field is None:
            return self.deck.cell_area * s2
        return self.quadrature(lambda x, y: 1.0)

    def quadrature(self, fn, resolution=None) -> float:
        """Integral of fn(x, y) against the area form over the quotient."""
        if not self.is_compact:
            raise UnsupportedModelError(f"{self.name} has no finite-area quadrature")
        if self.deck.kind == "fuchsian":
            n = resolution or 48
            pts, wts = self._octagon_nodes(n)
            z = disk_to_uhp(pts)
            vals = np.asarray(fn(z.real, z.imag), dtype=float)
            return float(np.sum(vals * wts) * np.exp(2.0 * self.scale))
        if self.chart_kind == "sphere-chart":
            n = resolution or 96
            gu, wu = np.polynomial.legendre.leggauss(n)
            theta = (np.arange(2 * n) + 0.5) * (np.pi / n)
            r = np.sqrt((1.0 - gu) / (1.0 + gu))
            x = r[:, None] * np.cos(theta)[None, :]
            y = r[:, None] * np.sin(theta)[None, :]
            vals = np.asarray(fn(x, y), dtype=float)
            w = wu[:, None] * (np.pi / n)
            return float(np.sum(vals * w) * np.exp(2.0 * self.scale))
        # flat torus cell: midpoint rule in lattice coordinates
        n = resolution or 256
        u = (np.arange(n) + 0.5) / n
        uu, ww = np.meshgrid(u, u)
        basis = self.deck.basis
        x = basis[0, 0] * uu + basis[0, 1] * ww
        y = basis[1, 0] * uu + basis[1, 1] * ww
        vals = np.asarray(fn(x, y), dtype=float) * np.exp(2.0 * self.sigma(x, y))
        return float(vals.mean() * self.deck.cell_area)

    def _octagon_nodes(self, n):
        geom = self.geometry or OctagonGeometry()
        return geom.quadrature_nodes(n_theta=max(8, n // 2), n_u=n)

    # -- metric helpers ------------------------------------------------------

    def metric_norm(self, x, y, vx, vy):
        return np.exp(self.sigma(x, y)) * np.hypot(vx, vy)

    def chart_distance(self, p, q) -> float:
        """Distance in the chart metric (universal cover, no deck folding)."""
        x0, y0 = float(p[0]), float(p[1])
        x1, y1 = float(q[0]), float(q[1])
        es = np.exp(self.scale)
        k = self.chart_kind
        if k == "upper-half-plane":
            return es * float(uhp_distance(complex(x0, y0), complex(x1, y1)))
        if k == "poincare-disk":
            return es * float(disk_distance(complex(x0, y0), complex(x1, y1)))
        if k == "sphere-chart":
            n0 = _sphere_unit(x0, y0)
            n1 = _sphere_unit(x1, y1)
            return es * float(np.arccos(np.clip(np.dot(n0, n1), -1.0, 1.0)))
        if self.sigma_field is not None:
            raise UnsupportedModelError("no closed-form distance for deformed metrics")
        return es * float(np.hypot(x1 - x0, y1 - y0))

    # -- sampling -------------------------------------------------------------

    def sample_base_points(self, rng, n):
        """n area-uniform chart points in the fundamental domain."""
        if not self.is_compact:
            raise UnsupportedModelError(f"{self.name} has no normalizable area measure")
        if self.deck.kind == "fuchsian":
            geom = self.geometry or OctagonGeometry()
            z = disk_to_uhp(geom.sample(rng, n))
            return z.real, z.imag
        if self.chart_kind == "sphere-chart":
            u = rng.uniform(-1.0, 1.0, n)
            u = np.clip(u, -1.0 + 1e-12, 1.0)
            r = np.sqrt((1.0 - u) / (1.0 + u))
            theta = rng.uniform(0.0, 2.0 * np.pi, n)
            return r * np.cos(theta), r * np.sin(theta)
        # flat torus: uniform in the cell, with rejection against the
        # conformal density when a deformation field is present
        if self.sigma_field is None:
            u = rng.uniform(0.0, 1.0, n)
            w = rng.uniform(0.0, 1.0, n)
            basis = self.deck.basis
            return basis[0, 0] * u + basis[0, 1] * w, basis[1, 0] * u + basis[1, 1] * w
        bound = self._density_bound()
        xs = np.empty(n)
        ys = np.empty(n)
        filled = 0
        while filled < n:
            m = max(int((n - filled) * 1.6) + 16, 16)
            u = rng.uniform(0.0, 1.0, m)
            w = rng.uniform(0.0, 1.0, m)
            basis = self.deck.basis
            x = basis[0, 0] * u + basis[0, 1] * w
            y = basis[1, 0] * u + basis[1, 1] * w
            density = np.exp(2.0 * self.sigma_field.value(x, y))
            keep = rng.uniform(0.0, bound, m) <= density
            took = min(int(keep.sum()), n - filled)
            xs[filled : filled + took] = x[keep][:took]
            ys[filled : filled + took] = y[keep][:took]
            filled += took
        return xs, ys

    def _density_bound(self) -> float:
        if self._sample_bound is None:
            n = 257
            u = np.linspace(0.0, 1.0, n)
            uu, ww = np.meshgrid(u, u)
            basis = self.deck.basis
            x = basis[0, 0] * uu + basis[0, 1] * ww
            y = basis[1, 0] * uu + basis[1, 1] * ww
            m = float(np.exp(2.0 * self.sigma_field.value(x, y)).max())
            object.__setattr__(self, "_sample_bound", m * 1.05)
        return self._sample_bound


def _sphere_unit(x, y):
    r2 = x * x + y * y
    den = 1.0 + r2
    return np.array([2.0 * x / den, 2.0 * y / den, (1.0 - r2) / den])


# ---------------------------------------------------------------------------
# Module operations


def curvature_at(model: SurfaceModel, x):
    """Gaussian curvature at a chart point (exact for model spaces)."""
    px, py = float(x[0]), float(x[1])
    return float(model.curvature(px, py))


def reduce_to_fundamental_domain(model: SurfaceModel, x):
    """(reduced point, deck word); the word maps the input to the reduction."""
    if model.deck.kind == "trivial":
        raise UnsupportedModelError("model has a trivial deck group")
    return model.deck.reduce((float(x[0]), float(x[1])))


def surface_area(model: SurfaceModel) -> float:
    """Total area of the compact quotient."""
    return model.area


# ---------------------------------------------------------------------------
# Presets


def make_genus2_octagon(k: float = 1.0, name=None) -> SurfaceModel:
    """Closed genus-2 surface of constant curvature -k (upper half-plane chart)."""
    if k <= 0:
        raise DegenerateInputError("genus-2 model needs k > 0 (curvature -k)")
    deck, geom = octagon_deck()
    return SurfaceModel(
        "upper-half-plane", deck, scale=-0.5 * np.log(k),
        name=name or f"genus2-octagon(k={k:g})", geometry=geom,
    )


def make_flat_torus(v1=(1.0, 0.0), v2=(0.0, 1.0), sigma_field=None, scale=0.0,
                    name=None) -> SurfaceModel:
    """Flat (or conformally deformed) torus from two lattice vectors."""
    return SurfaceModel(
        "flat-plane", LatticeDeck(v1, v2), scale=scale, sigma_field=sigma_field,
        name=name or "flat-torus",
    )


def make_sphere(k: float = 1.0, name=None) -> SurfaceModel:
    """Round sphere of constant curvature +k (stereographic chart)."""
    if k <= 0:
        raise DegenerateInputError("sphere model needs k > 0")
    return SurfaceModel(
        "sphere-chart", TrivialDeck(), scale=-0.5 * np.log(k),
        name=name or f"sphere(k={k:g})",
    )


def make_half_plane(k: float = 1.0, name=None) -> SurfaceModel:
    """Hyperbolic plane of curvature -k, no quotient (universal cover work)."""
    if k <= 0:
        raise DegenerateInputError("half-plane model needs k > 0")
    return SurfaceModel(
        "upper-half-plane", TrivialDeck(), scale=-0.5 * np.log(k),
        name=name or f"half-plane(k={k:g})",
    )
