"""Discretization of the unit sphere S^2.

Quadrature grids are Gauss-Legendre in colatitude crossed with equally
spaced longitudes.  Gauss nodes are interior, so no node ever sits on a
pole and the coordinate tangent frame (normalized d/dtheta, d/dphi) is
well defined at every node.

Scalar fields are expanded in the real orthonormal spherical-harmonic
basis.  For a basis function Y = P(theta) * T(phi) the second covariant
derivatives in the node frame are available in closed form:

    u_;11 = P'' T
    u_;12 = T' (P' - cot(theta) P) / sin(theta)
    u_;22 = P T'' / sin(theta)^2 + cot(theta) P' T

where P'' comes from the associated Legendre ODE, so every derivative is
spectrally exact (no finite differencing on the sphere).
"""

from __future__ import annotations

import numpy as np

from .errors import AliasingError, ConfigurationError, DimensionError, GeometryError

FOUR_PI = 4.0 * np.pi


# ---------------------------------------------------------------------------
# basis indexing
# ---------------------------------------------------------------------------
#
# Flat coefficient layout: degree l occupies indices l^2 .. (l+1)^2 - 1,
# ordered (l,0), (l,1,cos), (l,1,sin), (l,2,cos), (l,2,sin), ...
# Signed order m: m >= 0 denotes the cosine branch, m < 0 the sine branch.

def n_coeffs(l_max):
    return (l_max + 1) ** 2


def sh_index(l, m):
    """Flat index of the real harmonic of degree l and signed order m."""
    if abs(m) > l:
        raise DimensionError(f"order {m} out of range for degree {l}")
    if m == 0:
        return l * l
    if m > 0:
        return l * l + 2 * m - 1
    return l * l - 2 * m


def sh_degree_orders(l_max):
    """List of (l, m) pairs in flat-index order."""
    out = []
    for l in range(l_max + 1):
        out.append((l, 0))
        for m in range(1, l + 1):
            out.append((l, m))
            out.append((l, -m))
    return out


def _pair_index(l, m):
    # triangular index into the (l, |m|) Legendre tables
    return l * (l + 1) // 2 + m


# ---------------------------------------------------------------------------
# normalized associated Legendre functions
# ---------------------------------------------------------------------------

def _norm_legendre(l_max, ct, st, derivatives=True):
    """Orthonormal associated Legendre values at cos/sin colatitude.

    Returns (P, dP) with shape (n_pairs, npts); dP is None when
    derivatives=False.  Normalization is chosen so the real basis
    {P_l0, sqrt2 P_lm cos(m phi), sqrt2 P_lm sin(m phi)} is orthonormal
    for the surface measure.  No Condon-Shortley phase.
    """
    ct = np.asarray(ct, dtype=float)
    st = np.asarray(st, dtype=float)
    npair = (l_max + 1) * (l_max + 2) // 2
    P = np.zeros((npair,) + ct.shape)
    P[0] = 1.0 / np.sqrt(FOUR_PI)
    for m in range(1, l_max + 1):
        P[_pair_index(m, m)] = st * np.sqrt((2 * m + 1) / (2.0 * m)) * P[_pair_index(m - 1, m - 1)]
    for m in range(0, l_max):
        P[_pair_index(m + 1, m)] = np.sqrt(2 * m + 3.0) * ct * P[_pair_index(m, m)]
        for l in range(m + 2, l_max + 1):
            a = np.sqrt((4.0 * l * l - 1.0) / (l * l - m * m))
            b = np.sqrt(((l - 1.0) ** 2 - m * m) / (4.0 * (l - 1.0) ** 2 - 1.0))
            P[_pair_index(l, m)] = a * (ct * P[_pair_index(l - 1, m)] - b * P[_pair_index(l - 2, m)])
    if not derivatives:
        return P, None
    dP = np.zeros_like(P)
    for l in range(1, l_max + 1):
        for m in range(0, l + 1):
            term = l * ct * P[_pair_index(l, m)]
            if l - 1 >= m:
                d = np.sqrt((l * l - m * m) * (2.0 * l + 1.0) / (2.0 * l - 1.0))
                term = term - d * P[_pair_index(l - 1, m)]
            dP[_pair_index(l, m)] = term / st
    return P, dP


def _second_theta_derivative(l, m, P_lm, dP_lm, ct, st):
    # associated Legendre ODE: P'' = -cot P' - (l(l+1) - m^2/sin^2) P
    return -ct / st * dP_lm - (l * (l + 1.0) - m * m / (st * st)) * P_lm


# ---------------------------------------------------------------------------
# grid
# ---------------------------------------------------------------------------

class FramedGrid:
    """Quadrature nodes on S^2 with weights and a tangent frame per node.

    nodes   : (N, 3) unit vectors, index = i_theta * n_phi + i_phi
    weights : (N,) positive, summing to 4 pi
    frames  : (N, 3, 2) columns are e1 = theta-hat, e2 = phi-hat
    exactness_degree : quadrature integrates single harmonics exactly up
        to this degree; analysis is reliable up to exactness_degree // 2.
    """

    def __init__(self, n_theta, n_phi):
        if n_theta < 4 or n_phi < 8:
            raise ConfigurationError(
                f"grid {n_theta}x{n_phi} below minimum 4x8")
        self.n_theta = int(n_theta)
        self.n_phi = int(n_phi)
        x, w_gl = np.polynomial.legendre.leggauss(self.n_theta)
        # ascending cos(theta): node block 0 is nearest the south pole
        self.cos_theta = x
        self.sin_theta = np.sqrt(1.0 - x * x)
        self.thetas = np.arccos(x)
        self.phis = 2.0 * np.pi * np.arange(self.n_phi) / self.n_phi
        w_theta = w_gl * (2.0 * np.pi / self.n_phi)
        ct = np.repeat(self.cos_theta, self.n_phi)
        st = np.repeat(self.sin_theta, self.n_phi)
        cp = np.tile(np.cos(self.phis), self.n_theta)
        sp = np.tile(np.sin(self.phis), self.n_theta)
        self.nodes = np.column_stack([st * cp, st * sp, ct])
        self.weights = np.repeat(w_theta, self.n_phi)
        e1 = np.column_stack([ct * cp, ct * sp, -st])
        e2 = np.column_stack([-sp, cp, np.zeros_like(sp)])
        self.frames = np.stack([e1, e2], axis=2)
        self.exactness_degree = min(2 * self.n_theta - 1, self.n_phi - 1)
        self._tables = {}

    @property
    def n_nodes(self):
        return self.n_theta * self.n_phi

    @property
    def max_analysis_degree(self):
        return self.exactness_degree // 2

    def node_thetas(self):
        return np.repeat(self.thetas, self.n_phi)

    def node_phis(self):
        return np.tile(self.phis, self.n_theta)

    def tables(self, l_max):
        """Cached separable basis tables for degrees up to l_max."""
        if l_max not in self._tables:
            self._tables[l_max] = _GridTables(self, l_max)
        return self._tables[l_max]


class _GridTables:
    """Per-grid Legendre and trigonometric tables, plus assembled basis
    value/Hessian matrices (lazy, they are only needed by the solver)."""

    def __init__(self, grid, l_max):
        self.grid = grid
        self.l_max = l_max
        ct, st = grid.cos_theta, grid.sin_theta
        self.P, self.dP = _norm_legendre(l_max, ct, st)
        m_range = np.arange(l_max + 1)[:, None]
        self.cos_m = np.cos(m_range * grid.phis[None, :])
        self.sin_m = np.sin(m_range * grid.phis[None, :])
        self._values = None
        self._hessians = None

    def _basis_theta_phi(self, l, m):
        """theta-profile and phi-profile (with phi-derivative factor) of one
        real basis function; returns (P, dP, d2P, T, dT, m_abs)."""
        am = abs(m)
        p = self.P[_pair_index(l, am)]
        dp = self.dP[_pair_index(l, am)]
        d2p = _second_theta_derivative(l, am, p, dp, self.grid.cos_theta, self.grid.sin_theta)
        if m == 0:
            T = np.ones(self.grid.n_phi)
            dT = np.zeros(self.grid.n_phi)
        elif m > 0:
            T = np.sqrt(2.0) * self.cos_m[am]
            dT = -am * np.sqrt(2.0) * self.sin_m[am]
        else:
            T = np.sqrt(2.0) * self.sin_m[am]
            dT = am * np.sqrt(2.0) * self.cos_m[am]
        return p, dp, d2p, T, dT, am

    def values(self):
        """(K, N) matrix of basis values at the grid nodes."""
        if self._values is None:
            K = n_coeffs(self.l_max)
            out = np.empty((K, self.grid.n_nodes))
            for k, (l, m) in enumerate(sh_degree_orders(self.l_max)):
                p, _, _, T, _, _ = self._basis_theta_phi(l, m)
                out[k] = np.outer(p, T).ravel()
            self._values = out
        return self._values

    def hessians(self):
        """(K, 3, N) covariant Hessian components (u11, u12, u22) of every
        basis function at the grid nodes, in the node frames."""
        if self._hessians is None:
            grid = self.grid
            ct, st = grid.cos_theta, grid.sin_theta
            cot = ct / st
            K = n_coeffs(self.l_max)
            out = np.empty((K, 3, grid.n_nodes))
            for k, (l, m) in enumerate(sh_degree_orders(self.l_max)):
                p, dp, d2p, T, dT, am = self._basis_theta_phi(l, m)
                out[k, 0] = np.outer(d2p, T).ravel()
                out[k, 1] = np.outer((dp - cot * p) / st, dT).ravel()
                out[k, 2] = (np.outer(-am * am * p / (st * st), T)
                             + np.outer(cot * dp, T)).ravel()
            self._hessians = out
        return self._hessians


def build_grid(n_theta, n_phi):
    """Gauss-Legendre x equiangular quadrature grid with tangent frames."""
    return FramedGrid(n_theta, n_phi)


# ---------------------------------------------------------------------------
# quadrature and transforms
# ---------------------------------------------------------------------------

def quadrature(values, grid):
    """Integrate node values over the sphere: sum of w_i * g(x_i).

    Accepts a SphericalField or a plain array of node values.  The
    summation order is fixed by the node ordering, so results are
    bit-stable for a given grid.
    """
    v = values.values if isinstance(values, SphericalField) else np.asarray(values, dtype=float)
    if v.shape != (grid.n_nodes,):
        raise DimensionError(f"expected {grid.n_nodes} node values, got {v.shape}")
    return float(np.dot(grid.weights, v))


def sh_analysis(values, grid, l_max):
    """Expand node values in the real harmonic basis by quadrature.

    Refuses degrees the grid cannot resolve: products of two degree-l_max
    harmonics must still be integrated exactly.
    """
    if l_max > grid.max_analysis_degree:
        raise AliasingError(
            f"analysis degree {l_max} exceeds {grid.max_analysis_degree} "
            f"(= exactness {grid.exactness_degree} // 2) for this grid")
    v = np.asarray(values, dtype=float)
    if v.shape != (grid.n_nodes,):
        raise DimensionError(f"expected {grid.n_nodes} node values, got {v.shape}")
    Y = grid.tables(l_max).values()
    return Y @ (grid.weights * v)


def sh_synthesis(coeffs, grid):
    """Evaluate a coefficient vector at the grid nodes."""
    coeffs = np.asarray(coeffs, dtype=float)
    l_max = int(np.sqrt(coeffs.size)) - 1
    if n_coeffs(l_max) != coeffs.size:
        raise DimensionError(f"coefficient vector of size {coeffs.size} is not (L+1)^2")
    return coeffs @ grid.tables(l_max).values()


# ---------------------------------------------------------------------------
# pointwise synthesis (off-grid)
# ---------------------------------------------------------------------------

def _theta_phi(points):
    pts = np.asarray(points, dtype=float)
    ct = np.clip(pts[..., 2], -1.0, 1.0)
    theta = np.arccos(ct)
    phi = np.arctan2(pts[..., 1], pts[..., 0])
    return theta, phi


def synth_at(coeffs, points):
    """Evaluate a coefficient vector at arbitrary unit vectors."""
    coeffs = np.asarray(coeffs, dtype=float)
    l_max = int(np.sqrt(coeffs.size)) - 1
    theta, phi = _theta_phi(points)
    ct, st = np.cos(theta), np.sin(theta)
    P, _ = _norm_legendre(l_max, ct, st, derivatives=False)
    out = np.zeros_like(theta)
    for k, (l, m) in enumerate(sh_degree_orders(l_max)):
        c = coeffs[k]
        if c == 0.0:
            continue
        am = abs(m)
        if m == 0:
            T = 1.0
        elif m > 0:
            T = np.sqrt(2.0) * np.cos(am * phi)
        else:
            T = np.sqrt(2.0) * np.sin(am * phi)
        out += c * P[_pair_index(l, am)] * T
    return out


def hessian_at(coeffs, points):
    """Values and covariant Hessian components of a coefficient field at
    arbitrary points, in the coordinate frame (theta-hat, phi-hat).

    Returns (values, H) with H of shape points[:-1] + (3,) holding
    (u_;11, u_;12, u_;22).  Points too close to a pole (sin theta below
    1e-8) are rejected: the coordinate frame degenerates there.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    l_max = int(np.sqrt(coeffs.size)) - 1
    theta, phi = _theta_phi(points)
    ct, st = np.cos(theta), np.sin(theta)
    if np.any(st < 1e-8):
        raise GeometryError("coordinate frame undefined this close to a pole")
    cot = ct / st
    P, dP = _norm_legendre(l_max, ct, st)
    vals = np.zeros_like(theta)
    H = np.zeros(theta.shape + (3,))
    for k, (l, m) in enumerate(sh_degree_orders(l_max)):
        c = coeffs[k]
        if c == 0.0:
            continue
        am = abs(m)
        p = P[_pair_index(l, am)]
        dp = dP[_pair_index(l, am)]
        d2p = _second_theta_derivative(l, am, p, dp, ct, st)
        if m == 0:
            T, dT = 1.0, 0.0
        elif m > 0:
            T = np.sqrt(2.0) * np.cos(am * phi)
            dT = -am * np.sqrt(2.0) * np.sin(am * phi)
        else:
            T = np.sqrt(2.0) * np.sin(am * phi)
            dT = am * np.sqrt(2.0) * np.cos(am * phi)
        vals += c * p * T
        H[..., 0] += c * d2p * T
        H[..., 1] += c * (dp - cot * p) / st * dT
        H[..., 2] += c * (-am * am * p / (st * st) * T + cot * dp * T)
    return vals, H


def coordinate_frames(points):
    """Coordinate tangent frame (theta-hat, phi-hat) at arbitrary points."""
    theta, phi = _theta_phi(points)
    ct, st = np.cos(theta), np.sin(theta)
    cp, sp = np.cos(phi), np.sin(phi)
    e1 = np.stack([ct * cp, ct * sp, -st], axis=-1)
    e2 = np.stack([-sp, cp, np.zeros_like(sp)], axis=-1)
    return np.stack([e1, e2], axis=-1)


# ---------------------------------------------------------------------------
# scalar fields
# ---------------------------------------------------------------------------

class SphericalField:
    """Scalar function on S^2: harmonic coefficients and/or node values.

    Band-limited fields carry coefficients and synthesize values on
    demand; fields produced by pointwise operations carry node values and
    are analyzed lazily (at the grid's maximal reliable degree) when a
    spectral representation is required.  An optional point_fn closure
    provides exact off-grid evaluation for closed-form data.
    """

    def __init__(self, grid, values=None, coeffs=None, point_fn=None):
        if values is None and coeffs is None and point_fn is None:
            raise ConfigurationError("field needs values, coefficients or a closure")
        self.grid = grid
        self._values = None if values is None else np.asarray(values, dtype=float)
        if self._values is not None and self._values.shape != (grid.n_nodes,):
            raise DimensionError(
                f"expected {grid.n_nodes} node values, got {self._values.shape}")
        self._coeffs = None if coeffs is None else np.asarray(coeffs, dtype=float)
        self.point_fn = point_fn

    @classmethod
    def from_coeffs(cls, grid, coeffs):
        return cls(grid, coeffs=coeffs)

    @classmethod
    def from_values(cls, grid, values):
        return cls(grid, values=values)

    @classmethod
    def from_function(cls, grid, fn):
        """Sample a callable of unit vectors; keep it for off-grid use."""
        return cls(grid, values=np.asarray(fn(grid.nodes), dtype=float), point_fn=fn)

    @classmethod
    def constant(cls, grid, value):
        v = float(value)
        return cls(grid, values=np.full(grid.n_nodes, v),
                   point_fn=lambda pts: np.full(np.asarray(pts).shape[:-1], v))

    @classmethod
    def harmonic(cls, grid, terms, offset=0.0):
        """Field from (l, m, c) triplets plus a constant offset."""
        l_top = max((l for l, _, _ in terms), default=0)
        coeffs = np.zeros(n_coeffs(l_top))
        coeffs[0] = offset * np.sqrt(FOUR_PI)
        for l, m, c in terms:
            coeffs[sh_index(l, m)] += c
        return cls(grid, coeffs=coeffs)

    @property
    def values(self):
        if self._values is None:
            self._values = sh_synthesis(self._coeffs, self.grid)
        return self._values

    @property
    def l_max(self):
        return int(np.sqrt(self.coeffs().size)) - 1

    def coeffs(self, l_max=None):
        """Spectral representation; lazy analysis for values-only fields."""
        if self._coeffs is None:
            self._coeffs = sh_analysis(self.values, self.grid,
                                       self.grid.max_analysis_degree if l_max is None else l_max)
        return self._coeffs

    def at(self, points):
        """Evaluate at arbitrary unit vectors (exact closure if available)."""
        if self.point_fn is not None:
            return np.asarray(self.point_fn(points), dtype=float)
        return synth_at(self.coeffs(), points)

    def reciprocal(self):
        """Pointwise 1/f, keeping exact off-grid evaluation when possible."""
        if self.point_fn is not None:
            fn = self.point_fn
            return SphericalField(self.grid, values=1.0 / self.values,
                                  point_fn=lambda pts: 1.0 / np.asarray(fn(pts), dtype=float))
        coeffs = self.coeffs()
        return SphericalField(self.grid, values=1.0 / self.values,
                              point_fn=lambda pts: 1.0 / synth_at(coeffs, pts))


# ---------------------------------------------------------------------------
# great circles
# ---------------------------------------------------------------------------

def great_circle_point(x, alpha, t):
    """Point reached after arclength t along the great circle through x
    with initial direction alpha (unit tangent at x)."""
    x = np.asarray(x, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    if abs(np.dot(x, x) - 1.0) > 1e-12 or abs(np.dot(alpha, alpha) - 1.0) > 1e-12:
        raise GeometryError("great circle needs unit point and direction")
    if abs(np.dot(x, alpha)) > 1e-12:
        raise GeometryError("direction is not tangent to the sphere at x")
    return x * np.cos(t) + alpha * np.sin(t)
