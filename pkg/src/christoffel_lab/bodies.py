"""Catalog of smooth convex bodies described by their support functions.

Every body knows its support function u on the sphere, the value of the
1-homogeneous extension U(p) = |p| u(p/|p|) anywhere in R^3, and its
inverse Weingarten form W = (second covariant derivatives of u) + u I,
which equals the tangential Euclidean Hessian of U.  For the closed-form
variants (balls, ellipsoids) the Hessian is analytic; harmonic
perturbations use the spectral derivatives from spherecore.  W is
positive definite exactly when the body is smooth and strictly convex.
"""

from __future__ import annotations

import numpy as np

from . import covariant, mixedalg, spherecore
from .errors import (AliasingError, ConfigurationError, DimensionError,
                     DomainError)
from .spherecore import SphericalField, n_coeffs, sh_index


# ---------------------------------------------------------------------------
# body catalog
# ---------------------------------------------------------------------------

class Body:
    """Base class; subclasses implement support values and Hessians."""

    def support(self, points):
        """u(x) = sup over the body of <x, z>, for unit vectors x."""
        raise NotImplementedError

    def extension(self, points):
        """1-homogeneous extension |p| u(p/|p|) at arbitrary p != 0."""
        pts = np.asarray(points, dtype=float)
        r = np.linalg.norm(pts, axis=-1)
        if np.any(r < 1e-6):
            raise DomainError("extension not evaluated near the origin")
        return r * self.support(pts / r[..., None])

    def extension_hessian(self, points):
        """Full Euclidean 3x3 Hessian of the extension (annihilates p)."""
        raise NotImplementedError

    def weingarten(self, points, frames):
        """W in the supplied tangent frames: (..., 2, 2) symmetric."""
        H = self.extension_hessian(points)
        return np.einsum("...ia,...ij,...jb->...ab", frames, H, frames)

    def to_json(self):
        raise NotImplementedError


class Ball(Body):
    def __init__(self, r):
        if r <= 0:
            raise ConfigurationError("ball radius must be positive")
        self.r = float(r)

    def support(self, points):
        return np.full(np.asarray(points).shape[:-1], self.r)

    def extension(self, points):
        return self.r * np.linalg.norm(np.asarray(points, dtype=float), axis=-1)

    def extension_hessian(self, points):
        pts = np.asarray(points, dtype=float)
        r = np.linalg.norm(pts, axis=-1)
        nhat = pts / r[..., None]
        eye = np.broadcast_to(np.eye(3), pts.shape[:-1] + (3, 3))
        return self.r / r[..., None, None] * (eye - nhat[..., :, None] * nhat[..., None, :])

    def to_json(self):
        return {"variant": "ball", "r": self.r}


class TranslatedBall(Body):
    """Ball of radius r centered at v; requires |v| < r so the origin
    stays interior and the support function stays positive."""

    def __init__(self, r, v):
        v = np.asarray(v, dtype=float)
        if r <= 0 or v.shape != (3,) or np.linalg.norm(v) >= r:
            raise ConfigurationError("translated ball needs r > 0 and |v| < r")
        self.r = float(r)
        self.v = v

    def support(self, points):
        return self.r + np.asarray(points, dtype=float) @ self.v

    def extension(self, points):
        pts = np.asarray(points, dtype=float)
        return self.r * np.linalg.norm(pts, axis=-1) + pts @ self.v

    def extension_hessian(self, points):
        # the linear part has no Hessian: identical to the centered ball
        return Ball(self.r).extension_hessian(points)

    def to_json(self):
        return {"variant": "translated_ball", "r": self.r, "v": self.v.tolist()}


class Ellipsoid(Body):
    def __init__(self, q1, q2, q3):
        if min(q1, q2, q3) <= 0:
            raise ConfigurationError("ellipsoid semiaxes must be positive")
        self.semiaxes = (float(q1), float(q2), float(q3))
        self.Q = np.diag([q1 * q1, q2 * q2, q3 * q3]).astype(float)

    def support(self, points):
        pts = np.asarray(points, dtype=float)
        return np.sqrt(np.einsum("...i,ij,...j->...", pts, self.Q, pts))

    def extension(self, points):
        # sqrt(p^T Q p) is already 1-homogeneous
        return self.support(points)

    def extension_hessian(self, points):
        pts = np.asarray(points, dtype=float)
        s = self.support(pts)
        Qp = pts @ self.Q
        eyeQ = np.broadcast_to(self.Q, pts.shape[:-1] + (3, 3))
        return (eyeQ / s[..., None, None]
                - Qp[..., :, None] * Qp[..., None, :] / s[..., None, None] ** 3)

    def to_json(self):
        return {"variant": "ellipsoid", "semiaxes": list(self.semiaxes)}


class HarmonicPerturbation(Body):
    """Support function C + psi with psi a band-limited field containing
    degrees >= 2 only.  Strict convexity is guaranteed whenever the C^4
    norm of psi stays below C/4 (see c4_norm)."""

    def __init__(self, c, psi_coeffs):
        if c <= 0:
            raise ConfigurationError("base radius must be positive")
        coeffs = np.asarray(psi_coeffs, dtype=float)
        l_max = int(np.sqrt(coeffs.size)) - 1
        if n_coeffs(l_max) != coeffs.size:
            raise DimensionError("perturbation coefficients are not a full (L+1)^2 block")
        if np.any(coeffs[:4] != 0.0):
            raise ConfigurationError("perturbation must contain degrees >= 2 only")
        self.c = float(c)
        self.psi_coeffs = coeffs
        self.l_max = l_max

    def support(self, points):
        return self.c + spherecore.synth_at(self.psi_coeffs, points)

    def extension_hessian(self, points):
        pts = np.asarray(points, dtype=float)
        r = np.linalg.norm(pts, axis=-1)
        nhat = pts / r[..., None]
        frames = spherecore.coordinate_frames(nhat)
        _, Hc = spherecore.hessian_at(self.psi_coeffs, nhat)
        u = self.support(nhat)
        w11 = Hc[..., 0] + u
        w12 = Hc[..., 1]
        w22 = Hc[..., 2] + u
        e1, e2 = frames[..., :, 0], frames[..., :, 1]
        H = (w11[..., None, None] * e1[..., :, None] * e1[..., None, :]
             + w22[..., None, None] * e2[..., :, None] * e2[..., None, :]
             + w12[..., None, None] * (e1[..., :, None] * e2[..., None, :]
                                       + e2[..., :, None] * e1[..., None, :]))
        return H / r[..., None, None]

    def to_json(self):
        terms = []
        for k, (l, m) in enumerate(spherecore.sh_degree_orders(self.l_max)):
            if self.psi_coeffs[k] != 0.0:
                terms.append([l, m, float(self.psi_coeffs[k])])
        return {"variant": "harmonic_perturbation", "base": self.c, "coeffs": terms}


class MinkowskiSum(Body):
    """Weighted Minkowski combination: support functions add."""

    def __init__(self, terms):
        if not terms:
            raise ConfigurationError("empty Minkowski sum")
        for body, weight in terms:
            if weight <= 0:
                raise ConfigurationError("Minkowski weights must be positive")
        self.terms = [(body, float(weight)) for body, weight in terms]

    def support(self, points):
        return sum(w * b.support(points) for b, w in self.terms)

    def extension(self, points):
        return sum(w * b.extension(points) for b, w in self.terms)

    def extension_hessian(self, points):
        return sum(w * b.extension_hessian(points) for b, w in self.terms)

    def to_json(self):
        return {"variant": "minkowski_sum",
                "terms": [{"weight": w, "body": b.to_json()} for b, w in self.terms]}


def harmonic_perturbation(c, terms):
    """Convenience builder from (l, m, coefficient) triplets, l >= 2."""
    l_top = max(l for l, _, _ in terms)
    coeffs = np.zeros(n_coeffs(l_top))
    for l, m, val in terms:
        if l < 2:
            raise ConfigurationError("perturbation must contain degrees >= 2 only")
        coeffs[sh_index(l, m)] += val
    return HarmonicPerturbation(c, coeffs)


def support(body, x):
    """Support function of a catalog body at unit vectors x."""
    return body.support(x)


# ---------------------------------------------------------------------------
# tensor fields
# ---------------------------------------------------------------------------

class SymTensorField:
    """Symmetric 2x2 matrix per grid node, expressed in the node frame.

    An attached evaluator closure (points, frames) -> (..., 2, 2) provides
    exact off-node evaluation; fields without one fall back to a
    band-limited ambient representation (the tangential 3x3 embedding
    analyzed entrywise), built on first use.
    """

    def __init__(self, grid, values, frame="theta_phi", evaluator=None):
        values = np.asarray(values, dtype=float)
        if values.shape != (grid.n_nodes, 2, 2):
            raise DimensionError(f"tensor values of shape {values.shape}")
        self.grid = grid
        self.values = values
        self.frame = frame
        self._evaluator = evaluator
        self._ambient_coeffs = None

    def at(self, points, frames):
        """Matrix of the field at arbitrary points, in supplied frames."""
        if self._evaluator is not None:
            return self._evaluator(points, frames)
        return self._ambient_at(points, frames)

    def _ambient_at(self, points, frames):
        if self._ambient_coeffs is None:
            F = self.grid.frames
            T3 = np.einsum("nia,nab,njb->nij", F, self.values, F)
            l_fit = self.grid.max_analysis_degree
            coeffs = np.empty((3, 3, n_coeffs(l_fit)))
            for i in range(3):
                for j in range(i, 3):
                    coeffs[i, j] = coeffs[j, i] = spherecore.sh_analysis(
                        T3[:, i, j], self.grid, l_fit)
            self._ambient_coeffs = coeffs
        pts = np.asarray(points, dtype=float)
        T3 = np.empty(pts.shape[:-1] + (3, 3))
        for i in range(3):
            for j in range(i, 3):
                T3[..., i, j] = T3[..., j, i] = spherecore.synth_at(
                    self._ambient_coeffs[i, j], pts)
        return np.einsum("...ia,...ij,...jb->...ab", frames, T3, frames)

    def symmetry_defect(self):
        return float(np.abs(self.values - np.swapaxes(self.values, 1, 2)).max())

    def __add__(self, other):
        return SymTensorField(self.grid, self.values + other.values, self.frame)

    def __rmul__(self, scalar):
        return SymTensorField(self.grid, float(scalar) * self.values, self.frame)


def identity_field(grid):
    """The isotropic tensor I, exactly the identity in every frame."""
    values = np.broadcast_to(np.eye(2), (grid.n_nodes, 2, 2)).copy()

    def evaluator(points, frames):
        shape = np.asarray(points).shape[:-1]
        return np.broadcast_to(np.eye(2), shape + (2, 2)).copy()

    return SymTensorField(grid, values, evaluator=evaluator)


def weingarten_form(body_or_field, grid):
    """Inverse Weingarten form as a SymTensorField on the grid.

    Accepts a catalog Body (exact evaluator attached) or a band-limited
    SphericalField.  A values-only field whose content exceeds what the
    grid can analyze is refused rather than silently aliased.
    """
    if isinstance(body_or_field, Body):
        body = body_or_field
        values = body.weingarten(grid.nodes, grid.frames)
        return SymTensorField(grid, values, evaluator=body.weingarten)
    field = body_or_field
    coeffs = field.coeffs()
    resynth = spherecore.sh_synthesis(coeffs, grid)
    scale = max(float(np.abs(field.values).max()), 1e-300)
    if np.abs(resynth - field.values).max() > 1e-6 * scale:
        raise AliasingError(
            "field carries content beyond what this grid resolves; "
            "refusing to differentiate the aliased projection")
    vals, H = spherecore.hessian_at(coeffs, grid.nodes)
    u = field.values
    W = np.empty((grid.n_nodes, 2, 2))
    W[:, 0, 0] = H[:, 0] + u
    W[:, 0, 1] = W[:, 1, 0] = H[:, 1]
    W[:, 1, 1] = H[:, 2] + u
    return SymTensorField(grid, W, evaluator=spectral_weingarten_evaluator(coeffs))


def spectral_weingarten_evaluator(coeffs):
    """Closure evaluating W of a coefficient field anywhere, in any frame."""
    coeffs = np.asarray(coeffs, dtype=float)

    def evaluator(points, frames):
        pts = np.asarray(points, dtype=float)
        v, Hc = spherecore.hessian_at(coeffs, pts)
        cframes = spherecore.coordinate_frames(pts)
        Wc = np.empty(pts.shape[:-1] + (2, 2))
        Wc[..., 0, 0] = Hc[..., 0] + v
        Wc[..., 0, 1] = Wc[..., 1, 0] = Hc[..., 1]
        Wc[..., 1, 1] = Hc[..., 2] + v
        # change of tangent basis: R_ab = <coordinate a, requested b>
        R = np.einsum("...ia,...ib->...ab", cframes, frames)
        return np.einsum("...ai,...ab,...bj->...ij", R, Wc, R)

    return evaluator


def scaled_cofactor_field(weingartens):
    """Coefficient tensor of the mixed equation from n-1 Weingarten fields.

    On S^2 this is the pointwise adjugate of the single input field; the
    evaluator is inherited so the cofactor stays exact off the nodes.
    """
    if len(weingartens) != 1:
        raise DimensionError("S^2 mixed equation takes exactly one fixed body")
    W = weingartens[0]
    values = mixedalg.adjugate_2x2(W.values)

    def evaluator(points, frames):
        return mixedalg.adjugate_2x2(W.at(points, frames))

    return SymTensorField(W.grid, values, frame=W.frame, evaluator=evaluator)


def is_c2plus(body, grid, tol=0.0):
    """Smallest eigenvalue of W over the grid; positive means C^{2,+}."""
    W = body.weingarten(grid.nodes, grid.frames) if isinstance(body, Body) \
        else weingarten_form(body, grid).values
    min_eig = float(np.linalg.eigvalsh(W)[:, 0].min())
    return min_eig > tol, min_eig


# ---------------------------------------------------------------------------
# 1-homogeneous extension derivatives (finite-difference reference path)
# ---------------------------------------------------------------------------

def _fd_hessian(fn, p, h):
    H = np.empty((3, 3))
    for i in range(3):
        ei = np.zeros(3)
        ei[i] = h
        H[i, i] = (fn(p + ei) - 2.0 * fn(p) + fn(p - ei)) / h ** 2
        for j in range(i + 1, 3):
            ej = np.zeros(3)
            ej[j] = h
            H[i, j] = H[j, i] = (fn(p + ei + ej) - fn(p + ei - ej)
                                 - fn(p - ei + ej) + fn(p - ei - ej)) / (4.0 * h ** 2)
    return H


def _fd_gradient(fn, p, h):
    g = np.empty(3)
    for i in range(3):
        ei = np.zeros(3)
        ei[i] = h
        g[i] = (fn(p + ei) - fn(p - ei)) / (2.0 * h)
    return g


def homog_ext_derivs(body_or_field, p, order=2, method="auto"):
    """Euclidean derivative tensors of the 1-homogeneous extension at p.

    Returns (value, grad, hess[, third[, fourth]]) up to the requested
    order.  method="auto" uses the analytic Hessian when the input is a
    catalog body; method="fd" forces central differences with one
    Richardson level (step 1e-3 |p|, which keeps the rounding floor
    eps/h^2 near 1e-9) for orders <= 2.  Orders 3 and 4 difference the
    order-2 Hessians with step 1e-2 |p| and two Richardson levels; they
    are noise-limited and meant for cross-checks, the conditions module
    differentiates along great circles instead.
    """
    p = np.asarray(p, dtype=float)
    r = float(np.linalg.norm(p))
    if r < 1e-6:
        raise DomainError("extension derivatives undefined near the origin")
    if not 1 <= order <= 4:
        raise ConfigurationError("order must be between 1 and 4")

    if isinstance(body_or_field, Body):
        fn = lambda q: float(body_or_field.extension(q))
        exact_hess = None if method == "fd" else body_or_field.extension_hessian
    else:
        coeffs = np.asarray(body_or_field, dtype=float) \
            if not isinstance(body_or_field, SphericalField) else body_or_field.coeffs()
        def fn(q):
            rq = np.linalg.norm(q)
            return float(rq * spherecore.synth_at(coeffs, q[None, :] / rq)[0])
        exact_hess = None

    value = fn(p)

    def hess_at(q):
        if exact_hess is not None:
            return exact_hess(q)
        h0 = 1e-3 * np.linalg.norm(q)
        return (4.0 * _fd_hessian(fn, q, h0 / 2.0) - _fd_hessian(fn, q, h0)) / 3.0

    h0 = 1e-3 * r
    grad = (4.0 * _fd_gradient(fn, p, h0 / 2.0) - _fd_gradient(fn, p, h0)) / 3.0
    out = [value, grad]
    if order >= 2:
        out.append(hess_at(p))
    if order >= 3:
        h1 = 1e-2 * r

        def third_at_step(h):
            T = np.empty((3, 3, 3))
            for k in range(3):
                ek = np.zeros(3)
                ek[k] = h
                T[:, :, k] = (hess_at(p + ek) - hess_at(p - ek)) / (2.0 * h)
            return T

        t1, t2, t4 = third_at_step(h1), third_at_step(h1 / 2), third_at_step(h1 / 4)
        r1 = (4.0 * t2 - t1) / 3.0
        r2 = (4.0 * t4 - t2) / 3.0
        out.append((16.0 * r2 - r1) / 15.0)
    if order >= 4:
        h1 = 1e-2 * r

        def fourth_at_step(h):
            F = np.empty((3, 3, 3, 3))
            H0 = hess_at(p)
            for k in range(3):
                ek = np.zeros(3)
                ek[k] = h
                F[:, :, k, k] = (hess_at(p + ek) - 2.0 * H0 + hess_at(p - ek)) / h ** 2
                for l in range(k + 1, 3):
                    el = np.zeros(3)
                    el[l] = h
                    mixed = (hess_at(p + ek + el) - hess_at(p + ek - el)
                             - hess_at(p - ek + el) + hess_at(p - ek - el)) / (4.0 * h ** 2)
                    F[:, :, k, l] = F[:, :, l, k] = mixed
            return F

        f1, f2, f4 = fourth_at_step(h1), fourth_at_step(h1 / 2), fourth_at_step(h1 / 4)
        r1 = (4.0 * f2 - f1) / 3.0
        r2 = (4.0 * f4 - f2) / 3.0
        out.append((16.0 * r2 - r1) / 15.0)
    return tuple(out)


# ---------------------------------------------------------------------------
# derivative norms and Weingarten gradients
# ---------------------------------------------------------------------------

def c4_norm(psi_coeffs, grid, n_dirs=64):
    """Sup over nodes and directions of |psi| and its great-circle
    derivatives up to order four.

    psi restricted to a great circle is a trigonometric polynomial, so the
    derivatives are taken exactly with an FFT; the supremum is estimated
    over the quadrature nodes with n_dirs uniformly spread directions each.
    Returns (norm, witness) with the node index, direction angle and
    derivative order achieving the supremum.
    """
    coeffs = np.asarray(psi_coeffs, dtype=float)
    l_max = int(np.sqrt(coeffs.size)) - 1
    n_t = max(4 * l_max + 8, 16)
    ts = 2.0 * np.pi * np.arange(n_t) / n_t
    angles = np.pi * np.arange(n_dirs) / n_dirs
    x = grid.nodes
    e1 = grid.frames[:, :, 0]
    e2 = grid.frames[:, :, 1]
    worst = -1.0
    witness = {}
    freqs = np.fft.rfftfreq(n_t, d=1.0 / n_t)  # integer wave numbers
    for a in angles:
        v = np.cos(a) * e1 + np.sin(a) * e2
        pts, _ = covariant.geodesic_points(x, v, ts)
        samples = spherecore.synth_at(coeffs, pts)      # (N, n_t)
        spec = np.fft.rfft(samples, axis=1)
        for d in (0, 1, 2, 3, 4):
            deriv = samples if d == 0 else np.fft.irfft(spec * (1j * freqs) ** d, n=n_t, axis=1)
            peak = np.abs(deriv).max()
            if peak > worst:
                worst = float(peak)
                witness = {"node": int(np.unravel_index(np.abs(deriv).argmax(), deriv.shape)[0]),
                           "direction_angle": float(a), "derivative_order": d}
    return worst, witness


def weingarten_gradient(body, grid, h=1e-2):
    """Covariant derivative components w_ij,k of W at every node.

    Differenced along great circles with parallel-transported frames;
    returns (N, 2, 2, 2) with the last axis the derivative direction.
    By the Codazzi property the result is symmetric in all three indices
    for any genuine support function.
    """
    ts = h * covariant.STENCIL_T
    out = np.empty((grid.n_nodes, 2, 2, 2))
    for k in range(2):
        v = grid.frames[:, :, k]
        pts, _ = covariant.geodesic_points(grid.nodes, v, ts)
        tf = covariant.transport_frames(grid.nodes, v, grid.frames, ts)
        Wt = body.weingarten(pts, tf) if isinstance(body, Body) \
            else body.at(pts, tf)
        out[:, :, :, k] = covariant.stencil_apply(Wt, covariant.D1_WEIGHTS, h, 1)
    return out
