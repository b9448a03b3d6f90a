"""Verification of structural identities on computed solutions: rank
profiles, recovered densities, moment conditions, mixed-volume pairing
symmetry and the Minkowski integral identity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import mixedalg, spherecore
from .bodies import Ball, Body, SymTensorField, weingarten_form
from .errors import DimensionError
from .spherecore import SphericalField


@dataclass
class RankProfile:
    """Eigenvalue and rank diagnostics of a Weingarten field.

    phi is the rank test function sigma_{l+1} + sigma_{l+2}/sigma_{l+1}
    with l the minimum observed rank, set to zero wherever
    sigma_{l+1} <= tau; it is the quantity whose vanishing certifies
    constant rank.  When the field already has full rank everywhere the
    test function is not applicable and phi is None.
    """

    eigenvalues: np.ndarray
    min_eig: float
    ranks: np.ndarray
    min_rank: int
    histogram: dict
    tau: float
    phi: np.ndarray | None

    def to_json_dict(self):
        return {
            "min_eig": self.min_eig,
            "min_rank": self.min_rank,
            "histogram": {str(k): v for k, v in sorted(self.histogram.items())},
            "tau": self.tau,
            "phi_applicable": self.phi is not None,
            "phi_max": None if self.phi is None else float(self.phi.max()),
        }


def rank_profile(W, tau=None):
    """Per-node eigenvalues, numeric ranks and the rank test function.

    tau defaults to 1e-6 times the largest eigenvalue over the grid,
    separating spectral noise from genuine degeneracy at desk scale.
    """
    values = W.values if isinstance(W, SymTensorField) else np.asarray(W, dtype=float)
    eigs = np.linalg.eigvalsh(values)
    if tau is None:
        tau = 1e-6 * max(float(eigs.max()), 1e-300)
    n = values.shape[-1]
    ranks = (eigs > tau).sum(axis=1)
    hist = {int(r): int((ranks == r).sum()) for r in np.unique(ranks)}
    l = int(ranks.min())
    if l >= n:
        phi = None
    else:
        s_l1 = np.array([mixedalg.sigma_k(M, l + 1) for M in values])
        if l + 2 <= n:
            s_l2 = np.array([mixedalg.sigma_k(M, l + 2) for M in values])
        else:
            s_l2 = np.zeros_like(s_l1)
        phi = np.where(s_l1 > tau, s_l1 + np.divide(
            s_l2, s_l1, out=np.zeros_like(s_l1), where=s_l1 > tau), 0.0)
    return RankProfile(eigenvalues=eigs, min_eig=float(eigs[:, 0].min()),
                       ranks=ranks, min_rank=l, histogram=hist,
                       tau=float(tau), phi=phi)


def _weingarten_values(body_or_field, grid):
    if isinstance(body_or_field, SymTensorField):
        return body_or_field.values
    if isinstance(body_or_field, Body):
        return body_or_field.weingarten(grid.nodes, grid.frames)
    return weingarten_form(body_or_field, grid).values


def mixed_density_values(front_bodies, W_last, grid):
    """Scaled mixed-measure density n * D(W_1, .., W_{n-1}, W_last).

    Under the package's scaled convention this equals tr(adjugate of the
    front Weingarten form times W_last) on S^2, and reduces to tr(W) when
    the front body is the unit ball.
    """
    if len(front_bodies) != 1:
        raise DimensionError("S^2 mixed measures take exactly one front body")
    W1 = _weingarten_values(front_bodies[0], grid)
    WL = W_last.values if isinstance(W_last, SymTensorField) else np.asarray(W_last)
    return np.einsum("nab,nab->n", mixedalg.adjugate_2x2(W1), WL)


def recovered_density(front_bodies, u, grid):
    """Density generated by a solution field against the fixed bodies."""
    if isinstance(u, SphericalField):
        coeffs = u.coeffs()
    else:
        coeffs = np.asarray(u, dtype=float)
    from .solver import weingarten_of_solution
    Wu = weingarten_of_solution(grid, coeffs)
    return SphericalField(grid, values=mixed_density_values(front_bodies, Wu, grid))


def density_moments(density, grid):
    """First-harmonic moments of a density; vanish for body-generated data."""
    d = density.values if isinstance(density, SphericalField) else np.asarray(density)
    return np.array([spherecore.quadrature(grid.nodes[:, j] * d, grid)
                     for j in range(3)])


def mixed_volume_pairing(front_bodies, body_a, body_b, grid):
    """Both orders of the mixed-volume pairing and their defect.

    I1 integrates the support of body_b against the density generated by
    (front, body_a); I2 swaps the roles.  Symmetry of mixed volumes makes
    I1 = I2 regardless of the density normalization constant.
    """
    dens_a = mixed_density_values(front_bodies, _as_tensor(body_a, grid), grid)
    dens_b = mixed_density_values(front_bodies, _as_tensor(body_b, grid), grid)
    i1 = spherecore.quadrature(body_b.support(grid.nodes) * dens_a, grid)
    i2 = spherecore.quadrature(body_a.support(grid.nodes) * dens_b, grid)
    return i1, i2, abs(i1 - i2)


def _as_tensor(body, grid):
    return SymTensorField(grid, body.weingarten(grid.nodes, grid.frames))


def minkowski_identity_check(body, l, grid):
    """Relative defect of the integral identity between consecutive
    curvature integrals:  C * int sigma_{l+1}(W) = int u sigma_l(W).

    The constant is calibrated on the unit ball at the same grid and l
    (it equals (l+1)/(n-l) analytically) and then applied to the input
    body.  Returns (residual, calibrated_constant).
    """
    if not 0 <= l <= 1:
        raise DimensionError("l must be 0 or 1 on S^2")

    def sides(b):
        W = b.weingarten(grid.nodes, grid.frames)
        u = b.support(grid.nodes)
        s_l = np.array([mixedalg.sigma_k(M, l) for M in W])
        s_l1 = np.array([mixedalg.sigma_k(M, l + 1) for M in W])
        return (spherecore.quadrature(s_l1, grid),
                spherecore.quadrature(u * s_l, grid))

    cal_lhs, cal_rhs = sides(Ball(1.0))
    constant = cal_rhs / cal_lhs
    lhs, rhs = sides(body)
    return abs(constant * lhs - rhs) / abs(rhs), constant
