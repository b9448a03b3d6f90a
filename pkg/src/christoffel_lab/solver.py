"""Assembly and solution of the linear equation tr(A(x) W[u](x)) = f(x)
on the sphere.

The solve is least-squares collocation: unknowns are the harmonic
coefficients of u for degrees {0} and [2, L], columns of the design
matrix are the operator applied to each basis function sampled at the
quadrature nodes with sqrt-weight scaling, so the minimized quantity is
the weighted L^2 residual.  Degree-1 coefficients are pinned to zero:
linear functions span the kernel of the operator, and pinning them fixes
the translation freedom of the underlying body (Steiner-type
normalization).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import spherecore
from .bodies import SymTensorField
from .errors import (CompatibilityError, ConditioningError, ConfigurationError,
                     ConvergenceError, DimensionError, EllipticityError)
from .spherecore import SphericalField, n_coeffs, sh_degree_orders


def operator_apply(A, u, grid):
    """Node values of sum_ab a_ab (u_;ab + delta_ab u) = tr(A W[u]).

    A must be uniformly elliptic (positive definite at every node); the
    offending node and margin are attached to the error otherwise.
    """
    if A.grid is not grid:
        raise DimensionError("tensor field lives on a different grid")
    margins = np.linalg.eigvalsh(A.values)[:, 0]
    worst = int(np.argmin(margins))
    if margins[worst] <= 0.0:
        raise EllipticityError(worst, float(margins[worst]))
    coeffs = u.coeffs() if isinstance(u, SphericalField) else np.asarray(u, dtype=float)
    W = _basis_weingarten_stack(grid, coeffs)
    vals = (A.values[:, 0, 0] * W[:, 0] + 2.0 * A.values[:, 0, 1] * W[:, 1]
            + A.values[:, 1, 1] * W[:, 2])
    return SphericalField(grid, values=vals)


def _basis_weingarten_stack(grid, coeffs):
    """(N, 3) components (W11, W12, W22) of W[u] for a coefficient field."""
    l_max = int(np.sqrt(coeffs.size)) - 1
    t = grid.tables(l_max)
    H = t.hessians()   # (K, 3, N)
    Y = t.values()     # (K, N)
    vals = coeffs @ Y
    out = np.empty((grid.n_nodes, 3))
    out[:, 0] = coeffs @ H[:, 0, :] + vals
    out[:, 1] = coeffs @ H[:, 1, :]
    out[:, 2] = coeffs @ H[:, 2, :] + vals
    return out


def weingarten_of_solution(grid, coeffs):
    """W[u] as a SymTensorField for a solved coefficient vector.

    Node values come from the separable grid tables; the attached
    evaluator re-synthesizes off the nodes for downstream checks.
    """
    from .bodies import spectral_weingarten_evaluator
    coeffs = np.asarray(coeffs, dtype=float)
    comp = _basis_weingarten_stack(grid, coeffs)
    W = np.empty((grid.n_nodes, 2, 2))
    W[:, 0, 0] = comp[:, 0]
    W[:, 0, 1] = W[:, 1, 0] = comp[:, 1]
    W[:, 1, 1] = comp[:, 2]
    return SymTensorField(grid, W, evaluator=spectral_weingarten_evaluator(coeffs))


def check_compatibility(f, grid, tol=1e-8):
    """First-harmonic moments (int x_j f) and a pass verdict.

    The moments must vanish for any density arising from bodies; the
    verdict compares each |moment| against tol * int f.
    """
    fv = f.values if isinstance(f, SphericalField) else np.asarray(f, dtype=float)
    moments = np.array([spherecore.quadrature(grid.nodes[:, j] * fv, grid)
                        for j in range(3)])
    total = spherecore.quadrature(fv, grid)
    passed = bool(np.all(np.abs(moments) <= tol * abs(total)))
    return moments, passed


@dataclass
class SolveReport:
    """Solution coefficients plus residuals and diagnostics."""

    u_coeffs: np.ndarray
    l_max: int
    residual_l2: float
    rhs_norm: float
    compat_moments: tuple
    ellipticity_margin: float
    w_min_eig: float
    rank_histogram: dict
    system_rank: int
    n_unknowns: int
    condition_verdicts: dict = field(default_factory=dict)

    def to_json_dict(self):
        return {
            "l_max": self.l_max,
            "u_coeffs": [float(c) for c in self.u_coeffs],
            "residual_l2": self.residual_l2,
            "rhs_norm": self.rhs_norm,
            "relative_residual": self.residual_l2 / self.rhs_norm if self.rhs_norm else 0.0,
            "compat_moments": list(self.compat_moments),
            "ellipticity_margin": self.ellipticity_margin,
            "w_min_eig": self.w_min_eig,
            "rank_histogram": {str(k): v for k, v in sorted(self.rank_histogram.items())},
            "system_rank": self.system_rank,
            "n_unknowns": self.n_unknowns,
            "condition_verdicts": {k: v.to_json_dict() for k, v in self.condition_verdicts.items()},
        }


def _solution_degrees(l_max, grid=None):
    """Flat indices of the solve unknowns.

    Degree 1 is always pinned to zero (translation gauge).  At the
    resolution limit two further families are invisible on the grid and
    are pinned as well: the zonal harmonic of degree n_theta vanishes at
    every Gauss node (the nodes are the roots of that Legendre
    polynomial), and sine harmonics of order n_phi/2 vanish at every
    equiangular longitude.
    """
    keep = []
    for k, (l, m) in enumerate(sh_degree_orders(l_max)):
        if l == 1:
            continue
        if grid is not None:
            if l == grid.n_theta and m == 0:
                continue
            if m == -(grid.n_phi // 2):
                continue
        keep.append(k)
    return np.array(keep, dtype=int)


def solve(A, f, grid, l_max, compat_tol=1e-8, residual_tol=1e-6, rank_tol=1e-6):
    """Least-squares collocation solve of tr(A W[u]) = f.

    Raises CompatibilityError / EllipticityError / ConditioningError /
    ConvergenceError; on success returns a SolveReport whose degree-1
    coefficient block is identically zero.
    """
    if l_max < 2:
        raise ConfigurationError("l_max must be at least 2")
    if l_max > min(grid.n_theta, grid.n_phi // 2):
        raise ConfigurationError(
            f"l_max {l_max} not resolvable by a {grid.n_theta}x{grid.n_phi} grid")
    if A.grid is not grid:
        raise DimensionError("tensor field lives on a different grid")
    fv = f.values if isinstance(f, SphericalField) else np.asarray(f, dtype=float)
    if fv.shape != (grid.n_nodes,):
        raise DimensionError(f"rhs of shape {fv.shape}")

    moments, ok = check_compatibility(fv, grid, compat_tol)
    if not ok:
        raise CompatibilityError(moments, compat_tol)

    margins = np.linalg.eigvalsh(A.values)[:, 0]
    worst = int(np.argmin(margins))
    if margins[worst] <= 0.0:
        raise EllipticityError(worst, float(margins[worst]))

    t = grid.tables(l_max)
    H = t.hessians()
    Y = t.values()
    keep = _solution_degrees(l_max, grid)
    sqw = np.sqrt(grid.weights)
    a11 = A.values[:, 0, 0]
    a12 = A.values[:, 0, 1]
    a22 = A.values[:, 1, 1]
    a_tr = a11 + a22
    # column k: sqrt(w) * tr(A W[Y_k]); assembled basis-by-basis
    design = np.empty((grid.n_nodes, keep.size))
    for col, k in enumerate(keep):
        design[:, col] = sqw * (a11 * H[k, 0] + 2.0 * a12 * H[k, 1]
                                + a22 * H[k, 2] + a_tr * Y[k])
    rhs = sqw * fv
    coeffs_kept, _, rank, _ = np.linalg.lstsq(design, rhs, rcond=rank_tol)
    if rank < keep.size:
        raise ConditioningError(
            f"design matrix rank {rank} below {keep.size} unknowns")
    residual = float(np.linalg.norm(design @ coeffs_kept - rhs))
    rhs_norm = float(np.linalg.norm(rhs))
    if residual > residual_tol * rhs_norm:
        raise ConvergenceError(residual, residual_tol * rhs_norm)

    u_coeffs = np.zeros(n_coeffs(l_max))
    u_coeffs[keep] = coeffs_kept

    W = weingarten_of_solution(grid, u_coeffs)
    eigs = np.linalg.eigvalsh(W.values)
    w_min = float(eigs[:, 0].min())
    tau = rank_tol * max(float(eigs.max()), 1e-300)
    ranks = (eigs > tau).sum(axis=1)
    hist = {int(r): int((ranks == r).sum()) for r in np.unique(ranks)}

    return SolveReport(
        u_coeffs=u_coeffs,
        l_max=l_max,
        residual_l2=residual,
        rhs_norm=rhs_norm,
        compat_moments=tuple(float(m) for m in moments),
        ellipticity_margin=float(margins[worst]),
        w_min_eig=w_min,
        rank_histogram=hist,
        system_rank=int(rank),
        n_unknowns=int(keep.size),
    )
