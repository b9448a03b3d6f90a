"""Multilinear algebra of symmetric matrices: mixed discriminants, mixed
cofactor matrices, elementary symmetric functions, eigenvalue margins.

The mixed discriminant here is the normalized polarization of the
determinant,

    D(M_1, ..., M_n) = (1/n!) sum_{sigma} det[ column j of M_{sigma(j)} ],

so D(M, ..., M) = det M and D(M^(k), I^(n-k)) = sigma_k(M) / C(n, k).
The scaled cofactor multiplies the polarized cofactor by n; under that
scale the all-identity cofactor is exactly the identity, and the trace
pairing tr(scaled_cofactor(W_1..W_{n-1}) W) equals n * D(W_1..W_{n-1}, W),
which reduces to tr(W) when every W_i = I.  Densities produced elsewhere
in the package follow this scaled convention.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from .errors import DimensionError

MAX_SIZE = 6  # the permutation sum grows like n!; keep desk scale


def _as_square_stack(mats):
    out = [np.asarray(M, dtype=float) for M in mats]
    n = out[0].shape[0]
    for M in out:
        if M.shape != (n, n):
            raise DimensionError(f"matrix of shape {M.shape}, expected ({n}, {n})")
    if n > MAX_SIZE:
        raise DimensionError(f"size {n} above supported maximum {MAX_SIZE}")
    return out, n


def mixed_discriminant(mats):
    """Normalized polarization of det over n symmetric n x n matrices."""
    mats, n = _as_square_stack(mats)
    if len(mats) != n:
        raise DimensionError(f"need {n} matrices of size {n}, got {len(mats)}")
    acc = 0.0
    cols = np.empty((n, n))
    for perm in itertools.permutations(range(n)):
        for j, which in enumerate(perm):
            cols[:, j] = mats[which][:, j]
        acc += np.linalg.det(cols)
    return acc / math.factorial(n)


def mixed_cofactor(mats):
    """Gradient of the mixed discriminant in its missing last slot.

    Given n-1 matrices of size n, returns the symmetric C with
    sum_ij C_ij M_ij = mixed_discriminant(mats + [M]) for every symmetric M.
    """
    mats, n = _as_square_stack(mats)
    if len(mats) != n - 1:
        raise DimensionError(f"need {n - 1} matrices of size {n}, got {len(mats)}")
    C = np.empty((n, n))
    basis = np.zeros((n, n))
    for i in range(n):
        for j in range(i, n):
            basis[:] = 0.0
            if i == j:
                basis[i, i] = 1.0
            else:
                basis[i, j] = basis[j, i] = 0.5
            C[i, j] = C[j, i] = mixed_discriminant(mats + [basis.copy()])
    return C


def scaled_cofactor(mats):
    """Mixed cofactor times n: identity inputs give exactly the identity.

    This is the normalization under which the all-balls case of the mixed
    equation collapses to the classical Christoffel equation tr(W) = f;
    for n = 2 it is the ordinary adjugate of the single input matrix.
    """
    mats, n = _as_square_stack(mats)
    return n * mixed_cofactor(mats)


def sigma_k(M, k):
    """k-th elementary symmetric function of the eigenvalues."""
    M = np.asarray(M, dtype=float)
    n = M.shape[0]
    if not 0 <= k <= n:
        raise DimensionError(f"sigma_{k} undefined for size {n}")
    if k == 0:
        return 1.0
    eigs = np.linalg.eigvalsh(M)
    # char poly x^n - s1 x^(n-1) + s2 x^(n-2) - ... : np.poly gives (-1)^k s_k
    coeffs = np.poly(eigs)
    return float((-1.0) ** k * coeffs[k])


def psd_margin(M):
    """Smallest eigenvalue of a symmetric matrix."""
    return float(np.linalg.eigvalsh(np.asarray(M, dtype=float))[0])


def adjugate_2x2(W):
    """Vectorized adjugate of a stack of symmetric 2x2 matrices.

    Fast path for scaled_cofactor on S^2 tensor fields: accepts shape
    (..., 2, 2) and returns the same shape.
    """
    W = np.asarray(W, dtype=float)
    if W.shape[-2:] != (2, 2):
        raise DimensionError(f"expected trailing 2x2 block, got {W.shape}")
    out = np.empty_like(W)
    out[..., 0, 0] = W[..., 1, 1]
    out[..., 1, 1] = W[..., 0, 0]
    out[..., 0, 1] = -W[..., 0, 1]
    out[..., 1, 0] = -W[..., 1, 0]
    return out
