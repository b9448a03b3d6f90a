"""Geodesic sampling with parallel-transported frames.

Covariant derivatives of frame-expressed tensor entries are taken along
great circles: the frame is parallel-transported along the differencing
geodesic, which makes the finite differences converge to genuine
covariant derivative components (the transported frame is covariantly
constant along the line).
"""

from __future__ import annotations

import numpy as np

# five-point central stencils on t = h * (-2, -1, 0, 1, 2)
STENCIL_T = np.array([-2.0, -1.0, 0.0, 1.0, 2.0])
D1_WEIGHTS = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0          # * 1/h
D2_WEIGHTS = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0      # * 1/h^2


def geodesic_points(x, v, ts):
    """gamma(t) = x cos t + v sin t for a batch of base points.

    x, v: (N, 3); ts: (T,).  Returns points (N, T, 3) and unit tangents
    gamma'(t) (N, T, 3).
    """
    x = np.asarray(x, dtype=float)[:, None, :]
    v = np.asarray(v, dtype=float)[:, None, :]
    c = np.cos(ts)[None, :, None]
    s = np.sin(ts)[None, :, None]
    return x * c + v * s, v * c - x * s


def transport_frames(x, v, frames, ts):
    """Parallel transport of tangent frames along gamma(t) = x cos t + v sin t.

    The component of a frame vector along v rides the rotating tangent
    gamma'(t); the component orthogonal to the {x, v} plane is fixed.

    x, v: (N, 3); frames: (N, 3, k); ts: (T,).  Returns (N, T, 3, k).
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    frames = np.asarray(frames, dtype=float)
    along = np.einsum("ni,nik->nk", v, frames)            # (N, k)
    perp = frames - v[:, :, None] * along[:, None, :]     # (N, 3, k)
    _, tangents = geodesic_points(x, v, ts)               # (N, T, 3)
    out = (tangents[:, :, :, None] * along[:, None, None, :]
           + perp[:, None, :, :])
    return out


def stencil_apply(samples, coeffs, h, order):
    """Contract 5-point samples (N, 5, ...) with a derivative stencil."""
    shape = (1, 5) + (1,) * (samples.ndim - 2)
    return (samples * coeffs.reshape(shape)).sum(axis=1) / h ** order
