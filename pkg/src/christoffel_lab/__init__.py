"""Numerical laboratory for the mixed Christoffel problem on the sphere.

Given fixed smooth convex bodies and a positive density on S^2, the
package assembles the associated linear elliptic equation, checks the
sufficient conditions under which its solution must be the support
function of a convex body, solves the equation spectrally, and verifies
the geometric conclusion (positive definite inverse Weingarten form).
"""

__version__ = "0.1.0"
