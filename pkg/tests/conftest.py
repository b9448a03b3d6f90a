import numpy as np
import pytest

from christoffel_lab import bodies, spherecore


@pytest.fixture(scope="session")
def grid16():
    return spherecore.build_grid(16, 32)


@pytest.fixture(scope="session")
def grid32():
    return spherecore.build_grid(32, 64)


def p2_amplitude(eps):
    """Harmonic coefficient of eps * P2(x3):  P2 = sqrt(4 pi / 5) Y_20."""
    return eps * np.sqrt(4.0 * np.pi / 5.0)


@pytest.fixture(scope="session")
def catalog():
    """Small body catalog shared by pairing and implication suites."""
    return [
        bodies.Ball(1.0),
        bodies.Ball(0.8),
        bodies.TranslatedBall(1.0, [0.15, -0.1, 0.2]),
        bodies.Ellipsoid(1.0, 1.1, 1.2),
        bodies.Ellipsoid(0.9, 1.0, 1.05),
        bodies.Ellipsoid(1.0, 1.0, 3.0),
        bodies.harmonic_perturbation(1.0, [(2, 1, 0.02)]),
        bodies.harmonic_perturbation(1.0, [(3, -2, 0.015), (4, 0, 0.01)]),
        bodies.MinkowskiSum([(bodies.Ball(1.0), 0.6),
                             (bodies.Ellipsoid(1.0, 1.1, 1.2), 0.4)]),
    ]
