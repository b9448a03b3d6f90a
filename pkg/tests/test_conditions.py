import numpy as np
import pytest

from christoffel_lab import bodies as bd
from christoffel_lab import conditions as cn
from christoffel_lab import spherecore as sc
from christoffel_lab.errors import DomainError
from conftest import p2_amplitude


def constant_one(grid):
    return sc.SphericalField.constant(grid, 1.0)


def reciprocal_p2_density(grid, eps):
    """f with 1/f = 1 + eps P2(x3)."""
    inner = sc.SphericalField.harmonic(grid, [(2, 0, p2_amplitude(eps))], offset=1.0)
    return inner.reciprocal()


def random_density(grid, seed, amplitude=0.18):
    rng = np.random.default_rng(seed)
    terms = [(l, m, amplitude * rng.standard_normal() / (l * l))
             for l in range(2, 5) for m in range(-l, l + 1)]
    return sc.SphericalField.harmonic(grid, terms, offset=1.0)


class TestReciprocalConvexity:
    def test_constant_density(self, grid16):
        v = cn.check_reciprocal_convexity(constant_one(grid16), grid16)
        assert v.passed
        assert v.margin == pytest.approx(1.0, abs=1e-8)

    def test_ball_plus_linear_reciprocal(self, grid16):
        vvec = np.array([0.0, 0.3, 0.4])  # |v| = 0.5
        f = sc.SphericalField.from_function(grid16, lambda p: 1.0 / (1.0 + p @ vvec))
        v = cn.check_reciprocal_convexity(f, grid16)
        assert v.passed
        assert v.margin == pytest.approx(1.0, abs=1e-8)

    def test_p2_bump_fails_at_pole(self, grid32):
        v = cn.check_reciprocal_convexity(reciprocal_p2_density(grid32, 0.6), grid32)
        assert not v.passed
        assert v.margin == pytest.approx(-0.2, abs=0.02)
        pole_dist = min(v.witness["theta"], np.pi - v.witness["theta"])
        assert pole_dist <= np.deg2rad(5.0)

    def test_nonpositive_density_rejected(self, grid16):
        f = sc.SphericalField.from_function(grid16, lambda p: p[:, 2])
        with pytest.raises(DomainError):
            cn.check_reciprocal_convexity(f, grid16)

    def test_degenerate_density_rejected(self, grid16):
        vals = np.ones(grid16.n_nodes)
        vals[0] = 1e-11
        with pytest.raises(DomainError):
            cn.check_reciprocal_convexity(sc.SphericalField.from_values(grid16, vals),
                                          grid16)


class TestDiagonalConvexity:
    def test_identity_unit_density(self, grid16):
        v = cn.check_diagonal_convexity(bd.identity_field(grid16),
                                        constant_one(grid16), grid16, n_dirs=8)
        assert v.passed
        assert v.margin == pytest.approx(1.0, abs=1e-8)

    def test_reduces_to_reciprocal_convexity(self, grid32):
        # with A = I both checkers see the same matrix W[1/f]
        I = bd.identity_field(grid32)
        for seed in (1, 2, 3):
            f = random_density(grid32, seed)
            vg = cn.check_reciprocal_convexity(f, grid32)
            vd = cn.check_diagonal_convexity(I, f, grid32, n_dirs=4, seed=seed)
            assert vg.passed == vd.passed
            assert vd.margin == pytest.approx(vg.margin, rel=2e-3, abs=1e-6)
            assert vg.witness["node"] == vd.witness["node"]

    def test_small_perturbation_coefficients(self, grid16):
        body = bd.harmonic_perturbation(1.0, [(2, 1, 0.02)])
        A = bd.scaled_cofactor_field([bd.weingarten_form(body, grid16)])
        v = cn.check_diagonal_convexity(A, constant_one(grid16), grid16, n_dirs=8)
        assert v.passed
        assert v.margin > 0.7

    def test_direction_monotonicity(self, grid16):
        body = bd.harmonic_perturbation(1.0, [(3, 2, 0.03)])
        A = bd.scaled_cofactor_field([bd.weingarten_form(body, grid16)])
        f = constant_one(grid16)
        v4 = cn.check_diagonal_convexity(A, f, grid16, n_dirs=4, seed=5)
        v8 = cn.check_diagonal_convexity(A, f, grid16, n_dirs=8, seed=5)
        assert v8.margin <= v4.margin + 1e-12


class TestStructureCondition:
    def test_identity_unit_density(self, grid16):
        v = cn.check_structure_condition(bd.identity_field(grid16),
                                         constant_one(grid16), grid16,
                                         frames_per_node=8)
        assert v.passed
        assert v.margin == pytest.approx(1.0, abs=1e-8)

    def test_scaling_tensor_by_function_drops_derivative_terms(self, grid16):
        # A = lambda(x) I: the squared and subtracted first-derivative
        # terms cancel, so the margin equals the one of A = I with the
        # density divided by lambda
        lam = sc.SphericalField.harmonic(grid16, [(2, 0, 0.12), (3, 1, 0.08)],
                                         offset=1.2)
        lam_c = lam.coeffs().copy()

        def evaluator(points, frames, _c=lam_c):
            vals = sc.synth_at(_c, np.asarray(points, dtype=float))
            shape = np.asarray(points).shape[:-1]
            eye = np.broadcast_to(np.eye(2), shape + (2, 2))
            return vals[..., None, None] * eye

        A = bd.SymTensorField(grid16, lam.values[:, None, None] * np.eye(2),
                              evaluator=evaluator)
        f = constant_one(grid16)
        v_scaled = cn.check_structure_condition(A, f, grid16, frames_per_node=4, seed=2)
        f_over_lam = sc.SphericalField(grid16, values=1.0 / lam.values,
                                       point_fn=lambda p: 1.0 / sc.synth_at(lam_c, p))
        v_ref = cn.check_structure_condition(bd.identity_field(grid16), f_over_lam,
                                             grid16, frames_per_node=4, seed=2)
        assert v_scaled.margin == pytest.approx(v_ref.margin, rel=1e-6, abs=1e-9)

    def test_near_identity_tensor_passes(self, grid16):
        rng = np.random.default_rng(41)
        mats = [0.01 * (lambda B: (B + B.T) / 2)(rng.standard_normal((3, 3)))
                for _ in range(3)]
        fields = [sc.SphericalField.harmonic(grid16, [(2, m, 1.0)]).coeffs()
                  for m in (-1, 0, 1)]

        def evaluator(points, frames):
            pts = np.asarray(points, dtype=float)
            S = np.zeros(pts.shape[:-1] + (3, 3))
            for M, c in zip(mats, fields):
                S = S + sc.synth_at(c, pts)[..., None, None] * M
            eye3 = np.broadcast_to(np.eye(3), S.shape)
            return np.einsum("...ia,...ij,...jb->...ab", frames, eye3 + S, frames)

        values = evaluator(grid16.nodes, grid16.frames)
        A = bd.SymTensorField(grid16, values, evaluator=evaluator)
        v = cn.check_structure_condition(A, constant_one(grid16), grid16,
                                         frames_per_node=4, seed=9)
        assert v.passed
        assert v.margin >= 0.9

    def test_scale_invariance(self, grid16):
        body = bd.harmonic_perturbation(1.0, [(2, -1, 0.04)])
        A = bd.scaled_cofactor_field([bd.weingarten_form(body, grid16)])
        f = random_density(grid16, 6, amplitude=0.1)
        v1 = cn.check_structure_condition(A, f, grid16, frames_per_node=4, seed=1)
        c = 3.7

        def scaled_eval(points, frames, _inner=A.at):
            return c * _inner(points, frames)

        cA = bd.SymTensorField(grid16, c * A.values, evaluator=scaled_eval)
        cf = sc.SphericalField(grid16, values=c * f.values,
                               point_fn=lambda p: c * f.at(p))
        v2 = cn.check_structure_condition(cA, cf, grid16, frames_per_node=4, seed=1)
        assert abs(v1.margin - v2.margin) <= 1e-10
        assert v1.passed == v2.passed
        d1 = cn.check_diagonal_convexity(A, f, grid16, n_dirs=4, seed=1)
        d2 = cn.check_diagonal_convexity(cA, cf, grid16, n_dirs=4, seed=1)
        assert abs(d1.margin - d2.margin) <= 1e-10


class TestEllipticityValidation:
    def test_non_elliptic_tensor_rejected(self, grid16):
        from christoffel_lab.errors import EllipticityError

        vals = np.broadcast_to(np.diag([1.0, -0.2]), (grid16.n_nodes, 2, 2)).copy()
        A = bd.SymTensorField(grid16, vals)
        f = constant_one(grid16)
        with pytest.raises(EllipticityError):
            cn.check_diagonal_convexity(A, f, grid16, n_dirs=4)
        with pytest.raises(EllipticityError):
            cn.check_structure_condition(A, f, grid16, frames_per_node=4)


class TestDirectionalCondition:
    def test_ball(self, grid16):
        v = cn.check_directional_condition(bd.Ball(1.0), constant_one(grid16),
                                           grid16, n_dirs=8)
        assert v.passed
        assert v.margin == pytest.approx(1.0, abs=1e-8)

    def test_small_degree2_perturbation_passes(self, grid16):
        body = bd.harmonic_perturbation(1.0, [(2, 0, 0.02)])
        v = cn.check_directional_condition(body, constant_one(grid16), grid16,
                                           n_dirs=16)
        assert v.passed

    def test_p2_bump_fails(self, grid16):
        body = bd.harmonic_perturbation(1.0, [(2, 0, p2_amplitude(0.6))])
        v = cn.check_directional_condition(body, constant_one(grid16), grid16,
                                           n_dirs=16)
        assert not v.passed

    def test_quartic_form_against_fft_oracle(self, grid16):
        # for f = 1 the margin quantity is h'''' + 2 h'' + h along circles;
        # compare the checker's FD value at one node/direction with exact
        # FFT derivatives of the band-limited support
        from christoffel_lab import covariant

        body = bd.harmonic_perturbation(1.0, [(3, 1, 0.05)])
        coeffs = body.psi_coeffs.copy()
        coeffs[0] += np.sqrt(4 * np.pi)
        node = 37
        x = grid16.nodes[node]
        alpha = grid16.frames[node, :, 0]
        n_t = 64
        ts = 2 * np.pi * np.arange(n_t) / n_t
        circle = np.outer(np.cos(ts), x) + np.outer(np.sin(ts), alpha)
        samples = sc.synth_at(coeffs, circle)
        freqs = np.fft.rfftfreq(n_t, d=1.0 / n_t)
        spec = np.fft.rfft(samples)
        d2 = np.fft.irfft(spec * (1j * freqs) ** 2, n=n_t)
        d4 = np.fft.irfft(spec * (1j * freqs) ** 4, n=n_t)
        oracle = (d4 + 2 * d2 + samples)[0]

        h = cn.DEFAULT_STEP
        frames = np.stack([alpha, np.cross(x, alpha)], axis=1)
        pts5, _ = covariant.geodesic_points(x[None], alpha[None],
                                            h * covariant.STENCIL_T)
        tf = covariant.transport_frames(x[None], alpha[None], frames[None],
                                        h * covariant.STENCIL_T)
        psi = body.weingarten(pts5[0], tf[0])[:, 0, 0]
        fd = float(covariant.D2_WEIGHTS @ psi) / h ** 2 + psi[2]
        assert fd == pytest.approx(oracle, rel=1e-6, abs=1e-8)


class TestMatrixConvexity:
    def test_ball_passes(self, grid16):
        v = cn.check_matrix_convexity(bd.Ball(1.0), constant_one(grid16), grid16,
                                      n_samples=100)
        assert v.passed
        assert abs(v.margin) <= 1e-10

    def test_small_perturbation_passes(self, grid16):
        body = bd.harmonic_perturbation(1.0, [(2, 0, 0.02)])
        v = cn.check_matrix_convexity(body, constant_one(grid16), grid16,
                                      n_samples=100)
        assert v.passed

    def test_eccentric_ellipsoid_verdict_and_implication(self, grid16):
        body = bd.Ellipsoid(1.0, 1.0, 3.0)
        f = constant_one(grid16)
        v = cn.check_matrix_convexity(body, f, grid16, n_samples=100)
        assert isinstance(v.passed, bool)
        if v.passed:
            assert cn.check_directional_condition(body, f, grid16, n_dirs=16).passed

    def test_diagonal_entry_consequence(self, grid16):
        # a passing matrix test bounds every tangential quadratic form:
        # second differences of the diagonal entries are >= the margin
        body = bd.harmonic_perturbation(1.0, [(2, 1, 0.02)])
        f = constant_one(grid16)
        v = cn.check_matrix_convexity(body, f, grid16, n_samples=50)
        assert v.passed
        rng = np.random.default_rng(0)
        node = int(rng.integers(grid16.n_nodes))
        p = grid16.nodes[node]
        y = grid16.frames[node, :, 0]
        s = 1e-2
        w = rng.standard_normal(3)
        w /= np.linalg.norm(w)
        M0 = cn._extended_tensor(body, f, p[None])[0]
        Mp = cn._extended_tensor(body, f, (p + s * w)[None])[0]
        Mm = cn._extended_tensor(body, f, (p - s * w)[None])[0]
        Rp = cn._minimal_rotation(((p + s * w) / np.linalg.norm(p + s * w))[None],
                                  p[None])[0]
        Rm = cn._minimal_rotation(((p - s * w) / np.linalg.norm(p - s * w))[None],
                                  p[None])[0]
        delta = Rp @ Mp @ Rp.T + Rm @ Mm @ Rm.T - 2 * M0
        assert y @ delta @ y >= v.margin - 1e-12


class TestPerturbationBound:
    def test_zero_perturbation(self, grid16):
        v = cn.check_perturbation_bound(1.0, np.zeros(9), grid16, n_dirs=8)
        assert v.passed
        assert v.margin == pytest.approx(0.25)
        assert v.details["implied_directional_pass"]

    def test_small_perturbation_passes_with_implication(self, grid16):
        c = np.zeros(9)
        c[sc.sh_index(2, 0)] = 0.02
        v = cn.check_perturbation_bound(1.0, c, grid16, n_dirs=16)
        assert v.passed
        assert v.details["c4_norm"] < 0.25
        assert v.details["implied_directional_pass"]

    def test_p2_bump_fails(self, grid16):
        c = np.zeros(9)
        c[sc.sh_index(2, 0)] = p2_amplitude(0.6)
        v = cn.check_perturbation_bound(1.0, c, grid16, n_dirs=16)
        assert not v.passed


class TestVerdictContract:
    def test_pass_iff_margin_above_minus_tol(self, grid16):
        v = cn.check_reciprocal_convexity(constant_one(grid16), grid16, tol=1e-8)
        assert v.passed == (v.margin >= -v.tol)
        v2 = cn.check_reciprocal_convexity(reciprocal_p2_density(grid16, 0.6), grid16)
        assert v2.passed == (v2.margin >= -v2.tol)

    def test_json_roundtrip(self, grid16):
        import json
        v = cn.check_reciprocal_convexity(constant_one(grid16), grid16)
        payload = json.dumps(v.to_json_dict())
        assert json.loads(payload)["name"] == "reciprocal_convexity"
