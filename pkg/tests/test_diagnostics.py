import numpy as np
import pytest

from christoffel_lab import bodies as bd
from christoffel_lab import diagnostics as dg
from christoffel_lab import solver as sv
from christoffel_lab import spherecore as sc

FOUR_PI = 4.0 * np.pi


class TestRankProfile:
    def test_ball_full_rank(self, grid16):
        rp = dg.rank_profile(bd.weingarten_form(bd.Ball(1.0), grid16))
        assert rp.min_rank == 2
        assert rp.min_eig == pytest.approx(1.0, abs=1e-12)
        assert rp.histogram == {2: grid16.n_nodes}
        assert rp.phi is None  # test function not applicable at full rank

    def test_constant_rank_one_field(self, grid16):
        vals = np.broadcast_to(np.diag([0.0, 1.0]), (grid16.n_nodes, 2, 2)).copy()
        rp = dg.rank_profile(bd.SymTensorField(grid16, vals))
        assert rp.min_rank == 1
        assert rp.histogram == {1: grid16.n_nodes}
        assert np.all(rp.phi == 0.0)  # sigma_2 vanishes identically

    def test_phi_positive_semidefinite_consistency(self, grid16):
        # on a psd field with mixed ranks: phi >= 0, and phi = 0 exactly
        # where the numeric rank stays at the minimum
        vals = np.zeros((grid16.n_nodes, 2, 2))
        vals[:, 0, 0] = 1.0
        bump = np.clip(grid16.nodes[:, 2], 0.0, None)
        vals[:, 1, 1] = bump  # rank 1 on the south, rank 2 north
        rp = dg.rank_profile(bd.SymTensorField(grid16, vals))
        assert rp.min_rank == 1
        assert np.all(rp.phi >= 0.0)
        assert np.array_equal(rp.phi > rp.tau, rp.ranks > rp.min_rank)

    def test_solved_instance_full_rank(self, grid32):
        # conditions pass and the solve converges: the solution must be
        # geometric with maximal rank everywhere
        W0 = bd.weingarten_form(bd.Ellipsoid(1.0, 1.1, 1.2), grid32)
        A = bd.scaled_cofactor_field([W0])
        u_star = np.zeros(sc.n_coeffs(24))
        u_star[0] = np.sqrt(FOUR_PI)
        u_star[sc.sh_index(3, 0)] = 0.1
        f = sv.operator_apply(A, u_star, grid32)
        rep = sv.solve(A, f, grid32, 24)
        rp = dg.rank_profile(sv.weingarten_of_solution(grid32, rep.u_coeffs))
        assert rp.min_rank == 2
        assert rp.min_eig > 0


class TestFullRankConclusion:
    def test_passing_conditions_force_geometric_solution(self):
        # on an instance where compatibility and the sufficient conditions
        # all pass and the solve converges, the computed W must be
        # positive definite with maximal rank everywhere
        from christoffel_lab import conditions as cn
        from conftest import p2_amplitude

        grid = sc.build_grid(24, 48)
        front = bd.harmonic_perturbation(1.0, [(2, 1, 0.02)])
        A = bd.scaled_cofactor_field([bd.weingarten_form(front, grid)])
        inner = sc.SphericalField.harmonic(
            grid, [(2, 0, p2_amplitude(0.1))], offset=1.0)
        f = inner.reciprocal()

        assert sv.check_compatibility(f, grid)[1]
        assert cn.check_reciprocal_convexity(f, grid).passed
        assert cn.check_diagonal_convexity(A, f, grid, n_dirs=8).passed
        assert cn.check_structure_condition(A, f, grid, frames_per_node=8).passed

        rep = sv.solve(A, f, grid, 18)
        rp = dg.rank_profile(sv.weingarten_of_solution(grid, rep.u_coeffs))
        assert rp.min_rank == 2
        assert rp.min_eig > 0


class TestRecoveredDensity:
    def test_two_balls_constant_two(self, grid16):
        dens = dg.recovered_density([bd.Ball(1.0)],
                                    sc.SphericalField.constant(grid16, 1.0), grid16)
        assert np.abs(dens.values - 2.0).max() <= 1e-12

    def test_roundtrip_density(self, grid32):
        W0 = bd.weingarten_form(bd.Ellipsoid(1.0, 1.1, 1.2), grid32)
        A = bd.scaled_cofactor_field([W0])
        u_star = np.zeros(sc.n_coeffs(24))
        u_star[0] = np.sqrt(FOUR_PI)
        u_star[sc.sh_index(3, 0)] = 0.1
        f = sv.operator_apply(A, u_star, grid32)
        rep = sv.solve(A, f, grid32, 24)
        dens = dg.recovered_density([W0], rep.u_coeffs, grid32)
        err = np.linalg.norm(dens.values - f.values) / np.linalg.norm(f.values)
        assert err <= 1e-6

    def test_translation_leaves_density_unchanged(self, grid16):
        u = sc.SphericalField.constant(grid16, 1.0)
        shifted = sc.SphericalField.harmonic(grid16, [(1, 0, 0.4)], offset=1.0)
        d1 = dg.recovered_density([bd.Ball(1.0)], u, grid16)
        d2 = dg.recovered_density([bd.Ball(1.0)], shifted, grid16)
        assert np.abs(d1.values - d2.values).max() <= 1e-11


class TestDensityMoments:
    def test_ball_density(self, grid16):
        dens = dg.mixed_density_values([bd.Ball(1.0)],
                                       dg._as_tensor(bd.Ball(1.0), grid16), grid16)
        assert np.abs(dg.density_moments(dens, grid16)).max() <= 1e-12

    def test_ellipsoid_pair(self, grid32):
        dens = dg.mixed_density_values(
            [bd.Ellipsoid(1.0, 1.1, 1.2)],
            dg._as_tensor(bd.Ellipsoid(0.9, 1.0, 1.05), grid32), grid32)
        total = sc.quadrature(dens, grid32)
        assert np.abs(dg.density_moments(dens, grid32)).max() <= 1e-9 * abs(total)

    def test_shifted_density_closed_form(self, grid16):
        f = sc.SphericalField.from_function(grid16, lambda p: 1.0 + 0.5 * p[:, 2])
        moments = dg.density_moments(f, grid16)
        assert moments[2] == pytest.approx(2.0 * np.pi / 3.0, abs=1e-12)
        assert np.abs(moments[:2]).max() <= 1e-12


class TestMixedVolumePairing:
    def test_identical_bodies_exact(self, grid16):
        i1, i2, defect = dg.mixed_volume_pairing([bd.Ball(1.0)], bd.Ball(1.0),
                                                 bd.Ball(1.0), grid16)
        assert defect == 0.0
        assert i1 == pytest.approx(2.0 * FOUR_PI)

    def test_ball_ellipsoid_symmetry(self, grid16):
        i1, i2, defect = dg.mixed_volume_pairing(
            [bd.Ball(1.0)], bd.Ball(1.0), bd.Ellipsoid(1.0, 1.1, 1.2), grid16)
        assert defect <= 1e-8 * max(abs(i1), abs(i2))

    def test_translation_invariance(self, grid16):
        ell = bd.Ellipsoid(1.0, 1.1, 1.2)
        i1, i2, _ = dg.mixed_volume_pairing([bd.Ball(1.0)], bd.Ball(1.0), ell, grid16)
        j1, j2, _ = dg.mixed_volume_pairing([bd.Ball(1.0)],
                                            bd.TranslatedBall(1.0, [0.2, 0.0, 0.1]),
                                            ell, grid16)
        assert abs(i1 - j1) <= 1e-10 * abs(i1)
        assert abs(i2 - j2) <= 1e-10 * abs(i2)


class TestMinkowskiIdentity:
    def test_ball_exact_calibration(self, grid16):
        res, constant = dg.minkowski_identity_check(bd.Ball(0.8), 1, grid16)
        assert res <= 1e-12
        assert constant == pytest.approx(2.0, abs=1e-10)

    def test_ellipsoid(self, grid32):
        res, constant = dg.minkowski_identity_check(
            bd.Ellipsoid(1.0, 1.1, 1.2), 1, grid32)
        assert constant == pytest.approx(2.0, abs=1e-10)
        assert res <= 1e-8

    def test_perturbation_body(self, grid32):
        body = bd.harmonic_perturbation(1.0, [(3, 0, 0.05)])
        res, _ = dg.minkowski_identity_check(body, 1, grid32)
        assert res <= 1e-8

    def test_l_zero_constant(self, grid16):
        _, constant = dg.minkowski_identity_check(bd.Ball(1.0), 0, grid16)
        assert constant == pytest.approx(0.5, abs=1e-12)
