import numpy as np
import pytest

from bidomain.conductivity import (ConductivityParams, TensorField,
                                   default_params, fiber_direction_2d,
                                   fiber_direction_3d, harmonic_mean_tensor,
                                   sigma_bar_1, sigma_bar_e, tensor_from_fiber)
from bidomain.errors import NumericalDegeneracyError
from bidomain.mesh import Region

SQRT2_2 = np.sqrt(2.0) / 2.0


class TestFiberDirection3D:
    @pytest.mark.parametrize(
        "z, expected",
        [
            (0.0, (SQRT2_2, SQRT2_2, 0.0)),
            (0.5, (1.0, 0.0, 0.0)),
            (1.0, (SQRT2_2, -SQRT2_2, 0.0)),
        ],
    )
    def test_rotation_endpoints(self, z, expected):
        np.testing.assert_allclose(
            fiber_direction_3d((0.3, 0.9, z)), expected, atol=1e-14
        )

    def test_depth_clamped(self):
        np.testing.assert_allclose(
            fiber_direction_3d((0.0, 0.0, -0.5)), fiber_direction_3d((0.0, 0.0, 0.0))
        )
        np.testing.assert_allclose(
            fiber_direction_3d((0.0, 0.0, 1.5)), fiber_direction_3d((0.0, 0.0, 1.0))
        )

    def test_unit_norm(self):
        for z in np.linspace(0, 1, 7):
            assert np.linalg.norm(fiber_direction_3d((0, 0, z))) == pytest.approx(1.0)


class TestFiberDirection2D:
    def test_tangent_is_orthogonal_to_radius(self):
        for pt in [(0.3, 0.55), (0.7, 0.7), (0.5, 0.1)]:
            f = fiber_direction_2d(pt)
            radial = np.array(pt) - 0.5
            assert f @ radial == pytest.approx(0.0, abs=1e-14)
            assert np.linalg.norm(f) == pytest.approx(1.0)

    def test_center_fallback(self):
        np.testing.assert_array_equal(fiber_direction_2d((0.5, 0.5)), [1.0, 0.0])


class TestTensorFromFiber:
    def test_axis_aligned(self):
        np.testing.assert_allclose(
            tensor_from_fiber(np.array([1.0, 0.0]), 2.0, 1.0), [[2, 0], [0, 1]]
        )

    def test_isotropic_when_equal(self):
        f = np.array([0.6, 0.8])
        np.testing.assert_allclose(tensor_from_fiber(f, 3.0, 3.0), 3.0 * np.eye(2),
                                   atol=1e-15)

    def test_diagonal_fiber_values(self):
        # direct matrix arithmetic: g_l f f^T + g_t (I - f f^T)
        f = np.array([SQRT2_2, SQRT2_2])
        got = tensor_from_fiber(f, 1.741, 0.1934)
        expected = 1.741 * np.outer(f, f) + 0.1934 * (np.eye(2) - np.outer(f, f))
        np.testing.assert_allclose(got, expected, atol=1e-15)
        np.testing.assert_allclose(
            got, [[0.9672, 0.7738], [0.7738, 0.9672]], atol=1e-4
        )

    def test_eigenvalues(self):
        got = tensor_from_fiber(fiber_direction_3d((0, 0, 0.25)), 1.741, 0.1934)
        np.testing.assert_allclose(
            np.sort(np.linalg.eigvalsh(got)), [0.1934, 0.1934, 1.741], atol=1e-12
        )

    def test_exactly_symmetric(self):
        got = tensor_from_fiber(fiber_direction_2d((0.31, 0.62)), 1.741, 0.1934)
        assert (got == got.T).all()

    def test_non_unit_rejected(self):
        with pytest.raises(ValueError):
            tensor_from_fiber(np.array([1.0, 1.0]), 2.0, 1.0)


class TestHarmonicMean:
    def test_scalar_longitudinal(self):
        got = harmonic_mean_tensor(np.array([[1.741]]), np.array([[3.906]]))
        assert got[0, 0] == pytest.approx(1.0 / (1 / 1.741 + 1 / 3.906), rel=1e-12)
        assert got[0, 0] == pytest.approx(1.2042, abs=1e-4)

    def test_scalar_transverse(self):
        got = harmonic_mean_tensor(np.array([[0.1934]]), np.array([[1.970]]))
        assert got[0, 0] == pytest.approx(0.17611, abs=1e-5)

    def test_equal_tensors_halve(self):
        a = tensor_from_fiber(np.array([0.6, 0.8]), 1.741, 0.1934)
        np.testing.assert_allclose(harmonic_mean_tensor(a, a), a / 2, atol=1e-14)

    def test_singular_input_rejected(self):
        with pytest.raises(NumericalDegeneracyError):
            harmonic_mean_tensor(np.zeros((2, 2)), np.eye(2))

    def test_dominated_by_both(self):
        # harmonic mean is below either argument in the SPD order
        f = fiber_direction_2d((0.4, 0.7))
        si = tensor_from_fiber(f, 1.741, 0.1934)
        se = tensor_from_fiber(f, 3.906, 1.970)
        sm = harmonic_mean_tensor(si, se)
        for other in (si, se):
            np.linalg.cholesky(other - sm + 1e-14 * np.eye(2))

    def test_equal_anisotropy_ratio_closed_form(self):
        f = fiber_direction_3d((0.2, 0.1, 0.7))
        si = tensor_from_fiber(f, 1.741, 0.1934)
        lam = 2.0
        sm = harmonic_mean_tensor(si, lam * si)
        np.testing.assert_allclose(sm, (lam / (1 + lam)) * si, atol=1e-14)


class TestSigmaBar:
    def test_heart_sum_axis_aligned(self):
        params = default_params(2)
        # heart centroid on the fibre circle's x-axis: fibre points along y
        got = sigma_bar_1(params, (0.6, 0.5), Region.HEART)
        np.testing.assert_allclose(
            got, np.diag([0.1934 + 1.970, 1.741 + 3.906]), atol=1e-12
        )
        assert got[1, 1] == pytest.approx(5.647)
        assert got[0, 0] == pytest.approx(2.1634)

    def test_cavity_isotropic(self):
        params = default_params(2)
        np.testing.assert_allclose(
            sigma_bar_1(params, (0.9, 0.5), Region.TORSO_CAVITY), 6.7 * np.eye(2)
        )
        np.testing.assert_allclose(
            sigma_bar_e(params, (0.9, 0.5), Region.TORSO_LUNG), 0.5 * np.eye(2)
        )

    def test_difference_is_intra(self):
        params = default_params(2)
        centroid = (0.61, 0.37)
        diff = sigma_bar_1(params, centroid, Region.HEART) - sigma_bar_e(
            params, centroid, Region.HEART
        )
        intra = TensorField(params, 2, "intra")(centroid, Region.HEART)
        np.testing.assert_allclose(diff, intra, atol=1e-15)

    def test_unknown_tag_rejected(self):
        with pytest.raises(ValueError):
            sigma_bar_1(default_params(2), (0.5, 0.5), 99)


class TestParams:
    def test_defaults_match_table(self):
        p = default_params(3)
        assert (p.g_i_l, p.g_i_t, p.g_e_l, p.g_e_t) == (1.741, 0.1934, 3.906, 1.970)
        assert (p.k_lung, p.k_cavity, p.k_other) == (0.5, 6.7, 2.2)
        assert p.chi == 500.0 and p.c_m == 1.0
        assert default_params(2).chi == 1500.0

    def test_positivity_enforced(self):
        with pytest.raises(ValueError):
            ConductivityParams(g_i_l=-1.0)


class TestTensorField:
    def test_batch_matches_single(self, coupled_2d_mesh):
        params = default_params(2)
        centroids = coupled_2d_mesh.element_centroids()
        tags = coupled_2d_mesh.tags
        for kind in ("bar1", "bar_e"):
            field = TensorField(params, 2, kind)
            batch = field.evaluate_batch(centroids, tags)
            for k in range(0, len(tags), 7):
                np.testing.assert_allclose(
                    batch[k], field(centroids[k], tags[k]), atol=1e-14
                )

    def test_batch_matches_single_heart_only(self, coupled_2d_mesh):
        params = default_params(2)
        heart = coupled_2d_mesh.tags == Region.HEART
        centroids = coupled_2d_mesh.element_centroids()[heart]
        tags = coupled_2d_mesh.tags[heart]
        for kind in ("intra", "extra", "mono"):
            field = TensorField(params, 2, kind)
            batch = field.evaluate_batch(centroids, tags)
            for k in range(len(tags)):
                np.testing.assert_allclose(
                    batch[k], field(centroids[k], tags[k]), atol=1e-14
                )

    def test_heart_only_kind_rejects_torso(self):
        params = default_params(2)
        with pytest.raises(ValueError):
            TensorField(params, 2, "intra")((0.9, 0.9), Region.TORSO_OTHER)

    def test_spd_everywhere(self, cube_mesh):
        params = default_params(3)
        field = TensorField(params, 3, "mono")
        batch = field.evaluate_batch(cube_mesh.element_centroids(), cube_mesh.tags)
        eigs = np.linalg.eigvalsh(batch)
        assert (eigs > 0).all()

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            TensorField(default_params(2), 2, "nope")
