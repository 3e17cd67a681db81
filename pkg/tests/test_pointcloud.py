import numpy as np
import pytest
from numpy.testing import assert_allclose

from hypercloud.pointcloud import (ErrorReport, NoiseSpec, PointCloud,
                                   PointCloudFormatError, add_noise,
                                   error_metrics, generate_shape, load, save)


class TestPointCloud:
    def test_validation(self):
        with pytest.raises(ValueError):
            PointCloud(np.zeros((0, 3)))
        with pytest.raises(ValueError):
            PointCloud(np.zeros((4, 2)))
        with pytest.raises(ValueError):
            PointCloud(np.array([[0.0, 0.0, np.nan]]))

    def test_coords_frozen(self):
        cloud = PointCloud(np.zeros((2, 3)))
        with pytest.raises(ValueError):
            cloud.coords[0, 0] = 1.0


class TestXyzIO:
    def test_basic_parse(self, tmp_path):
        p = tmp_path / "two.xyz"
        p.write_text("0 0 0\n1 2 3\n")
        cloud = load(p)
        assert cloud.n == 2
        assert_allclose(cloud.coords, [[0, 0, 0], [1, 2, 3]])

    def test_comments_and_blanks(self, tmp_path):
        p = tmp_path / "c.xyz"
        p.write_text("# header\n\n1 1 1  # trailing\n")
        assert load(p).n == 1

    def test_nan_reports_line(self, tmp_path):
        p = tmp_path / "bad.xyz"
        p.write_text("0 0 nan\n")
        with pytest.raises(PointCloudFormatError, match=":1:"):
            load(p)

    def test_wrong_field_count(self, tmp_path):
        p = tmp_path / "bad.xyz"
        p.write_text("1 2 3\n4 5\n")
        with pytest.raises(PointCloudFormatError, match=":2:"):
            load(p)

    def test_empty_file(self, tmp_path):
        p = tmp_path / "empty.xyz"
        p.write_text("# nothing\n")
        with pytest.raises(PointCloudFormatError):
            load(p)


class TestPlyIO:
    def test_single_vertex(self, tmp_path):
        p = tmp_path / "one.ply"
        p.write_text("ply\nformat ascii 1.0\nelement vertex 1\n"
                     "property float x\nproperty float y\nproperty float z\n"
                     "end_header\n0.5 0.5 0.5\n")
        cloud = load(p)
        assert cloud.n == 1
        assert_allclose(cloud.coords[0], [0.5, 0.5, 0.5])

    def test_extra_properties_ignored(self, tmp_path):
        p = tmp_path / "rgb.ply"
        p.write_text("ply\nformat ascii 1.0\nelement vertex 2\n"
                     "property float x\nproperty float y\nproperty float z\n"
                     "property uchar red\n"
                     "end_header\n1 2 3 255\n4 5 6 0\n")
        cloud = load(p)
        assert_allclose(cloud.coords, [[1, 2, 3], [4, 5, 6]])

    def test_binary_rejected(self, tmp_path):
        p = tmp_path / "bin.ply"
        p.write_text("ply\nformat binary_little_endian 1.0\nelement vertex 1\n"
                     "property float x\nproperty float y\nproperty float z\n"
                     "end_header\n")
        with pytest.raises(PointCloudFormatError, match="ascii"):
            load(p)

    def test_missing_vertex_count(self, tmp_path):
        p = tmp_path / "bad.ply"
        p.write_text("ply\nformat ascii 1.0\nend_header\n")
        with pytest.raises(PointCloudFormatError):
            load(p)


class TestSaveRoundTrip:
    @pytest.mark.parametrize("fmt,ext", [("xyz", "xyz"), ("ply-ascii", "ply")])
    def test_round_trip(self, tmp_path, rng, fmt, ext):
        cloud = PointCloud(rng.normal(scale=3.0, size=(37, 3)))
        p = tmp_path / f"cloud.{ext}"
        save(cloud, p, fmt=fmt)
        back = load(p)
        assert_allclose(back.coords, cloud.coords, rtol=0, atol=1e-9)

    def test_save_deterministic_bytes(self, tmp_path, rng):
        cloud = PointCloud(rng.normal(size=(11, 3)))
        p1, p2 = tmp_path / "a.xyz", tmp_path / "b.xyz"
        save(cloud, p1)
        save(cloud, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_unwritable_path(self, tmp_path):
        cloud = PointCloud(np.zeros((1, 3)))
        with pytest.raises(OSError):
            save(cloud, tmp_path / "missing_dir" / "x.xyz")


class TestGenerateShape:
    def test_cube_max_norm(self):
        cloud = generate_shape("cube", 500, seed=3, side=2.0)
        assert cloud.n == 500
        assert_allclose(np.abs(cloud.coords).max(axis=1), 1.0, rtol=0, atol=0)

    def test_cube_default_count(self):
        assert generate_shape("cube", 5000, seed=0).n == 5000

    def test_cylinder_surface_membership(self):
        cloud = generate_shape("cylinder", 400, seed=7, radius=1.0, height=2.0)
        r2 = cloud.coords[:, 0] ** 2 + cloud.coords[:, 1] ** 2
        z = cloud.coords[:, 2]
        on_side = np.abs(r2 - 1.0) <= 1e-12
        on_cap = (np.abs(np.abs(z) - 1.0) <= 1e-12) & (r2 <= 1.0 + 1e-12)
        assert np.all(on_side | on_cap)

    def test_planes_membership(self):
        cloud = generate_shape("planes", 300, seed=2)
        x, y, z = cloud.coords.T
        on_a = (np.abs(z) <= 1e-15) & (x >= 0) & (x <= 1) & (y >= 0) & (y <= 1)
        # dihedral 90 deg: second square lies in x = 0
        on_b = (np.abs(x) <= 1e-12) & (z >= 0) & (z <= 1) & (y >= 0) & (y <= 1)
        assert np.all(on_a | on_b)

    def test_sphere_radius(self):
        cloud = generate_shape("sphere", 200, seed=5, radius=2.0)
        assert_allclose(np.linalg.norm(cloud.coords, axis=1), 2.0, atol=1e-12)

    def test_determinism(self):
        a = generate_shape("cylinder", 64, seed=11)
        b = generate_shape("cylinder", 64, seed=11)
        assert np.array_equal(a.coords, b.coords)

    def test_bad_inputs(self):
        with pytest.raises(ValueError):
            generate_shape("torus", 10, seed=0)
        with pytest.raises(ValueError):
            generate_shape("cube", 10, seed=0, side=-1.0)
        with pytest.raises(ValueError):
            generate_shape("cube", 0, seed=0)


class TestAddNoise:
    def setup_method(self):
        self.cloud = generate_shape("cube", 200, seed=1)

    def test_impulse_p_zero_is_identity(self):
        spec = NoiseSpec(kind="impulse", seed=4, p=0.0, spread=0.5)
        out = add_noise(self.cloud, spec)
        assert np.array_equal(out.coords, self.cloud.coords)

    def test_uniform_bounds(self):
        spec = NoiseSpec(kind="uniform", seed=4, lo=-0.03, hi=0.03)
        out = add_noise(self.cloud, spec)
        delta = out.coords - self.cloud.coords
        assert np.abs(delta).max() <= 0.03

    def test_gaussian_law_of_large_numbers(self):
        # mean of 1e5 draws within 3 sigma / sqrt(1e5) of the true mean
        big = PointCloud(np.zeros((100_000, 3)))
        spec = NoiseSpec(kind="gaussian", seed=9, mean=0.0, variance=0.0064)
        delta = add_noise(big, spec).coords
        bound = 3.0 * 0.08 / np.sqrt(100_000)
        assert abs(delta[:, 0].mean()) < bound

    def test_impulse_spread_bound(self):
        spec = NoiseSpec(kind="impulse", seed=4, p=0.5, spread=0.2)
        delta = add_noise(self.cloud, spec).coords - self.cloud.coords
        moved = np.any(delta != 0, axis=1)
        assert 0 < moved.sum() < self.cloud.n
        assert np.abs(delta).max() <= 0.2

    def test_determinism(self):
        spec = NoiseSpec(kind="gaussian", seed=123, mean=0.0, variance=0.01)
        a = add_noise(self.cloud, spec)
        b = add_noise(self.cloud, spec)
        assert np.array_equal(a.coords, b.coords)

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            NoiseSpec(kind="uniform", seed=0, lo=1.0, hi=-1.0)
        with pytest.raises(ValueError):
            NoiseSpec(kind="gaussian", seed=0, variance=-1.0)
        with pytest.raises(ValueError):
            NoiseSpec(kind="impulse", seed=0, p=1.5)
        with pytest.raises(ValueError):
            NoiseSpec(kind="impulse", seed=0, spread=0.0)
        with pytest.raises(ValueError):
            NoiseSpec(kind="salt", seed=0)


class TestErrorMetrics:
    def test_identical_clouds(self):
        cloud = generate_shape("cube", 30, seed=0)
        report = error_metrics(cloud, cloud)
        assert report.l1_error == 0.0
        assert report.mse == 0.0

    def test_single_point_offset(self):
        a = PointCloud(np.array([[0.0, 0.0, 0.0]]))
        b = PointCloud(np.array([[0.1, 0.0, 0.0]]))
        report = error_metrics(a, b)
        assert_allclose(report.l1_error, 0.1)

    def test_hand_evaluated_pair(self):
        # offsets (1,1,1) and (-1,0,0): l1 = 4, mse = 4 / (3*2)
        ref = PointCloud(np.zeros((2, 3)))
        obs = PointCloud(np.array([[1.0, 1.0, 1.0], [-1.0, 0.0, 0.0]]))
        report = error_metrics(obs, ref)
        assert_allclose(report.l1_error, 4.0)
        assert_allclose(report.mse, 4.0 / 6.0)
        assert_allclose(report.per_axis.sum(), report.l1_error)

    def test_symmetry(self, rng):
        a = PointCloud(rng.normal(size=(20, 3)))
        b = PointCloud(rng.normal(size=(20, 3)))

        ra, rb = error_metrics(a, b), error_metrics(b, a)
        assert ra.l1_error == rb.l1_error
        assert ra.mse == rb.mse

    def test_size_mismatch(self):
        with pytest.raises(ValueError):
            error_metrics(PointCloud(np.zeros((2, 3))), PointCloud(np.zeros((3, 3))))
