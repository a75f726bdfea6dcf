import numpy as np
import pytest

from hahog.depth import HeightField
from hahog.errors import BoundsError, ConfigError, DimensionError
from hahog.features import (
    FeatureConfig,
    WindowSpec,
    cell_histograms,
    compute_gradient,
    frame_descriptors,
    hahog,
    height_histogram,
    patch_features,
    precompute_frame_cells,
    to_polar,
    window_descriptor,
    window_origins,
)

from conftest import make_field
from oracles import (
    oracle_cell_grid,
    oracle_gradient,
    oracle_hahog,
    oracle_height_hist,
    oracle_window_hog,
)

FC = FeatureConfig()


def const_field(w, h, value=100.0):
    return HeightField(
        width=w, height=h,
        h=np.full((h, w), value), valid=np.ones((h, w), dtype=bool),
    )


class TestToPolar:
    def test_unit_x(self):
        gr, gphi = to_polar(1.0, 0.0)
        assert gr == 1.0 and gphi == 0.0

    def test_unit_y(self):
        gr, gphi = to_polar(0.0, 2.0)
        assert gr == 2.0 and np.isclose(gphi, np.pi / 2)

    def test_third_quadrant(self):
        gr, gphi = to_polar(-1.0, -1.0)
        assert np.isclose(gr, np.sqrt(2)) and np.isclose(gphi, 5 * np.pi / 4)

    def test_zero_convention(self):
        gr, gphi = to_polar(0.0, 0.0)
        assert gr == 0.0 and gphi == 0.0

    def test_range(self, rng):
        gx, gy = rng.normal(size=500), rng.normal(size=500)
        _, gphi = to_polar(gx, gy)
        assert (gphi >= 0).all() and (gphi < 2 * np.pi).all()


class TestGradient:
    def test_constant_field_zero(self):
        g = compute_gradient(const_field(8, 8))
        assert not g.gr.any()

    def test_linear_ramp(self):
        h = np.fromfunction(lambda y, x: 2.0 * x, (8, 10))
        f = HeightField(width=10, height=8, h=h, valid=np.ones((8, 10), bool))
        g = compute_gradient(f)
        assert np.allclose(g.gx[1:-1, 1:-1], 2.0)
        assert np.allclose(g.gy[1:-1, 1:-1], 0.0)
        assert np.allclose(g.gphi[1:-1, 1:-1], 0.0)

    def test_matches_stencil_oracle_exactly(self, rng):
        f = make_field(rng, 16, 16, invalid_prob=0.1)
        g = compute_gradient(f)
        ogx, ogy, ogr, ogphi = oracle_gradient(f.h, f.valid)
        assert np.array_equal(g.gx, ogx)
        assert np.array_equal(g.gy, ogy)
        assert np.array_equal(g.gr, ogr)
        assert np.array_equal(g.gphi, ogphi)

    def test_too_small(self):
        with pytest.raises(DimensionError):
            compute_gradient(const_field(2, 5))

    def test_polar_reconstruction(self, rng):
        f = make_field(rng, 20, 14, invalid_prob=0.05)
        g = compute_gradient(f)
        sel = g.gr > 0
        rx = g.gr[sel] * np.cos(g.gphi[sel])
        ry = g.gr[sel] * np.sin(g.gphi[sel])
        assert np.allclose(rx, g.gx[sel], rtol=1e-9, atol=1e-12)
        assert np.allclose(ry, g.gy[sel], rtol=1e-9, atol=1e-12)


class TestCellHistograms:
    def test_single_contribution_one_hot(self):
        gr = np.zeros((6, 6))
        gphi = np.zeros((6, 6))
        gr[3, 3] = 5.0

        class G:
            pass

        g = G()
        g.gr, g.gphi = gr, gphi
        grid = cell_histograms(g, 6, 8)
        expected = np.zeros(8)
        expected[0] = 1.0
        assert np.array_equal(grid.histograms[0, 0], expected)

    def test_zero_cell_is_zero_vector(self):
        g = compute_gradient(const_field(12, 12))
        grid = cell_histograms(g, 6, 8)
        assert not np.isnan(grid.histograms).any()
        assert not grid.histograms.any()

    def test_matches_oracle(self, rng):
        f = make_field(rng, 18, 12, invalid_prob=0.05)
        g = compute_gradient(f)
        grid = cell_histograms(g, 6, 8)
        expected = oracle_cell_grid(g.gr, g.gphi, 6, 8)
        assert np.allclose(grid.histograms, expected, atol=1e-12)

    def test_trailing_pixels_dropped(self, rng):
        f = make_field(rng, 17, 13)
        grid = cell_histograms(compute_gradient(f), 6, 8)
        assert (grid.cells_x, grid.cells_y) == (2, 2)

    def test_norms(self, rng):
        f = make_field(rng, 30, 30, invalid_prob=0.02)
        grid = cell_histograms(compute_gradient(f), 6, 8)
        norms = np.linalg.norm(grid.histograms, axis=2).ravel()
        nonzero = norms[norms > 0]
        assert np.allclose(nonzero, 1.0, atol=1e-6)

    def test_bad_config(self, rng):
        g = compute_gradient(make_field(rng, 12, 12))
        with pytest.raises(ConfigError):
            cell_histograms(g, 6, 6)
        with pytest.raises(ConfigError):
            cell_histograms(g, 1, 8)


class TestWindowDescriptor:
    def test_single_cell_window(self, rng):
        f = make_field(rng, 12, 12)
        grid = precompute_frame_cells(f, FeatureConfig(window_cells=1))
        spec = WindowSpec(window_cells=1, stride_cells=1)
        d = window_descriptor(grid, (1, 0), spec)
        assert np.array_equal(d, grid.histograms[0, 1])

    def test_2x2_ordering(self, rng):
        f = make_field(rng, 12, 12)
        grid = precompute_frame_cells(f, FeatureConfig(window_cells=2))
        spec = WindowSpec(window_cells=2, stride_cells=1)
        d = window_descriptor(grid, (0, 0), spec)
        h = grid.histograms
        expected = np.concatenate([h[0, 0], h[0, 1], h[1, 0], h[1, 1]])
        assert np.array_equal(d, expected)

    def test_out_of_bounds(self, rng):
        f = make_field(rng, 70, 70)
        grid = precompute_frame_cells(f, FC)
        with pytest.raises(BoundsError):
            window_descriptor(grid, (5, 0), FC.window)

    def test_matches_per_window_oracle(self, rng):
        fc = FeatureConfig(window_cells=3)
        f = make_field(rng, 30, 24, invalid_prob=0.05)
        grid = precompute_frame_cells(f, fc)
        for (cx, cy) in [(0, 0), (1, 0), (2, 1)]:
            d = window_descriptor(grid, (cx, cy), fc.window)
            o = oracle_window_hog(f, cx * 6, cy * 6, fc)
            assert np.allclose(d, o, atol=1e-6)


class TestHeightHistogram:
    def test_floor_window(self):
        f = const_field(10, 10, value=0.0)
        hh = height_histogram(f, (0, 0, 10, 10), 16, 2200.0)
        assert hh[0] == 1.0 and hh[1:].sum() == 0.0

    def test_all_invalid_window(self):
        f = HeightField(
            width=6, height=6, h=np.zeros((6, 6)),
            valid=np.zeros((6, 6), dtype=bool),
        )
        assert not height_histogram(f, (0, 0, 6, 6), 16, 2200.0).any()

    def test_overflow_goes_to_top_bin(self):
        f = const_field(4, 4, value=5000.0)
        hh = height_histogram(f, (0, 0, 4, 4), 16, 2200.0)
        assert hh[15] == 1.0

    def test_matches_counting_oracle(self, rng):
        f = make_field(rng, 20, 20, invalid_prob=0.1, h_max=2500.0)
        hh = height_histogram(f, (3, 2, 12, 14), 16, 2200.0)
        o = oracle_height_hist(f, (3, 2, 12, 14), 16, 2200.0)
        assert np.array_equal(hh, o)

    def test_l1_normalized(self, rng):
        f = make_field(rng, 20, 20, invalid_prob=0.3)
        hh = height_histogram(f, (0, 0, 20, 20), 16, 2200.0)
        assert np.isclose(hh.sum(), 1.0, atol=1e-6)

    def test_bounds(self, rng):
        f = make_field(rng, 10, 10)
        with pytest.raises(BoundsError):
            height_histogram(f, (5, 5, 10, 10), 16, 2200.0)


class TestHahog:
    def test_feature_length(self, rng):
        f = make_field(rng, 70, 70)
        grid = precompute_frame_cells(f, FC)
        v = hahog(grid, f, (0, 0), FC.window, FC)
        assert v.shape == (11 * 11 * 8 + 16,) == (984,)

    def test_floor_window_parts(self):
        f = const_field(70, 70, value=0.0)
        grid = precompute_frame_cells(f, FC)
        v = hahog(grid, f, (0, 0), FC.window, FC)
        assert not v[: FC.hog_len].any()
        assert v[FC.hog_len] == 1.0 and not v[FC.hog_len + 1 :].any()

    def test_matches_oracle_composition(self, rng):
        fc = FeatureConfig(window_cells=4, n_height_bins=8)
        f = make_field(rng, 40, 34, invalid_prob=0.03)
        grid = precompute_frame_cells(f, fc)
        v = hahog(grid, f, (1, 1), fc.window, fc)
        o = oracle_hahog(f, 6, 6, fc)
        assert np.allclose(v, o, atol=1e-6)

    def test_nonneg_and_finite(self, rng):
        f = make_field(rng, 70, 70, invalid_prob=0.05)
        grid = precompute_frame_cells(f, FC)
        v = hahog(grid, f, (0, 0), FC.window, FC)
        assert np.isfinite(v).all() and (v >= 0).all()


class TestFrameDescriptors:
    def test_grid_dimensions_512x424(self):
        f = const_field(512, 424)
        grid = precompute_frame_cells(f, FC)
        assert (grid.cells_x, grid.cells_y) == (85, 70)

    def test_single_window_frame(self, rng):
        f = make_field(rng, 66, 66)
        xs, ys = window_origins(f, FC)
        assert len(xs) == 1 and len(ys) == 1

    def test_frame_too_small(self, rng):
        f = make_field(rng, 60, 66)
        with pytest.raises(DimensionError):
            precompute_frame_cells(f, FC)

    def test_every_window_matches_shared_grid(self, rng):
        fc = FeatureConfig(window_cells=4, n_height_bins=8)
        f = make_field(rng, 46, 40, invalid_prob=0.02)
        feats, xs, ys = frame_descriptors(f, fc)
        grid = precompute_frame_cells(f, fc)
        for iy, cy in enumerate(ys):
            for ix, cx in enumerate(xs):
                direct = hahog(grid, f, (int(cx), int(cy)), fc.window, fc)
                assert np.array_equal(feats[iy, ix], direct)

    def test_hog_only_mode(self, rng):
        fc = FeatureConfig(n_height_bins=0)
        f = make_field(rng, 70, 70)
        feats, _, _ = frame_descriptors(f, fc)
        assert feats.shape[-1] == fc.hog_len


class TestRotationProperty:
    def rotate_expected(self, grid_h, k, n_bins):
        return np.roll(np.rot90(grid_h, k), -k * (n_bins // 4), axis=2)

    @pytest.mark.parametrize("k", [1, 2, 3])
    def test_cell_grid_rotation(self, rng, k):
        f = make_field(rng, 66, 66, invalid_prob=0.03)
        grid = precompute_frame_cells(f, FC)
        rot = HeightField(
            width=66, height=66,
            h=np.rot90(f.h, k).copy(), valid=np.rot90(f.valid, k).copy(),
        )
        grid_rot = precompute_frame_cells(rot, FC)
        expected = self.rotate_expected(grid.histograms, k, FC.n_bins)
        assert np.allclose(grid_rot.histograms, expected, atol=1e-6)

    def test_height_histogram_exactly_invariant(self, rng):
        f = make_field(rng, 66, 66, invalid_prob=0.05)
        rot = HeightField(
            width=66, height=66,
            h=np.rot90(f.h).copy(), valid=np.rot90(f.valid).copy(),
        )
        a = height_histogram(f, (0, 0, 66, 66), 16, 2200.0)
        b = height_histogram(rot, (0, 0, 66, 66), 16, 2200.0)
        assert np.array_equal(a, b)


class TestPatchFeatures:
    def test_wrong_size_rejected(self, rng):
        with pytest.raises(DimensionError):
            patch_features(make_field(rng, 60, 66), FC)

    def test_equals_hahog_at_origin(self, rng):
        f = make_field(rng, 66, 66, invalid_prob=0.02)
        grid = precompute_frame_cells(f, FC)
        assert np.array_equal(
            patch_features(f, FC), hahog(grid, f, (0, 0), FC.window, FC)
        )


class TestFeatureConfig:
    def test_defaults(self):
        assert FC.window_px == 66
        assert FC.feature_len == 984

    def test_round_trip(self):
        assert FeatureConfig.from_dict(FC.to_dict()) == FC

    def test_validation(self):
        with pytest.raises(ConfigError):
            FeatureConfig(n_bins=6)
        with pytest.raises(ConfigError):
            FeatureConfig(cell_size=1)
