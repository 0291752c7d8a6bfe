import numpy as np
import pytest

import oracles
from scmkit.imgproc import (
    ImageError,
    _RING,
    _deletable_lut,
    connected_components,
    glcm_features,
    morphology_features,
    region_properties,
    sauvola_threshold,
    skeleton_statistics,
    skeletonize,
)


class TestSauvola:
    def test_bright_constant_image_is_all_foreground(self):
        img = np.full((32, 32), 200, dtype=np.uint8)
        # s = 0 so the threshold is 0.8 * 200 = 160 < 200
        assert sauvola_threshold(img, window=15, k=0.2, r=128).all()

    def test_black_image_is_all_background(self):
        img = np.zeros((32, 32), dtype=np.uint8)
        assert not sauvola_threshold(img).any()

    def test_dark_grid_on_bright_field(self):
        img = np.full((27, 27), 200, dtype=np.uint8)
        img[::9, :] = 0
        img[:, ::9] = 0
        fg = sauvola_threshold(img, window=7)
        assert not fg[::9, :].any()
        assert not fg[:, ::9].any()
        assert fg[4, 4] and fg[13, 13]

    def test_matches_bruteforce_on_toy_image(self):
        gen = np.random.default_rng(0)
        img = gen.integers(0, 256, size=(9, 9)).astype(np.uint8)
        mine = sauvola_threshold(img, window=3, k=0.2, r=128)
        ref = oracles.sauvola_reference(img, window=3, k=0.2, r=128)
        assert np.array_equal(mine, ref)

    def test_commutes_with_flips(self):
        gen = np.random.default_rng(1)
        img = gen.integers(0, 256, size=(20, 24)).astype(np.uint8)
        fg = sauvola_threshold(img)
        assert np.array_equal(sauvola_threshold(img[::-1]), fg[::-1])
        assert np.array_equal(sauvola_threshold(img[:, ::-1]), fg[:, ::-1])

    def test_even_window_rejected(self):
        with pytest.raises(ImageError):
            sauvola_threshold(np.zeros((8, 8), dtype=np.uint8), window=4)


class TestSkeletonize:
    def test_empty_mask(self):
        assert not skeletonize(np.zeros((10, 10), dtype=bool)).any()

    def test_thin_line_unchanged(self):
        m = np.zeros((9, 9), dtype=bool)
        m[4, 1:8] = True
        assert np.array_equal(skeletonize(m), m)

    def test_bar_thins_to_spanning_path(self):
        m = np.zeros((9, 24), dtype=bool)
        m[2:7, 2:22] = True
        sk = skeletonize(m)
        cols = np.flatnonzero(sk.any(axis=0))
        assert cols.min() <= 4 and cols.max() >= 19  # endpoint columns within 2 px
        assert connected_components(sk, 8).max() == 1
        # single-pixel wide: no 2x2 block fully set
        assert not (sk[:-1, :-1] & sk[1:, :-1] & sk[:-1, 1:] & sk[1:, 1:]).any()

    def test_idempotent(self):
        gen = np.random.default_rng(2)
        for _ in range(10):
            m = gen.random((40, 40)) > 0.55
            once = skeletonize(m)
            assert np.array_equal(skeletonize(once), once)

    def test_preserves_topology(self):
        gen = np.random.default_rng(3)
        for _ in range(200):
            m = gen.random((12, 12)) > gen.uniform(0.3, 0.7)
            sk = skeletonize(m)
            assert connected_components(sk, 8).max() == connected_components(m, 8).max()
            assert connected_components(~sk, 4).max() == connected_components(~m, 4).max()

    def test_2px_diagonal_survives(self):
        m = np.zeros((14, 14), dtype=bool)
        for i in range(1, 11):
            m[i, i] = m[i, i + 1] = m[i + 1, i + 1] = True
        sk = skeletonize(m)
        assert sk.any()
        assert connected_components(sk, 8).max() == 1

    def test_matches_per_pixel_reference(self):
        gen = np.random.default_rng(4)
        lut = _deletable_lut()
        for _ in range(25):
            m = gen.random((14, 14)) > gen.uniform(0.35, 0.65)
            assert np.array_equal(skeletonize(m), oracles.thinning_reference(m, lut, _RING))


class TestConnectedComponents:
    def test_empty(self):
        assert connected_components(np.zeros((5, 5), dtype=bool)).max() == 0

    def test_two_squares(self):
        m = np.zeros((10, 10), dtype=bool)
        m[1:3, 1:3] = True
        m[6:9, 6:9] = True
        labels = connected_components(m, 4)
        assert labels.max() == 2
        assert sorted(np.bincount(labels.ravel())[1:]) == [4, 9]

    def test_diagonal_touching(self):
        m = np.zeros((6, 6), dtype=bool)
        m[1:3, 1:3] = True
        m[3:5, 3:5] = True
        assert connected_components(m, 4).max() == 2
        assert connected_components(m, 8).max() == 1

    def test_labels_partition_foreground(self):
        gen = np.random.default_rng(5)
        m = gen.random((30, 30)) > 0.5
        labels = connected_components(m, 4)
        assert np.bincount(labels.ravel())[1:].sum() == m.sum()

    def test_matches_flood_fill(self):
        gen = np.random.default_rng(6)
        for conn in (4, 8):
            for _ in range(20):
                m = gen.random((12, 12)) > 0.5
                mine = connected_components(m, conn)
                ref = oracles.flood_fill_components(m, conn)
                assert mine.max() == ref.max()
                # identical partitions up to label names
                for lab in range(1, mine.max() + 1):
                    cells = mine == lab
                    ref_labels = set(ref[cells].tolist())
                    assert len(ref_labels) == 1


class TestGlcm:
    def test_constant_image(self):
        feats = glcm_features(np.full((16, 16), 77, dtype=np.uint8))
        assert feats["glcm_contrast"] == 0.0
        assert feats["glcm_energy"] == pytest.approx(1.0)
        assert np.isnan(feats["glcm_correlation"])

    def test_checkerboard_contrast_energy(self):
        img = np.zeros((16, 16), dtype=np.uint8)
        img[::2, 1::2] = 255
        img[1::2, ::2] = 255
        feats = glcm_features(img, levels=2, offsets=((0, 1),))
        assert feats["glcm_contrast"] == pytest.approx(1.0)
        assert feats["glcm_energy"] == pytest.approx(0.5)

    def test_uniform_four_cell_entropy(self):
        img = np.array([[0, 0, 255, 255, 0, 0, 255, 255, 0]], dtype=np.uint8)
        feats = glcm_features(img, levels=2, offsets=((0, 1),))
        assert feats["glcm_entropy"] == pytest.approx(np.log(4))

    def test_bounds(self):
        gen = np.random.default_rng(7)
        img = gen.integers(0, 256, size=(32, 32)).astype(np.uint8)
        feats = glcm_features(img)
        assert 0 < feats["glcm_energy"] <= 1
        assert feats["glcm_entropy"] >= 0
        assert feats["glcm_contrast"] >= 0

    def test_levels_validation(self):
        with pytest.raises(ImageError):
            glcm_features(np.zeros((4, 4), dtype=np.uint8), levels=1)


class TestMorphology:
    def test_single_square(self):
        m = np.zeros((20, 20), dtype=bool)
        m[4:14, 6:16] = True
        props = region_properties(m)
        assert props["area"].tolist() == [100.0]
        assert props["perimeter"].tolist() == [40.0]
        assert props["eccentricity"][0] == pytest.approx(0.0, abs=1e-12)
        assert props["solidity"][0] == pytest.approx(1.0, abs=0.02)

    def test_bar_eccentricity(self):
        m = np.zeros((10, 30), dtype=bool)
        m[5, 4:24] = True
        props = region_properties(m)
        assert props["eccentricity"][0] == pytest.approx(1.0)

    def test_convex_solidity_one(self):
        rr, cc = np.mgrid[0:30, 0:30]
        disk = (rr - 15) ** 2 + (cc - 15) ** 2 <= 100
        props = region_properties(disk)
        assert props["solidity"][0] == pytest.approx(1.0, abs=0.02)

    def test_concave_solidity_below_one(self):
        m = np.zeros((20, 20), dtype=bool)
        m[2:18, 2:6] = True
        m[2:6, 2:18] = True  # L-shape
        props = region_properties(m)
        assert props["solidity"][0] < 0.7

    def test_summary_features(self):
        m = np.zeros((20, 20), dtype=bool)
        m[2:6, 2:6] = True
        m[10:18, 10:18] = True
        feats = morphology_features(m)
        assert feats["n_components"] == 2.0
        assert feats["area_mean"] == pytest.approx((16 + 64) / 2)

    def test_empty_mask_errors(self):
        with pytest.raises(ImageError):
            morphology_features(np.zeros((5, 5), dtype=bool))


class TestSkeletonStats:
    def test_straight_line(self):
        m = np.zeros((9, 15), dtype=bool)
        m[4, 2:13] = True
        stats = skeleton_statistics(m)
        assert stats["n_junctions"] == 0.0
        assert stats["n_branches"] == 1.0
        assert stats["skeleton_length"] == 11.0

    def test_cross(self):
        m = np.zeros((11, 11), dtype=bool)
        m[5, :] = True
        m[:, 5] = True
        stats = skeleton_statistics(m)
        assert stats["n_junctions"] == 1.0
        assert stats["n_branches"] == 4.0

    def test_empty(self):
        stats = skeleton_statistics(np.zeros((6, 6), dtype=bool))
        assert all(v == 0.0 for v in stats.values())

    def test_junction_density(self):
        m = np.zeros((11, 11), dtype=bool)
        m[5, :] = True
        m[:, 5] = True
        stats = skeleton_statistics(m)
        assert stats["junction_density"] == pytest.approx(stats["n_junctions"] / m.sum())
