import numpy as np
import pytest

from scmkit.core import split_rng
from scmkit.scm_voronoi import (
    CLASSES,
    INTENSITY_LEVELS,
    GenerationError,
    check_rank_correlation,
    classify_region_count,
    extract_regions,
    generate_voronoi,
    generate_with_region_count,
    implicit_context,
    implicit_context_pca,
    stats_matrix,
)
from scmkit.stats import StatsError, spearman_rho


class TestIntensityLevels:
    def test_set_properties(self):
        assert INTENSITY_LEVELS.size == 128
        assert INTENSITY_LEVELS.min() == 1
        assert INTENSITY_LEVELS.max() == 254
        assert np.unique(INTENSITY_LEVELS).size == 128


class TestGeneration:
    def test_invalid_class(self):
        with pytest.raises(GenerationError):
            generate_voronoi(split_rng(0, 0), 20)

    def test_truth_invariants(self):
        for cls in CLASSES:
            image, truth = generate_voronoi(split_rng(1, cls), cls)
            assert truth.class_label == cls
            assert truth.areas.size == cls
            assert np.unique(truth.areas).size == cls
            assert spearman_rho(truth.areas, truth.intensities) == 1.0
            assert np.unique(truth.intensities).size == cls

    def test_pixel_values_from_level_set(self):
        image, truth = generate_voronoi(split_rng(2, 0), 32)
        allowed = set(INTENSITY_LEVELS.tolist()) | {0}
        assert set(np.unique(image).tolist()) <= allowed

    def test_edges_are_zero_and_thin(self):
        image, _ = generate_voronoi(split_rng(2, 1), 16)
        edge_fraction = np.mean(image == 0)
        assert 0.005 < edge_fraction < 0.15

    def test_determinism(self):
        a, _ = generate_voronoi(split_rng(3, 9), 48)
        b, _ = generate_voronoi(split_rng(3, 9), 48)
        assert np.array_equal(a, b)

    def test_seed_separation(self):
        _, truth = generate_voronoi(split_rng(4, 0), 64)
        d = np.sqrt(((truth.seeds[:, None, :] - truth.seeds[None, :, :]) ** 2).sum(axis=2))
        np.fill_diagonal(d, np.inf)
        assert d.min() >= 8.0

    def test_off_class_count_generation(self):
        image, truth = generate_with_region_count(split_rng(5, 0), 80)
        assert truth.class_label == 80
        ext = extract_regions(image)
        assert abs(ext.n_regions - 80) <= 2


class TestExtraction:
    def test_round_trip_counts_and_rho(self):
        bad_count = bad_rho = 0
        n = 0
        for cls in CLASSES:
            for i in range(15):
                image, _ = generate_voronoi(split_rng(6, 100 * cls + i), cls)
                ext = extract_regions(image)
                n += 1
                bad_count += abs(ext.n_regions - cls) > 1
                bad_rho += check_rank_correlation(ext) < 0.99
        assert bad_count == 0
        assert bad_rho == 0

    def test_uniform_image_single_region(self):
        image = np.full((256, 256), 180, dtype=np.uint8)
        ext = extract_regions(image)
        assert ext.n_regions == 1

    def test_area_sum_dominates(self):
        image, _ = generate_voronoi(split_rng(7, 0), 64)
        ext = extract_regions(image)
        assert ext.areas.sum() >= 0.9 * image.size

    def test_permuted_intensities_break_correlation(self):
        rhos = []
        for i in range(30):
            image, truth = generate_voronoi(split_rng(8, i), 32)
            gen = np.random.default_rng(i)
            rhos.append(spearman_rho(truth.areas, gen.permutation(truth.intensities)))
        assert abs(np.mean(rhos)) < 0.2

    def test_two_regions_exact(self):
        image, truth = generate_voronoi(split_rng(9, 3), 16)
        ext = extract_regions(image)
        order_area = np.argsort(ext.areas)
        intens = ext.mean_intensities[order_area]
        assert np.all(np.diff(intens) > 0) or check_rank_correlation(ext) >= 0.99


class TestClassifyCount:
    def test_exact_classes(self):
        for cls in CLASSES:
            assert classify_region_count(cls) == cls
            assert classify_region_count(cls + 1) == cls
            assert classify_region_count(cls - 1) == cls

    def test_off_class(self):
        assert classify_region_count(40) is None
        assert classify_region_count(80) is None
        assert classify_region_count(2) is None

    def test_invalid(self):
        with pytest.raises(ValueError):
            classify_region_count(0)


class TestImplicitContext:
    def test_stat_names_and_values(self):
        image, _ = generate_voronoi(split_rng(10, 0), 16)
        stats = implicit_context(image)
        assert set(stats) == {
            "n_regions", "n_junctions", "junction_density", "edge_length_mean",
            "edge_length_std", "region_area_mean", "region_area_std",
        }
        assert all(v >= 0 for v in stats.values())

    def test_junctions_scale_with_class(self):
        j16 = np.median([implicit_context(generate_voronoi(split_rng(11, i), 16)[0])["n_junctions"] for i in range(5)])
        j64 = np.median([implicit_context(generate_voronoi(split_rng(11, 100 + i), 64)[0])["n_junctions"] for i in range(5)])
        assert j64 > j16

    def test_mean_area_consistency(self):
        image, _ = generate_voronoi(split_rng(12, 0), 32)
        stats = implicit_context(image)
        ext = extract_regions(image)
        assert stats["region_area_mean"] == pytest.approx(ext.areas.sum() / ext.n_regions)


class TestImplicitPca:
    def _stats_batch(self, seed, count, classes=CLASSES):
        out = []
        for i in range(count):
            cls = classes[i % len(classes)]
            image, _ = generate_voronoi(split_rng(seed, i), cls)
            out.append(implicit_context(image))
        return out

    def test_null_overlap(self):
        train = self._stats_batch(13, 60)
        test = self._stats_batch(14, 60)
        result = implicit_context_pca(train, test)
        assert len(result.ks_per_coordinate) == 2
        assert all(ks < 0.25 for ks in result.ks_per_coordinate)

    def test_corrupted_counts_shift(self):
        train = self._stats_batch(15, 60)
        test = [dict(s) for s in self._stats_batch(16, 60)]
        for s in test:
            s["n_regions"] *= 0.5
            s["n_junctions"] *= 0.5
        result = implicit_context_pca(train, test)
        assert max(result.ks_per_coordinate) > 0.3

    def test_requires_training_mass(self):
        train = self._stats_batch(17, 10)
        with pytest.raises(StatsError):
            implicit_context_pca(train, train)

    def test_classes_separate_along_pc1(self):
        train = self._stats_batch(18, 80)
        result = implicit_context_pca(train, train)
        labels = np.array([CLASSES[i % 4] for i in range(80)])
        pc1 = result.train_projected[:, 0]
        means = [pc1[labels == c].mean() for c in CLASSES]
        assert np.all(np.diff(means) > 0) or np.all(np.diff(means) < 0)

    def test_stats_matrix_order(self):
        stats = self._stats_batch(19, 2)
        mat = stats_matrix(stats)
        assert mat.shape == (2, 7)
        assert mat[0, 0] == stats[0]["n_regions"]
