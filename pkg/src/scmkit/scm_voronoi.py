"""Four-class Voronoi model: region count defines class, intensity ranks with area.

A realization partitions the 256x256 canvas into c nearest-seed regions
(c in {16, 32, 48, 64}), draws c distinct gray values from a fixed set of
128 levels in [1, 254], assigns them so that a region's intensity rank
equals its area rank, and zeroes the inter-region boundary pixels.
Analysis recovers the regions from pixels alone via Sauvola edge
detection, thinning, and connected components.
"""

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from scmkit.imgproc import connected_components, sauvola_threshold, skeletonize, skeleton_statistics
from scmkit.stats import StatsError, ks_two_sample, pca_fit, pca_project, spearman_rho

CLASSES = (16, 32, 48, 64)
CANVAS = 256
MIN_SEED_DISTANCE = 8.0
INTENSITY_LEVELS = np.rint(1.0 + np.arange(128) * 253.0 / 127.0).astype(np.uint8)

IMPLICIT_STAT_NAMES = (
    "n_regions",
    "n_junctions",
    "junction_density",
    "edge_length_mean",
    "edge_length_std",
    "region_area_mean",
    "region_area_std",
)


class GenerationError(RuntimeError):
    """Raised when constrained sampling cannot satisfy its invariants."""


@dataclass
class VoronoiTruth:
    """Generator-side ground truth for one realization."""

    class_label: int
    seeds: np.ndarray        # (c, 2) float, (row, col)
    intensities: np.ndarray  # (c,) uint8, aligned with seeds
    areas: np.ndarray        # (c,) int, interior (non-edge) pixel counts


def _sample_seeds(gen, count, min_dist=MIN_SEED_DISTANCE, max_tries=10_000):
    seeds = np.empty((count, 2))
    min_sq = min_dist * min_dist
    for i in range(count):
        for _ in range(max_tries):
            candidate = gen.random(2) * CANVAS
            if i == 0 or np.min(np.sum((seeds[:i] - candidate) ** 2, axis=1)) >= min_sq:
                seeds[i] = candidate
                break
        else:
            return None
    return seeds


_COORDS = None


def _pixel_coords():
    global _COORDS
    if _COORDS is None:
        rr, cc = np.mgrid[0:CANVAS, 0:CANVAS].astype(float)
        _COORDS = np.stack([rr.ravel(), cc.ravel()], axis=1)
    return _COORDS


def _rasterize(seeds):
    pts = _pixel_coords()
    labels = cKDTree(seeds).query(pts)[1].reshape(CANVAS, CANVAS)
    edge = np.zeros((CANVAS, CANVAS), dtype=bool)
    edge[:-1, :] |= labels[:-1, :] != labels[1:, :]
    edge[1:, :] |= labels[1:, :] != labels[:-1, :]
    edge[:, :-1] |= labels[:, :-1] != labels[:, 1:]
    edge[:, 1:] |= labels[:, 1:] != labels[:, :-1]
    return labels, edge


def generate_with_region_count(rng, n_regions, max_attempts=100):
    """One realization with an arbitrary region count (1..128)."""
    if not 1 <= n_regions <= INTENSITY_LEVELS.size:
        raise GenerationError(f"region count must be in 1..{INTENSITY_LEVELS.size}, got {n_regions}")
    gen = rng.gen
    for _ in range(max_attempts):
        seeds = _sample_seeds(gen, n_regions)
        if seeds is None:
            continue
        labels, edge = _rasterize(seeds)
        areas = np.bincount(labels[~edge].ravel(), minlength=n_regions)
        # distinct interior areas guarantee an unambiguous intensity ranking
        if np.any(areas == 0) or np.unique(areas).size < n_regions:
            continue
        chosen = INTENSITY_LEVELS[np.sort(gen.permutation(INTENSITY_LEVELS.size)[:n_regions])]
        intensities = np.empty(n_regions, dtype=np.uint8)
        intensities[np.argsort(areas)] = chosen
        image = intensities[labels]
        image[edge] = 0
        truth = VoronoiTruth(int(n_regions), seeds, intensities, areas.astype(int))
        return image, truth
    raise GenerationError(f"could not sample {n_regions} regions with distinct areas")


def generate_voronoi(rng, class_label):
    """One realization of a valid class: (image, VoronoiTruth)."""
    if class_label not in CLASSES:
        raise GenerationError(f"class must be one of {CLASSES}, got {class_label}")
    return generate_with_region_count(rng, class_label)


@dataclass
class RegionExtraction:
    """Regions recovered from pixels alone."""

    labels: np.ndarray            # (256, 256) int32, 0 = edge skeleton
    areas: np.ndarray             # (n,) int
    mean_intensities: np.ndarray  # (n,) float
    edge_skeleton: np.ndarray     # (256, 256) bool

    @property
    def n_regions(self):
        return self.areas.size


def extract_regions(image, window=5, k=0.2, r=128.0, min_region_area=24):
    """Recover Voronoi regions: Sauvola edge mask, thinning, 4-connected fill.

    Components smaller than `min_region_area` are pockets left inside
    thick edge-detection bands, not regions (the seed spacing keeps true
    regions far larger); they are relabeled to 0 and excluded.
    """
    img = np.asarray(image)
    bright = sauvola_threshold(img, window=window, k=k, r=r)
    skeleton = skeletonize(~bright)
    labels = connected_components(~skeleton, connectivity=4)
    n = int(labels.max())
    if n == 0:
        raise StatsError("no regions recovered")
    flat = labels.ravel()
    areas = np.bincount(flat, minlength=n + 1)[1:]
    keep = np.flatnonzero(areas >= min_region_area) + 1
    if keep.size == 0:
        raise StatsError("no regions recovered above the minimum area")
    remap = np.zeros(n + 1, dtype=np.int32)
    remap[keep] = np.arange(1, keep.size + 1, dtype=np.int32)
    labels = remap[labels]
    flat = labels.ravel()
    m = keep.size
    areas = np.bincount(flat, minlength=m + 1)[1:]
    sums = np.bincount(flat, weights=img.ravel().astype(float), minlength=m + 1)[1:]
    return RegionExtraction(labels, areas.astype(int), sums / areas, skeleton)


def classify_region_count(count, tolerance=1):
    """Map a recovered region count to its class, or None when off-class."""
    if count < 1:
        raise ValueError("count must be >= 1")
    for c in CLASSES:
        if abs(count - c) <= tolerance:
            return c
    return None


def check_rank_correlation(extraction):
    """Spearman rho between recovered region areas and mean intensities."""
    if extraction.n_regions < 2:
        raise StatsError("rank correlation needs at least 2 regions")
    return spearman_rho(extraction.areas, extraction.mean_intensities)


def implicit_context(image, window=5, k=0.2, r=128.0):
    """The seven emergent tessellation statistics of one image."""
    extraction = extract_regions(image, window=window, k=k, r=r)
    skel = skeleton_statistics(extraction.edge_skeleton)
    return {
        "n_regions": float(extraction.n_regions),
        "n_junctions": skel["n_junctions"],
        "junction_density": skel["junction_density"],
        "edge_length_mean": skel["branch_length_mean"],
        "edge_length_std": skel["branch_length_std"],
        "region_area_mean": float(extraction.areas.mean()),
        "region_area_std": float(extraction.areas.std()),
    }


@dataclass
class ImplicitContextPca:
    train_projected: np.ndarray  # (n, 2)
    test_projected: np.ndarray   # (m, 2)
    ks_per_coordinate: tuple     # KS statistic for each projected axis
    model: object


def stats_matrix(stat_dicts):
    return np.array([[d[name] for name in IMPLICIT_STAT_NAMES] for d in stat_dicts], dtype=float)


def implicit_context_pca(train_stats, test_stats, n_components=2):
    """Project both ensembles onto the training implicit-context PCs.

    The overlap summary is the per-coordinate two-sample KS statistic.
    """
    train = stats_matrix(train_stats)
    test = stats_matrix(test_stats)
    if train.shape[0] < 50:
        raise StatsError("need at least 50 training images for a stable projection")
    model = pca_fit(train, n_components)
    train_p = pca_project(model, train)
    test_p = pca_project(model, test)
    ks = tuple(ks_two_sample(train_p[:, i], test_p[:, i]) for i in range(train_p.shape[1]))
    return ImplicitContextPca(train_p, test_p, ks, model)
