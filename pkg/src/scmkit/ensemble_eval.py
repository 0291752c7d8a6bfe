"""Model-agnostic ensemble comparison: features, PCA, cosine pairs, coverage.

Works on any directory of square 8-bit grayscale images.  Per-image
features come in four families: texture (co-occurrence statistics),
morphology (shape properties of the segmented tissue of interest),
skeleton (branch/junction census of the thinned ligament tissue) and the
fat-to-glandular pixel ratio.  Ensembles are compared through the
distribution of cosine similarities between random feature-space pairs
(train-train vs train-generated) summarized by the KS statistic, plus
per-class k-NN coverage/density and class prevalence in the top
principal-component plane.
"""

import warnings
from dataclasses import dataclass, field
from functools import partial

import numpy as np

from scmkit.core import parallel_map
from scmkit.imgproc import glcm_features, morphology_features, skeletonize, skeleton_statistics
from scmkit.stats import (
    StatsError,
    _coverage_density_core,
    cosine_similarity,
    ks_two_sample,
    pca_fit,
    pca_project,
)


@dataclass(frozen=True)
class TissueConfig:
    """Named, disjoint intensity intervals plus the tissue roles.

    The default gray allocations are package configuration, chosen only to
    be mutually disjoint and stable; override them to match the ensemble
    under study.
    """

    intervals: dict = field(
        default_factory=lambda: {
            "glandular": (60, 120),
            "fat": (150, 200),
            "ligament": (220, 255),
        }
    )
    fat_tissue: str = "fat"
    glandular_tissue: str = "glandular"
    morphology_tissue: str = "glandular"
    skeleton_tissue: str = "ligament"

    def validate(self):
        spans = sorted(self.intervals.values())
        for (lo1, hi1), (lo2, hi2) in zip(spans, spans[1:]):
            if hi1 >= lo2:
                raise ValueError("tissue intervals must be disjoint")
        for name in (self.fat_tissue, self.glandular_tissue, self.morphology_tissue, self.skeleton_tissue):
            if name not in self.intervals:
                raise ValueError(f"tissue role {name!r} has no interval")
        return self


FEATURE_FAMILIES = ("texture", "morphology", "skeleton", "fg_ratio")


def family_of(feature_name):
    if feature_name.startswith("glcm_"):
        return "texture"
    if feature_name.startswith("morph_"):
        return "morphology"
    if feature_name.startswith("skel_"):
        return "skeleton"
    if feature_name == "fg_ratio":
        return "fg_ratio"
    raise KeyError(f"unknown feature {feature_name!r}")


def segment_tissues(image, config):
    """Per-tissue boolean masks by global interval thresholding."""
    img = np.asarray(image)
    return {name: (img >= lo) & (img <= hi) for name, (lo, hi) in config.intervals.items()}


def fg_ratio(masks, config):
    """Fat-to-glandular pixel ratio."""
    glandular = int(masks[config.glandular_tissue].sum())
    if glandular == 0:
        raise StatsError("empty glandular mask: F/G ratio undefined")
    return masks[config.fat_tissue].sum() / glandular


def extract_features(image, config=None):
    """The full per-image feature vector; nan marks undefined entries.

    Images with nan features are excluded (with a count) at the matrix
    level rather than silently imputed.
    """
    config = config or TissueConfig().validate()
    masks = segment_tissues(image, config)
    features = dict(glcm_features(image))
    morph_mask = masks[config.morphology_tissue]
    if morph_mask.any():
        for name, value in morphology_features(morph_mask).items():
            features[f"morph_{name}"] = value
    else:
        for name in ("n_components", "area_mean", "area_std", "perimeter_mean", "perimeter_std",
                     "eccentricity_mean", "eccentricity_std", "solidity_mean", "solidity_std"):
            features[f"morph_{name}"] = float("nan")
    skel = skeletonize(masks[config.skeleton_tissue])
    for name, value in skeleton_statistics(skel).items():
        features[f"skel_{name}"] = value
    try:
        features["fg_ratio"] = float(fg_ratio(masks, config))
    except StatsError:
        features["fg_ratio"] = float("nan")
    return features


def feature_matrix(images, config=None, jobs=1):
    """Stack per-image features; drop images with undefined entries.

    Returns (matrix, names, kept_indices, n_excluded).  Extraction is an
    ordered parallel map when jobs > 1.
    """
    config = config or TissueConfig().validate()
    feature_dicts = parallel_map(partial(extract_features, config=config), images, jobs)
    rows, names, kept = [], None, []
    for idx, feats in enumerate(feature_dicts):
        if names is None:
            names = list(feats.keys())
        row = np.array([feats[n] for n in names], dtype=float)
        if np.isnan(row).any():
            continue
        rows.append(row)
        kept.append(idx)
    n_excluded = len(feature_dicts) - len(kept)
    if not rows:
        raise StatsError("no images with complete features")
    if n_excluded:
        warnings.warn(f"excluded {n_excluded} image(s) with undefined features", stacklevel=2)
    return np.array(rows), names, kept, n_excluded


def _sample_index_pairs(gen, n_a, n_b, pairs, distinct):
    i = gen.integers(0, n_a, size=pairs)
    j = gen.integers(0, n_b, size=pairs)
    if distinct:
        while True:
            clash = i == j
            if not clash.any():
                break
            j[clash] = gen.integers(0, n_b, size=int(clash.sum()))
    return i, j


@dataclass
class PairSimilarity:
    tt_similarities: np.ndarray
    tg_similarities: np.ndarray
    ks: float


def pair_similarity_distributions(train, gen, pairs=10_000, k=10, rng=None):
    """Cosine-similarity distributions of random train-train and train-gen pairs.

    Both ensembles are projected onto the top-k PCs fit on the training
    features; the KS statistic summarizes how far the train-gen similarity
    distribution sits from the train-train one.
    """
    if rng is None:
        raise StatsError("an RngStream is required for pair sampling")
    train = np.asarray(train, dtype=float)
    gen_m = np.asarray(gen, dtype=float)
    if pairs < 100:
        raise StatsError("need at least 100 pairs")
    if train.shape[0] < 2 or gen_m.shape[0] < 2:
        raise StatsError("need at least 2 images per ensemble")
    n_varying = int(np.sum(train.std(axis=0, ddof=1) > 0))
    k_eff = min(k, train.shape[1], train.shape[0] - 1, n_varying)
    if k_eff < 1:
        raise StatsError("all training features are constant")
    model = pca_fit(train, k_eff)
    train_p = pca_project(model, train)
    gen_p = pca_project(model, gen_m)
    g = rng.gen

    def sims(a, b, distinct):
        i, j = _sample_index_pairs(g, a.shape[0], b.shape[0], pairs, distinct)
        va, vb = a[i], b[j]
        na = np.linalg.norm(va, axis=1)
        nb = np.linalg.norm(vb, axis=1)
        ok = (na > 0) & (nb > 0)
        for _ in range(100):
            if ok.all():
                break
            n_bad = int((~ok).sum())
            i2, j2 = _sample_index_pairs(g, a.shape[0], b.shape[0], n_bad, distinct)
            i[~ok], j[~ok] = i2, j2
            va, vb = a[i], b[j]
            na = np.linalg.norm(va, axis=1)
            nb = np.linalg.norm(vb, axis=1)
            ok = (na > 0) & (nb > 0)
        else:
            raise StatsError("could not sample nonzero projected vectors")
        return np.sum(va * vb, axis=1) / (na * nb)

    tt = sims(train_p, train_p, distinct=True)
    tg = sims(train_p, gen_p, distinct=False)
    return PairSimilarity(tt, tg, ks_two_sample(tt, tg))


@dataclass
class ClassMetrics:
    classes: list        # ordered by increasing training F/G ratio
    boundaries: list     # F/G thresholds separating consecutive classes
    prevalence: dict     # class -> fraction of generated images assigned
    coverage: dict       # class -> coverage of generated within training manifold
    density: dict        # class -> density estimate


def class_metrics(train, train_labels, gen, train_fg, gen_fg, k_neighbors=5):
    """Per-class prevalence, coverage and density in the top-2 PC plane.

    Class assignment of generated images uses F/G-ratio thresholds placed
    at the pooled training quantiles matching the training class mix (a
    deliberate stand-in for a learned class predictor).
    """
    train = np.asarray(train, dtype=float)
    gen_m = np.asarray(gen, dtype=float)
    labels = np.asarray(train_labels)
    train_fg = np.asarray(train_fg, dtype=float)
    gen_fg = np.asarray(gen_fg, dtype=float)
    classes = sorted(set(labels.tolist()))
    if len(classes) < 2:
        raise StatsError("need at least 2 labeled training classes")
    order = np.argsort([train_fg[labels == c].mean() for c in classes])
    classes = [classes[i] for i in order]
    fractions = np.array([np.mean(labels == c) for c in classes])
    cuts = np.cumsum(fractions)[:-1]
    boundaries = np.quantile(train_fg, cuts)
    assigned = np.array([classes[i] for i in np.searchsorted(boundaries, gen_fg, side="right")])

    model = pca_fit(train, 2)
    train_p = pca_project(model, train)
    gen_p = pca_project(model, gen_m)
    prevalence, coverage, density = {}, {}, {}
    for c in classes:
        real = train_p[labels == c]
        if real.shape[0] <= k_neighbors:
            raise StatsError(f"class {c!r} has too few training points")
        fake = gen_p[assigned == c]
        prevalence[c] = float(np.mean(assigned == c))
        if fake.shape[0] == 0:
            coverage[c] = 0.0
            density[c] = 0.0
        else:
            coverage[c], density[c] = _coverage_density_core(real, fake, k_neighbors)
    return ClassMetrics(classes, [float(b) for b in boundaries], prevalence, coverage, density)


def compare_ensembles(train_images, gen_images, config=None, pairs=10_000, k=10,
                      k_neighbors=5, rng=None, train_labels=None, jobs=1):
    """The full comparison pipeline; returns the report body (KS table,
    projections, class metrics)."""
    config = (config or TissueConfig()).validate()
    train_m, names, train_kept, train_excluded = feature_matrix(train_images, config, jobs)
    gen_m, _, gen_kept, gen_excluded = feature_matrix(gen_images, config, jobs)
    name_arr = np.array(names)
    out = {
        "feature_names": names,
        "n_train": int(train_m.shape[0]),
        "n_gen": int(gen_m.shape[0]),
        "n_train_excluded": int(train_excluded),
        "n_gen_excluded": int(gen_excluded),
        "family_ks": {},
    }
    for family in FEATURE_FAMILIES:
        cols = np.flatnonzero([family_of(n) == family for n in name_arr])
        sub_train = train_m[:, cols]
        sub_gen = gen_m[:, cols]
        if cols.size == 1:
            out["family_ks"][family] = ks_two_sample(sub_train[:, 0], sub_gen[:, 0])
        else:
            sim = pair_similarity_distributions(sub_train, sub_gen, pairs, min(k, cols.size), rng)
            out["family_ks"][family] = sim.ks
    overall = pair_similarity_distributions(train_m, gen_m, pairs, k, rng)
    out["overall_ks"] = overall.ks
    model2 = pca_fit(train_m, 2)
    out["train_projected"] = pca_project(model2, train_m)
    out["gen_projected"] = pca_project(model2, gen_m)
    if train_labels is not None:
        labels = [train_labels[i] for i in train_kept]
        fg_col = names.index("fg_ratio")
        metrics = class_metrics(train_m, labels, gen_m, train_m[:, fg_col], gen_m[:, fg_col], k_neighbors)
        out["class_metrics"] = {
            "classes": [str(c) for c in metrics.classes],
            "boundaries": metrics.boundaries,
            "prevalence": {str(c): v for c, v in metrics.prevalence.items()},
            "coverage": {str(c): v for c, v in metrics.coverage.items()},
            "density": {str(c): v for c, v in metrics.density.items()},
        }
    return out
