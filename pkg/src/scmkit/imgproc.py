"""Image-processing primitives for post-hoc context recovery.

Masks are boolean arrays, label maps are int32 arrays with 0 as
background.  All functions are pure and operate on whole arrays.
"""

from functools import lru_cache

import numpy as np
from scipy import ndimage


class ImageError(ValueError):
    """Raised on invalid input to an image operation."""


def sauvola_threshold(image, window=15, k=0.2, r=128.0):
    """Local adaptive binarization: keep pixels brighter than the Sauvola bound.

    A pixel is foreground iff value > m * (1 + k * (s / r - 1)) where m and
    s are the mean and standard deviation over the centered window with
    edge-replicated borders.
    """
    if window < 3 or window % 2 == 0:
        raise ImageError("window must be odd and >= 3")
    img = np.asarray(image, dtype=float)
    if img.ndim != 2:
        raise ImageError("image must be 2-D")
    mean = ndimage.uniform_filter(img, size=window, mode="nearest")
    mean_sq = ndimage.uniform_filter(img * img, size=window, mode="nearest")
    std = np.sqrt(np.clip(mean_sq - mean * mean, 0.0, None))
    threshold = mean * (1.0 + k * (std / r - 1.0))
    return img > threshold


def _ring_neighbors(padded):
    # the 8 neighbors of every pixel: north, then clockwise
    return (
        padded[:-2, 1:-1],
        padded[:-2, 2:],
        padded[1:-1, 2:],
        padded[2:, 2:],
        padded[2:, 1:-1],
        padded[2:, :-2],
        padded[1:-1, :-2],
        padded[:-2, :-2],
    )


# ring cells around a pixel in p2..p9 order: north, then clockwise
_RING = ((-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1))


def _component_count(cells, diagonal):
    comps = 0
    seen = set()
    cells = set(cells)
    for start in cells:
        if start in seen:
            continue
        comps += 1
        queue = [start]
        seen.add(start)
        while queue:
            a = queue.pop()
            for b in cells - seen:
                dr, dc = abs(a[0] - b[0]), abs(a[1] - b[1])
                adjacent = max(dr, dc) == 1 if diagonal else dr + dc == 1
                if adjacent:
                    seen.add(b)
                    queue.append(b)
    return comps


@lru_cache(maxsize=1)
def _deletable_lut():
    """Deletability of a pixel from its 8-neighborhood configuration.

    A pixel may be deleted when it is simple (removal keeps foreground
    8-components and background 4-components intact locally) and not a
    line endpoint.  Simplicity: exactly one foreground 8-component in the
    ring, and exactly one background 4-component that touches an edge
    neighbor of the pixel.
    """
    lut = np.zeros(256, dtype=bool)
    edge_neighbors = {(-1, 0), (0, 1), (1, 0), (0, -1)}
    for code in range(256):
        fg = [(code >> i) & 1 for i in range(8)]
        if sum(fg) < 2:  # isolated pixel or line endpoint: keep
            continue
        fg_cells = [_RING[i] for i in range(8) if fg[i]]
        if _component_count(fg_cells, diagonal=True) != 1:
            continue
        bg_cells = set(_RING[i] for i in range(8) if not fg[i])
        touching = 0
        seen = set()
        for start in bg_cells:
            if start in seen:
                continue
            comp = {start}
            queue = [start]
            while queue:
                a = queue.pop()
                for b in bg_cells - comp:
                    if abs(a[0] - b[0]) + abs(a[1] - b[1]) == 1:
                        comp.add(b)
                        queue.append(b)
            seen |= comp
            if comp & edge_neighbors:
                touching += 1
        if touching == 1:
            lut[code] = True
    return lut


def skeletonize(mask):
    """Thin a mask to a 1-pixel-wide, 8-connected skeleton.

    Simple-point subfield thinning: deletable pixels (see _deletable_lut)
    are removed over the four 2x2 checkerboard subfields in turn, so no
    two pixels deleted in one pass see each other.  This keeps components
    connected and closed curves closed (parallel two-subiteration thinning
    erases 2-px diagonal staircases), and it is idempotent.  Pixels on the
    image border are never deleted: their neighborhoods are truncated, so
    deleting them could detach curves from the border and merge the
    regions those curves separate.
    """
    m = np.asarray(mask, dtype=bool).copy()
    if m.ndim != 2:
        raise ImageError("mask must be 2-D")
    lut = _deletable_lut()
    interior = np.zeros(m.shape, dtype=bool)
    interior[1:-1, 1:-1] = True
    phase_masks = []
    for r in (0, 1):
        for c in (0, 1):
            pm = np.zeros(m.shape, dtype=bool)
            pm[r::2, c::2] = True
            phase_masks.append(pm & interior)
    while True:
        changed = False
        for phase in phase_masks:
            padded = np.pad(m, 1, mode="constant")
            code = np.zeros(m.shape, dtype=np.uint8)
            for i, nb in enumerate(_ring_neighbors(padded)):
                code |= nb.astype(np.uint8) << i
            kill = m & phase & lut[code]
            if kill.any():
                m[kill] = False
                changed = True
        if not changed:
            return m


_STRUCTURE_4 = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)
_STRUCTURE_8 = np.ones((3, 3), dtype=bool)


def connected_components(mask, connectivity=4):
    """Label maximal connected foreground regions 1..L (0 = background)."""
    if connectivity not in (4, 8):
        raise ImageError("connectivity must be 4 or 8")
    m = np.asarray(mask, dtype=bool)
    structure = _STRUCTURE_4 if connectivity == 4 else _STRUCTURE_8
    labels, _ = ndimage.label(m, structure=structure)
    return labels.astype(np.int32)


def glcm_features(image, levels=32, offsets=((0, 1), (1, 0))):
    """Averaged Haralick features from symmetric normalized co-occurrence matrices.

    Returns contrast, correlation, energy (sum of squared probabilities),
    homogeneity and entropy (natural log).  Correlation is nan for a
    constant image.
    """
    if levels < 2:
        raise ImageError("levels must be >= 2")
    img = np.asarray(image)
    if img.ndim != 2:
        raise ImageError("image must be 2-D")
    q = (img.astype(np.int64) * levels) // 256
    q = np.clip(q, 0, levels - 1)
    i_idx, j_idx = np.meshgrid(np.arange(levels), np.arange(levels), indexing="ij")
    acc = {"contrast": 0.0, "correlation": 0.0, "energy": 0.0, "homogeneity": 0.0, "entropy": 0.0}
    n_corr = 0
    for dy, dx in offsets:
        a = q[max(dy, 0) : q.shape[0] + min(dy, 0), max(dx, 0) : q.shape[1] + min(dx, 0)]
        b = q[max(-dy, 0) : q.shape[0] + min(-dy, 0), max(-dx, 0) : q.shape[1] + min(-dx, 0)]
        if a.size == 0:
            raise ImageError("offset larger than image")
        counts = np.bincount((a * levels + b).ravel(), minlength=levels * levels)
        p = counts.reshape(levels, levels).astype(float)
        p = p + p.T
        p /= p.sum()
        acc["contrast"] += float(np.sum(p * (i_idx - j_idx) ** 2))
        acc["energy"] += float(np.sum(p * p))
        acc["homogeneity"] += float(np.sum(p / (1.0 + (i_idx - j_idx) ** 2)))
        nz = p[p > 0]
        acc["entropy"] += float(-np.sum(nz * np.log(nz)))
        pi = p.sum(axis=1)
        mu = float(np.sum(np.arange(levels) * pi))
        var = float(np.sum((np.arange(levels) - mu) ** 2 * pi))
        if var > 0:
            acc["correlation"] += float(np.sum(p * (i_idx - mu) * (j_idx - mu)) / var)
            n_corr += 1
    n_off = len(offsets)
    out = {f"glcm_{name}": value / n_off for name, value in acc.items() if name != "correlation"}
    out["glcm_correlation"] = acc["correlation"] / n_corr if n_corr == n_off else float("nan")
    return out


def _convex_area(rows, cols):
    """Pixel count of the rasterized convex hull of pixel centers."""
    pts = np.stack([cols, rows], axis=1).astype(float)
    if pts.shape[0] < 3:
        return pts.shape[0]
    uniq = np.unique(pts, axis=0)
    if uniq.shape[0] < 3:
        return rows.size
    # Andrew's monotone chain
    pts_sorted = uniq[np.lexsort((uniq[:, 1], uniq[:, 0]))]

    def half(points):
        chain = []
        for p in points:
            while len(chain) >= 2:
                d1 = chain[-1] - chain[-2]
                d2 = p - chain[-2]
                if d1[0] * d2[1] - d1[1] * d2[0] <= 0:
                    chain.pop()
                else:
                    break
            chain.append(p)
        return chain

    lower = half(pts_sorted)
    upper = half(pts_sorted[::-1])
    hull = np.array(lower[:-1] + upper[:-1])
    if hull.shape[0] < 3:
        return rows.size
    r0, r1 = rows.min(), rows.max()
    c0, c1 = cols.min(), cols.max()
    rr, cc = np.mgrid[r0 : r1 + 1, c0 : c1 + 1]
    px = np.stack([cc.ravel(), rr.ravel()], axis=1).astype(float)
    inside = np.ones(px.shape[0], dtype=bool)
    for i in range(hull.shape[0]):
        a = hull[i]
        b = hull[(i + 1) % hull.shape[0]]
        cross = (b[0] - a[0]) * (px[:, 1] - a[1]) - (b[1] - a[1]) * (px[:, 0] - a[0])
        inside &= cross >= -1e-9
    return int(inside.sum())


def region_properties(mask, connectivity=8):
    """Per-component area, perimeter, eccentricity and solidity."""
    m = np.asarray(mask, dtype=bool)
    if not m.any():
        raise ImageError("mask is empty")
    labels = connected_components(m, connectivity)
    n = int(labels.max())
    areas = np.bincount(labels.ravel(), minlength=n + 1)[1:].astype(float)

    perim = np.zeros(n + 1)
    for dy, dx in ((0, 1), (0, -1), (1, 0), (-1, 0)):
        shifted = np.zeros_like(labels)
        src = labels[
            max(dy, 0) : labels.shape[0] + min(dy, 0), max(dx, 0) : labels.shape[1] + min(dx, 0)
        ]
        shifted[
            max(-dy, 0) : labels.shape[0] + min(-dy, 0), max(-dx, 0) : labels.shape[1] + min(-dx, 0)
        ] = src
        exposed = (labels > 0) & (shifted != labels)
        perim += np.bincount(labels[exposed], minlength=n + 1)
    perimeter = perim[1:]

    rows, cols = np.nonzero(labels)
    lab = labels[rows, cols]
    sum_r = np.bincount(lab, weights=rows, minlength=n + 1)[1:]
    sum_c = np.bincount(lab, weights=cols, minlength=n + 1)[1:]
    mr = sum_r / areas
    mc = sum_c / areas
    mu20 = np.bincount(lab, weights=rows.astype(float) ** 2, minlength=n + 1)[1:] / areas - mr**2
    mu02 = np.bincount(lab, weights=cols.astype(float) ** 2, minlength=n + 1)[1:] / areas - mc**2
    mu11 = np.bincount(lab, weights=rows * cols.astype(float), minlength=n + 1)[1:] / areas - mr * mc
    common = np.sqrt(np.clip((mu20 - mu02) ** 2 + 4 * mu11**2, 0.0, None))
    lam1 = 0.5 * (mu20 + mu02 + common)
    lam2 = 0.5 * (mu20 + mu02 - common)
    with np.errstate(divide="ignore", invalid="ignore"):
        ecc = np.sqrt(np.clip(1.0 - lam2 / lam1, 0.0, 1.0))
    ecc[lam1 <= 0] = 0.0

    solidity = np.empty(n)
    for comp in range(1, n + 1):
        sel = lab == comp
        hull_area = _convex_area(rows[sel], cols[sel])
        solidity[comp - 1] = areas[comp - 1] / hull_area if hull_area > 0 else 1.0

    return {
        "area": areas,
        "perimeter": perimeter,
        "eccentricity": ecc,
        "solidity": solidity,
    }


def morphology_features(mask, connectivity=8):
    """Component count plus mean/std of the per-component shape properties."""
    props = region_properties(mask, connectivity)
    out = {"n_components": float(props["area"].size)}
    for name in ("area", "perimeter", "eccentricity", "solidity"):
        out[f"{name}_mean"] = float(np.mean(props[name]))
        out[f"{name}_std"] = float(np.std(props[name]))
    return out


def skeleton_statistics(skeleton):
    """Branch/junction census of a thin skeleton.

    Junction pixels have >= 3 skeleton neighbors; 8-connected clusters of
    them count as a single junction.  Branches are the 8-connected pieces
    left after removing junction pixels, measured in pixels.
    """
    skel = np.asarray(skeleton, dtype=bool)
    total = int(skel.sum())
    if total == 0:
        return {
            "n_branches": 0.0,
            "n_junctions": 0.0,
            "junction_density": 0.0,
            "branch_length_mean": 0.0,
            "branch_length_std": 0.0,
            "skeleton_length": 0.0,
        }
    padded = np.pad(skel, 1, mode="constant")
    count = np.zeros(skel.shape, dtype=np.int8)
    for nb in _ring_neighbors(padded):
        count += nb
    junction_px = skel & (count >= 3)
    junction_labels = connected_components(junction_px, 8)
    n_junctions = int(junction_labels.max())
    branch_labels = connected_components(skel & ~junction_px, 8)
    n_branches = int(branch_labels.max())
    lengths = np.bincount(branch_labels.ravel(), minlength=n_branches + 1)[1:].astype(float)
    return {
        "n_branches": float(n_branches),
        "n_junctions": float(n_junctions),
        "junction_density": n_junctions / total,
        "branch_length_mean": float(lengths.mean()) if n_branches else 0.0,
        "branch_length_std": float(lengths.std()) if n_branches else 0.0,
        "skeleton_length": float(total),
    }
