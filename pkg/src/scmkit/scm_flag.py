"""Eight-class flag model: joint prevalence, position, intensity and texture rules.

Each 256x256 realization is a 16x16 grid of 16x16-pixel tiles.  The class
picks one of eight binary foreground patterns; every pattern has exactly
80 foreground and 176 background tiles and never marks any of the 24
forbidden tile positions as foreground.  Foreground pixels are iid
round(152*Beta(4,2)+96) on [96,248]; background pixels are iid
round(192*Beta(2,4)+8) on [8,200].  Analysis infers the foreground map
from tile means, classifies it against the patterns by mean absolute
error, and audits texture (per-tile Moran's I) and the two intensity
distributions (chi-squared GOF against the prescribed laws).
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import special

from scmkit.stats import StatsError, beta_variate, chi2_gof, morans_i

N_CLASSES = 8
GRID = 16
TILE = 16
CANVAS = GRID * TILE
FG_TILES = 80
BG_TILES = GRID * GRID - FG_TILES

FG_SCALE, FG_OFFSET, FG_A, FG_B = 152.0, 96.0, 4.0, 2.0
BG_SCALE, BG_OFFSET, BG_A, BG_B = 192.0, 8.0, 2.0, 4.0
FG_DECISION_BOUNDARY = 148.0  # midpoint of the overlap of the two supports


class PatternError(ValueError):
    """Raised when a pattern specification violates its invariants."""


@dataclass(frozen=True)
class PatternSpec:
    """The eight class patterns plus the always-background tile positions."""

    masks: np.ndarray      # (8, 16, 16) bool
    forbidden: tuple       # ((row, col), ...) tile positions

    def validate(self):
        if self.masks.shape != (N_CLASSES, GRID, GRID):
            raise PatternError(f"masks must be {N_CLASSES}x{GRID}x{GRID}")
        if not self.forbidden:
            raise PatternError("forbidden tile set must be nonempty")
        for r, c in self.forbidden:
            if not (0 <= r < GRID and 0 <= c < GRID):
                raise PatternError(f"forbidden tile out of range: {(r, c)}")
        for idx in range(N_CLASSES):
            count = int(self.masks[idx].sum())
            if count != FG_TILES:
                raise PatternError(f"mask {idx} has {count} foreground tiles, expected {FG_TILES}")
            for r, c in self.forbidden:
                if self.masks[idx, r, c]:
                    raise PatternError(f"mask {idx} marks forbidden tile {(r, c)} as foreground")
        for i in range(N_CLASSES):
            for j in range(i + 1, N_CLASSES):
                hamming = int(np.sum(self.masks[i] != self.masks[j]))
                if hamming < 16:
                    raise PatternError(f"masks {i} and {j} too similar (hamming {hamming})")
        return self


def _rect(mask, r0, r1, c0, c1):
    mask[r0 : r1 + 1, c0 : c1 + 1] = True


def _build_default_masks():
    masks = np.zeros((N_CLASSES, GRID, GRID), dtype=bool)
    # 0: top band with corner block
    _rect(masks[0], 0, 4, 2, 15)
    _rect(masks[0], 0, 1, 0, 1)
    _rect(masks[0], 5, 5, 10, 15)
    # 1: bottom band with corner block
    _rect(masks[1], 11, 15, 2, 15)
    _rect(masks[1], 14, 15, 0, 1)
    _rect(masks[1], 10, 10, 2, 7)
    # 2: right vertical band
    _rect(masks[2], 0, 15, 11, 15)
    # 3: center cross
    _rect(masks[3], 0, 15, 7, 10)
    _rect(masks[3], 7, 8, 3, 6)
    _rect(masks[3], 7, 8, 11, 14)
    # 4: saltire (diagonal cross), tips trimmed to reach the exact count
    for r in range(GRID):
        for c in range(GRID):
            if abs(r - c) <= 1 or abs(r + c - 15) <= 1:
                masks[4, r, c] = True
    for r, c in ((2, 1), (13, 1), (0, 0), (0, 1), (1, 0), (15, 15), (14, 15), (15, 14)):
        masks[4, r, c] = False
    # 5: top-right canton with a stripe below it
    _rect(masks[5], 0, 7, 8, 15)
    _rect(masks[5], 9, 10, 2, 9)
    # 6: open frame (double top/bottom rows, right rail)
    _rect(masks[6], 0, 1, 0, 15)
    _rect(masks[6], 14, 15, 0, 15)
    _rect(masks[6], 2, 13, 15, 15)
    _rect(masks[6], 6, 9, 14, 14)
    # 7: two quadrant blocks with a top tab
    _rect(masks[7], 2, 7, 2, 7)
    _rect(masks[7], 8, 13, 8, 13)
    _rect(masks[7], 0, 1, 2, 5)
    return masks


DEFAULT_FORBIDDEN = tuple((r, c) for r in range(2, 14) for c in range(2))

_DEFAULT_SPEC = None


def default_patterns():
    global _DEFAULT_SPEC
    if _DEFAULT_SPEC is None:
        _DEFAULT_SPEC = PatternSpec(_build_default_masks(), DEFAULT_FORBIDDEN).validate()
    return _DEFAULT_SPEC


def write_pattern_spec(spec, path):
    """Serialize a PatternSpec to its text format (inverse of load_pattern_spec)."""
    lines = ["forbidden: " + " ".join(f"{r},{c}" for r, c in spec.forbidden)]
    for idx in range(N_CLASSES):
        lines.append(f"mask {idx}:")
        for row in spec.masks[idx]:
            lines.append("".join("1" if v else "0" for v in row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_pattern_spec(path):
    """Parse and validate a pattern file: a forbidden list plus 8 binary grids."""
    with open(path, encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or not lines[0].startswith("forbidden:"):
        raise PatternError("pattern file must start with a 'forbidden:' line")
    forbidden = []
    body = lines[0][len("forbidden:") :].split()
    for token in body:
        r, c = token.split(",")
        forbidden.append((int(r), int(c)))
    masks = np.zeros((N_CLASSES, GRID, GRID), dtype=bool)
    pos = 1
    for idx in range(N_CLASSES):
        if pos >= len(lines) or not lines[pos].startswith("mask"):
            raise PatternError(f"expected 'mask {idx}:' header")
        pos += 1
        for r in range(GRID):
            row = lines[pos]
            if len(row) != GRID or set(row) - {"0", "1"}:
                raise PatternError(f"mask {idx} row {r} must be {GRID} characters of 0/1")
            masks[idx, r] = [ch == "1" for ch in row]
            pos += 1
    return PatternSpec(masks, tuple(forbidden)).validate()


@dataclass
class FlagTruth:
    class_label: int
    tile_map: np.ndarray  # (16, 16) bool, True = foreground


def _pixel_mask(tile_map):
    return np.kron(tile_map, np.ones((TILE, TILE), dtype=bool))


def render_flag(rng, tile_map):
    """Fill a tile map with the prescribed foreground/background pixel laws."""
    pix = _pixel_mask(tile_map)
    n_fg = int(pix.sum())
    fg = np.rint(FG_SCALE * beta_variate(rng, FG_A, FG_B, size=n_fg) + FG_OFFSET)
    bg = np.rint(BG_SCALE * beta_variate(rng, BG_A, BG_B, size=pix.size - n_fg) + BG_OFFSET)
    image = np.empty((CANVAS, CANVAS), dtype=np.uint8)
    image[pix] = np.clip(fg, FG_OFFSET, FG_OFFSET + FG_SCALE).astype(np.uint8)
    image[~pix] = np.clip(bg, BG_OFFSET, BG_OFFSET + BG_SCALE).astype(np.uint8)
    return image


def generate_flag(rng, class_label, patterns=None):
    """One realization of the given class: (image, FlagTruth)."""
    patterns = patterns or default_patterns()
    if not 0 <= class_label < N_CLASSES:
        raise ValueError(f"class must be in 0..{N_CLASSES - 1}, got {class_label}")
    tile_map = patterns.masks[class_label].copy()
    return render_flag(rng, tile_map), FlagTruth(int(class_label), tile_map)


def infer_foreground(image, boundary=FG_DECISION_BOUNDARY):
    """Tile-level foreground map from tile mean intensities."""
    img = np.asarray(image, dtype=float)
    means = img.reshape(GRID, TILE, GRID, TILE).mean(axis=(1, 3))
    return means > boundary


@dataclass
class PatternMatch:
    class_label: int
    rmae: float                 # fraction of mismatched tiles for the best class
    forbidden_violations: list  # (row, col) foreground tiles inside the forbidden set


def classify_pattern(tile_map, patterns=None):
    """Nearest class pattern by mean absolute tile error, plus forbidden hits."""
    patterns = patterns or default_patterns()
    diffs = np.sum(patterns.masks != tile_map[None, :, :], axis=(1, 2))
    best = int(np.argmin(diffs))
    rmae = float(diffs[best]) / (GRID * GRID)
    violations = [(r, c) for r, c in patterns.forbidden if tile_map[r, c]]
    return PatternMatch(best, rmae, violations)


@dataclass
class TileTexture:
    z_scores: np.ndarray    # (16, 16), nan for constant tiles
    tile_pass: np.ndarray   # (16, 16) bool
    pass_fraction: float
    image_pass: bool


def check_tile_texture(image, alpha=0.05, min_pass_fraction=0.95):
    """Per-tile Moran's I with rook weights; constant tiles count as failures."""
    img = np.asarray(image, dtype=float)
    tiles = img.reshape(GRID, TILE, GRID, TILE).transpose(0, 2, 1, 3)
    z = np.full((GRID, GRID), np.nan)
    tile_pass = np.zeros((GRID, GRID), dtype=bool)
    for r in range(GRID):
        for c in range(GRID):
            try:
                res = morans_i(tiles[r, c], alpha=alpha)
            except StatsError:
                continue  # constant tile: leave as failed
            z[r, c] = res.z
            tile_pass[r, c] = res.passed
    frac = float(tile_pass.mean())
    return TileTexture(z, tile_pass, frac, frac >= min_pass_fraction)


def _discrete_pmf(scale, offset, a, b):
    values = np.arange(int(offset), int(offset + scale) + 1)
    hi = np.clip((values + 0.5 - offset) / scale, 0.0, 1.0)
    lo = np.clip((values - 0.5 - offset) / scale, 0.0, 1.0)
    pmf = special.betainc(a, b, hi) - special.betainc(a, b, lo)
    return values, pmf / pmf.sum()


@lru_cache(maxsize=8)
def _gof_binning(which, bins):
    """Equal-probability binning of the prescribed discrete intensity law.

    Returns (value_to_bin lookup over 0..255, expected probability per bin).
    Out-of-support values are lumped into the nearest edge bin.
    """
    if which == "fg":
        values, pmf = _discrete_pmf(FG_SCALE, FG_OFFSET, FG_A, FG_B)
    else:
        values, pmf = _discrete_pmf(BG_SCALE, BG_OFFSET, BG_A, BG_B)
    cum = np.cumsum(pmf)
    edges = np.searchsorted(cum, np.arange(1, bins) / bins, side="left")
    bin_of_value = np.searchsorted(edges, np.arange(values.size), side="right")
    probs = np.bincount(bin_of_value, weights=pmf, minlength=bins)
    lut = np.empty(256, dtype=np.int64)
    lut[: values[0]] = 0
    lut[values[0] : values[-1] + 1] = bin_of_value
    lut[values[-1] + 1 :] = bins - 1
    return lut, probs


def check_intensity_gof(image, tile_map, bins=16, alpha=0.05):
    """Chi-squared GOF of pooled FG and BG pixels against the prescribed laws."""
    if bins < 2:
        raise StatsError("bins must be >= 2")
    img = np.asarray(image)
    pix = _pixel_mask(tile_map)
    results = []
    for which, values in (("fg", img[pix]), ("bg", img[~pix])):
        if values.size == 0:
            raise StatsError(f"no {which} pixels to test")
        lut, probs = _gof_binning(which, bins)
        observed = np.bincount(lut[values], minlength=bins)
        expected = probs * values.size
        results.append(chi2_gof(observed, expected, alpha))
    return tuple(results)


def corrupt_tile_move(rng, tile_map, patterns=None):
    """Move one foreground tile to a random allowed background position."""
    patterns = patterns or default_patterns()
    gen = rng.gen
    forbidden = set(patterns.forbidden)
    fg_positions = np.argwhere(tile_map)
    bg_positions = [tuple(p) for p in np.argwhere(~tile_map) if tuple(p) not in forbidden]
    src = tuple(fg_positions[int(gen.integers(len(fg_positions)))])
    dst = bg_positions[int(gen.integers(len(bg_positions)))]
    out = tile_map.copy()
    out[src] = False
    out[dst] = True
    return out


def corrupt_forbidden_tile(rng, tile_map, patterns=None):
    """Move one foreground tile into the forbidden set."""
    patterns = patterns or default_patterns()
    gen = rng.gen
    fg_positions = np.argwhere(tile_map)
    src = tuple(fg_positions[int(gen.integers(len(fg_positions)))])
    dst = patterns.forbidden[int(gen.integers(len(patterns.forbidden)))]
    out = tile_map.copy()
    out[src] = False
    out[dst] = True
    return out
