"""Single-class alphabet model: exact per-image letter and letter-pair prevalence.

A realization is an 8x8 grid of 32x32-pixel letter tiles drawn from
{H, K, L, V, W, X, Y, Z}.  Every image holds exactly 24 H, 2 K, 16 L,
1 V, 1 W, 8 X, 8 Y and 4 Z, with each X immediately left of a Y and each
Z immediately above one of K, V, W (pair counts 8, 2, 1, 1).  Placement
is otherwise random.
"""

import os
from dataclasses import dataclass

import numpy as np

from scmkit.core import load_image
from scmkit.stats import chi2_gof

ALPHABET = "HKLVWXYZ"
LETTER_COUNTS = {"H": 24, "K": 2, "L": 16, "V": 1, "W": 1, "X": 8, "Y": 8, "Z": 4}
PAIR_NAMES = ("XY", "ZK", "ZV", "ZW")
PAIR_COUNTS = {"XY": 8, "ZK": 2, "ZV": 1, "ZW": 1}
GRID_SIZE = 8
TILE_SIZE = 32
UNRECOGNIZED = "?"

_STROKE_WIDTH = 4.0
# stroke center-line endpoints as (row, col) in the 32x32 tile
_T, _B, _L, _R, _M = 6.0, 25.0, 6.0, 25.0, 15.5
_GLYPH_SEGMENTS = {
    "H": [(_T, _L, _B, _L), (_T, _R, _B, _R), (_M, _L, _M, _R)],
    "K": [(_T, _L, _B, _L), (_T, _R, _M, _L + 2), (_M, _L + 2, _B, _R)],
    "L": [(_T, _L, _B, _L), (_B, _L, _B, _R)],
    "V": [(_T, _L, _B, _M), (_T, _R, _B, _M)],
    "W": [(_T, _L, _B, _L + 4), (_B, _L + 4, 10.0, _M), (10.0, _M, _B, _R - 4), (_B, _R - 4, _T, _R)],
    "X": [(_T, _L, _B, _R), (_T, _R, _B, _L)],
    "Y": [(_T, _L, _M, _M), (_T, _R, _M, _M), (_M, _M, _B, _M)],
    "Z": [(_T, _L, _T, _R), (_T, _R, _B, _L), (_B, _L, _B, _R)],
}


def _render_glyph(segments, size=TILE_SIZE, width=_STROKE_WIDTH):
    rr, cc = np.mgrid[0:size, 0:size].astype(float)
    canvas = np.zeros((size, size), dtype=bool)
    for r0, c0, r1, c1 in segments:
        dr, dc = r1 - r0, c1 - c0
        length_sq = dr * dr + dc * dc
        if length_sq == 0:
            dist_sq = (rr - r0) ** 2 + (cc - c0) ** 2
        else:
            t = np.clip(((rr - r0) * dr + (cc - c0) * dc) / length_sq, 0.0, 1.0)
            dist_sq = (rr - (r0 + t * dr)) ** 2 + (cc - (c0 + t * dc)) ** 2
        canvas |= dist_sq <= (width / 2.0) ** 2
    return np.where(canvas, 255, 0).astype(np.uint8)


def _ncc(a, b):
    fa = a.astype(float).ravel()
    fb = b.astype(float).ravel()
    fa -= fa.mean()
    fb -= fb.mean()
    na = np.linalg.norm(fa)
    nb = np.linalg.norm(fb)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(fa, fb) / (na * nb))


@dataclass(frozen=True)
class GlyphSet:
    """The eight 32x32 binary letter templates (letter pixels 255)."""

    templates: dict

    def validate(self):
        for letter in ALPHABET:
            tpl = self.templates.get(letter)
            if tpl is None or tpl.shape != (TILE_SIZE, TILE_SIZE) or tpl.dtype != np.uint8:
                raise ValueError(f"missing or malformed template for {letter!r}")
            frac = np.count_nonzero(tpl) / tpl.size
            if not 0.1 <= frac <= 0.5:
                raise ValueError(f"template {letter!r} foreground fraction {frac:.3f} outside [0.1, 0.5]")
        letters = list(ALPHABET)
        for i, a in enumerate(letters):
            for b in letters[i + 1 :]:
                score = _ncc(self.templates[a], self.templates[b])
                if score >= 0.8:
                    raise ValueError(f"templates {a!r} and {b!r} too similar (ncc {score:.3f})")
        return self

    @classmethod
    def default(cls):
        return cls({letter: _render_glyph(segs) for letter, segs in _GLYPH_SEGMENTS.items()}).validate()

    @classmethod
    def from_directory(cls, directory):
        """Load overriding templates from <letter>.png files (any nonzero = letter)."""
        templates = {}
        for letter in ALPHABET:
            arr = load_image(os.path.join(directory, f"{letter}.png"))
            if arr.shape != (TILE_SIZE, TILE_SIZE):
                raise ValueError(f"{letter}.png must be {TILE_SIZE}x{TILE_SIZE}")
            templates[letter] = np.where(arr > 127, 255, 0).astype(np.uint8)
        return cls(templates).validate()


_DEFAULT_GLYPHS = None


def default_glyphs():
    global _DEFAULT_GLYPHS
    if _DEFAULT_GLYPHS is None:
        _DEFAULT_GLYPHS = GlyphSet.default()
    return _DEFAULT_GLYPHS


def _free_slots(occupied, dr, dc):
    slots = []
    for r in range(GRID_SIZE - dr):
        for c in range(GRID_SIZE - dc):
            if not occupied[r, c] and not occupied[r + dr, c + dc]:
                slots.append((r, c))
    return slots


def _place_dominoes(gen, grid, occupied, pieces, dr, dc):
    if not pieces:
        return True
    first, rest = pieces[0], pieces[1:]
    slots = _free_slots(occupied, dr, dc)
    order = gen.permutation(len(slots))
    for idx in order:
        r, c = slots[idx]
        occupied[r, c] = occupied[r + dr, c + dc] = True
        if _place_dominoes(gen, grid, occupied, rest, dr, dc):
            grid[r, c] = first[0]
            grid[r + dr, c + dc] = first[1]
            return True
        occupied[r, c] = occupied[r + dr, c + dc] = False
    return False


def random_grid(rng):
    """A random letter grid satisfying all prevalence and pair constraints."""
    gen = rng.gen
    grid = np.full((GRID_SIZE, GRID_SIZE), "", dtype="<U1")
    occupied = np.zeros((GRID_SIZE, GRID_SIZE), dtype=bool)
    verticals = [("Z", p) for p in ("K", "K", "V", "W")]
    if not _place_dominoes(gen, grid, occupied, verticals, 1, 0):
        raise RuntimeError("vertical domino placement failed")  # unreachable on an 8x8 grid
    horizontals = [("X", "Y")] * PAIR_COUNTS["XY"]
    if not _place_dominoes(gen, grid, occupied, horizontals, 0, 1):
        raise RuntimeError("horizontal domino placement failed")
    singles = ["H"] * LETTER_COUNTS["H"] + ["L"] * LETTER_COUNTS["L"]
    order = gen.permutation(len(singles))
    free = [(r, c) for r in range(GRID_SIZE) for c in range(GRID_SIZE) if not occupied[r, c]]
    for (r, c), idx in zip(free, order):
        grid[r, c] = singles[idx]
    return grid


def render_grid(grid, glyphs=None):
    glyphs = glyphs or default_glyphs()
    image = np.zeros((GRID_SIZE * TILE_SIZE, GRID_SIZE * TILE_SIZE), dtype=np.uint8)
    for r in range(GRID_SIZE):
        for c in range(GRID_SIZE):
            image[r * TILE_SIZE : (r + 1) * TILE_SIZE, c * TILE_SIZE : (c + 1) * TILE_SIZE] = glyphs.templates[
                str(grid[r, c])
            ]
    return image


def generate_alphabet(rng, glyphs=None):
    """One realization: (256x256 image, its letter grid)."""
    grid = random_grid(rng)
    return render_grid(grid, glyphs), grid


def classify_tiles(image, glyphs=None, threshold=0.8):
    """Label every tile by its best normalized cross-correlation template match.

    Tiles whose best score falls below `threshold` are labeled UNRECOGNIZED.
    Returns (labels 8x8, scores 8x8).
    """
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must be in (0, 1)")
    glyphs = glyphs or default_glyphs()
    img = np.asarray(image, dtype=float)
    tiles = img.reshape(GRID_SIZE, TILE_SIZE, GRID_SIZE, TILE_SIZE).transpose(0, 2, 1, 3)
    tiles = tiles.reshape(GRID_SIZE * GRID_SIZE, TILE_SIZE * TILE_SIZE)
    tiles = tiles - tiles.mean(axis=1, keepdims=True)
    tile_norms = np.linalg.norm(tiles, axis=1)
    templ = np.stack([glyphs.templates[letter].astype(float).ravel() for letter in ALPHABET])
    templ = templ - templ.mean(axis=1, keepdims=True)
    templ_norms = np.linalg.norm(templ, axis=1)
    scores = tiles @ templ.T
    denom = tile_norms[:, None] * templ_norms[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        scores = np.where(denom > 0, scores / denom, 0.0)
    best = scores.argmax(axis=1)
    best_scores = scores[np.arange(scores.shape[0]), best]
    labels = np.array([ALPHABET[i] for i in best], dtype="<U1")
    labels[best_scores < threshold] = UNRECOGNIZED
    return labels.reshape(GRID_SIZE, GRID_SIZE), best_scores.reshape(GRID_SIZE, GRID_SIZE)


def letter_histogram(grid):
    return {letter: int(np.count_nonzero(grid == letter)) for letter in ALPHABET}


def check_letter_prevalence(grid, alpha=0.05):
    """Chi-squared GOF of the observed letter counts against the prescription.

    Returns (GofResult, exact_match); exact_match is True only when every
    count equals the prescribed multiset exactly.
    """
    if np.any(grid == UNRECOGNIZED):
        raise ValueError("grid contains unrecognized tiles")
    hist = letter_histogram(grid)
    observed = [hist[letter] for letter in ALPHABET]
    expected = [LETTER_COUNTS[letter] for letter in ALPHABET]
    result = chi2_gof(observed, expected, alpha)
    return result, observed == expected


@dataclass
class PairCheck:
    counts: dict          # pair name -> observed count
    violations: list      # (row, col, description)

    @property
    def counts_ok(self):
        return self.counts == PAIR_COUNTS


def check_pair_prevalence(grid):
    """Count the four ordered letter pairs and list every pairing violation."""
    if np.any(grid == UNRECOGNIZED):
        raise ValueError("grid contains unrecognized tiles")
    counts = {name: 0 for name in PAIR_NAMES}
    violations = []
    for r in range(GRID_SIZE):
        for c in range(GRID_SIZE):
            letter = str(grid[r, c])
            if letter == "X":
                if c + 1 < GRID_SIZE and grid[r, c + 1] == "Y":
                    counts["XY"] += 1
                else:
                    violations.append((r, c, "X without Y to its right"))
            elif letter == "Y":
                if c == 0 or grid[r, c - 1] != "X":
                    violations.append((r, c, "Y without X to its left"))
            elif letter == "Z":
                below = str(grid[r + 1, c]) if r + 1 < GRID_SIZE else ""
                if below in ("K", "V", "W"):
                    counts["Z" + below] += 1
                else:
                    violations.append((r, c, "Z without K/V/W below"))
            elif letter in ("K", "V", "W"):
                if r == 0 or grid[r - 1, c] != "Z":
                    violations.append((r, c, f"{letter} without Z above"))
    return PairCheck(counts, violations)


def corrupt_pair_break(rng, grid):
    """Break one X-Y pair by replacing its Y with an H; returns a new grid."""
    gen = rng.gen
    pairs = [
        (r, c)
        for r in range(GRID_SIZE)
        for c in range(GRID_SIZE - 1)
        if grid[r, c] == "X" and grid[r, c + 1] == "Y"
    ]
    if not pairs:
        raise ValueError("grid has no intact X-Y pair to break")
    r, c = pairs[int(gen.integers(len(pairs)))]
    out = grid.copy()
    out[r, c + 1] = "H"
    return out
