"""Ensemble data model: images, manifests, reports, deterministic randomness.

Images are 8-bit single-channel numpy arrays stored as PNG (lossless, so
save/load round trips are bit-exact).  Manifests and reports are JSON with
an explicit schema version.  Randomness comes from the counter-based
Philox generator keyed by (global seed, stream id), which makes per-image
generation order-independent and reproducible across platforms.
"""

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

MODEL_IDS = ("alphabet", "voronoi", "flag", "external")
SCM_IMAGE_SIZE = 256
MIN_EXTERNAL_SIZE = 64
MANIFEST_NAME = "manifest.json"
MANIFEST_SCHEMA_VERSION = 1
REPORT_SCHEMA_VERSION = 1


class EnsembleError(Exception):
    """Raised on manifest/image inconsistencies or malformed ensemble data."""


class RngStream:
    """A deterministic random stream identified by (seed, stream_id).

    Streams with distinct ids are statistically independent; the same pair
    always reproduces the same variate sequence.
    """

    def __init__(self, seed, stream_id=0):
        seed = int(seed)
        stream_id = int(stream_id)
        if not 0 <= seed < 2**64 or not 0 <= stream_id < 2**64:
            raise ValueError("seed and stream_id must be unsigned 64-bit integers")
        self.seed = seed
        self.stream_id = stream_id
        key = np.array([seed, stream_id], dtype=np.uint64)
        self.gen = np.random.Generator(np.random.Philox(key=key))


def split_rng(global_seed, image_index):
    """Independent per-image stream derived from the ensemble seed."""
    return RngStream(global_seed, image_index)


def parallel_map(fn, items, jobs=1):
    """Ordered map over independent per-image work, optionally in processes.

    Results are identical to the sequential map; `fn` must be picklable
    (a top-level function or functools.partial of one).
    """
    items = list(items)
    if jobs and jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunk = max(1, len(items) // (jobs * 4))
            return list(pool.map(fn, items, chunksize=chunk))
    return [fn(item) for item in items]


@dataclass
class Record:
    """One manifest entry: file name, per-image seed, optional class and truth."""

    file: str
    seed: int
    class_label: object = None
    truth: dict = field(default_factory=dict)

    def to_dict(self):
        return {"file": self.file, "seed": self.seed, "class": self.class_label, "truth": self.truth}

    @classmethod
    def from_dict(cls, d):
        return cls(d["file"], int(d["seed"]), d.get("class"), dict(d.get("truth", {})))


@dataclass
class EnsembleManifest:
    model_id: str
    global_seed: int
    records: list

    @property
    def image_count(self):
        return len(self.records)

    def validate(self):
        if self.model_id not in MODEL_IDS:
            raise EnsembleError(f"unknown model_id: {self.model_id!r}")
        names = [r.file for r in self.records]
        if len(set(names)) != len(names):
            dup = sorted({n for n in names if names.count(n) > 1})
            raise EnsembleError(f"duplicate filenames in manifest: {dup}")

    def to_dict(self):
        return {
            "schema_version": MANIFEST_SCHEMA_VERSION,
            "model_id": self.model_id,
            "global_seed": self.global_seed,
            "image_count": self.image_count,
            "records": [r.to_dict() for r in self.records],
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("schema_version") != MANIFEST_SCHEMA_VERSION:
            raise EnsembleError(f"unsupported manifest schema_version: {d.get('schema_version')!r}")
        manifest = cls(d["model_id"], int(d["global_seed"]), [Record.from_dict(r) for r in d["records"]])
        if manifest.image_count != int(d["image_count"]):
            raise EnsembleError("manifest image_count does not match its record list")
        manifest.validate()
        return manifest


def _sanitize(obj):
    """Make a structure JSON-safe: numpy scalars to python, nan/inf to None."""
    if isinstance(obj, dict):
        return {str(k): _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_sanitize(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else None
    return obj


def write_json(data, path):
    """Deterministic JSON serialization (sorted keys, fixed separators)."""
    text = json.dumps(_sanitize(data), sort_keys=True, indent=2, allow_nan=False)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text + "\n")


def read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def save_image(image, path):
    arr = np.asarray(image)
    if arr.ndim != 2 or arr.dtype != np.uint8:
        raise EnsembleError("images must be 2-D uint8 arrays")
    Image.fromarray(arr, mode="L").save(path, format="PNG")


def load_image(path):
    with Image.open(path) as img:
        if img.mode != "L":
            raise EnsembleError(f"{os.path.basename(path)}: expected 8-bit grayscale, got mode {img.mode}")
        return np.asarray(img, dtype=np.uint8)


def _check_size(model_id, size, name):
    w, h = size
    if model_id == "external":
        if w != h or w < MIN_EXTERNAL_SIZE:
            raise EnsembleError(f"{name}: external images must be square with side >= {MIN_EXTERNAL_SIZE}, got {w}x{h}")
    elif (w, h) != (SCM_IMAGE_SIZE, SCM_IMAGE_SIZE):
        raise EnsembleError(f"{name}: {model_id} images must be {SCM_IMAGE_SIZE}x{SCM_IMAGE_SIZE}, got {w}x{h}")


def save_ensemble(manifest, images, directory):
    """Write images plus manifest; load_ensemble() inverts this bit-exactly."""
    manifest.validate()
    os.makedirs(directory, exist_ok=True)
    count = 0
    for record, image in zip(manifest.records, images):
        save_image(image, os.path.join(directory, record.file))
        count += 1
    if count != manifest.image_count:
        raise EnsembleError(f"manifest lists {manifest.image_count} records but {count} images were supplied")
    write_json(manifest.to_dict(), os.path.join(directory, MANIFEST_NAME))


def load_ensemble(directory):
    """Parse the manifest and return it with a lazy image stream in manifest order.

    Image existence and dimensions are verified up front; pixel data is
    decoded on demand.
    """
    manifest_path = os.path.join(directory, MANIFEST_NAME)
    if not os.path.isfile(manifest_path):
        raise EnsembleError(f"missing manifest: {manifest_path}")
    manifest = EnsembleManifest.from_dict(read_json(manifest_path))
    for record in manifest.records:
        path = os.path.join(directory, record.file)
        if not os.path.isfile(path):
            raise EnsembleError(f"image listed in manifest but missing on disk: {record.file}")
        with Image.open(path) as img:
            _check_size(manifest.model_id, img.size, record.file)

    def stream():
        for record in manifest.records:
            yield load_image(os.path.join(directory, record.file))

    return manifest, stream()


def load_image_dir(directory):
    """Lenient loader for comparison inputs: manifest if present, else sorted PNGs.

    Returns (names, labels_or_None, list_of_images).  Labels come from
    manifest class fields or a labels.json mapping file name to label.
    """
    if os.path.isfile(os.path.join(directory, MANIFEST_NAME)):
        manifest, stream = load_ensemble(directory)
        names = [r.file for r in manifest.records]
        labels = [r.class_label for r in manifest.records]
        if all(lb is None for lb in labels):
            labels = None
        return names, labels, list(stream)
    names = sorted(f for f in os.listdir(directory) if f.lower().endswith(".png"))
    if not names:
        raise EnsembleError(f"no manifest and no PNG images in {directory}")
    labels = None
    labels_path = os.path.join(directory, "labels.json")
    if os.path.isfile(labels_path):
        mapping = read_json(labels_path)
        try:
            labels = [mapping[n] for n in names]
        except KeyError as exc:
            raise EnsembleError(f"labels.json is missing an entry for {exc.args[0]}") from None
    images = []
    for name in names:
        img = load_image(os.path.join(directory, name))
        _check_size("external", (img.shape[1], img.shape[0]), name)
        images.append(img)
    return names, labels, images


@dataclass
class ContextReport:
    """Per-image constraint checks plus ensemble-level aggregates."""

    model_id: str
    per_image: list  # [{"file": str, "checks": {name: {"statistic": float, "pass": bool}}}]
    aggregates: dict  # name -> real
    config: dict = field(default_factory=dict)
    kind: str = "context"

    def validate(self):
        check_names = set()
        for entry in self.per_image:
            check_names.update(entry["checks"].keys())
        for name in check_names:
            if f"{name}_pass_rate" not in self.aggregates:
                raise EnsembleError(f"aggregate pass rate missing for check {name!r}")
        for key, value in self.aggregates.items():
            if key.endswith("_pass_rate") and not 0.0 <= value <= 1.0:
                raise EnsembleError(f"pass rate out of range for {key!r}: {value}")

    def to_dict(self):
        return {
            "schema_version": REPORT_SCHEMA_VERSION,
            "kind": self.kind,
            "model_id": self.model_id,
            "config": self.config,
            "per_image": self.per_image,
            "aggregates": self.aggregates,
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("schema_version") != REPORT_SCHEMA_VERSION:
            raise EnsembleError(f"unsupported report schema_version: {d.get('schema_version')!r}")
        return cls(d["model_id"], d["per_image"], d["aggregates"], d.get("config", {}), d.get("kind", "context"))
