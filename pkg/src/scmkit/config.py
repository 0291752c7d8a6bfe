"""Analysis thresholds in one place, overridable from a JSON config file.

Every report embeds the resolved values that produced it, so results are
interpretable without the invocation context.
"""

from dataclasses import asdict, dataclass, field, fields

from scmkit.core import read_json

CONFIG_SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Raised on malformed or unknown configuration input."""


@dataclass
class AnalysisConfig:
    schema_version: int = CONFIG_SCHEMA_VERSION
    # alphabet
    template_threshold: float = 0.8
    # voronoi extraction
    sauvola_window: int = 5
    sauvola_k: float = 0.2
    sauvola_r: float = 128.0
    min_region_area: int = 24
    region_tolerance: int = 1
    rank_rho_threshold: float = 0.9
    # flag
    fg_boundary: float = 148.0
    rmae_threshold: float = 1.0 / 256.0
    moran_alpha: float = 0.05
    tile_pass_fraction: float = 0.95
    gof_alpha: float = 0.05
    intensity_bins: int = 16
    # ensemble comparison
    tissues: dict = field(
        default_factory=lambda: {"glandular": [60, 120], "fat": [150, 200], "ligament": [220, 255]}
    )
    similarity_pairs: int = 10000
    pca_components: int = 10
    knn_k: int = 5

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**data)
        if cfg.schema_version != CONFIG_SCHEMA_VERSION:
            raise ConfigError(f"unsupported config schema_version: {cfg.schema_version!r}")
        if cfg.sauvola_window < 3 or cfg.sauvola_window % 2 == 0:
            raise ConfigError("sauvola_window must be odd and >= 3")
        for name in ("template_threshold", "gof_alpha", "moran_alpha"):
            value = getattr(cfg, name)
            if not 0.0 < value < 1.0:
                raise ConfigError(f"{name} must be in (0, 1)")
        return cfg

    @classmethod
    def load(cls, path=None):
        if path is None:
            return cls()
        try:
            data = read_json(path)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        return cls.from_dict(data)
