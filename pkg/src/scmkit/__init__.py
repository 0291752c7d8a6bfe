"""scmkit: procedural image ensembles with prescribed, recoverable spatial context.

Three stochastic context models (alphabet, voronoi, flag) generate image
ensembles whose contextual constraints are known exactly; the analyzers
recover those constraints from pixels alone and report per-image and
ensemble-level context errors.  A model-agnostic comparator evaluates any
two ensembles through feature extraction, PCA, cosine-pair distributions
and k-NN coverage/density.
"""

from scmkit.core import (
    ContextReport,
    EnsembleError,
    EnsembleManifest,
    Record,
    RngStream,
    load_ensemble,
    save_ensemble,
    split_rng,
)

__all__ = [
    "ContextReport",
    "EnsembleError",
    "EnsembleManifest",
    "Record",
    "RngStream",
    "load_ensemble",
    "save_ensemble",
    "split_rng",
]

__version__ = "0.1.0"
