"""Temporal fusion heads over per-frame feature matrices.

Thin wrappers around the C++ core: dataset synthesis, the architecture
catalogs, training, and gradient checking. Dict arguments are serialized to
JSON for the core.
"""

import json

from ._core import (  # noqa: F401
    __version__,
    catalog,
    ensemble_mean,
    grad_check,
    matmul,
    partition,
    sample_frames,
    softmax,
)
from . import _core


def default_synth_spec():
    """The default synthetic dataset spec as a dict."""
    return json.loads(_core.default_synth_spec())


def generate_synthetic(spec, out_dir):
    """Write a synthetic dataset; returns the manifest path.

    `spec` may be a dict (missing keys take defaults) or a JSON string.
    """
    if isinstance(spec, dict):
        spec = json.dumps(spec)
    return _core.generate_synthetic(spec, str(out_dir))


def train(config, dataset_path, frames=25):
    """Fit one configuration on a dataset manifest; returns the report dict."""
    if isinstance(config, dict):
        config = json.dumps(config)
    return json.loads(_core.train(config, str(dataset_path), frames))
