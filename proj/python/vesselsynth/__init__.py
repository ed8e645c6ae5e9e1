"""Synthetic retinal vessel images, a fully convolutional segmenter and pixel metrics."""

from ._core import (
    ConfigError,
    DataError,
    Error,
    GenerationError,
    GeneratorConfig,
    MetricError,
    Model,
    NoiseConfig,
    NumericalError,
    Point,
    ShapeError,
    __version__,
    auc,
    confusion,
    evaluate,
    generate_raw,
    make_sample,
    preprocess,
    preset,
    read_gray,
    read_mask,
    roc,
    run_cli,
)

__all__ = [
    "ConfigError",
    "DataError",
    "Error",
    "GenerationError",
    "GeneratorConfig",
    "MetricError",
    "Model",
    "NoiseConfig",
    "NumericalError",
    "Point",
    "ShapeError",
    "__version__",
    "auc",
    "confusion",
    "evaluate",
    "generate_raw",
    "make_sample",
    "preprocess",
    "preset",
    "read_gray",
    "read_mask",
    "roc",
    "run_cli",
]
