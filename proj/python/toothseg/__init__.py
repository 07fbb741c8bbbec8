"""Spectral self-supervision for semi-supervised tooth mesh segmentation."""

from ._core import (
    ConfigError,
    Error,
    MeshError,
    ParseError,
    cluster,
    contrastive_loss,
    decimate,
    dice_loss,
    dsc,
    features,
    load_mesh,
    normalize,
    run_cli,
    synthetic_arch,
)

__all__ = [
    "ConfigError",
    "Error",
    "MeshError",
    "ParseError",
    "cluster",
    "contrastive_loss",
    "decimate",
    "dice_loss",
    "dsc",
    "features",
    "load_mesh",
    "normalize",
    "run_cli",
    "synthetic_arch",
]
