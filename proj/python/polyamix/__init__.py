"""Mixtures of Polya trees over recursive dyadic segmentations."""

from ._core import (
    ConformalBand,
    ConformalPredictor,
    InvalidArgument,
    MixtureApproximation,
    PosteriorModel,
    ScoreSide,
    Segmentation,
    SegmentationFamily,
    balanced_family,
    build_mixture,
    chi_square_sf,
    kolmogorov_sf,
    quantreg_family,
)

__all__ = [
    "ConformalBand",
    "ConformalPredictor",
    "InvalidArgument",
    "MixtureApproximation",
    "PosteriorModel",
    "ScoreSide",
    "Segmentation",
    "SegmentationFamily",
    "balanced_family",
    "build_mixture",
    "chi_square_sf",
    "kolmogorov_sf",
    "quantreg_family",
]
