"""Feature detection, description, matching and geometric verification."""

from .detector import (
    PRESETS,
    DetectorConfig,
    Features,
    Keypoint,
    detect_and_describe,
)
from .matching import Match, match_descriptors
from .ransac import ransac_fundamental, sampson_distance

__all__ = [
    "PRESETS",
    "DetectorConfig",
    "Features",
    "Keypoint",
    "Match",
    "detect_and_describe",
    "match_descriptors",
    "ransac_fundamental",
    "sampson_distance",
]
