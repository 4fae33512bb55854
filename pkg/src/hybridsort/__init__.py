"""Multi-object tracking that adds a confidence state, height-modulated overlap
and corner velocity direction to a SORT-style pipeline."""

__version__ = "0.1.0"

from .config import TrackerConfig
from .geometry import Box
from .tracker import Detection, TrackOutput, make_baseline, make_tracker

__all__ = ["Box", "Detection", "TrackOutput", "TrackerConfig", "make_baseline", "make_tracker", "__version__"]
