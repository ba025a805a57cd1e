"""Interactive open-world point-cloud semantic segmentation engine."""

from .model import (
    GT_UNLABELED,
    AnnotationSet,
    Click,
    LabelSpace,
    Prediction,
    PrototypeSet,
    SceneFrame,
    ValidationError,
)
from .session import SessionConfig, SessionState, apply_clicks, open_session, propagate
from .simulate import StrategySpec, run_strategy
from .sceneio import LoadedScene, SynthSpec, generate_synthetic, read_scene, write_scene
from .metrics import RunReport, harmonic_mean, miou, tally_from_labels

__version__ = "0.1.0"

__all__ = [
    "GT_UNLABELED",
    "AnnotationSet",
    "Click",
    "LabelSpace",
    "LoadedScene",
    "Prediction",
    "PrototypeSet",
    "RunReport",
    "SceneFrame",
    "SessionConfig",
    "SessionState",
    "StrategySpec",
    "SynthSpec",
    "ValidationError",
    "apply_clicks",
    "generate_synthetic",
    "harmonic_mean",
    "miou",
    "open_session",
    "propagate",
    "read_scene",
    "run_strategy",
    "tally_from_labels",
    "write_scene",
]
