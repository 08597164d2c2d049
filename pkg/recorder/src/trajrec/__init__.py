"""Records optimizer trajectories from plain training loops as bundle
directories consumable by the trajtopo CLI and library."""
from .data import two_gaussians
from .gridrun import run_grid
from .mlp import Adam, TwoLayerClassifier
from .recorder import (
    RecorderConfig,
    RunInfo,
    ShapeDrift,
    TrajectoryRecorder,
    WriteFailure,
    attach,
)

__version__ = "0.1.0"
