"""Latent-space reinforcement learning pipeline.

Drive a 2D simulated car, pretrain a convolutional VAE on collected
camera frames, train Soft Actor-Critic on the compressed latent state,
and benchmark per-frame encoder compute.
"""

__version__ = "0.1.0"

from .camera import Frame, render_camera
from .simulator import Action, CarParams, CarState, DrivingEnv, RewardParams, StepResult
from .track import BUILTIN_TRACKS, TrackSpec, cross_track_error, load_track

__all__ = [
    "Action",
    "BUILTIN_TRACKS",
    "CarParams",
    "CarState",
    "DrivingEnv",
    "Frame",
    "RewardParams",
    "StepResult",
    "TrackSpec",
    "cross_track_error",
    "load_track",
    "render_camera",
    "__version__",
]
