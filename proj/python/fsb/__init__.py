"""Python access to the toy body-mesh pipelines and kinematic conversion."""

import json

from ._fsb import (
    POSE_DIM,
    ConfigError,
    Error,
    IoError,
    Models,
    NumericError,
    ProjectionError,
    ShapeError,
    UsageError,
    bench,
    default_config,
    random_scene,
    sample_pose,
)
from ._fsb import run as _run

__all__ = [
    "POSE_DIM",
    "ConfigError",
    "Error",
    "IoError",
    "Models",
    "NumericError",
    "ProjectionError",
    "ShapeError",
    "UsageError",
    "bench",
    "default_config",
    "random_scene",
    "run",
    "sample_pose",
]


def run(config=None, mode="fast", scene=None, frames=1):
    """Run one pipeline. config and scene may be dicts or JSON strings."""
    if isinstance(config, dict):
        config = json.dumps(config)
    if isinstance(scene, dict):
        scene = json.dumps(scene)
    return _run(config or "{}", mode, scene or "", frames)
