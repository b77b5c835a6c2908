from .commands import (
    cmd_backprop,
    cmd_calibrate,
    cmd_compose_rgb,
    cmd_evaluate,
    cmd_synth,
    cmd_transfer,
)
from .main import main
from .manifest import RunManifest, SceneFiles

__all__ = [
    "RunManifest",
    "SceneFiles",
    "cmd_backprop",
    "cmd_calibrate",
    "cmd_compose_rgb",
    "cmd_evaluate",
    "cmd_synth",
    "cmd_transfer",
    "main",
]
