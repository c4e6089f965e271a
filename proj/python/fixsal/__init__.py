from ._core import (
    ConfigError,
    DegenerateInputError,
    NumericError,
    ShapeError,
    f_measure,
    fixation_centroid,
    generate_scene,
    gradcheck,
    inter_loss,
    intra_loss,
    mae,
    partial_iou,
    positional_encoding_2d,
    run_cli,
    s_measure,
)

__all__ = [
    "ConfigError",
    "DegenerateInputError",
    "NumericError",
    "ShapeError",
    "f_measure",
    "fixation_centroid",
    "generate_scene",
    "gradcheck",
    "inter_loss",
    "intra_loss",
    "mae",
    "partial_iou",
    "positional_encoding_2d",
    "run_cli",
    "s_measure",
]
