"""Audio-visual fusion toolkit for temporal action localization."""

from talfuse._core import (
    RMAttnParams,
    TalfuseError,
    align,
    average_precision,
    evaluate,
    generate_episode,
    nms,
    pool_and_nms,
    preset_thresholds,
    read_features,
    rmattn_backward,
    rmattn_forward,
    rmattn_init,
    snippet_centers,
    temporal_iou,
    write_features,
)

__all__ = [
    "RMAttnParams",
    "TalfuseError",
    "align",
    "average_precision",
    "evaluate",
    "generate_episode",
    "nms",
    "pool_and_nms",
    "preset_thresholds",
    "read_features",
    "rmattn_backward",
    "rmattn_forward",
    "rmattn_init",
    "snippet_centers",
    "temporal_iou",
    "write_features",
]

__version__ = "0.1.0"
