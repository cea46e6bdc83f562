"""Desk-scale soft-tactile membrane simulator and learned dynamics models."""

from ._bubbledyn import (
    Action4,
    MembraneSimulator,
    PoseAA,
    SimConfig,
    SimState,
    TactileAutoencoder,
    ToolShape,
    downsample,
    drawing_action_box_lo_hi,
    drawing_score,
    drawing_tool_set,
    pivoting_action_box_lo_hi,
    pivoting_score,
    pivoting_tool_set,
    upsample,
)

__all__ = [
    "Action4",
    "MembraneSimulator",
    "PoseAA",
    "SimConfig",
    "SimState",
    "TactileAutoencoder",
    "ToolShape",
    "downsample",
    "drawing_action_box_lo_hi",
    "drawing_score",
    "drawing_tool_set",
    "pivoting_action_box_lo_hi",
    "pivoting_score",
    "pivoting_tool_set",
    "upsample",
]
