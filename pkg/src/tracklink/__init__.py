"""Tracklet association tracking: link short track fragments into long
identity-consistent trajectories with online-learned appearance metrics,
Hankel-rank motion similarity and min-cost network flow."""

from tracklink.model import Detection, Tracklet, Trajectory, RunConfig

__version__ = "0.1.0"

__all__ = ["Detection", "Tracklet", "Trajectory", "RunConfig", "__version__"]
