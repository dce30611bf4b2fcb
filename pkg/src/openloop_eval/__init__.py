"""Open-loop trajectory planning evaluation: L2, any-hit collision rate with
yaw-aware footprints, curb collision rate, smoothness and baseline planners."""

__version__ = "0.1.0"
