"""Real-time pedestrian detection and human-aware navigation pipeline.

A channel-features proposal detector is cascaded with a small CNN; the
resulting detections feed a constant-velocity Kalman tracker, a ground-plane
projector and an A* planner with social cost functions.  Everything runs on
deterministic synthetic scenes generated by the harness.
"""

__version__ = "0.1.0"
