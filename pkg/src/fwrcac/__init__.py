"""Fixed-wing cascaded autopilot with retrospective-cost adaptive augmentation."""

__version__ = "0.1.0"
