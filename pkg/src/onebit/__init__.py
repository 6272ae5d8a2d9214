"""Global and fast approximate detection for one-bit MIMO receivers."""

from .detectors import METHODS, DetectionResult, detect
from .links import AR_L1, AR_L2, ML, LinkFunction
from .model import RealInstance, generate_instance

__all__ = [
    "AR_L1",
    "AR_L2",
    "ML",
    "METHODS",
    "DetectionResult",
    "LinkFunction",
    "RealInstance",
    "detect",
    "generate_instance",
]
