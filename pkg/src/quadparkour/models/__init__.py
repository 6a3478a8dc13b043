"""Policy networks, action distribution, and checkpoint serialization."""

from .checkpoint import load_checkpoint, save_checkpoint
from .policy import NetworkShape, Policy

__all__ = ["NetworkShape", "Policy", "load_checkpoint", "save_checkpoint"]
