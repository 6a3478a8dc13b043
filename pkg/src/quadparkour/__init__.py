"""Quadruped parkour locomotion: procedural obstacle curriculum, on-policy
training, and benchmark evaluation on a lightweight rigid-body simulator."""

__version__ = "0.1.0"
