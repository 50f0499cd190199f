"""Pursuit simulator with a convergent cross mapping collaboration metric."""

__version__ = "0.1.0"
