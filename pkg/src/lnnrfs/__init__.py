"""Liquid time-constant motion models inside Gaussian-mixture RFS trackers."""

__version__ = "0.1.0"
