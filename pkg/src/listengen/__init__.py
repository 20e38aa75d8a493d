"""Conditional denoising-diffusion generation of listener head-motion
coefficient sequences from speaker features, identity, and attitude."""

__version__ = "0.1.0"
