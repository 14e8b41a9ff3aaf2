"""Quantum randomized smoothing with k-Hamming perturbations."""
from .backend import NAME as KERNEL_BACKEND

__version__ = "0.1.0"

__all__ = ["KERNEL_BACKEND", "__version__"]
