"""Preference-based fine-tuning of a toy denoising diffusion model.

The denoising chain is treated as a multi-step decision process and trained
directly from pairwise preferences — no reward model — with numerical
verification of the optimal-policy and preference-approximation claims the
method rests on.
"""

from . import kernels

__version__ = "0.1.0"
__all__ = ["kernels", "__version__"]
