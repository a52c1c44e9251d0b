"""Numerical laboratory for Fueter operators on divergence free frames.

Modules: ``quaternion`` (structure maps), ``frames`` (frame catalog),
``spectral`` (block spectra and regularity), ``specflow`` (spectral flow),
``variational`` (energy and action identities), ``floer`` (perturbed
equation on T^3), ``ample`` (ampleness lemma), ``cli`` (command line).
"""

__version__ = "0.1.0"

from .frames import FrameSpec, product_s1s2, singular_s3, standard_s3, torus3  # noqa: E402
from .spectral import classify, kernel_dimension  # noqa: E402

__all__ = [
    "__version__",
    "FrameSpec",
    "torus3",
    "standard_s3",
    "singular_s3",
    "product_s1s2",
    "classify",
    "kernel_dimension",
]
