"""qidlab: a desk-scale lab for identity testing of collections of quantum states.

Estimates the mean squared Hilbert-Schmidt spread of a weighted collection
from Poissonized samples, turns the estimate into accept/reject identity
tests, realizes the measurement through Schur-Weyl projectors at oracle
scale, and ships the matching hard-instance family for lower-bound ledgers.
"""

__version__ = "0.1.0"

from .collection import Collection
from .densmat import DensityMatrix, Spectrum

__all__ = ["Collection", "DensityMatrix", "Spectrum", "__version__"]
