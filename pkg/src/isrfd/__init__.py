"""Clock phase-jump detection from inter-satellite ranges.

The package simulates dual one-way inter-satellite range measurements for a
constellation, and runs three detectors on them: an ephemeris comparison
test, Baarda data snooping, and a test built on the singular values of
geometric-centred Euclidean distance matrices of 5-node subgraphs.
"""

from isrfd._backend import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
