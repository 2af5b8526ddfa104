"""Simulation of an atomic symmetry-controlled thermal switch.

A chain of three cavities is coupled to two thermal baths; two laser-driven
atoms in the middle cavity steer the photon current.  The package builds the
Lindblad model, computes the large-deviation statistics of the current from
the tilted Liouvillian, checks the atom-exchange symmetry, and unravels the
dynamics into quantum-jump trajectories.
"""

__version__ = "0.1.0"
