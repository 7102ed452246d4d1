"""Simulable local verifiers, encoded history Hamiltonians and quantum Merkle commitments."""

from . import clockham, encver, haar, merkle, qsat, qsim, steane, zkproto

__all__ = ["clockham", "encver", "haar", "merkle", "qsat", "qsim", "steane", "zkproto"]
__version__ = "0.1.0"
