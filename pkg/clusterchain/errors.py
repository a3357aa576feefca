from __future__ import annotations


class ClusterChainError(RuntimeError):
    """Base class for every failure raised by clusterchain."""


class DimensionError(ClusterChainError):
    """Operands live on different site counts or have incompatible shapes."""


class ModelError(ClusterChainError):
    """The chain model is invalid or unsupported by the requested operation."""


class CapExceededError(ClusterChainError):
    """System size is above the configured resource cap."""


class DegenerateInputError(ClusterChainError):
    """Input collapses to zero (annihilated seed state, empty selection)."""


class SymmetryError(ClusterChainError):
    """Candidate symmetry is not unitary."""


class NumericalError(ClusterChainError):
    """A numerical routine failed or produced an untrustworthy result."""


class IntegrationError(NumericalError):
    """Time integration stopped before the requested final time."""

    def __init__(self, message: str, last_good_time: float):
        super().__init__(f"{message} (last good time t={last_good_time:.6g})")
        self.last_good_time = last_good_time


class SteadySpaceError(NumericalError):
    """Nullspace extraction is rank deficient beyond tolerance."""


class ProtocolError(ClusterChainError):
    """Restoration or readout protocol cannot be applied to the given input."""


class AmbiguousSyndromeError(ProtocolError):
    """Stabilizer syndromes do not identify the edge-qubit correction uniquely."""


class FitError(ClusterChainError):
    """First-passage fit preconditions are violated."""


class ConfigError(ClusterChainError):
    """Experiment configuration is invalid."""
