"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class QcGeoError(Exception):
    """Base class for every error raised by the package."""


class DomainError(QcGeoError, ValueError):
    """A point, index or weight set lies outside the admissible domain."""


class SingularityError(DomainError):
    """An integrated trajectory entered the guard band around a coordinate singularity."""

    def __init__(self, message: str, time: float | None = None):
        super().__init__(message)
        self.time = time


class UnsupportedError(QcGeoError, NotImplementedError):
    """The requested closed form is not available for these inputs."""


class ConsistencyError(QcGeoError, ValueError):
    """An object failed an internal consistency check (e.g. out-of-span Hamiltonian)."""


class SolverError(QcGeoError, RuntimeError):
    """An iterative solver or integrator failed to converge."""

    def __init__(self, message: str, best_residual: float | None = None):
        super().__init__(message)
        self.best_residual = best_residual


class SpecError(QcGeoError, ValueError):
    """A problem specification failed validation."""
