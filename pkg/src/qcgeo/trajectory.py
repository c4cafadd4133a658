"""Time-sampled curves on the control manifold."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np
import numpy.typing as npt

from .errors import DomainError
from .lie_rep import GroupParams, GroupTag, check_interior

NDArrayFloat = npt.NDArray[np.float64]

ISOTROPIC = (1.0, 1.0, 1.0)


def as_weights(weights: Any) -> tuple[float, float, float]:
    """Validate anisotropy weights; all three must be finite and strictly positive."""
    w = tuple(float(x) for x in np.asarray(weights, dtype=float).ravel())
    if len(w) != 3:
        raise DomainError(f"weights must have exactly 3 entries, got {len(w)}")
    if not all(np.isfinite(w)) or min(w) <= 0.0:
        raise DomainError(f"weights must be > 0, got {list(w)}")
    return w  # type: ignore[return-value]


def is_isotropic(weights: Any) -> bool:
    w = as_weights(weights)
    return w[0] == w[1] == w[2] == 1.0


def reconstruct_velocities(times: NDArrayFloat, points: NDArrayFloat) -> NDArrayFloat:
    """Second-order centred differences inside, one-sided second order at the ends."""
    return np.gradient(points, times, axis=0, edge_order=2)


@dataclass
class Trajectory:
    """Samples ``(t, point, velocity)`` of a curve, in coordinate order (c1, phi, eta).

    ``info`` carries solver diagnostics (iterations, residuals, lengths).
    """

    tag: GroupTag
    weights: tuple[float, float, float]
    times: NDArrayFloat
    points: NDArrayFloat
    velocities: NDArrayFloat | None = None
    info: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.tag = GroupTag.parse(self.tag)
        self.weights = as_weights(self.weights)
        self.times = np.asarray(self.times, dtype=float)
        self.points = np.asarray(self.points, dtype=float)
        if self.times.ndim != 1 or self.times.size < 2:
            raise DomainError("a trajectory needs at least two samples")
        if self.points.shape != (self.times.size, 3):
            raise DomainError(f"points must have shape ({self.times.size}, 3), got {self.points.shape}")
        if np.any(np.diff(self.times) <= 0):
            raise DomainError("trajectory times must be strictly increasing")
        if self.velocities is None:
            self.velocities = reconstruct_velocities(self.times, self.points)
        else:
            self.velocities = np.asarray(self.velocities, dtype=float)
            if self.velocities.shape != self.points.shape:
                raise DomainError("velocities must match points in shape")

    def __len__(self) -> int:
        return self.times.size

    @property
    def start(self) -> GroupParams:
        return GroupParams(*self.points[0])

    @property
    def end(self) -> GroupParams:
        return GroupParams(*self.points[-1])

    def check_interior(self, guard: float = 0.0) -> None:
        for c1 in (self.points[:, 0].min(), self.points[:, 0].max()):
            check_interior(self.tag, c1, guard)

    def reversed(self) -> "Trajectory":
        """Same curve traversed backwards on the same time window."""
        t = self.times
        return Trajectory(
            self.tag,
            self.weights,
            (t[0] + t[-1]) - t[::-1],
            self.points[::-1].copy(),
            -self.velocities[::-1],
        )
