"""Driving fields from manifold trajectories.

SU(2), ``H = sum_i B_i sigma_i``::

    B_x = eta' cos(phi) sin(theta) - theta'/2 sin(phi)
    B_y = eta' sin(phi) sin(theta) + theta'/2 cos(phi)
    B_z = eta' cos(theta) + phi'/2

SU(1,1), ``H = sum_i xi_i K_i``::

    xi_0 = 2 eta' cosh(rho) + phi'
    xi_1 = 2 eta' cos(phi) sinh(rho) - rho' sin(phi)
    xi_2 = 2 eta' sin(phi) sinh(rho) + rho' cos(phi)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

from .errors import ConsistencyError, DomainError
from .lie_rep import SIGMA_Z, GroupParams, GroupTag, generators
from .trajectory import Trajectory

NDArrayFloat = npt.NDArray[np.float64]
NDArrayComplex = npt.NDArray[np.complex128]

__all__ = [
    "FieldTrajectory",
    "fields_at",
    "fields_many",
    "fields_along",
    "hamiltonian_from_fields",
    "project_fields",
    "bloch_vectors",
]


@dataclass
class FieldTrajectory:
    """Field triples ``(f0, f1, f2)`` sampled on a strictly increasing time grid."""

    tag: GroupTag
    times: NDArrayFloat
    fields: NDArrayFloat

    def __post_init__(self) -> None:
        self.tag = GroupTag.parse(self.tag)
        self.times = np.asarray(self.times, dtype=float)
        self.fields = np.asarray(self.fields, dtype=float)
        if self.fields.shape != (self.times.size, 3):
            raise DomainError("fields must have shape (len(times), 3)")
        if np.any(np.diff(self.times) <= 0):
            raise DomainError("field times must be strictly increasing")
        if not np.all(np.isfinite(self.fields)):
            raise DomainError("fields must be finite")

    def scaled(self, t_f: float) -> "FieldTrajectory":
        """Re-express fields on the physical window ``[0, t_f]`` (fields scale as 1/t_f)."""
        span = self.times[-1] - self.times[0]
        factor = t_f / span
        return FieldTrajectory(self.tag, (self.times - self.times[0]) * factor, self.fields / factor)


def fields_many(tag: GroupTag, points: npt.ArrayLike, velocities: npt.ArrayLike) -> NDArrayFloat:
    """Vectorised field map over rows of ``points`` and ``velocities``."""
    tag = GroupTag.parse(tag)
    p = np.asarray(points, dtype=float)
    v = np.asarray(velocities, dtype=float)
    c1, phi = p[..., 0], p[..., 1]
    dc, dp, de = v[..., 0], v[..., 1], v[..., 2]
    cp, sp = np.cos(phi), np.sin(phi)
    if tag is GroupTag.SU2:
        s, c = np.sin(c1), np.cos(c1)
        f0 = de * cp * s - 0.5 * dc * sp
        f1 = de * sp * s + 0.5 * dc * cp
        f2 = de * c + 0.5 * dp
    else:
        s, c = np.sinh(c1), np.cosh(c1)
        f0 = 2.0 * de * c + dp
        f1 = 2.0 * de * cp * s - dc * sp
        f2 = 2.0 * de * sp * s + dc * cp
    return np.stack([f0, f1, f2], axis=-1)


def fields_at(tag: GroupTag, point: GroupParams, velocity: npt.ArrayLike) -> NDArrayFloat:
    """Field triple at one point for velocity ``(c1', phi', eta')``."""
    p = np.asarray(point, dtype=float)
    v = np.asarray(velocity, dtype=float)
    if not (np.all(np.isfinite(p)) and np.all(np.isfinite(v))):
        raise DomainError("fields_at requires finite inputs")
    return fields_many(tag, p, v)


def fields_along(traj: Trajectory) -> FieldTrajectory:
    """Apply the field map sample-wise, keeping the trajectory's time grid."""
    return FieldTrajectory(traj.tag, traj.times.copy(), fields_many(traj.tag, traj.points, traj.velocities))


def hamiltonian_from_fields(tag: GroupTag, f: npt.ArrayLike) -> NDArrayComplex:
    """``sum_i f_i G_i`` with ``G`` the Pauli matrices (SU2) or ``K_i`` (SU11).

    Accepts a single triple or an array of triples (returns ``(..., 2, 2)``).
    """
    f = np.asarray(f, dtype=float)
    return np.einsum("...i,ijk->...jk", f, generators(tag))


def project_fields(tag: GroupTag, H: npt.ArrayLike, tol: float = 1e-9) -> NDArrayFloat:
    """Inverse of :func:`hamiltonian_from_fields`.

    Uses ``B_i = Tr[H sigma_i] / 2`` or ``xi_i = 2 Tr[H K_i^dagger]``.

    Raises
    ------
    ConsistencyError
        If ``H`` is not (to ``tol``) a real combination of the generators.
    """
    tag = GroupTag.parse(tag)
    H = np.asarray(H, dtype=np.complex128)
    G = generators(tag)
    if tag is GroupTag.SU2:
        coeffs = 0.5 * np.einsum("...jk,ikj->...i", H, G)
    else:
        coeffs = 2.0 * np.einsum("...jk,ikj->...i", H, np.conj(np.swapaxes(G, -1, -2)))
    f = coeffs.real
    residual = np.abs(H - hamiltonian_from_fields(tag, f)).max(initial=0.0)
    scale = max(1.0, float(np.abs(H).max(initial=0.0)))
    if residual > tol * scale or np.abs(coeffs.imag).max(initial=0.0) > tol * scale:
        raise ConsistencyError(f"Hamiltonian is outside the generator span (residual {residual:.3e})")
    return f


def bloch_vectors(points: npt.ArrayLike) -> NDArrayFloat:
    """Unit vectors ``(sin th cos ph, sin th sin ph, cos th)`` for SU(2) points."""
    p = np.asarray(points, dtype=float)
    th, ph = p[..., 0], p[..., 1]
    return np.stack([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)], axis=-1)


def is_pseudo_hermitian(H: npt.ArrayLike, tol: float = 1e-12) -> bool:
    """``H^dagger sz == sz H``, the SU(1,1) analogue of Hermiticity."""
    H = np.asarray(H, dtype=np.complex128)
    return bool(np.abs(H.conj().T @ SIGMA_Z - SIGMA_Z @ H).max() <= tol)
