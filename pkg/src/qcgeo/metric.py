"""Cost metrics on the control manifold and their Christoffel symbols.

The cost of a control is ``ds^2 = sum_i I_i^2 B_i^2 dt^2`` (SU2) or
``ds^2 = 1/4 sum_i I_i^2 xi_i^2 dt^2`` (SU11).  Substituting the field maps
gives a Riemannian metric on the coordinates ``(c1, phi, eta)``:

    g_ee = Z C^2 + X cos^2(phi) S^2 + Y sin^2(phi) S^2
    g_cc = (Y cos^2(phi) + X sin^2(phi)) / 4
    g_pp = Z / 4
    g_ec = (Y - X) cos(phi) sin(phi) S / 2
    g_ep = Z C / 2

with ``(C, S) = (cos c1, sin c1)`` for SU2 and ``(cosh c1, sinh c1)`` for SU11,
``(X, Y, Z)`` the squared weights of the (x, y, z) / (1, 2, 0) directions, and
``g_cp = 0``.  Christoffel symbols are stored as ``gamma[mu, nu, n]``.
"""

from __future__ import annotations

from typing import Any, Callable

import numpy as np
import numpy.typing as npt

from ._numerics import cumulative_simpson
from .errors import ConsistencyError, DomainError, UnsupportedError
from .lie_rep import GroupParams, GroupTag, check_interior
from .trajectory import ISOTROPIC, Trajectory, as_weights, is_isotropic

NDArrayFloat = npt.NDArray[np.float64]

__all__ = [
    "metric_components",
    "metric_at",
    "metric_field",
    "metric_and_derivatives",
    "christoffel_from_derivatives",
    "christoffel_numeric",
    "christoffel_analytic",
    "christoffel_field",
    "cost_rate",
    "cost_rates",
    "cumulative_length",
    "trajectory_length",
]

C1, PHI, ETA = 0, 1, 2


def _squares(tag: GroupTag, weights: Any) -> tuple[float, float, float]:
    """Return ``(X, Y, Z)``: squared weights along (x, y, z) for SU2, (1, 2, 0) for SU11."""
    w = as_weights(weights)
    if tag is GroupTag.SU2:
        return w[0] ** 2, w[1] ** 2, w[2] ** 2
    return w[1] ** 2, w[2] ** 2, w[0] ** 2


def _trig(tag: GroupTag, c1):
    if tag is GroupTag.SU2:
        return np.cos(c1), np.sin(c1)
    return np.cosh(c1), np.sinh(c1)


def metric_components(tag: GroupTag, weights: Any, c1, phi):
    """Vectorised independent components ``(g_cc, g_pp, g_ee, g_ec, g_ep)``."""
    tag = GroupTag.parse(tag)
    X, Y, Z = _squares(tag, weights)
    C, S = _trig(tag, np.asarray(c1, dtype=float))
    cp, sp = np.cos(phi), np.sin(phi)
    g_ee = Z * C**2 + (X * cp**2 + Y * sp**2) * S**2
    g_cc = 0.25 * (Y * cp**2 + X * sp**2)
    g_pp = 0.25 * Z * np.ones_like(g_ee)
    g_ec = 0.5 * (Y - X) * cp * sp * S
    g_ep = 0.5 * Z * C
    return g_cc, g_pp, g_ee, g_ec, g_ep


def _assemble(g_cc, g_pp, g_ee, g_ec, g_ep) -> NDArrayFloat:
    shape = np.shape(g_ee)
    g = np.zeros(shape + (3, 3))
    g[..., C1, C1] = g_cc
    g[..., PHI, PHI] = g_pp
    g[..., ETA, ETA] = g_ee
    g[..., ETA, C1] = g[..., C1, ETA] = g_ec
    g[..., ETA, PHI] = g[..., PHI, ETA] = g_ep
    return g


def metric_field(tag: GroupTag, weights: Any, c1, phi) -> NDArrayFloat:
    """Metric tensors at many points, shape ``c1.shape + (3, 3)``; no domain check."""
    return _assemble(*metric_components(GroupTag.parse(tag), weights, c1, phi))


def metric_at(tag: GroupTag, weights: Any, point: GroupParams) -> NDArrayFloat:
    """Metric tensor at an interior point, ordered (c1, phi, eta).

    Raises
    ------
    DomainError
        If the point is on (or beyond) the singular boundary.
    """
    tag = GroupTag.parse(tag)
    c1, phi, _ = (float(x) for x in point)
    check_interior(tag, c1)
    return metric_field(tag, weights, c1, phi)


def metric_and_derivatives(tag: GroupTag, weights: Any, c1, phi) -> tuple[NDArrayFloat, NDArrayFloat]:
    """Metric and its exact partial derivatives.

    Returns ``g`` with shape ``(..., 3, 3)`` and ``dg`` with shape
    ``(..., 3, 3, 3)`` where ``dg[..., k, i, j] = d g_ij / d x^k``.  Nothing
    depends on ``eta``, so ``dg[..., 2]`` vanishes.
    """
    tag = GroupTag.parse(tag)
    X, Y, Z = _squares(tag, weights)
    c1 = np.asarray(c1, dtype=float)
    phi = np.asarray(phi, dtype=float)
    C, S = _trig(tag, c1)
    # d/dc1 of (C, S): SU2 (-S, C); SU11 (S, C)
    dC = -S if tag is GroupTag.SU2 else S
    cp, sp = np.cos(phi), np.sin(phi)
    g = metric_field(tag, weights, c1, phi)
    dg = np.zeros(g.shape[:-2] + (3, 3, 3))

    aniso = X * cp**2 + Y * sp**2
    # d/dc1
    dg[..., C1, ETA, ETA] = 2 * Z * C * dC + 2 * aniso * S * C
    dg[..., C1, ETA, C1] = dg[..., C1, C1, ETA] = 0.5 * (Y - X) * cp * sp * C
    dg[..., C1, ETA, PHI] = dg[..., C1, PHI, ETA] = 0.5 * Z * dC
    # d/dphi
    dg[..., PHI, ETA, ETA] = 2 * (Y - X) * sp * cp * S**2
    dg[..., PHI, C1, C1] = 0.5 * (X - Y) * sp * cp
    dg[..., PHI, ETA, C1] = dg[..., PHI, C1, ETA] = 0.5 * (Y - X) * (cp**2 - sp**2) * S
    return g, dg


def christoffel_from_derivatives(g: NDArrayFloat, dg: NDArrayFloat) -> NDArrayFloat:
    """``Gamma^mu_{nu n} = 1/2 g^{mu m} (d_n g_{m nu} + d_nu g_{m n} - d_m g_{nu n})``.

    Vectorised over leading axes; ``dg[..., k, i, j] = d_k g_ij``.
    """
    ginv = np.linalg.inv(g)
    # lower[m, nu, n] = d_n g_{m nu} + d_nu g_{m n} - d_m g_{nu n}
    lower = (
        np.swapaxes(np.swapaxes(dg, -3, -2), -2, -1)  # d_n g_{m nu} -> [m, nu, n]
        + np.swapaxes(dg, -3, -2)  # d_nu g_{m n} -> [m, nu, n]
        - dg  # d_m g_{nu n}
    )
    return 0.5 * np.einsum("...um,...mab->...uab", ginv, lower)


def christoffel_numeric(
    metric_fn: Callable[[NDArrayFloat], NDArrayFloat], point: npt.ArrayLike, h: float = 1e-5
) -> NDArrayFloat:
    """Christoffel symbols of an arbitrary-dimensional metric by central differences.

    ``metric_fn`` maps a coordinate array to the metric matrix at that point.

    Raises
    ------
    ConsistencyError
        If the metric is singular at ``point``.
    """
    x = np.asarray(point, dtype=float)
    n = x.size
    g = np.asarray(metric_fn(x), dtype=float)
    if g.shape != (n, n):
        raise DomainError(f"metric_fn must return a ({n}, {n}) matrix")
    if abs(np.linalg.det(g)) < 1e-300 or np.linalg.cond(g) > 1e14:
        raise ConsistencyError("metric is not invertible at this point")
    dg = np.empty((n, n, n))
    for k in range(n):
        e = np.zeros(n)
        e[k] = h
        dg[k] = (np.asarray(metric_fn(x + e)) - np.asarray(metric_fn(x - e))) / (2.0 * h)
    gamma = christoffel_from_derivatives(g, dg)
    return 0.5 * (gamma + np.swapaxes(gamma, -1, -2))


def _analytic_su2(theta):
    s, c = np.sin(theta), np.cos(theta)
    gam = np.zeros(np.shape(theta) + (3, 3, 3))
    gam[..., C1, PHI, ETA] = gam[..., C1, ETA, PHI] = s
    gam[..., PHI, C1, PHI] = gam[..., PHI, PHI, C1] = 0.5 * c / s
    gam[..., PHI, C1, ETA] = gam[..., PHI, ETA, C1] = -1.0 / s
    gam[..., ETA, C1, PHI] = gam[..., ETA, PHI, C1] = -0.25 / s
    gam[..., ETA, C1, ETA] = gam[..., ETA, ETA, C1] = 0.5 * c / s
    return gam


def _analytic_su11(rho):
    s, c = np.sinh(rho), np.cosh(rho)
    gam = np.zeros(np.shape(rho) + (3, 3, 3))
    gam[..., C1, PHI, ETA] = gam[..., C1, ETA, PHI] = -s
    gam[..., C1, ETA, ETA] = -4.0 * np.sinh(2.0 * rho)
    gam[..., PHI, C1, PHI] = gam[..., PHI, PHI, C1] = -0.5 * c / s
    gam[..., PHI, C1, ETA] = gam[..., PHI, ETA, C1] = -(np.cosh(2.0 * rho) + 2.0) / s
    gam[..., ETA, C1, PHI] = gam[..., ETA, PHI, C1] = 0.25 / s
    gam[..., ETA, C1, ETA] = gam[..., ETA, ETA, C1] = 1.5 * c / s
    return gam


def christoffel_analytic(tag: GroupTag, point: GroupParams, weights: Any = ISOTROPIC) -> NDArrayFloat:
    """Closed-form Christoffel symbols of the isotropic metric.

    SU2 nonzero symbols: ``G^th_{ph,et} = sin th``, ``G^ph_{th,ph} = cot th / 2``,
    ``G^ph_{th,et} = -csc th``, ``G^et_{th,ph} = -csc th / 4``,
    ``G^et_{th,et} = cot th / 2``.  SU11: ``G^rho_{ph,et} = -sinh rho``,
    ``G^rho_{et,et} = -4 sinh 2rho``, ``G^ph_{rho,ph} = -coth rho / 2``,
    ``G^ph_{rho,et} = -(cosh 2rho + 2) / sinh rho``, ``G^et_{rho,ph} = csch rho / 4``,
    ``G^et_{rho,et} = 3 coth rho / 2``.

    Raises
    ------
    UnsupportedError
        For anisotropic weights; use :func:`christoffel_numeric` instead.
    """
    tag = GroupTag.parse(tag)
    if not is_isotropic(weights):
        raise UnsupportedError("closed-form Christoffel symbols exist only for isotropic weights")
    c1 = float(point[0])
    check_interior(tag, c1)
    return _analytic_su2(c1) if tag is GroupTag.SU2 else _analytic_su11(c1)


def christoffel_field(tag: GroupTag, weights: Any) -> Callable[[np.ndarray, np.ndarray], NDArrayFloat]:
    """Vectorised ``(c1, phi) -> Gamma`` used by the geodesic integrators.

    Isotropic weights use the closed forms; otherwise the symbols are built from
    the exact metric derivatives.
    """
    tag = GroupTag.parse(tag)
    weights = as_weights(weights)
    if is_isotropic(weights):
        analytic = _analytic_su2 if tag is GroupTag.SU2 else _analytic_su11
        return lambda c1, phi: analytic(c1)

    def gamma(c1, phi):
        g, dg = metric_and_derivatives(tag, weights, c1, phi)
        return christoffel_from_derivatives(g, dg)

    return gamma


def cost_rates(tag: GroupTag, weights: Any, points: NDArrayFloat, velocities: NDArrayFloat) -> NDArrayFloat:
    """Vectorised ``sqrt(v^T g v)`` over rows of ``points`` / ``velocities``."""
    points = np.asarray(points, dtype=float)
    v = np.asarray(velocities, dtype=float)
    g = metric_field(tag, weights, points[..., C1], points[..., PHI])
    q = np.einsum("...i,...ij,...j->...", v, g, v)
    scale = np.einsum("...i,...i->...", v, v) * np.abs(g).max(axis=(-1, -2))
    if np.any(q < -1e-12 * np.maximum(scale, 1e-300)):
        raise ConsistencyError("negative quadratic form: metric is not positive definite here")
    return np.sqrt(np.clip(q, 0.0, None))


def cost_rate(tag: GroupTag, weights: Any, point: GroupParams, velocity: npt.ArrayLike) -> float:
    """Instantaneous cost ``ds/dt = sqrt(v^T g v)`` at an interior point."""
    tag = GroupTag.parse(tag)
    check_interior(tag, float(point[0]))
    return float(cost_rates(tag, weights, np.asarray(point, dtype=float), np.asarray(velocity, dtype=float)))


def cumulative_length(traj: Trajectory, weights: Any | None = None) -> NDArrayFloat:
    """Running arc length along the samples (composite Simpson, zero at the start)."""
    w = traj.weights if weights is None else weights
    rate = cost_rates(traj.tag, w, traj.points, traj.velocities)
    return cumulative_simpson(rate, traj.times)


def trajectory_length(traj: Trajectory, tag: GroupTag | None = None, weights: Any | None = None) -> float:
    """Total cost ``s = int ds`` of a sampled trajectory.

    ``tag`` and ``weights`` default to the trajectory's own.
    """
    if tag is not None and GroupTag.parse(tag) is not traj.tag:
        traj = Trajectory(tag, traj.weights if weights is None else weights, traj.times, traj.points, traj.velocities)
    return float(cumulative_length(traj, weights)[-1])

