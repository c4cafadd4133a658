"""Optimal global phase along a prescribed state path.

When ``(c1(t), phi(t))`` is fixed, the cost rate is a positive-definite quadratic
in ``eta'``; its pointwise minimiser ``eta' = -(g_ec c1' + g_ep phi')/g_ee``
cancels the cross terms.  Restricting the metric to the surface swept by the
path and its phase fiber gives a 2D metric in ``(tau, eta)``::

    ds^2 = A deta^2 + 2 B deta dtau + C dtau^2

whose free-endpoint geodesic coincides with the optimal phase.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np
import numpy.typing as npt
from scipy.interpolate import CubicSpline

from ._numerics import cumulative_simpson, golden_section
from .errors import DomainError, QcGeoError, SolverError
from .geodesic import SweepResult, _map, minimize_polyline_length
from .lie_rep import GroupTag, check_interior
from .metric import christoffel_from_derivatives, metric_components, trajectory_length
from .trajectory import ISOTROPIC, Trajectory, as_weights

NDArrayFloat = npt.NDArray[np.float64]

__all__ = [
    "PrescribedPath",
    "SubmanifoldMetric",
    "DEFAULT_SHAPE_RATIO",
    "horizontal_phase",
    "optimal_phase",
    "optimal_trajectory",
    "induced_metric",
    "submanifold_geodesic",
    "sweep_submanifold",
    "surface_oracle",
    "perturbation_scan",
]

# Half-sine perturbation shapes sin(pi * ratio * t / t_f) used for each group.
DEFAULT_SHAPE_RATIO = {GroupTag.SU2: 1.0 / 3.0, GroupTag.SU11: 1.0 / 2.0}

_FD_H = 1e-5


def horizontal_phase(tag: GroupTag, weights: Any, times: npt.ArrayLike, c1: npt.ArrayLike, phi: npt.ArrayLike,
                     dc1: npt.ArrayLike, dphi: npt.ArrayLike, eta0: float = 0.0) -> tuple[NDArrayFloat, NDArrayFloat]:
    """Optimal phase and its rate along sampled ``(c1, phi)``; ``eta(t_0) = eta0``."""
    g_cc, g_pp, g_ee, g_ec, g_ep = metric_components(tag, weights, np.asarray(c1), np.asarray(phi))
    deta = -(g_ec * np.asarray(dc1) + g_ep * np.asarray(dphi)) / g_ee
    eta = eta0 + cumulative_simpson(deta, times)
    return eta, deta


@dataclass
class PrescribedPath:
    """A fixed state path ``(c1(t), phi(t))`` on ``[0, t_f]``.

    The four callables must accept arrays; the uniform sample grid has ``n`` points.
    """

    tag: GroupTag
    c1: Callable[[np.ndarray], np.ndarray]
    phi: Callable[[np.ndarray], np.ndarray]
    dc1: Callable[[np.ndarray], np.ndarray]
    dphi: Callable[[np.ndarray], np.ndarray]
    t_f: float = 1.0
    weights: tuple[float, float, float] = ISOTROPIC
    n: int = 2001
    name: str = "custom"

    def __post_init__(self) -> None:
        self.tag = GroupTag.parse(self.tag)
        self.weights = as_weights(self.weights)
        if not (self.t_f > 0 and math.isfinite(self.t_f)):
            raise DomainError("t_f must be > 0")
        if int(self.n) < 256:
            raise DomainError("a prescribed path needs at least 256 samples")
        self.n = int(self.n)
        c = np.asarray(self.c1(self.times), dtype=float)
        if not np.all(np.isfinite(c)):
            raise DomainError("path coordinates must be finite")
        check_interior(self.tag, float(c.min()), name="path")
        check_interior(self.tag, float(c.max()), name="path")

    @property
    def times(self) -> NDArrayFloat:
        return np.linspace(0.0, self.t_f, self.n)

    @classmethod
    def paper_example(cls, tag: GroupTag, t_f: float = 1.0, n: int = 2001,
                      weights: Any = ISOTROPIC) -> "PrescribedPath":
        """``c1 = t/t_f + 1/5`` and ``phi = c1^2``, so c1 runs from 0.2 to 1.2."""
        return cls(
            tag,
            lambda t: t / t_f + 0.2,
            lambda t: (t / t_f + 0.2) ** 2,
            lambda t: np.full_like(np.asarray(t, dtype=float), 1.0 / t_f),
            lambda t: 2.0 * (t / t_f + 0.2) / t_f,
            t_f=t_f,
            weights=weights,
            n=n,
            name="paper-example",
        )

    @classmethod
    def from_samples(cls, tag: GroupTag, t: npt.ArrayLike, c1: npt.ArrayLike, phi: npt.ArrayLike,
                     weights: Any = ISOTROPIC, n: int | None = None) -> "PrescribedPath":
        """Interpolate tabulated samples with not-a-knot cubic splines."""
        t = np.asarray(t, dtype=float)
        if t.ndim != 1 or t.size < 4 or np.any(np.diff(t) <= 0):
            raise DomainError("path times must be strictly increasing with at least 4 samples")
        if t[0] != 0.0:
            raise DomainError("path times must start at 0")
        sc = CubicSpline(t, np.asarray(c1, dtype=float))
        sp = CubicSpline(t, np.asarray(phi, dtype=float))
        dsc, dsp = sc.derivative(), sp.derivative()
        return cls(tag, sc, sp, dsc, dsp, t_f=float(t[-1]), weights=weights,
                   n=int(n if n is not None else max(t.size, 2001)), name="samples")

    def sample(self, t: npt.ArrayLike | None = None) -> tuple[NDArrayFloat, ...]:
        """``(t, c1, phi, dc1, dphi)`` on the default grid or on ``t``."""
        t = self.times if t is None else np.asarray(t, dtype=float)
        return (t, np.asarray(self.c1(t), dtype=float), np.asarray(self.phi(t), dtype=float),
                np.asarray(self.dc1(t), dtype=float), np.asarray(self.dphi(t), dtype=float))


def optimal_phase(path: PrescribedPath) -> NDArrayFloat:
    """``eta_opt`` on the path grid by cumulative Simpson quadrature, ``eta_opt(0) = 0``."""
    t, c, p, dc, dp = path.sample()
    eta, _ = horizontal_phase(path.tag, path.weights, t, c, p, dc, dp)
    return eta


def optimal_trajectory(path: PrescribedPath, delta: float = 0.0, ratio: float | None = None) -> Trajectory:
    """The 3D curve ``(c1, phi, eta_opt + delta sin(pi ratio t / t_f))`` with exact velocities."""
    ratio = DEFAULT_SHAPE_RATIO[path.tag] if ratio is None else float(ratio)
    t, c, p, dc, dp = path.sample()
    eta, deta = horizontal_phase(path.tag, path.weights, t, c, p, dc, dp)
    if delta:
        k = math.pi * ratio / path.t_f
        eta = eta + delta * np.sin(k * t)
        deta = deta + delta * k * np.cos(k * t)
    return Trajectory(path.tag, path.weights, t, np.column_stack([c, p, eta]), np.column_stack([dc, dp, deta]),
                      info={"path": path.name, "delta": float(delta), "shape_ratio": ratio})


@dataclass
class SubmanifoldMetric:
    """Induced metric on the ``(tau, eta)`` surface, ``tau`` being the path time."""

    path: PrescribedPath
    tau: NDArrayFloat
    A: NDArrayFloat
    B: NDArrayFloat
    C: NDArrayFloat

    def components(self, tau: npt.ArrayLike) -> tuple[NDArrayFloat, NDArrayFloat, NDArrayFloat]:
        _, c, p, dc, dp = self.path.sample(np.asarray(tau, dtype=float))
        g_cc, g_pp, g_ee, g_ec, g_ep = metric_components(self.path.tag, self.path.weights, c, p)
        A = g_ee
        B = g_ec * dc + g_ep * dp
        C = g_cc * dc * dc + g_pp * dp * dp
        return A, B, C

    def tensor(self, tau: npt.ArrayLike) -> NDArrayFloat:
        """Metric in coordinate order ``(tau, eta)``, shape ``(..., 2, 2)``."""
        A, B, C = self.components(tau)
        return np.stack([np.stack([C, B], -1), np.stack([B, A], -1)], -2)

    def christoffel(self, tau: npt.ArrayLike) -> NDArrayFloat:
        """``Gamma[..., k, i, j]`` in ``(tau, eta)`` order; tau-derivatives by central differences."""
        tau = np.asarray(tau, dtype=float)
        g = self.tensor(tau)
        dg = np.zeros(tau.shape + (2, 2, 2))
        dg[..., 0, :, :] = (self.tensor(tau + _FD_H) - self.tensor(tau - _FD_H)) / (2.0 * _FD_H)
        return christoffel_from_derivatives(g, dg)

    def length(self, tau: NDArrayFloat, deta: NDArrayFloat) -> float:
        """Length of the graph ``eta(tau)`` given ``d eta / d tau`` on ``tau``."""
        A, B, C = self.components(tau)
        q = A * deta * deta + 2.0 * B * deta + C
        return float(cumulative_simpson(np.sqrt(np.clip(q, 0.0, None)), tau)[-1])


def induced_metric(path: PrescribedPath) -> SubmanifoldMetric:
    """Restrict the cost metric to the surface ``{(c1(tau), phi(tau), eta)}``.

    Raises
    ------
    DomainError
        If ``A C - B^2`` vanishes anywhere on the grid (e.g. a constant path).
    """
    tau = path.times
    sub = SubmanifoldMetric(path, tau, *[np.zeros(0)] * 3)
    A, B, C = sub.components(tau)
    det = A * C - B * B
    if np.any(A <= 0) or np.any(det <= 1e-12 * np.maximum(1.0, A * C)):
        raise DomainError("induced metric is degenerate along the path")
    sub.A, sub.B, sub.C = A, B, C
    return sub


def _graph_coefficients(metric: SubmanifoldMetric, tau: NDArrayFloat) -> NDArrayFloat:
    """Coefficients of ``eta'' = P0 + P1 eta' + P2 eta'^2 + P3 eta'^3`` for the graph ``eta(tau)``."""
    G = metric.christoffel(tau)
    # index 0 = tau, 1 = eta
    p0 = -G[..., 1, 0, 0]
    p1 = G[..., 0, 0, 0] - 2.0 * G[..., 1, 0, 1]
    p2 = 2.0 * G[..., 0, 0, 1] - G[..., 1, 1, 1]
    p3 = G[..., 0, 1, 1]
    return np.stack([p0, p1, p2, p3], -1)


def _rk4_graph(coef: list[tuple[float, float, float, float]], h: float, eta0: float, s0: float):
    """Classical RK4 on ``(eta, eta')`` with coefficients tabulated on the half-step grid."""
    n = (len(coef) - 1) // 2
    eta = [eta0] * (n + 1)
    slope = [s0] * (n + 1)
    y, s = eta0, s0

    def acc(c, v):
        return c[0] + v * (c[1] + v * (c[2] + v * c[3]))

    for i in range(n):
        ca, cm, cb = coef[2 * i], coef[2 * i + 1], coef[2 * i + 2]
        k1y, k1s = s, acc(ca, s)
        s2 = s + 0.5 * h * k1s
        k2y, k2s = s2, acc(cm, s2)
        s3 = s + 0.5 * h * k2s
        k3y, k3s = s3, acc(cm, s3)
        s4 = s + h * k3s
        k4y, k4s = s4, acc(cb, s4)
        y += h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
        s += h / 6.0 * (k1s + 2.0 * k2s + 2.0 * k3s + k4s)
        if not (math.isfinite(y) and math.isfinite(s)) or abs(s) > 1e8:
            return None
        eta[i + 1] = y
        slope[i + 1] = s
    return np.array(eta), np.array(slope)


def submanifold_geodesic(metric: SubmanifoldMetric, eta_f: float, steps: int | None = None,
                         tol: float = 1e-11, max_iter: int = 60) -> Trajectory:
    """Geodesic of the induced metric from ``(0, 0)`` to ``(t_f, eta_f)``.

    The curve is written as a graph ``eta(tau)`` and integrated by RK4; the single
    unknown ``eta'(0)`` is found by the secant method.  Returns the 3D trajectory
    with ``info['length']``.

    Raises
    ------
    SolverError
        If the shooting does not converge.
    """
    if not math.isfinite(eta_f):
        raise DomainError("eta_f must be finite")
    path = metric.path
    n = int(steps if steps is not None else path.n)
    if n < 64:
        raise DomainError("steps must be >= 64")
    tau = np.linspace(0.0, path.t_f, n)
    fine = np.linspace(0.0, path.t_f, 2 * n - 1)
    coef = [tuple(r) for r in _graph_coefficients(metric, fine).tolist()]
    h = float(tau[1] - tau[0])

    def miss(s):
        out = _rk4_graph(coef, h, 0.0, s)
        if out is None:
            return math.nan, None
        return out[0][-1] - eta_f, out

    s_a = eta_f / path.t_f
    f_a, out_a = miss(s_a)
    s_b = s_a + 0.1 / path.t_f
    f_b, out_b = miss(s_b)
    best = (abs(f_a) if math.isfinite(f_a) else math.inf, s_a, out_a)
    for _ in range(max_iter):
        if math.isfinite(f_b) and abs(f_b) < best[0]:
            best = (abs(f_b), s_b, out_b)
        if best[0] < tol:
            break
        if not (math.isfinite(f_a) and math.isfinite(f_b)) or f_b == f_a:
            s_b = 0.5 * (s_a + s_b)
            f_b, out_b = miss(s_b)
            continue
        s_new = s_b - f_b * (s_b - s_a) / (f_b - f_a)
        s_a, f_a = s_b, f_b
        s_b = s_new
        f_b, out_b = miss(s_b)
    if best[0] >= tol:
        raise SolverError("submanifold shooting did not converge", best_residual=best[0])
    _, s0, (eta, deta) = best
    _, c, p, dc, dp = path.sample(tau)
    traj = Trajectory(path.tag, path.weights, tau, np.column_stack([c, p, eta]), np.column_stack([dc, dp, deta]),
                      info={"eta_f": float(eta_f), "slope0": float(s0), "residual": float(best[0])})
    traj.info["length"] = metric.length(tau, deta)
    return traj


def sweep_submanifold(metric: SubmanifoldMetric, eta_grid: Sequence[float], steps: int | None = None,
                      threads: int = 1, refine_tol: float = 1e-4) -> SweepResult:
    """Submanifold geodesic lengths over ``eta_grid`` with a golden-section-refined minimum."""
    grid = [float(e) for e in eta_grid]
    if not grid:
        raise DomainError("eta_grid must be nonempty")

    def one(eta_f):
        try:
            tr = submanifold_geodesic(metric, eta_f, steps)
        except QcGeoError as exc:
            return math.nan, False, str(exc), None
        return tr.info["length"], True, None, tr

    results = _map(one, grid, threads)
    ok = [r[1] for r in results]
    if not any(ok):
        raise SolverError("no grid entry of the submanifold sweep converged")
    idx = min((i for i in range(len(grid)) if ok[i]), key=lambda i: results[i][0])
    best_eta, best_len, best_traj = grid[idx], results[idx][0], results[idx][3]
    lo = grid[idx - 1] if idx > 0 and ok[idx - 1] else grid[idx]
    hi = grid[idx + 1] if idx + 1 < len(grid) and ok[idx + 1] else grid[idx]
    if hi > lo:
        cache: dict[float, Trajectory] = {}

        def f(eta_f):
            try:
                tr = submanifold_geodesic(metric, eta_f, steps)
            except QcGeoError:
                return math.inf
            cache[eta_f] = tr
            return tr.info["length"]

        eta_star, len_star = golden_section(f, lo, hi, refine_tol)
        if len_star < best_len:
            best_eta, best_len, best_traj = eta_star, len_star, cache[eta_star]
    return SweepResult(
        grid=[(g, r[0]) for g, r in zip(grid, results)],
        argmin_eta=float(best_eta),
        argmin_length=float(best_len),
        converged=ok,
        errors=[r[2] for r in results],
        trajectory=best_traj,
    )


def surface_oracle(metric: SubmanifoldMetric, n_knots: int = 50, iters: int = 400) -> tuple[float, float]:
    """Brute-force shortest path from ``(0, 0)`` to the line ``tau = t_f`` on the induced surface.

    Knots keep uniform ``tau`` and move in ``eta`` only, since every candidate is a
    graph over the path.  Returns ``(length, eta at the free end)``.
    """
    t_f = metric.path.t_f
    start = np.array([0.0, 0.0])
    end = np.array([t_f, 0.0])

    def metric_vec(x):
        return metric.tensor(x[..., 0])

    length, knots = minimize_polyline_length(metric_vec, start, end, n_knots, iters, free_end=(1,), dims=(1,))
    return length, float(knots[-1, 1])


def perturbation_scan(path: PrescribedPath, delta_grid: Sequence[float], ratio: float | None = None,
                      threads: int = 1, return_trajectories: bool = False):
    """Full-metric length of ``eta_opt + delta sin(pi ratio t / t_f)`` for each ``delta``.

    Returns a list of ``(delta, length)``; with ``return_trajectories`` also the curves.
    """
    grid = [float(d) for d in delta_grid]

    def one(d):
        tr = optimal_trajectory(path, d, ratio)
        return trajectory_length(tr), tr

    results = _map(one, grid, threads)
    pairs = [(d, r[0]) for d, r in zip(grid, results)]
    if return_trajectories:
        return pairs, [r[1] for r in results]
    return pairs
