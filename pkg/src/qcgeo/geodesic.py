"""Geodesics of the cost metric: IVP, shooting BVP, reduced manifold, fiber sweeps.

The affine parameter runs over ``[0, t_f]`` with ``t_f = 1`` by default.  The
total cost ``s`` does not depend on ``t_f``; fields simply scale as ``1/t_f``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np
import numpy.typing as npt
from scipy.integrate import solve_ivp
from scipy.interpolate import make_interp_spline

from ._numerics import golden_section
from .errors import DomainError, QcGeoError, SingularityError, SolverError
from .lie_rep import GUARD_BAND, GroupParams, GroupTag, check_interior
from .metric import christoffel_field, cost_rates, metric_field, trajectory_length
from .trajectory import ISOTROPIC, Trajectory, as_weights

NDArrayFloat = npt.NDArray[np.float64]

__all__ = [
    "Trajectory",
    "BvpConfig",
    "SweepResult",
    "integrate_ivp",
    "solve_bvp",
    "reduced_geodesic",
    "reduced_metric",
    "sweep_fiber",
    "path_oracle",
    "minimize_polyline_length",
    "geodesic_residual",
]


@dataclass(frozen=True)
class BvpConfig:
    """Settings of the shooting solver."""

    steps: int = 2001
    newton_tol: float = 1e-9
    max_newton_iters: int = 40
    restarts: int = 8
    fd_jacobian_eps: float = 1e-7
    rtol: float = 1e-11
    atol: float = 1e-12
    seed: int = 0
    t_f: float = 1.0

    def __post_init__(self) -> None:
        if int(self.steps) < 64:
            raise DomainError("steps must be >= 64")
        for name in ("newton_tol", "fd_jacobian_eps", "rtol", "atol", "t_f"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be > 0")
        if self.max_newton_iters < 1 or self.restarts < 0:
            raise DomainError("max_newton_iters must be >= 1 and restarts >= 0")


@dataclass
class SweepResult:
    """Lengths over a grid of final phases with a golden-section-refined minimum."""

    grid: list[tuple[float, float]]
    argmin_eta: float
    argmin_length: float
    converged: list[bool] = field(default_factory=list)
    errors: list[str | None] = field(default_factory=list)
    trajectory: Any = None
    info: dict[str, Any] = field(default_factory=dict)


class _System:
    """Batched second-order geodesic ODE ``x'' = -Gamma(x)[v, v]`` in ``dim`` coordinates."""

    def __init__(self, tag: GroupTag, dim: int, gamma: Callable[[np.ndarray, np.ndarray], np.ndarray],
                 rtol: float, atol: float):
        self.tag = tag
        self.dim = dim
        self.gamma = gamma
        self.rtol = rtol
        self.atol = atol
        if tag is GroupTag.SU2:
            self.lo, self.hi = GUARD_BAND, math.pi - GUARD_BAND
        else:
            self.lo, self.hi = GUARD_BAND, math.inf

    def rhs(self, t: float, y: np.ndarray) -> np.ndarray:
        s = y.reshape(-1, 2, self.dim)
        x, v = s[:, 0], s[:, 1]
        phi = x[:, 1] if self.dim > 1 else np.zeros(len(x))
        gam = self.gamma(x[:, 0], phi)
        acc = -np.einsum("kmab,ka,kb->km", gam, v, v)
        return np.stack([v, acc], axis=1).ravel()

    def _events(self):
        dim = self.dim

        def low(t, y):
            return float(np.min(y.reshape(-1, 2, dim)[:, 0, 0])) - self.lo

        low.terminal = True
        low.direction = -1
        events = [low]
        if math.isfinite(self.hi):
            def high(t, y):
                return self.hi - float(np.max(y.reshape(-1, 2, dim)[:, 0, 0]))

            high.terminal = True
            high.direction = -1
            events.append(high)
        return events

    def run(self, x0: np.ndarray, V: np.ndarray, t_f: float, t_eval: np.ndarray | None = None):
        V = np.atleast_2d(np.asarray(V, dtype=float))
        y0 = np.concatenate([np.stack([x0, v], axis=0) for v in V])
        with np.errstate(all="ignore"):
            sol = solve_ivp(self.rhs, (0.0, t_f), y0.ravel(), method="DOP853", rtol=self.rtol,
                            atol=self.atol, events=self._events(), t_eval=t_eval)
        if sol.status == 1:
            t_hit = float(min(te[0] for te in sol.t_events if len(te)))
            raise SingularityError(f"geodesic left the interior domain at t={t_hit:.6g}", time=t_hit)
        if sol.status != 0 or not np.all(np.isfinite(sol.y)):
            raise SolverError(f"geodesic integration failed: {sol.message}")
        return sol

    def endpoints(self, x0: np.ndarray, V: np.ndarray, t_f: float) -> np.ndarray:
        sol = self.run(x0, V, t_f)
        return sol.y[:, -1].reshape(-1, 2, self.dim)[:, 0]


def _full_system(tag: GroupTag, weights: Any, rtol: float, atol: float) -> _System:
    gam = christoffel_field(tag, weights)
    return _System(tag, 3, gam, rtol, atol)


def reduced_metric(tag: GroupTag, c1):
    """Conformal factor ``f`` of the reduced metric ``1/4 (dc1^2 + f(c1) dphi^2)``.

    ``f = sin^2 theta`` (SU2, radius-1/2 sphere) or ``sinh^2 rho / cosh 2rho`` (SU11).
    """
    tag = GroupTag.parse(tag)
    if tag is GroupTag.SU2:
        return np.sin(c1) ** 2
    return np.sinh(c1) ** 2 / np.cosh(2.0 * c1)


def _reduced_gamma(tag: GroupTag):
    if tag is GroupTag.SU2:
        def gamma(c1, phi):
            g = np.zeros(np.shape(c1) + (2, 2, 2))
            g[..., 0, 1, 1] = -np.sin(c1) * np.cos(c1)
            g[..., 1, 0, 1] = g[..., 1, 1, 0] = np.cos(c1) / np.sin(c1)
            return g
    else:
        def gamma(c1, phi):
            g = np.zeros(np.shape(c1) + (2, 2, 2))
            sech2 = 1.0 / np.cosh(2.0 * c1)
            g[..., 0, 1, 1] = -0.5 * np.tanh(2.0 * c1) * sech2
            g[..., 1, 0, 1] = g[..., 1, 1, 0] = sech2 / np.tanh(c1)
            return g
    return gamma


def _check_solver_point(tag: GroupTag, c1: float, name: str) -> None:
    try:
        check_interior(tag, c1, GUARD_BAND)
    except DomainError as exc:
        raise DomainError(f"{name}: {exc}") from None


def _trajectory_from_solution(tag, weights, system: _System, x0, v0, cfg: BvpConfig) -> tuple[np.ndarray, ...]:
    t = np.linspace(0.0, cfg.t_f, int(cfg.steps))
    sol = system.run(x0, v0, cfg.t_f, t_eval=t)
    y = sol.y.T.reshape(-1, 2, system.dim)
    return t, y[:, 0].copy(), y[:, 1].copy()


def integrate_ivp(tag: GroupTag, weights: Any, start: GroupParams, v0: npt.ArrayLike, t_f: float = 1.0,
                  steps: int = 2001, rtol: float = 1e-11, atol: float = 1e-12) -> Trajectory:
    """Integrate the geodesic equation from ``start`` with initial velocity ``v0``.

    Uses explicit adaptive Runge-Kutta (DOP853) and samples ``steps`` uniform times.

    Raises
    ------
    SingularityError
        If the curve enters the guard band around theta in {0, pi} or rho = 0.
    """
    tag = GroupTag.parse(tag)
    weights = as_weights(weights)
    x0 = np.asarray(start, dtype=float)
    _check_solver_point(tag, x0[0], "start")
    v0 = np.asarray(v0, dtype=float)
    if not np.all(np.isfinite(v0)):
        raise DomainError("initial velocity must be finite")
    cfg = BvpConfig(steps=steps, rtol=rtol, atol=atol, t_f=t_f)
    system = _full_system(tag, weights, rtol, atol)
    t, x, v = _trajectory_from_solution(tag, weights, system, x0, v0, cfg)
    return Trajectory(tag, weights, t, x, v)


def _newton(system: _System, x0: np.ndarray, x1: np.ndarray, v: np.ndarray, cfg: BvpConfig):
    """Newton iteration on the initial velocity; returns ``(v, iterations, residual)``."""
    dim = system.dim

    def evaluate(vv):
        eps = cfg.fd_jacobian_eps * max(1.0, float(np.abs(vv).max()))
        V = np.vstack([vv, vv + eps * np.eye(dim)])
        E = system.endpoints(x0, V, cfg.t_f)
        r = E[0] - x1
        J = (E[1:] - E[0]).T / eps
        return r, J

    r, J = evaluate(v)
    best = float(np.abs(r).max())
    for it in range(cfg.max_newton_iters + 1):
        nr = float(np.abs(r).max())
        if nr < cfg.newton_tol:
            return v, it, nr
        if it == cfg.max_newton_iters:
            break
        try:
            dv = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError:
            dv = np.linalg.lstsq(J, -r, rcond=None)[0]
        lam = 1.0
        accepted = False
        while lam >= 1.0 / 256:
            trial = v + lam * dv
            try:
                r_new, J_new = evaluate(trial)
            except QcGeoError:
                lam *= 0.5
                continue
            if float(np.abs(r_new).max()) < nr:
                v, r, J = trial, r_new, J_new
                accepted = True
                break
            lam *= 0.5
        if not accepted:
            break
        best = min(best, float(np.abs(r).max()))
    raise SolverError("Newton shooting did not converge", best_residual=best)


def _shoot(system: _System, x0: np.ndarray, x1: np.ndarray, cfg: BvpConfig, guess: np.ndarray | None):
    chord = (x1 - x0) / cfg.t_f
    rng = np.random.default_rng(cfg.seed)
    scale = 0.5 * (float(np.linalg.norm(chord)) + 0.5)
    candidates = [chord if guess is None else np.asarray(guess, dtype=float)]
    if guess is not None:
        candidates.append(chord)
    best = math.inf
    last_exc: Exception | None = None
    attempt = 0
    while True:
        for v_init in candidates:
            try:
                v, iters, res = _newton(system, x0, x1, v_init, cfg)
                return v, {"newton_iterations": iters, "restarts_used": attempt, "residual": res}
            except SolverError as exc:
                best = min(best, exc.best_residual if exc.best_residual is not None else math.inf)
                last_exc = exc
            except SingularityError as exc:
                last_exc = exc
            attempt += 1
        if attempt > cfg.restarts:
            break
        candidates = [chord + scale * rng.standard_normal(system.dim)]
    raise SolverError(f"shooting failed after {cfg.restarts} restarts ({last_exc})", best_residual=best)


def solve_bvp(tag: GroupTag, weights: Any, start: GroupParams, end: GroupParams,
              cfg: BvpConfig | None = None, guess: npt.ArrayLike | None = None) -> Trajectory:
    """Geodesic between two points by single shooting with Newton on ``v0``.

    The first guess is the chord velocity ``(end - start) / t_f`` (or ``guess``);
    on failure up to ``cfg.restarts`` Gaussian perturbations of the chord are
    tried, drawn from a generator seeded with ``cfg.seed``.

    Raises
    ------
    SolverError
        If no attempt reaches ``cfg.newton_tol``; carries the best residual.
    """
    tag = GroupTag.parse(tag)
    weights = as_weights(weights)
    cfg = cfg or BvpConfig()
    x0 = np.asarray(start, dtype=float)
    x1 = np.asarray(end, dtype=float)
    _check_solver_point(tag, x0[0], "start")
    _check_solver_point(tag, x1[0], "end")
    system = _full_system(tag, weights, cfg.rtol, cfg.atol)
    if np.array_equal(x0, x1):
        v0, diag = np.zeros(3), {"newton_iterations": 0, "restarts_used": 0, "residual": 0.0}
    else:
        v0, diag = _shoot(system, x0, x1, cfg, None if guess is None else np.asarray(guess, dtype=float))
    t, x, v = _trajectory_from_solution(tag, weights, system, x0, v0, cfg)
    diag["residual"] = float(np.abs(x[-1] - x1).max())
    traj = Trajectory(tag, weights, t, x, v, info=dict(diag, seed=cfg.seed, v0=v0.tolist()))
    traj.info["length"] = trajectory_length(traj)
    return traj


def reduced_geodesic(tag: GroupTag, start2: Sequence[float], end2: Sequence[float], steps: int = 2001,
                     cfg: BvpConfig | None = None) -> Trajectory:
    """Shortest connection from ``(c1_i, phi_i, 0)`` to the fiber over ``end2`` (isotropic).

    Solves the geodesic BVP of the reduced metric on ``(c1, phi)`` and attaches
    the optimal phase ``eta_opt(t)``; the lifted curve is a geodesic of the full
    metric.  ``info`` holds ``length`` and ``eta_opt_final``.
    """
    from .phase_opt import horizontal_phase

    tag = GroupTag.parse(tag)
    cfg = cfg or BvpConfig(steps=steps)
    if cfg.steps != steps:
        cfg = BvpConfig(**{**cfg.__dict__, "steps": steps})
    x0 = np.asarray(start2, dtype=float)[:2]
    x1 = np.asarray(end2, dtype=float)[:2]
    _check_solver_point(tag, x0[0], "start")
    _check_solver_point(tag, x1[0], "end")
    system = _System(tag, 2, _reduced_gamma(tag), cfg.rtol, cfg.atol)
    if np.array_equal(x0, x1):
        v0, diag = np.zeros(2), {"newton_iterations": 0, "restarts_used": 0, "residual": 0.0}
    else:
        v0, diag = _shoot(system, x0, x1, cfg, None)
    t, x2, v2 = _trajectory_from_solution(tag, ISOTROPIC, system, x0, v0, cfg)
    eta, deta = horizontal_phase(tag, ISOTROPIC, t, x2[:, 0], x2[:, 1], v2[:, 0], v2[:, 1])
    points = np.column_stack([x2, eta])
    vel = np.column_stack([v2, deta])
    traj = Trajectory(tag, ISOTROPIC, t, points, vel, info=dict(diag, seed=cfg.seed))
    traj.info["residual"] = float(np.abs(x2[-1] - x1).max())
    traj.info["length"] = trajectory_length(traj)
    traj.info["reduced_length"] = float(
        _reduced_length(tag, t, x2, v2)
    )
    traj.info["eta_opt_final"] = float(eta[-1])
    return traj


def _reduced_length(tag, t, x2, v2) -> float:
    from ._numerics import cumulative_simpson

    rate = 0.5 * np.sqrt(v2[:, 0] ** 2 + reduced_metric(tag, x2[:, 0]) * v2[:, 1] ** 2)
    return float(cumulative_simpson(rate, t)[-1])


def _map(fn: Callable[[Any], Any], items: Sequence[Any], threads: int) -> list[Any]:
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def sweep_fiber(tag: GroupTag, weights: Any, start: GroupParams, end2: Sequence[float],
                eta_grid: Sequence[float], cfg: BvpConfig | None = None, threads: int = 1,
                refine_tol: float = 1e-4) -> SweepResult:
    """Geodesic length to ``(end2, eta_f)`` for every ``eta_f`` in the grid.

    Failed grid entries are recorded (``converged=False``, length ``nan``) without
    aborting the sweep.  The discrete minimum is refined by golden-section search
    between its grid neighbours.
    """
    tag = GroupTag.parse(tag)
    weights = as_weights(weights)
    cfg = cfg or BvpConfig()
    grid = [float(e) for e in eta_grid]
    if not grid:
        raise DomainError("eta_grid must be nonempty")
    c1_f, phi_f = float(end2[0]), float(end2[1])

    def one(eta_f: float):
        try:
            traj = solve_bvp(tag, weights, start, (c1_f, phi_f, eta_f), cfg)
        except QcGeoError as exc:
            return math.nan, False, str(exc), None
        return traj.info["length"], True, None, traj

    results = _map(one, grid, threads)
    lengths = [r[0] for r in results]
    ok = [r[1] for r in results]
    if not any(ok):
        raise SolverError("no grid entry of the fiber sweep converged")
    idx = min((i for i in range(len(grid)) if ok[i]), key=lambda i: lengths[i])
    best_traj = results[idx][3]
    best_eta, best_len = grid[idx], lengths[idx]

    neighbours = [j for j in (idx - 1, idx + 1) if 0 <= j < len(grid) and ok[j]]
    if neighbours:
        lo = grid[idx - 1] if idx - 1 in neighbours else grid[idx]
        hi = grid[idx + 1] if idx + 1 in neighbours else grid[idx]
        guess = np.asarray(best_traj.velocities[0])
        cache: dict[float, Trajectory] = {}

        def f(eta_f: float) -> float:
            try:
                tr = solve_bvp(tag, weights, start, (c1_f, phi_f, eta_f), cfg, guess=guess)
            except QcGeoError:
                return math.inf
            cache[eta_f] = tr
            return tr.info["length"]

        eta_star, len_star = golden_section(f, lo, hi, refine_tol)
        if len_star < best_len:
            best_eta, best_len, best_traj = eta_star, len_star, cache[eta_star]

    return SweepResult(
        grid=list(zip(grid, lengths)),
        argmin_eta=float(best_eta),
        argmin_length=float(best_len),
        converged=ok,
        errors=[r[2] for r in results],
        trajectory=best_traj,
    )


# Gauss-Legendre nodes on [0, 1] for segment-length quadrature.
_GL_X, _GL_W = np.polynomial.legendre.leggauss(6)
_GL_X = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W


def _segment_lengths(metric_vec: Callable[[np.ndarray], np.ndarray], a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d = b - a
    pts = a[:, None, :] + _GL_X[None, :, None] * d[:, None, :]
    g = metric_vec(pts)
    q = np.einsum("ki,kjil,kl->kj", d, g, d)
    return np.sqrt(np.clip(q, 0.0, None)) @ _GL_W


def _descend(metric_vec, P: np.ndarray, iters: int, free_end: Sequence[int], step0: np.ndarray,
             min_step: float, dims: Sequence[int]) -> np.ndarray:
    n = P.shape[0] - 2
    seg = _segment_lengths(metric_vec, P[:-1], P[1:])
    step = step0.copy()
    parities = [np.arange(1, n + 1, 2), np.arange(2, n + 1, 2)]
    last = P.shape[0] - 1
    ramp = np.linspace(0.0, 1.0, P.shape[0])
    unit = np.eye(P.shape[1])
    for _ in range(iters):
        if np.all(step[list(dims)] < min_step):
            break
        for d in dims:
            moved = False
            for idx in parities:
                if idx.size == 0:
                    continue
                for sgn in (1.0, -1.0):
                    trial = P[idx].copy()
                    trial[:, d] += sgn * step[d]
                    left = _segment_lengths(metric_vec, P[idx - 1], trial)
                    right = _segment_lengths(metric_vec, trial, P[idx + 1])
                    better = left + right < seg[idx - 1] + seg[idx] - 1e-15
                    if np.any(better):
                        moved = True
                        k = idx[better]
                        P[k] = trial[better]
                        seg[k - 1] = left[better]
                        seg[k] = right[better]
            if d in free_end:
                for sgn in (1.0, -1.0):
                    trial = P[last:].copy()
                    trial[:, d] += sgn * step[d]
                    left = _segment_lengths(metric_vec, P[last - 1:last], trial)
                    if left[0] < seg[-1] - 1e-15:
                        P[last] = trial[0]
                        seg[-1] = left[0]
                        moved = True
                # collective move: tilt the whole polyline about its fixed start
                for sgn in (1.0, -1.0):
                    trial = P + sgn * step[d] * ramp[:, None] * unit[d]
                    tseg = _segment_lengths(metric_vec, trial[:-1], trial[1:])
                    if tseg.sum() < seg.sum() - 1e-15:
                        P, seg = trial, tseg
                        moved = True
            if not moved:
                step[d] *= 0.5
    return P


def minimize_polyline_length(metric_vec: Callable[[np.ndarray], np.ndarray], start: npt.ArrayLike,
                             end: npt.ArrayLike, n_knots: int = 50, iters: int = 400,
                             free_end: Sequence[int] = (), dims: Sequence[int] | None = None
                             ) -> tuple[float, np.ndarray]:
    """Brute-force shortest polyline between two points of a Riemannian metric.

    The path is a polyline whose ``n_knots`` interior knots start on the chord;
    its length (6-point Gauss-Legendre per segment) is reduced by coordinate-wise
    descent with shrinking steps, alternating odd and even knots so that every
    trial move only touches its own two segments.  Knot counts grow from a
    coarse polyline to ``n_knots`` by linear resampling, which
    damps the slow long-wavelength mode of plain coordinate descent.
    ``free_end`` lists coordinates of the final point that may also move (these
    also get a collective tilt of the whole polyline as a trial move) and
    ``dims`` restricts the knots' moves to some coordinates (all by default).

    Returns the final length (an upper bound on the distance) and the knots.
    """
    a = np.asarray(start, dtype=float)
    b = np.asarray(end, dtype=float)
    if n_knots < 8:
        raise DomainError("n_knots must be >= 8")
    if np.array_equal(a, b) and not free_end:
        return 0.0, np.vstack([a, b])
    dims = tuple(range(a.size)) if dims is None else tuple(dims)
    span = np.abs(b - a)
    step0 = np.maximum(0.25 * span, 0.05 * max(float(span.max()), 1e-3))
    levels = []
    m = 3
    while m < n_knots:
        levels.append(m)
        m = 2 * m + 1
    levels.append(n_knots)
    P = np.linspace(a, b, levels[0] + 2)
    for i, m in enumerate(levels):
        if i > 0:
            u_old = np.linspace(0.0, 1.0, P.shape[0])
            u_new = np.linspace(0.0, 1.0, m + 2)
            P = np.column_stack([np.interp(u_new, u_old, P[:, d]) for d in range(P.shape[1])])
            step0 = step0 / 2.0
        P = _descend(metric_vec, P, iters, free_end, step0, 1e-10, dims)
    length = float(_segment_lengths(metric_vec, P[:-1], P[1:]).sum())
    return length, P


def path_oracle(tag: GroupTag, weights: Any, start: GroupParams, end: GroupParams, n_knots: int = 50,
                iters: int = 400) -> float:
    """Independent upper bound on the geodesic distance between two points."""
    tag = GroupTag.parse(tag)
    weights = as_weights(weights)

    def metric_vec(x):
        return metric_field(tag, weights, x[..., 0], x[..., 1])

    length, _ = minimize_polyline_length(metric_vec, start, end, n_knots, iters)
    return length


def geodesic_residual(traj: Trajectory) -> float:
    """Max-abs residual of ``x'' + Gamma(x)[v, v] = 0`` along the samples.

    Accelerations come from a quintic interpolating spline of the sampled
    velocities, so the check is independent of the integrator that produced the curve.
    """
    acc = make_interp_spline(traj.times, traj.velocities, k=5, axis=0).derivative()(traj.times)
    gam = christoffel_field(traj.tag, traj.weights)(traj.points[:, 0], traj.points[:, 1])
    res = acc + np.einsum("kmab,ka,kb->km", gam, traj.velocities, traj.velocities)
    return float(np.abs(res).max())


def speed_spread(traj: Trajectory) -> float:
    """``(max - min) / mean`` of the cost rate along the samples."""
    rate = cost_rates(traj.tag, traj.weights, traj.points, traj.velocities)
    mean = float(rate.mean())
    return 0.0 if mean == 0.0 else float((rate.max() - rate.min()) / mean)
