"""Small numerical kernels used across modules."""

from __future__ import annotations

import math
from typing import Callable

import numpy as np
import numpy.typing as npt
from scipy.integrate import cumulative_simpson as _cumulative_simpson

from .errors import SolverError

NDArrayFloat = npt.NDArray[np.float64]

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def cumulative_simpson(y: npt.ArrayLike, x: npt.ArrayLike) -> NDArrayFloat:
    """Running composite-Simpson integral, zero at ``x[0]``, on a possibly nonuniform grid."""
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    if x.size == 2:
        return np.array([0.0, 0.5 * (y[0] + y[1]) * (x[1] - x[0])])
    return _cumulative_simpson(y, x=x, initial=0.0)


def golden_section(f: Callable[[float], float], a: float, b: float, tol: float = 1e-4) -> tuple[float, float]:
    """Minimise a unimodal ``f`` on ``[a, b]`` until the bracket is shorter than ``tol``.

    Returns ``(x_min, f(x_min))`` among all evaluated points.
    """
    if a > b:
        a, b = b, a
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    best = min((fc, c), (fd, d))
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
            best = min(best, (fc, c))
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
            best = min(best, (fd, d))
    return best[1], best[0]


# Dormand-Prince 5(4) tableau.
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_B = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0)
_E = (
    71 / 57600,
    0.0,
    -71 / 16695,
    71 / 1920,
    -17253 / 339200,
    22 / 525,
    -1 / 40,
)


def dopri5_breakpoints(
    f: Callable[[float, np.ndarray, int], np.ndarray],
    breaks: NDArrayFloat,
    y0: np.ndarray,
    rtol: float = 1e-10,
    atol: float = 1e-12,
    max_steps: int = 10_000_000,
) -> np.ndarray:
    """Adaptive Dormand-Prince 5(4) that lands exactly on every breakpoint.

    ``f(t, y, k)`` is the right-hand side on the interval ``[breaks[k], breaks[k+1]]``;
    the integrator never steps across a breakpoint, so ``f`` may have a kink there.
    Returns the solution at every breakpoint, shape ``(len(breaks),) + y0.shape``.
    """
    breaks = np.asarray(breaks, dtype=float)
    y = np.array(y0, dtype=np.result_type(y0, float))
    out = np.empty((breaks.size,) + y.shape, dtype=y.dtype)
    out[0] = y
    h = breaks[1] - breaks[0] if breaks.size > 1 else 0.0
    steps = 0
    for k in range(breaks.size - 1):
        t, t_end = breaks[k], breaks[k + 1]
        k1 = f(t, y, k)
        while t < t_end:
            h = min(h, t_end - t)
            if h <= 1e-14 * max(1.0, abs(t)):
                raise SolverError(f"step size underflow at t={t!r}")
            ks = [k1]
            for i in range(1, 7):
                yi = y + h * sum(a * kk for a, kk in zip(_A[i], ks) if a != 0.0)
                ks.append(f(t + _C[i] * h, yi, k))
            y_new = y + h * sum(b * kk for b, kk in zip(_B, ks) if b != 0.0)
            err = h * sum(e * kk for e, kk in zip(_E, ks) if e != 0.0)
            scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
            err_norm = float(np.sqrt(np.mean(np.abs(err / scale) ** 2)))
            steps += 1
            if steps > max_steps:
                raise SolverError("maximum number of integrator steps exceeded")
            if err_norm <= 1.0:
                last = t + h >= t_end - 1e-15 * max(1.0, abs(t_end))
                t = t_end if last else t + h
                y = y_new
                k1 = ks[6]
                factor = 5.0 if err_norm == 0.0 else min(5.0, 0.9 * err_norm ** -0.2)
                h_next = h * factor
                if last:
                    # keep the controller's suggestion for the next interval
                    h = max(h_next, h)
                    break
                h = h_next
            else:
                h = h * max(0.2, 0.9 * err_norm ** -0.2)
        out[k + 1] = y
    return out
