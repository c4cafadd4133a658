"""Schrodinger propagation under synthesised fields, used as an independent check."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
import numpy.typing as npt
from scipy.interpolate import make_interp_spline

from ._numerics import dopri5_breakpoints
from .errors import DomainError
from .field_synth import FieldTrajectory, fields_many, hamiltonian_from_fields
from .lie_rep import IDENTITY, INITIAL_STATE, SIGMA_Z, GroupTag, evolution_operator, pseudo_norm
from .trajectory import Trajectory

NDArrayComplex = npt.NDArray[np.complex128]

__all__ = ["PropagationReport", "evolve", "fidelity", "verify_trajectory", "unitarity_drift", "form_drift"]


@dataclass
class PropagationReport:
    """Deviations between a propagated operator and the intended trajectory.

    The drift that does not apply to the group is reported as 0.
    """

    final_infidelity: float
    max_param_deviation: float
    pseudo_norm_drift: float
    unitarity_drift: float

    def as_dict(self) -> dict[str, float]:
        return asdict(self)


def evolve(tag: GroupTag, fields: FieldTrajectory, initial: npt.ArrayLike | None = None, rtol: float = 1e-10,
           atol: float = 1e-12, check_density: bool = True) -> NDArrayComplex:
    """Solve ``i d/dt psi = H(t) psi`` with ``H`` linear between field samples.

    ``initial`` is a state (shape ``(2,)``) or an operator (``(2, 2)``); the
    identity is used when omitted.  Returns the solution at every field sample.

    Raises
    ------
    DomainError
        If the fields are sampled too coarsely (fewer than 1000 samples per unit
        of integrated field magnitude).
    SolverError
        On step-size underflow.
    """
    tag = GroupTag.parse(tag)
    if fields.tag is not tag:
        raise DomainError("field trajectory belongs to a different group")
    y0 = np.array(IDENTITY if initial is None else initial, dtype=np.complex128)
    if y0.shape not in ((2,), (2, 2)):
        raise DomainError("initial must be a 2-vector or a 2x2 matrix")
    t = fields.times
    if check_density:
        action = _field_action(fields)
        if t.size - 1 < 1000 * action:
            raise DomainError(f"fields too coarsely sampled: {t.size} samples for integrated magnitude {action:.3g}")
    H = -1j * hamiltonian_from_fields(tag, fields.fields)

    def rhs(s, y, k):
        w = (s - t[k]) / (t[k + 1] - t[k])
        return ((1.0 - w) * H[k] + w * H[k + 1]) @ y

    return dopri5_breakpoints(rhs, t, y0, rtol=rtol, atol=atol)


def _field_action(fields: FieldTrajectory) -> float:
    mag = np.linalg.norm(fields.fields, axis=1)
    return float(np.sum(0.5 * (mag[1:] + mag[:-1]) * np.diff(fields.times)))


def _norm_invariant(tag: GroupTag, s: np.ndarray) -> float:
    if tag is GroupTag.SU2:
        return float(np.vdot(s, s).real)
    return pseudo_norm(s)


def fidelity(tag: GroupTag, a: npt.ArrayLike, b: npt.ArrayLike, tol: float = 1e-6) -> float:
    """State overlap: ``|<a|b>|^2`` (SU2) or the normalised ``sigma_z`` form analogue (SU11).

    Both equal 1 exactly when the states agree up to a phase.  The SU2 value is
    at most 1; the SU11 value is at least 1, since the form is indefinite.

    Raises
    ------
    DomainError
        If either state violates its norm invariant (``<s|s> = 1`` or ``s^dag sz s = -1``).
    """
    tag = GroupTag.parse(tag)
    a = np.asarray(a, dtype=np.complex128)
    b = np.asarray(b, dtype=np.complex128)
    target = 1.0 if tag is GroupTag.SU2 else -1.0
    for name, s in (("a", a), ("b", b)):
        if s.shape != (2,) or abs(_norm_invariant(tag, s) - target) > tol:
            raise DomainError(f"state {name} violates the norm invariant of {tag.value}")
    if tag is GroupTag.SU2:
        return float(abs(np.vdot(a, b)) ** 2)
    num = abs(a.conj() @ SIGMA_Z @ b) ** 2
    return float(num / (abs(a.conj() @ SIGMA_Z @ a) * abs(b.conj() @ SIGMA_Z @ b)))


def unitarity_drift(U: NDArrayComplex) -> float:
    """``max |U^dag U - I|`` over a stack of operators."""
    return float(np.abs(np.conj(np.swapaxes(U, -1, -2)) @ U - IDENTITY).max())


def form_drift(U: NDArrayComplex) -> float:
    """``max |U^dag sz U - sz|`` over a stack of operators."""
    return float(np.abs(np.conj(np.swapaxes(U, -1, -2)) @ SIGMA_Z @ U - SIGMA_Z).max())


def verify_trajectory(traj: Trajectory, rtol: float = 1e-10, atol: float = 1e-12) -> PropagationReport:
    """Propagate the fields of ``traj`` and compare with the closed-form operators.

    The operator ``V(t)`` evolved from the identity must satisfy
    ``V(t) U(p_0) = U(p(t))`` at every sample.  If the samples are too sparse for
    :func:`evolve`, the field grid is refined by an integer factor using quintic
    splines of the points and velocities; comparisons stay on the original samples.
    """
    tag = traj.tag
    fields = FieldTrajectory(tag, traj.times, fields_many(tag, traj.points, traj.velocities))
    factor = max(1, math.ceil(1000 * _field_action(fields) * 1.05 / (traj.times.size - 1)))
    if factor > 1:
        t = traj.times
        fine = np.append((t[:-1, None] + np.diff(t)[:, None] * (np.arange(factor) / factor)).ravel(), t[-1])
        k = min(5, traj.times.size - 1)
        pts = make_interp_spline(traj.times, traj.points, k=k, axis=0)(fine)
        vel = make_interp_spline(traj.times, traj.velocities, k=k, axis=0)(fine)
        pts[::factor], vel[::factor] = traj.points, traj.velocities
        fields = FieldTrajectory(tag, fine, fields_many(tag, pts, vel))
    V = evolve(tag, fields, None, rtol, atol)[::factor]
    U_path = np.array([evolution_operator(tag, p) for p in traj.points])
    achieved = V @ U_path[0]
    dev = float(np.abs(achieved - U_path).max())
    psi = achieved[-1] @ INITIAL_STATE
    want = U_path[-1] @ INITIAL_STATE
    if tag is GroupTag.SU2:
        f = float(abs(np.vdot(want, psi)) ** 2 / (np.vdot(psi, psi).real * np.vdot(want, want).real))
    else:
        f = float(abs(want.conj() @ SIGMA_Z @ psi) ** 2 / (abs(pseudo_norm(psi)) * abs(pseudo_norm(want))))
    # SU11 overlaps are >= 1 (reverse Cauchy-Schwarz), so measure the distance from 1
    infid = abs(1.0 - f)
    if tag is GroupTag.SU2:
        return PropagationReport(infid, dev, 0.0, unitarity_drift(V))
    return PropagationReport(infid, dev, form_drift(V), 0.0)
