"""Two-dimensional representations of SU(2) and SU(1,1).

Coordinates on the control manifold are ordered ``(c1, phi, eta)`` throughout
the package, where ``c1`` is the polar angle ``theta`` for SU(2) and the
squeezing parameter ``rho`` for SU(1,1).  Units: hbar = mu_B = 1.

The evolution operators are

    SU(2):   U = exp(-i phi/2 sz) exp(-i theta/2 sy) exp(-i eta sz)
    SU(1,1): U = exp(-i phi K0)  exp(-i rho K2)     exp(-2i eta K0)

with K0 = sz/2, K1 = i sx/2, K2 = i sy/2 (a non-unitary representation that
preserves the indefinite form sz).
"""

from __future__ import annotations

import enum
import math
from typing import Callable, NamedTuple, Union

import numpy as np
import numpy.typing as npt

from .errors import DomainError

NDArrayComplex = npt.NDArray[np.complex128]
NDArrayFloat = npt.NDArray[np.float64]

__all__ = [
    "GroupTag",
    "GroupParams",
    "SIGMA_X",
    "SIGMA_Y",
    "SIGMA_Z",
    "IDENTITY",
    "GUARD_BAND",
    "generator",
    "generators",
    "evolution_operator",
    "state_from_params",
    "hamiltonian_from_unitary_path",
    "pseudo_norm",
    "check_interior",
    "INITIAL_STATE",
]

SIGMA_X: NDArrayComplex = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=np.complex128)
SIGMA_Y: NDArrayComplex = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=np.complex128)
SIGMA_Z: NDArrayComplex = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=np.complex128)
IDENTITY: NDArrayComplex = np.eye(2, dtype=np.complex128)

INITIAL_STATE: NDArrayComplex = np.array([0.0, 1.0], dtype=np.complex128)

# Distance kept from theta in {0, pi} and rho = 0 by every solver.
GUARD_BAND = 1e-4


class GroupTag(str, enum.Enum):
    """Dynamical symmetry group of the controlled system."""

    SU2 = "su2"
    SU11 = "su11"

    @classmethod
    def parse(cls, value: Union[str, "GroupTag"]) -> "GroupTag":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("(", "").replace(")", "").replace(",", "")
        for tag in cls:
            if tag.value == key:
                return tag
        raise DomainError(f"unknown group {value!r}; expected 'su2' or 'su11'")


class GroupParams(NamedTuple):
    """A point on the control manifold; ``c1`` is theta (SU2) or rho (SU11)."""

    c1: float
    phi: float
    eta: float


_SU2_AXES = {"x": SIGMA_X, "y": SIGMA_Y, "z": SIGMA_Z}
_SU11_GENERATORS = (0.5 * SIGMA_Z, 0.5j * SIGMA_X, 0.5j * SIGMA_Y)


def generator(tag: GroupTag, index: Union[int, str]) -> NDArrayComplex:
    """Return a generator matrix of the two-dimensional representation.

    For SU(2) ``index`` is one of ``'x', 'y', 'z'`` (or the positions 0, 1, 2
    in that order) and the Pauli matrix is returned.  For SU(1,1) ``index`` is
    0, 1 or 2 and ``K_index`` is returned.
    """
    tag = GroupTag.parse(tag)
    if tag is GroupTag.SU2:
        if isinstance(index, str) and index.lower() in _SU2_AXES:
            return _SU2_AXES[index.lower()].copy()
        if isinstance(index, (int, np.integer)) and not isinstance(index, bool) and 0 <= index <= 2:
            return _SU2_AXES["xyz"[int(index)]].copy()
        raise DomainError(f"invalid SU(2) generator index {index!r}")
    if isinstance(index, (int, np.integer)) and not isinstance(index, bool) and 0 <= index <= 2:
        return _SU11_GENERATORS[int(index)].copy()
    raise DomainError(f"invalid SU(1,1) generator index {index!r}")


def generators(tag: GroupTag) -> NDArrayComplex:
    """All three generators stacked along the first axis, in field order."""
    return np.stack([generator(tag, i) for i in range(3)])


def _check_finite(p: GroupParams) -> None:
    if not all(math.isfinite(float(x)) for x in p):
        raise DomainError(f"non-finite group parameters {tuple(p)}")


def evolution_operator(tag: GroupTag, p: GroupParams) -> NDArrayComplex:
    """Closed-form evolution operator ``U(c1, phi, eta)``."""
    tag = GroupTag.parse(tag)
    p = GroupParams(*p)
    _check_finite(p)
    c1, phi, eta = (float(x) for x in p)
    plus = eta + 0.5 * phi
    minus = eta - 0.5 * phi
    if tag is GroupTag.SU2:
        c, s = math.cos(0.5 * c1), math.sin(0.5 * c1)
        # cos(t/2)cos(+) I - i sin(t/2)sin(-) sx - i sin(t/2)cos(-) sy - i cos(t/2)sin(+) sz
        a = c * complex(math.cos(plus), -math.sin(plus))
        b = s * complex(-math.cos(minus), -math.sin(minus))
        return np.array([[a, b], [-b.conjugate(), a.conjugate()]], dtype=np.complex128)
    c, s = math.cosh(0.5 * c1), math.sinh(0.5 * c1)
    # diag(e^{-i phi/2}, e^{i phi/2}) (cosh I + sinh sy) diag(e^{-i eta}, e^{i eta})
    a = c * complex(math.cos(plus), -math.sin(plus))
    b = s * complex(math.sin(minus), -math.cos(minus))
    return np.array([[a, b], [b.conjugate(), a.conjugate()]], dtype=np.complex128)


def state_from_params(tag: GroupTag, p: GroupParams) -> NDArrayComplex:
    """State reached from ``(0, 1)^T`` by ``evolution_operator(tag, p)``.

    SU(2): ``e^{i eta} (-e^{-i phi/2} sin(theta/2), e^{i phi/2} cos(theta/2))``.
    SU(1,1): ``e^{i eta} (-i e^{-i phi/2} sinh(rho/2), e^{i phi/2} cosh(rho/2))``;
    the factor ``-i`` on the upper component is what the operator product
    actually produces in the K2 = i sy/2 representation.
    """
    tag = GroupTag.parse(tag)
    p = GroupParams(*p)
    _check_finite(p)
    c1, phi, eta = (float(x) for x in p)
    if tag is GroupTag.SU2:
        up = -np.exp(1j * (eta - 0.5 * phi)) * math.sin(0.5 * c1)
        down = np.exp(1j * (eta + 0.5 * phi)) * math.cos(0.5 * c1)
    else:
        up = -1j * np.exp(1j * (eta - 0.5 * phi)) * math.sinh(0.5 * c1)
        down = np.exp(1j * (eta + 0.5 * phi)) * math.cosh(0.5 * c1)
    return np.array([up, down], dtype=np.complex128)


def hamiltonian_from_unitary_path(
    U: Callable[[float], NDArrayComplex], t: float, dt_fd: float = 1e-6
) -> NDArrayComplex:
    """``H = i (dU/dt) U^{-1}`` with a central difference of width ``dt_fd``."""
    if not dt_fd > 0:
        raise DomainError("dt_fd must be positive")
    u0 = np.asarray(U(t), dtype=np.complex128)
    du = (np.asarray(U(t + dt_fd)) - np.asarray(U(t - dt_fd))) / (2.0 * dt_fd)
    return 1j * du @ np.linalg.inv(u0)


def pseudo_norm(s: npt.ArrayLike) -> float:
    """Indefinite form ``psi^dagger sz psi`` (real by construction)."""
    psi = np.asarray(s, dtype=np.complex128)
    value = np.vdot(psi, SIGMA_Z @ psi)
    if abs(value.imag) > 1e-12 * max(1.0, abs(value.real)):
        raise DomainError("pseudo-norm has a non-negligible imaginary part")
    return float(value.real)


def check_interior(tag: GroupTag, c1: float, guard: float = 0.0, name: str = "c1") -> None:
    """Raise :class:`DomainError` unless ``c1`` lies strictly inside its domain.

    ``guard`` widens the excluded neighbourhood of the singular boundary.
    """
    tag = GroupTag.parse(tag)
    c1 = float(c1)
    if not math.isfinite(c1):
        raise DomainError(f"{name} is not finite")
    if tag is GroupTag.SU2:
        if not (guard < c1 < math.pi - guard) or c1 <= 0.0 or c1 >= math.pi:
            raise DomainError(f"coordinate on singular boundary ({name}): theta={c1!r}")
    elif not c1 > max(guard, 0.0):
        raise DomainError(f"coordinate on singular boundary ({name}): rho={c1!r}")
