import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import expm

from qcgeo.errors import DomainError
from qcgeo.field_synth import fields_at, project_fields
from qcgeo.lie_rep import (
    IDENTITY,
    INITIAL_STATE,
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    GroupTag,
    check_interior,
    evolution_operator,
    generator,
    generators,
    hamiltonian_from_unitary_path,
    pseudo_norm,
    state_from_params,
)

from conftest import finite, point, rho, theta


def expm_product(tag, c1, phi, eta):
    if tag == "su2":
        return expm(-0.5j * phi * SIGMA_Z) @ expm(-0.5j * c1 * SIGMA_Y) @ expm(-1j * eta * SIGMA_Z)
    k0, k2 = 0.5 * SIGMA_Z, 0.5j * SIGMA_Y
    return expm(-1j * phi * k0) @ expm(-1j * c1 * k2) @ expm(-2j * eta * k0)


def test_group_tag_parse():
    assert GroupTag.parse("SU(2)") is GroupTag.SU2
    assert GroupTag.parse("su11") is GroupTag.SU11
    assert GroupTag.parse(GroupTag.SU11) is GroupTag.SU11
    with pytest.raises(DomainError):
        GroupTag.parse("su3")


def test_generators_su2_are_pauli():
    assert np.array_equal(generator("su2", "x"), SIGMA_X)
    assert np.array_equal(generator("su2", 1), SIGMA_Y)
    assert np.array_equal(generator("su2", "z"), SIGMA_Z)


def test_su11_commutators():
    k0, k1, k2 = generators("su11")
    comm = lambda a, b: a @ b - b @ a
    assert np.allclose(comm(k1, k2), -1j * k0)
    assert np.allclose(comm(k0, k1), 1j * k2)
    assert np.allclose(comm(k2, k0), 1j * k1)


def test_su2_commutators():
    x, y, z = generators("su2")
    assert np.allclose(x @ y - y @ x, 2j * z)


@pytest.mark.parametrize("bad", ["w", 3, -1, True, 1.5])
def test_generator_rejects_bad_index(bad):
    with pytest.raises(DomainError):
        generator("su2", bad)
    with pytest.raises(DomainError):
        generator("su11", "x")


def test_identity_at_origin_su2():
    assert np.allclose(evolution_operator("su2", (0.0, 0.0, 0.0)), IDENTITY, atol=1e-15)


def test_su2_pi_rotation_flips_state():
    s = state_from_params("su2", (math.pi, 0.0, 0.0))
    assert abs(abs(s[0]) - 1.0) < 1e-15 and abs(s[1]) < 1e-15


def test_su11_state_norms():
    s = state_from_params("su11", (1.3, 0.4, -0.2))
    assert abs(abs(s[1]) ** 2 - math.cosh(0.65) ** 2) < 1e-12
    assert abs(pseudo_norm(s) + 1.0) < 1e-12


@given(point("su2"))
def test_su2_operator_matches_expm(p):
    U = evolution_operator("su2", p)
    assert np.abs(U - expm_product("su2", *p)).max() < 1e-12
    assert np.abs(U.conj().T @ U - IDENTITY).max() < 1e-13
    assert abs(np.linalg.det(U) - 1.0) < 1e-13


@given(point("su11"))
def test_su11_operator_matches_expm(p):
    U = evolution_operator("su11", p)
    assert np.abs(U - expm_product("su11", *p)).max() < 1e-11
    assert np.abs(U.conj().T @ SIGMA_Z @ U - SIGMA_Z).max() < 1e-11
    assert abs(np.linalg.det(U) - 1.0) < 1e-11


@pytest.mark.parametrize("tag", ["su2", "su11"])
@given(data=st.data())
def test_state_is_operator_on_initial(tag, data):
    p = data.draw(point(tag))
    assert np.abs(state_from_params(tag, p) - evolution_operator(tag, p) @ INITIAL_STATE).max() < 1e-12


def test_nonfinite_params_rejected():
    with pytest.raises(DomainError):
        evolution_operator("su2", (math.nan, 0.0, 0.0))


@pytest.mark.parametrize("tag", ["su2", "su11"])
def test_hamiltonian_from_path_matches_fields(tag, rng):
    """i U' U^-1 on a smooth path equals the field-map Hamiltonian to O(dt^2)."""
    lo, hi = (0.3, 2.8) if tag == "su2" else (0.3, 1.6)
    for _ in range(20):
        p0 = np.array([rng.uniform(lo, hi), rng.uniform(-3, 3), rng.uniform(-3, 3)])
        v = rng.uniform(-1.5, 1.5, 3)
        H = hamiltonian_from_unitary_path(lambda t: evolution_operator(tag, p0 + t * v), 0.0, 1e-5)
        f = project_fields(tag, H, tol=1e-7)
        assert np.abs(f - fields_at(tag, p0, v)).max() < 1e-7


def test_hamiltonian_requires_positive_width():
    with pytest.raises(DomainError):
        hamiltonian_from_unitary_path(lambda t: IDENTITY, 0.0, 0.0)


@pytest.mark.parametrize(
    "tag,c1,ok",
    [("su2", 0.0, False), ("su2", math.pi, False), ("su2", 1.0, True), ("su11", 0.0, False), ("su11", -0.5, False),
     ("su11", 3.0, True)],
)
def test_check_interior(tag, c1, ok):
    if ok:
        check_interior(tag, c1)
    else:
        with pytest.raises(DomainError, match="singular boundary"):
            check_interior(tag, c1)


def test_guard_band():
    with pytest.raises(DomainError):
        check_interior("su2", 5e-5, 1e-4)
    check_interior("su2", 2e-4, 1e-4)
