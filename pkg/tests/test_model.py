import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from torus_hopf import LatticeParams, LatticeState, Variant, coupling_matrix, jacobian, rhs
from torus_hopf.model import node_index, param_derivative
from torus_hopf.spectral import mode_vectors
from torus_hopf.symmetry import act, generators

from conftest import random_params


@pytest.mark.parametrize("N", [2, 4, 1, 3.5])
def test_even_or_small_N_rejected(N):
    with pytest.raises(ValueError):
        LatticeParams(N)


@pytest.mark.parametrize("field", ["nu", "b"])
@pytest.mark.parametrize("value", [0.0, -1.0])
def test_nonpositive_nu_b_rejected(field, value):
    with pytest.raises(ValueError):
        LatticeParams(3, **{field: value})


def test_variant_parse():
    assert Variant.parse("VDPL") is Variant.VDPL
    with pytest.raises(ValueError):
        Variant.parse("other")


def test_node_index_flattening():
    assert node_index(1, 2, 0, 3) == 1 * 9 + 2 * 3
    assert node_index(-1, 3, 4, 3) == node_index(2, 0, 1, 3)


@pytest.mark.parametrize("variant", ["vdp", "vdpl"])
def test_origin_is_equilibrium(variant, rng):
    for _ in range(10):
        p = random_params(rng, variant=variant)
        assert np.all(rhs(p, np.zeros(p.dim)) == 0.0)


def test_decoupled_vdpl_sync_state():
    p = LatticeParams(3, a=0.3, b=1.5, variant="vdpl")
    c = 0.7
    d = rhs(p, LatticeState(np.full(27, c), np.zeros(27)))
    assert isinstance(d, LatticeState)
    np.testing.assert_allclose(d.x, -c**3 - c**2 + 0.3 * c, rtol=1e-15)
    np.testing.assert_allclose(d.y, 1.5 * c, rtol=1e-15)


def test_vdp_mode_state_gives_minus_K_y():
    p = LatticeParams(3, delta=1.0)
    x1, _ = mode_vectors((1, 0, 0), 3)
    z = np.concatenate([np.zeros(27), x1])
    d = rhs(p, z)
    np.testing.assert_allclose(d[:27], -4.0 * x1, atol=1e-14)
    assert np.all(d[27:] == 0.0)


def test_dimension_mismatch_is_an_error():
    with pytest.raises(ValueError):
        rhs(LatticeParams(3), np.zeros(10))


@pytest.mark.parametrize("variant", ["vdp", "vdpl"])
@pytest.mark.parametrize("N", [3, 5])
def test_rhs_equivariant_bit_exact(variant, N, rng):
    p = random_params(rng, N=N, variant=variant)
    for _ in range(100):
        z = rng.standard_normal(p.dim)
        for g in generators(N, p.variant.dihedral):
            assert np.array_equal(rhs(p, act(g, z)), act(g, rhs(p, z)))


@settings(max_examples=40, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2), st.sampled_from(["vdp", "vdpl"]),
       st.integers(0, 2**32 - 1))
def test_rhs_equivariant_property(d, z, e, variant, seed):
    p = LatticeParams(3, d, z, e, a=0.1, variant=variant)
    s = np.random.default_rng(seed).standard_normal(p.dim)
    for g in generators(3, p.variant.dihedral):
        assert np.array_equal(rhs(p, act(g, s)), act(g, rhs(p, s)))


@pytest.mark.parametrize("variant", ["vdp", "vdpl"])
def test_jacobian_matches_finite_differences(variant, rng):
    for _ in range(20):
        p = random_params(rng, variant=variant)
        z = rng.standard_normal(p.dim)
        J = jacobian(p, z)
        h = 1e-6
        fd = np.column_stack([(rhs(p, z + h * e) - rhs(p, z - h * e)) / (2 * h)
                              for e in np.eye(p.dim)])
        assert np.abs(J - fd).max() <= 1e-6 * max(1.0, np.abs(J).max())


def test_param_derivatives_match_finite_differences(rng):
    p = random_params(rng, variant="vdp")
    z = rng.standard_normal(p.dim)
    h = 1e-6
    for name in ("nu", "a"):
        fd = (rhs(p.with_(**{name: getattr(p, name) + h}), z)
              - rhs(p.with_(**{name: getattr(p, name) - h}), z)) / (2 * h)
        np.testing.assert_allclose(param_derivative(p, z, name), fd, atol=1e-8)


def test_jacobian_lower_blocks():
    p = LatticeParams(3, 0.2, -0.1, 0.3, b=1.7, variant="vdpl")
    J = jacobian(p)
    n = p.n_nodes
    assert np.array_equal(J[n:, :n], 1.7 * np.eye(n))
    assert np.all(J[n:, n:] == 0.0)


def test_uncoupled_vdp_jacobian_spectrum():
    p = LatticeParams(3, nu=1.3, a=0.4, b=2.0)
    lam = np.linalg.eigvals(jacobian(p))
    roots = np.roots([1.0, -p.nu * p.a, p.b])
    for r in roots:
        assert np.sum(np.abs(lam - r) < 1e-6) == 27


def test_coupling_matrix_examples():
    assert np.array_equal(coupling_matrix(LatticeParams(3)), np.eye(27))
    C = coupling_matrix(LatticeParams(3, delta=1.0))
    ev = np.sort(np.linalg.eigvalsh(C))
    np.testing.assert_allclose(ev[:9], 1.0, atol=1e-12)
    np.testing.assert_allclose(ev[9:], 4.0, atol=1e-12)
    Cl = coupling_matrix(LatticeParams(3, delta=1.0, variant="vdpl"))
    assert np.allclose(Cl @ np.ones(27), 0.0)


@pytest.mark.parametrize("variant,row_sum", [("vdp", 1.0), ("vdpl", 0.0)])
def test_coupling_matrix_structure(variant, row_sum, rng):
    p = random_params(rng, N=5, variant=variant)
    C = coupling_matrix(p)
    np.testing.assert_allclose(C.sum(axis=1), row_sum, atol=1e-14)
    assert (np.count_nonzero(C, axis=1) <= 7).all()
    if variant == "vdp":
        assert np.array_equal(C, C.T)


def test_coupling_matrix_is_a_copy():
    p = LatticeParams(3, delta=0.5)
    C = coupling_matrix(p)
    C[0, 0] = 99.0
    assert coupling_matrix(p)[0, 0] != 99.0
