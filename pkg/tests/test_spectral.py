import math

import numpy as np
import pytest

from torus_hopf import LatticeParams, coupling_matrix, jacobian
from torus_hopf.spectral import (all_modes, as_mode, bifurcation_catalog, bifurcation_record,
                                 canonical_modes, closed_form_spectrum, critical_a_vdpl,
                                 eigenvalues_vdp, eigenvalues_vdpl, g_of_mode, h_of_mode,
                                 is_canonical, k_of_mode, limit_periods_vdpl, mode_basis,
                                 mode_project, mode_vectors, negate_mode, periods_resonant,
                                 rational_ratio)

from conftest import random_params


def match_spectra(a, b):
    """Max distance of a greedy pairing of two equal-size multisets."""
    a = list(np.asarray(a))
    worst = 0.0
    for z in b:
        i = int(np.argmin(np.abs(np.asarray(a) - z)))
        worst = max(worst, abs(a.pop(i) - z))
    return worst


def test_mode_helpers():
    assert as_mode((4, -1, 3), 3) == (1, 2, 0)
    assert negate_mode((1, 2, 0), 3) == (2, 1, 0)
    assert is_canonical((0, 0, 0), 3)
    assert is_canonical((1, 2, 0), 3) != is_canonical((2, 1, 0), 3)
    for N in (3, 5, 7):
        assert len(canonical_modes(N)) == (N**3 + 1) // 2


def test_k_examples(rng):
    p = random_params(rng)
    assert k_of_mode(p, (0, 0, 0)) == 1.0
    assert k_of_mode(LatticeParams(3, delta=1.0), (1, 0, 0)) == pytest.approx(4.0, abs=1e-14)
    q = random_params(rng, N=5)
    for t in all_modes(5):
        assert k_of_mode(q, t) == pytest.approx(k_of_mode(q, negate_mode(t, 5)), abs=1e-14)


def test_sign_flip_invariance(rng):
    p = random_params(rng, N=5, variant="vdpl")
    for t in all_modes(5):
        for i in range(3):
            s = list(t)
            s[i] = (5 - s[i]) % 5
            assert k_of_mode(p, s) == pytest.approx(k_of_mode(p, t), abs=1e-14)
            assert critical_a_vdpl(p, s) == pytest.approx(critical_a_vdpl(p, t), abs=1e-14)


def test_g_h_examples(rng):
    p = random_params(rng, variant="vdpl")
    assert g_of_mode(p, (0, 0, 0)) == 0.0
    assert h_of_mode(p, (0, 0, 0), 0.37) == 0.37
    assert g_of_mode(LatticeParams(3, delta=1.0), (1, 0, 0)) == pytest.approx(math.sqrt(3) / 2, abs=1e-15)
    for N in (3, 5):
        q = random_params(rng, N=N, variant="vdpl")
        for t in all_modes(N):
            assert h_of_mode(q, t, critical_a_vdpl(q, t)) == pytest.approx(0.0, abs=1e-15)


def test_critical_a_example():
    assert critical_a_vdpl(LatticeParams(3, 1.0, 1.0, 0.0), (1, 1, 0)) == pytest.approx(3.0, abs=1e-14)
    assert critical_a_vdpl(LatticeParams(3, 0.3, 0.2, 0.1), (0, 0, 0)) == 0.0


def test_eigenvalues_vdp_examples():
    p = LatticeParams(3, delta=1.0, b=1.0)
    lam = eigenvalues_vdp(p, (1, 0, 0), 0.0)
    np.testing.assert_allclose(sorted(lam, key=lambda z: z.imag), [-2j, 2j], atol=1e-14)
    q = LatticeParams(3, nu=1.5, a=0.2, b=1.3)
    for t in all_modes(3):
        np.testing.assert_allclose(np.sort_complex(eigenvalues_vdp(q, t)),
                                   np.sort_complex(np.roots([1, -q.nu * q.a, q.b])), atol=1e-14)


def test_eigenvalues_vdp_full_jacobian():
    p = LatticeParams(3, delta=1.0, nu=1.0, a=0.1, b=2.0)
    assert match_spectra(np.linalg.eigvals(jacobian(p)), closed_form_spectrum(p)) <= 1e-8


def test_eigenvalues_vdpl_examples():
    p = LatticeParams(3, variant="vdpl")
    np.testing.assert_allclose(sorted(eigenvalues_vdpl(p, (0, 0, 0), 0.0), key=lambda z: z.imag),
                               [-1j, 1j], atol=1e-15)
    q = LatticeParams(3, 0.3, -0.2, 0.1, a=0.05, variant="vdpl")
    assert match_spectra(np.linalg.eigvals(jacobian(q)), closed_form_spectrum(q)) <= 1e-8


@pytest.mark.parametrize("variant", ["vdp", "vdpl"])
@pytest.mark.parametrize("N", [3, 5])
def test_spectral_oracle_random(variant, N, rng):
    for _ in range(3):
        p = random_params(rng, N=N, variant=variant)
        lam = closed_form_spectrum(p)
        assert lam.size == p.dim
        assert match_spectra(np.linalg.eigvals(jacobian(p)), lam) <= 1e-7


def test_vdp_purely_imaginary_at_zero(rng):
    p = random_params(rng, N=5, scale=0.1).with_(a=0.0)
    assert np.abs(closed_form_spectrum(p).real).max() <= 1e-10


@pytest.mark.parametrize("N", [3, 5])
def test_vdpl_crossing_at_critical_a(N, rng):
    p = random_params(rng, N=N, variant="vdpl")
    for t in all_modes(N):
        ac = critical_a_vdpl(p, t)
        lam = eigenvalues_vdpl(p, t, ac)
        # the whole root pair of this mode sits on the imaginary axis
        assert np.abs(lam.real).max() < 1e-12
        assert eigenvalues_vdpl(p, t, ac - 1e-3).real.max() < 0
        P1, P2 = limit_periods_vdpl(p, t)
        assert sorted(np.abs(lam.imag)) == pytest.approx(
            sorted([2 * math.pi / P1, 2 * math.pi / P2]), abs=1e-12)
        G = g_of_mode(p, t)
        R = math.sqrt(G * G + 4 * p.b)
        h = 1e-6
        def roots(a):
            return np.sort_complex(eigenvalues_vdpl(p, t, a) * 1j) / 1j  # sorted by imag

        lam = roots(ac)
        d = (roots(ac + h).real - roots(ac - h).real) / (2 * h)
        # each root crosses with speed |Im lambda| / sqrt(G^2 + 4b); the two speeds sum to 1
        np.testing.assert_allclose(d, np.abs(lam.imag) / R, atol=1e-6)
        assert d.min() > 0
        assert d.sum() == pytest.approx(1.0, abs=1e-6)


def test_vdpl_crossing_speed_half_without_drift():
    p = LatticeParams(3, 0.2, -0.1, 0.3, variant="vdpl")
    h = 1e-6
    for t in [(0, 0, 0)]:
        d = (eigenvalues_vdpl(p, t, h).real - eigenvalues_vdpl(p, t, -h).real) / (2 * h)
        np.testing.assert_allclose(d, 0.5, atol=1e-6)


def test_vdp_crossing_direction():
    p = LatticeParams(3, delta=0.2, nu=1.7)
    h = 1e-6
    for t in all_modes(3):
        d = (eigenvalues_vdp(p, t, h)[0].real - eigenvalues_vdp(p, t, -h)[0].real) / (2 * h)
        assert d == pytest.approx(p.nu / 2, abs=1e-6)


def test_limit_periods_examples():
    p = LatticeParams(3, variant="vdpl")
    assert limit_periods_vdpl(p, (0, 0, 0)) == pytest.approx((2 * math.pi, 2 * math.pi))
    # G = 1 on mode (1,0,0) needs delta sin(2 pi / 3) = 1
    q = LatticeParams(3, delta=2 / math.sqrt(3), b=2.0, variant="vdpl")
    assert g_of_mode(q, (1, 0, 0)) == pytest.approx(1.0, abs=1e-15)
    P1, P2 = limit_periods_vdpl(q, (1, 0, 0))
    assert P1 == pytest.approx(math.pi, abs=1e-12)
    assert P2 == pytest.approx(2 * math.pi, abs=1e-12)
    assert periods_resonant(q, (1, 0, 0))


def test_rational_ratio():
    assert rational_ratio(0.5) == 0.5
    assert rational_ratio(math.sqrt(2)) is None
    assert rational_ratio(3 / 7 + 1e-10) is not None


def test_mode_basis_trivial_mode():
    B = mode_basis(LatticeParams(3), (0, 0, 0))
    assert B.dim == 1
    np.testing.assert_allclose(np.abs(B.vectors[0]), 1 / math.sqrt(27), atol=1e-15)


@pytest.mark.parametrize("N", [3, 5])
def test_cyclic_bases_complete_and_orthonormal(N):
    V = np.vstack([mode_basis(N, t, dihedral=False).vectors for t in canonical_modes(N)])
    assert V.shape == (N**3, N**3)
    assert np.abs(V @ V.T - np.eye(N**3)).max() <= 1e-12


def test_dihedral_dimensions():
    dims = {mode_basis(5, t, dihedral=True).dim for t in all_modes(5)}
    assert dims == {1, 2, 4, 8}
    assert mode_basis(5, (1, 2, 3), dihedral=True).dim == 8


@pytest.mark.parametrize("N", [3, 5])
def test_coupling_eigenvectors(N, rng):
    p = random_params(rng, N=N)
    C = coupling_matrix(p)
    for t in all_modes(N):
        x1, x2 = mode_vectors(t, N)
        np.testing.assert_allclose(C @ x1, k_of_mode(p, t) * x1, atol=1e-12)
        B = mode_basis(p, t).vectors
        CB = B @ C.T
        resid = CB - (CB @ B.T) @ B
        assert np.linalg.norm(resid) <= 1e-10 * max(1.0, np.linalg.norm(CB))


def test_mode_project_shapes():
    B = mode_basis(3, (1, 1, 0), dihedral=True)
    x = B.vectors[0] * 2.0
    np.testing.assert_allclose(mode_project(B, x)[0], 2.0)
    assert mode_project(B, np.zeros(54)).shape == (2, B.dim)
    with pytest.raises(ValueError):
        mode_project(B, np.zeros(7))


def test_catalog_uncoupled_vdp():
    cat = bifurcation_catalog(LatticeParams(3))
    assert len(cat) == 14
    for r in cat:
        assert r.critical_a == 0.0
        assert r.limit_frequency == pytest.approx(1.0)
        assert r.limit_frequency * r.limit_periods[0] == pytest.approx(2 * math.pi)


def test_catalog_vdpl_distinct_values():
    p = LatticeParams(3, 0.3, -0.2, 0.1, variant="vdpl")
    cat = bifurcation_catalog(p)
    assert len(cat) == 14
    for r in cat:
        assert r.critical_a == pytest.approx(critical_a_vdpl(p, r.mode), abs=1e-15)
        assert len(r.symmetries) == 1
    assert [r.critical_a for r in cat] == sorted(r.critical_a for r in cat)


def test_catalog_branch_counts_and_skip_negative_K():
    rec = bifurcation_record(LatticeParams(3, delta=0.2), (1, 1, 1))
    names = [h.name for h in rec.symmetries]
    assert len(names) == 27
    assert rec.branches_per_symmetry[names.index("(Z3 x Z3 x Z3)^(1,1,1)")] == 8
    assert bifurcation_record(LatticeParams(3, delta=-1.0), (1, 0, 0)) is None
    assert len(bifurcation_catalog(LatticeParams(3, delta=-1.0))) < 14


def test_catalog_parallel_matches_serial():
    p = LatticeParams(5, 0.3, -0.2, 0.1, variant="vdpl")
    a = [r.to_dict() for r in bifurcation_catalog(p)]
    b = [r.to_dict() for r in bifurcation_catalog(p, workers=4)]
    assert a == b
