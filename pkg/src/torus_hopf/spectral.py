"""Discrete Fourier modes of the lattice and the closed-form spectrum.

Every linear object in the model commutes with lattice shifts, so the origin
Jacobian splits into 2x2 (vdp) or realified 2x2 complex (vdpl) blocks labelled
by a wavevector ``t = (t1, t2, t3)`` in ``Z_N^3``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .model import LatticeParams, Variant, node_grid

Mode = tuple[int, int, int]

RANK_TOL = 1e-10
RESONANCE_TOL = 1e-9
RESONANCE_MAX_DENOMINATOR = 64


def as_mode(t: Iterable[int], N: int) -> Mode:
    t = tuple(int(v) % N for v in t)
    if len(t) != 3:
        raise ValueError(f"mode index needs three components, got {t!r}")
    return t  # type: ignore[return-value]


def negate_mode(t: Mode, N: int) -> Mode:
    return tuple((-v) % N for v in t)  # type: ignore[return-value]


def is_canonical(t: Mode, N: int) -> bool:
    """True when ``t`` is the lexicographically smaller of ``{t, -t}``."""
    t = as_mode(t, N)
    return t <= negate_mode(t, N)


def all_modes(N: int) -> list[Mode]:
    return list(itertools.product(range(N), repeat=3))


def canonical_modes(N: int) -> list[Mode]:
    """One representative per pair ``t ~ -t``; ``(N^3 + 1) / 2`` modes."""
    return [t for t in all_modes(N) if is_canonical(t, N)]


def _angles(t: Sequence[int], N: int) -> np.ndarray:
    return 2.0 * np.pi * np.asarray(t, float) / N


# -- closed-form scalars --------------------------------------------------------


def k_of_mode(params: LatticeParams, t: Sequence[int]) -> float:
    """Eigenvalue of the vdp coupling matrix on mode ``t``."""
    th = _angles(t, params.N)
    return float(1.0 + 2.0 * np.dot(params.couplings, 1.0 - np.cos(th)))


def critical_a_vdpl(params: LatticeParams, t: Sequence[int]) -> float:
    th = _angles(t, params.N)
    return float(np.dot(params.couplings, 1.0 - np.cos(th)))


def g_of_mode(params: LatticeParams, t: Sequence[int]) -> float:
    th = _angles(t, params.N)
    return float(np.dot(params.couplings, np.sin(th)))


def h_of_mode(params: LatticeParams, t: Sequence[int], a: float | None = None) -> float:
    a = params.a if a is None else a
    return a - critical_a_vdpl(params, t)


def eigenvalues_vdp(params: LatticeParams, t: Sequence[int], a: float | None = None) -> np.ndarray:
    a = params.a if a is None else a
    tr = params.nu * a
    disc = np.sqrt(complex(tr * tr - 4.0 * params.b * k_of_mode(params, t)))
    return np.array([(tr + disc) / 2.0, (tr - disc) / 2.0])


def eigenvalues_vdpl(params: LatticeParams, t: Sequence[int], a: float | None = None) -> np.ndarray:
    """Roots of ``lambda^2 - (H - iG) lambda + b``; their conjugates belong to ``-t``."""
    s = complex(h_of_mode(params, t, a), -g_of_mode(params, t))
    disc = np.sqrt(s * s - 4.0 * params.b)
    return np.array([(s + disc) / 2.0, (s - disc) / 2.0])


def closed_form_spectrum(params: LatticeParams, a: float | None = None) -> np.ndarray:
    """All ``2 N^3`` origin eigenvalues, with multiplicity."""
    N = params.N
    out = []
    if params.variant is Variant.VDP:
        for t in all_modes(N):
            out.extend(eigenvalues_vdp(params, t, a))
    else:
        for t in canonical_modes(N):
            lam = eigenvalues_vdpl(params, t, a)
            out.extend(lam)
            if any(t):
                out.extend(np.conj(lam))
    return np.array(out)


def limit_periods_vdpl(params: LatticeParams, t: Sequence[int]) -> tuple[float, float]:
    G = g_of_mode(params, t)
    root = math.sqrt(G * G + 4.0 * params.b)
    return abs(4.0 * math.pi / (G + root)), abs(4.0 * math.pi / (G - root))


def rational_ratio(x: float, tol: float = RESONANCE_TOL,
                   max_denominator: int = RESONANCE_MAX_DENOMINATOR) -> Fraction | None:
    """Small-denominator fraction within ``tol`` of ``x``, else ``None``."""
    frac = Fraction(x).limit_denominator(max_denominator)
    return frac if abs(float(frac) - x) <= tol else None


def periods_resonant(params: LatticeParams, t: Sequence[int]) -> bool:
    p1, p2 = limit_periods_vdpl(params, t)
    return rational_ratio(p1 / p2) is not None


# -- mode bases -----------------------------------------------------------------


@dataclass(frozen=True)
class ModeBasis:
    mode: Mode
    vectors: np.ndarray  # (k, N^3), orthonormal rows
    dihedral: bool

    @property
    def dim(self) -> int:
        return self.vectors.shape[0]


def mode_vectors(t: Sequence[int], N: int) -> tuple[np.ndarray, np.ndarray]:
    """Unnormalized ``cos`` and ``sin`` lattice waves with wavevector ``t``."""
    phase = node_grid(N) @ _angles(t, N)
    return np.cos(phase), np.sin(phase)


def sign_patterns(t: Mode, N: int) -> list[Mode]:
    t1, t2, t3 = t
    return [as_mode(p, N) for p in ((t1, t2, t3), (t1, -t2, t3), (t1, t2, -t3), (t1, -t2, -t3))]


def _orthonormalize(vectors: Iterable[np.ndarray], tol: float = RANK_TOL) -> np.ndarray:
    basis: list[np.ndarray] = []
    for v in vectors:
        w = np.array(v, float)
        scale = np.linalg.norm(w)
        if scale == 0.0:
            continue
        for _ in range(2):
            for q in basis:
                w -= np.dot(q, w) * q
        nrm = np.linalg.norm(w)
        if nrm > tol * max(scale, 1.0):
            basis.append(w / nrm)
    return np.array(basis)


def mode_basis(params: LatticeParams | int, t: Sequence[int], dihedral: bool | None = None) -> ModeBasis:
    """Orthonormal basis of the invariant subspace attached to ``t``.

    The cyclic subspace is ``span(cos, sin)``; the dihedral one adds the waves
    of ``(t1,-t2,t3)``, ``(t1,t2,-t3)`` and ``(t1,-t2,-t3)``. Duplicated or
    vanishing waves are removed by rank-revealing Gram-Schmidt.
    """
    if isinstance(params, LatticeParams):
        N = params.N
        if dihedral is None:
            dihedral = params.variant.dihedral
    else:
        N = int(params)
        dihedral = bool(dihedral)
    t = as_mode(t, N)
    patterns = sign_patterns(t, N) if dihedral else [t]
    raw = []
    for p in patterns:
        raw.extend(mode_vectors(p, N))
    return ModeBasis(t, _orthonormalize(raw), dihedral)


def mode_project(basis: ModeBasis, state: np.ndarray) -> np.ndarray:
    """Coordinates of ``state`` in ``basis``.

    A node field of length ``N^3`` gives shape ``(k,)``; a full ``[x, y]``
    state of length ``2 N^3`` gives shape ``(2, k)``.
    """
    s = np.asarray(state, float)
    n = basis.vectors.shape[1]
    if s.shape[-1] == n:
        return s @ basis.vectors.T
    if s.shape[-1] == 2 * n:
        return np.stack([s[..., :n] @ basis.vectors.T, s[..., n:] @ basis.vectors.T], axis=-2)
    raise ValueError(f"state length {s.shape[-1]} matches neither N^3={n} nor 2N^3")


# -- catalog --------------------------------------------------------------------


@dataclass(frozen=True)
class BifurcationRecord:
    mode: Mode
    variant: Variant
    critical_a: float
    limit_frequency: float
    limit_periods: tuple[float, ...]
    symmetries: tuple = ()
    branches_per_symmetry: tuple[int, ...] = ()
    K: float | None = None
    G: float | None = None
    resonant: bool = False
    extra: dict = field(default_factory=dict, compare=False)

    def to_dict(self) -> dict:
        return {
            "mode": list(self.mode),
            "variant": self.variant.value,
            "critical_a": self.critical_a,
            "K": self.K,
            "G": self.G,
            "limit_frequency": self.limit_frequency,
            "limit_periods": list(self.limit_periods),
            "resonant": self.resonant,
            "symmetries": [h.name for h in self.symmetries],
            "branches_per_symmetry": list(self.branches_per_symmetry),
        }


def bifurcation_record(params: LatticeParams, t: Sequence[int]) -> BifurcationRecord | None:
    """Catalog row for mode ``t``; ``None`` for a vdp mode with ``K_t <= 0``."""
    from .symmetry import branch_count, symmetry_classes

    N = params.N
    t = as_mode(t, N)
    classes = tuple(symmetry_classes(t, params.variant, N))
    counts = tuple(branch_count(h, N, params.variant) for h in classes)
    if params.variant is Variant.VDP:
        K = k_of_mode(params, t)
        if K <= 0:
            return None
        omega = math.sqrt(params.b * K)
        return BifurcationRecord(t, params.variant, 0.0, omega, (2.0 * math.pi / omega,),
                                 classes, counts, K=K)
    p1, p2 = limit_periods_vdpl(params, t)
    return BifurcationRecord(t, params.variant, critical_a_vdpl(params, t), 2.0 * math.pi / p1,
                             (p1, p2), classes, counts, G=g_of_mode(params, t),
                             resonant=periods_resonant(params, t))


def bifurcation_catalog(params: LatticeParams, workers: int = 1) -> list[BifurcationRecord]:
    """Catalog over canonical modes, sorted by ``(critical_a, mode)``."""
    modes = canonical_modes(params.N)
    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(lambda t: bifurcation_record(params, t), modes))
    else:
        rows = [bifurcation_record(params, t) for t in modes]
    return sorted((r for r in rows if r is not None), key=lambda r: (r.critical_a, r.mode))
