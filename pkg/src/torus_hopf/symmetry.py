"""Lattice symmetry groups, twisted subgroups and orbit symmetry checks.

Group elements of ``D_N^3`` are stored per axis as ``rho^r kappa^f`` and act
on node fields by ``(g.x)_alpha = x_{s(alpha + r)}`` with ``s = (-1)^f``.
This matches the generator actions ``(rho.x)_alpha = x_{alpha+1}`` and
``(kappa.x)_alpha = x_{-alpha}``.

Twisted subgroups are products ``(H1 x H2 x H3)^(phi1,phi2,phi3)`` whose
twists are carried as exact fractions of a full turn. A ``T``-periodic orbit
``x(s)`` has symmetry ``H^phi`` when ``g.x(s - theta T / 2pi) = x(s)`` for
every ``(g, theta)`` in ``H^phi``; with this sign the wave
``cos(w s) x1_t - sin(w s) x2_t`` carries the twist ``t``.
"""

from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import TYPE_CHECKING, Iterable, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .model import LatticeParams, LatticeState, Variant, node_grid
from .spectral import all_modes, as_mode, mode_basis

if TYPE_CHECKING:
    from .orbits import PeriodicOrbit

CONVERGED_RESIDUAL = 1e-8


class NotConvergedError(ValueError):
    """Raised when an orbit is not converged enough to be checked."""


# -- group elements -------------------------------------------------------------


@dataclass(frozen=True)
class GroupElement:
    rot: tuple[int, int, int]
    flip: tuple[int, int, int]
    N: int

    def __post_init__(self):
        object.__setattr__(self, "rot", tuple(int(r) % self.N for r in self.rot))
        object.__setattr__(self, "flip", tuple(int(f) % 2 for f in self.flip))

    @classmethod
    def identity(cls, N: int) -> "GroupElement":
        return cls((0, 0, 0), (0, 0, 0), N)

    @classmethod
    def shift(cls, axis: int, N: int, steps: int = 1) -> "GroupElement":
        rot = [0, 0, 0]
        rot[axis] = steps
        return cls(tuple(rot), (0, 0, 0), N)

    @classmethod
    def reflection(cls, axis: int, N: int) -> "GroupElement":
        flip = [0, 0, 0]
        flip[axis] = 1
        return cls((0, 0, 0), tuple(flip), N)

    def __mul__(self, other: "GroupElement") -> "GroupElement":
        if other.N != self.N:
            raise ValueError("cannot compose elements of different lattices")
        rot = tuple(r + (-1) ** f * q for r, f, q in zip(self.rot, self.flip, other.rot))
        flip = tuple(f ^ g for f, g in zip(self.flip, other.flip))
        return GroupElement(rot, flip, self.N)

    def inverse(self) -> "GroupElement":
        return GroupElement(tuple(-((-1) ** f) * r for r, f in zip(self.rot, self.flip)),
                            self.flip, self.N)

    @property
    def is_identity(self) -> bool:
        return not any(self.rot) and not any(self.flip)

    def permutation(self) -> np.ndarray:
        return _permutation(self.rot, self.flip, self.N)


@lru_cache(maxsize=4096)
def _permutation(rot, flip, N) -> np.ndarray:
    coords = node_grid(N)
    src = np.empty_like(coords)
    for i in range(3):
        s = -1 if flip[i] else 1
        src[:, i] = (s * (coords[:, i] + rot[i])) % N
    perm = src[:, 0] * N * N + src[:, 1] * N + src[:, 2]
    perm.setflags(write=False)
    return perm


def act(g: GroupElement, state):
    """Apply ``g`` to a node field, a ``[x, y]`` vector or a :class:`LatticeState`.

    Trailing-axis arrays of either length are permuted node-wise, so a stack
    of states ``(M, 2N^3)`` is handled in one call.
    """
    perm = g.permutation()
    n = perm.size
    if isinstance(state, LatticeState):
        return LatticeState(np.asarray(state.x)[..., perm], np.asarray(state.y)[..., perm])
    s = np.asarray(state)
    if s.shape[-1] == n:
        return s[..., perm]
    if s.shape[-1] == 2 * n:
        return np.concatenate([s[..., :n][..., perm], s[..., n:][..., perm]], axis=-1)
    raise ValueError(f"state length {s.shape[-1]} does not match N^3={n} or 2N^3")


def generators(N: int, dihedral: bool) -> list[GroupElement]:
    gens = [GroupElement.shift(i, N) for i in range(3)]
    if dihedral:
        gens += [GroupElement.reflection(i, N) for i in range(3)]
    return gens


def group_elements(N: int, dihedral: bool) -> Iterable[GroupElement]:
    flips = itertools.product((0, 1), repeat=3) if dihedral else [(0, 0, 0)]
    for f in flips:
        for r in itertools.product(range(N), repeat=3):
            yield GroupElement(r, f, N)


def group_order(N: int, variant: Variant) -> int:
    return 8 * N**3 if Variant.parse(variant).dihedral else N**3


# -- twisted subgroups ----------------------------------------------------------

_MINUS = "-"


@dataclass(frozen=True)
class Factor:
    """A twisted subgroup of one ``D_N`` factor.

    ``kind`` is ``"Z"`` (rotations, twist ``rho -> e^{2 pi i twist / N}``),
    ``"D1"`` (``{1, kappa}``) or ``"DN"`` (whole ``D_N``, rotations untwisted);
    for the last two ``twist`` is ``+1`` or ``-1``, the image of ``kappa``.
    """

    kind: str
    twist: int

    def order(self, N: int) -> int:
        return {"Z": N, "D1": 2, "DN": 2 * N}[self.kind]

    def contains(self, r: int, f: int) -> bool:
        if self.kind == "Z":
            return f == 0
        if self.kind == "D1":
            return r == 0
        return True

    def phase(self, r: int, f: int, N: int) -> Fraction:
        if self.kind == "Z":
            return Fraction(r * self.twist, N) % 1
        return Fraction(1, 2) if (f and self.twist < 0) else Fraction(0)

    def generators(self, N: int) -> list[tuple[int, int]]:
        return {"Z": [(1, 0)], "D1": [(0, 1)], "DN": [(1, 0), (0, 1)]}[self.kind]

    def symbol(self, N: int) -> tuple[str, str]:
        if self.kind == "Z":
            return f"Z{N}", str(self.twist % N)
        if self.kind == "D1":
            return "D1", "+" if self.twist > 0 else _MINUS
        return f"D{N}", "1" if self.twist > 0 else _MINUS


@dataclass(frozen=True)
class TwistedSubgroup:
    factors: tuple[Factor, Factor, Factor]
    N: int
    full: bool = False

    @classmethod
    def full_group(cls, N: int) -> "TwistedSubgroup":
        dn = Factor("DN", 1)
        return cls((dn, dn, dn), N, full=True)

    @property
    def order(self) -> int:
        return math.prod(f.order(self.N) for f in self.factors)

    @property
    def name(self) -> str:
        if self.full:
            return "G x S1"
        syms = [f.symbol(self.N) for f in self.factors]
        return "(" + " x ".join(s[0] for s in syms) + ")^(" + ",".join(s[1] for s in syms) + ")"

    def __str__(self) -> str:
        return self.name

    def contains(self, g: GroupElement, phase: Fraction) -> bool:
        """Membership of ``(g, e^{2 pi i phase})``."""
        if self.full:
            return True
        if not all(f.contains(r, s) for f, r, s in zip(self.factors, g.rot, g.flip)):
            return False
        return self.phase_of(g) == Fraction(phase) % 1

    def phase_of(self, g: GroupElement) -> Fraction:
        return sum((f.phase(r, s, self.N) for f, r, s in zip(self.factors, g.rot, g.flip)),
                   Fraction(0)) % 1

    def generators(self) -> list[tuple[GroupElement, Fraction]]:
        """Generators ``(g, phase)``; ``phase`` is in units of a full turn."""
        out = []
        for axis, f in enumerate(self.factors):
            for r, s in f.generators(self.N):
                rot = [0, 0, 0]
                flip = [0, 0, 0]
                rot[axis], flip[axis] = r, s
                g = GroupElement(tuple(rot), tuple(flip), self.N)
                out.append((g, self.phase_of(g)))
        return out

    def is_subgroup_of(self, other: "TwistedSubgroup") -> bool:
        if other.full:
            return True
        if self.full:
            return False
        return all(other.contains(g, ph) for g, ph in self.generators())

    def within(self, variant: Variant) -> bool:
        """True when the subgroup lives in the symmetry group of ``variant``."""
        return Variant.parse(variant).dihedral or all(f.kind == "Z" for f in self.factors)


_NAME_RE = re.compile(r"^\s*\(\s*(\w+)\s*x\s*(\w+)\s*x\s*(\w+)\s*\)\s*\^\s*\(([^)]*)\)\s*$")


def parse_subgroup(name: str, N: int) -> TwistedSubgroup:
    """Inverse of :attr:`TwistedSubgroup.name`.

    ``ZN`` and ``DN`` may be written literally or with ``N`` substituted.
    """
    if name.strip() in ("G x S1", "GxS1"):
        return TwistedSubgroup.full_group(N)
    m = _NAME_RE.match(name.replace("×", "x").replace("−", "-"))
    if not m:
        raise ValueError(f"cannot parse subgroup name {name!r}")
    kinds = m.group(1, 2, 3)
    twists = [s.strip() for s in m.group(4).split(",")]
    if len(twists) != 3:
        raise ValueError(f"subgroup {name!r} needs three twists")
    factors = []
    for kind, tw in zip(kinds, twists):
        if kind in ("ZN", f"Z{N}"):
            if not re.fullmatch(r"-?\d+", tw):
                raise ValueError(f"Z factor needs an integer twist, got {tw!r}")
            factors.append(Factor("Z", int(tw) % N))
        elif kind == "D1":
            if tw not in ("+", "-"):
                raise ValueError(f"D1 factor needs '+' or '-', got {tw!r}")
            factors.append(Factor("D1", 1 if tw == "+" else -1))
        elif kind in ("DN", f"D{N}"):
            if tw not in ("1", "+", "-"):
                raise ValueError(f"DN factor needs '1' or '-', got {tw!r}")
            factors.append(Factor("DN", -1 if tw == "-" else 1))
        else:
            raise ValueError(f"unknown factor {kind!r} for N={N}")
    return TwistedSubgroup(tuple(factors), N)


def factor_classes(t_i: int, N: int) -> list[Factor]:
    """Maximal twisted isotropies of one complexified ``D_N`` factor."""
    if t_i % N == 0:
        return [Factor("DN", 1)]
    return [Factor("Z", t_i % N), Factor("D1", 1), Factor("D1", -1)]


def symmetry_classes(t: Sequence[int], variant: Variant, N: int) -> list[TwistedSubgroup]:
    """The spatio-temporal symmetry classes attached to mode ``t``."""
    t = as_mode(t, N)
    if not Variant.parse(variant).dihedral:
        return [TwistedSubgroup(tuple(Factor("Z", ti) for ti in t), N)]
    return [TwistedSubgroup(fs, N)
            for fs in itertools.product(*(factor_classes(ti, N) for ti in t))]


def branch_count(H: TwistedSubgroup, N: int, variant: Variant = Variant.VDP) -> int:
    """Number of branches ``|G| / |H|`` for a symmetry class."""
    order = group_order(N, variant)
    if H.full or order % H.order:
        raise ValueError(f"|{H.name}| = {H.order} does not divide |G| = {order}")
    return order // H.order


# -- fixed-point subspaces ------------------------------------------------------


def fixed_subspace(H: TwistedSubgroup, basis: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Complex vectors ``v`` (coefficients in ``basis``) with ``T_g v = e^{i theta} v``.

    ``basis`` has orthonormal rows spanning an invariant real subspace; the
    result has one row per dimension of the fixed-point space.
    """
    k = basis.shape[0]
    blocks = []
    for g, ph in H.generators():
        Tg = basis @ basis[:, g.permutation()].T
        blocks.append(Tg - np.exp(2j * np.pi * float(ph)) * np.eye(k))
    if not blocks:
        return np.eye(k, dtype=complex)
    A = np.vstack(blocks)
    _, s, vh = np.linalg.svd(A)
    s = np.concatenate([s, np.zeros(max(0, k - s.size))])
    return vh[s < tol].conj()


def fix_dimension(H: TwistedSubgroup, basis: np.ndarray, tol: float = 1e-9) -> int:
    return fixed_subspace(H, basis, tol).shape[0]


def spatial_kernel(H: TwistedSubgroup, variant: Variant = Variant.VDP) -> list[GroupElement]:
    """Elements of ``H`` with trivial twist; they fix a symmetric orbit pointwise in time."""
    N = H.N
    return [g for g in group_elements(N, Variant.parse(variant).dihedral)
            if H.contains(g, Fraction(0))]


def spatial_fixed_basis(H: TwistedSubgroup, variant: Variant = Variant.VDP) -> np.ndarray:
    """Orthonormal columns spanning ``Fix(ker phi)`` in the full ``[x, y]`` space.

    This subspace is invariant under the flow of an equivariant system, so
    orbits with symmetry ``H`` can be searched inside it.
    """
    N = H.N
    n = N**3
    orbit_of = -np.ones(n, dtype=int)
    perms = [g.permutation() for g in spatial_kernel(H, variant)]
    cols = []
    for i in range(n):
        if orbit_of[i] >= 0:
            continue
        members = np.unique([perm[i] for perm in perms])
        orbit_of[members] = len(cols)
        v = np.zeros(n)
        v[members] = 1.0 / np.sqrt(members.size)
        cols.append(v)
    P = np.array(cols).T
    Z = np.zeros_like(P)
    return np.block([[P, Z], [Z, P]])


def _candidate_factors(N: int, dihedral: bool) -> list[Factor]:
    out = [Factor("Z", s) for s in range(N)]
    if dihedral:
        out += [Factor("D1", 1), Factor("D1", -1), Factor("DN", 1), Factor("DN", -1)]
    return out


def _canonical_name(H: TwistedSubgroup, dihedral: bool) -> str:
    """Name of a class up to conjugacy.

    In ``D_N`` conjugating by ``kappa`` sends ``Z^s`` to ``Z^{-s}``; for the
    cyclic group the two twists belong to a conjugate pair of complex
    representations and are identified as well.
    """
    N = H.N
    if dihedral:
        fs = tuple(Factor("Z", min(f.twist % N, -f.twist % N)) if f.kind == "Z" else f
                   for f in H.factors)
        return TwistedSubgroup(fs, N).name
    tw = tuple(f.twist % N for f in H.factors)
    neg = tuple(-v % N for v in tw)
    return TwistedSubgroup(tuple(Factor("Z", v) for v in min(tw, neg)), N).name


def maximal_isotropies_bruteforce(t: Sequence[int], variant: Variant, N: int) -> set[str]:
    """Maximal twisted isotropies in the complexified mode space of ``t``.

    Enumerates every product of per-factor twisted subgroups, keeps those
    with a nonzero fixed vector and discards any strictly contained in
    another such candidate. Names are returned up to conjugacy.
    """
    dihedral = Variant.parse(variant).dihedral
    basis = mode_basis(N, t, dihedral=dihedral).vectors
    cands = [TwistedSubgroup(fs, N)
             for fs in itertools.product(_candidate_factors(N, dihedral), repeat=3)]
    live = [H for H in cands if fix_dimension(H, basis) > 0]
    maximal = [H for H in live
               if not any(K is not H and H.is_subgroup_of(K) and not K.is_subgroup_of(H)
                          for K in live)]
    return {_canonical_name(H, dihedral) for H in maximal}


def catalog_names_up_to_conjugacy(t: Sequence[int], variant: Variant, N: int) -> set[str]:
    dihedral = Variant.parse(variant).dihedral
    return {_canonical_name(H, dihedral) for H in symmetry_classes(t, variant, N)}


# -- orbit checks ---------------------------------------------------------------


@dataclass(frozen=True)
class SymmetryReport:
    subgroup: str
    max_defect: float
    holds: bool
    minimal: bool | None
    generator_defects: tuple[float, ...]
    larger_holding: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "subgroup": self.subgroup,
            "max_defect": self.max_defect,
            "holds": self.holds,
            "minimal": self.minimal,
            "generator_defects": list(self.generator_defects),
            "larger_holding": list(self.larger_holding),
        }


class _OrbitSampler:
    def __init__(self, samples: np.ndarray, period: float):
        self.samples = np.asarray(samples, float)
        self.period = float(period)
        M = self.samples.shape[0]
        self.times = np.arange(M) * self.period / M
        closed = np.vstack([self.samples, self.samples[:1]])
        tt = np.append(self.times, self.period)
        self.spline = CubicSpline(tt, closed, axis=0, bc_type="periodic") if M > 2 else None
        spread = self.samples.max(axis=0) - self.samples.min(axis=0)
        self.amplitude = float(spread.max()) if M else 0.0

    def shifted(self, frac: float) -> np.ndarray:
        """Samples of ``x(s - frac T)`` on the stored grid."""
        if self.spline is None or frac % 1 == 0:
            return self.samples
        return self.spline((self.times - frac * self.period) % self.period)

    def defect(self, g: GroupElement, phase: Fraction) -> float:
        diff = act(g, self.shifted(float(phase))) - self.samples
        d = float(np.abs(diff).max()) if diff.size else 0.0
        return d / self.amplitude if self.amplitude > 0 else d


def _holds(sampler: _OrbitSampler, H: TwistedSubgroup, tol: float) -> tuple[float, list[float]]:
    if H.full:
        spatial = TwistedSubgroup.full_group(H.N).factors
        d = [sampler.defect(g, Fraction(0)) for g, _ in TwistedSubgroup(spatial, H.N).generators()]
        d.append(sampler.amplitude)
        return max(d), d
    d = [sampler.defect(g, ph) for g, ph in H.generators()]
    return (max(d) if d else 0.0), d


def catalog_subgroups(N: int, variant: Variant) -> list[TwistedSubgroup]:
    seen: dict[str, TwistedSubgroup] = {}
    for t in all_modes(N):
        for H in symmetry_classes(t, variant, N):
            seen.setdefault(H.name, H)
    return list(seen.values()) + [TwistedSubgroup.full_group(N)]


def verify_orbit_symmetry(orbit: "PeriodicOrbit", H: TwistedSubgroup | str, tol: float = 1e-4,
                          variant: Variant | None = None, check_minimal: bool = True,
                          residual_limit: float = CONVERGED_RESIDUAL) -> SymmetryReport:
    """Check ``g.x(s - theta T / 2pi) = x(s)`` for the generators of ``H``.

    Defects are sup-norm differences relative to the orbit amplitude. The
    symmetry is reported minimal when no strictly larger catalog subgroup
    also holds at ``tol``.
    """
    samples = np.asarray(orbit.samples, float)
    N = round((samples.shape[1] // 2) ** (1 / 3))
    if isinstance(H, str):
        H = parse_subgroup(H, N)
    if not orbit.residual <= residual_limit:
        raise NotConvergedError(
            f"orbit residual {orbit.residual:.3g} exceeds {residual_limit:.1g}; refusing to check")
    if variant is None:
        params = getattr(orbit, "params", None)
        variant = params.variant if params is not None else Variant.VDP
    sampler = _OrbitSampler(samples, orbit.period)
    worst, defects = _holds(sampler, H, tol)
    holds = worst < tol
    minimal = None
    larger: list[str] = []
    if check_minimal and holds:
        for K in catalog_subgroups(N, variant):
            if K.name == H.name or not H.is_subgroup_of(K) or K.is_subgroup_of(H):
                continue
            if _holds(sampler, K, tol)[0] < tol:
                larger.append(K.name)
        minimal = not larger
    return SymmetryReport(H.name, worst, holds, minimal, tuple(defects), tuple(larger))


def equivariance_defect(params: LatticeParams, g: GroupElement, state: np.ndarray) -> float:
    """``max |f(g.z) - g.f(z)|``; exactly zero for a symmetry of the model."""
    from .model import rhs

    return float(np.abs(rhs(params, act(g, state)) - act(g, rhs(params, state))).max())
