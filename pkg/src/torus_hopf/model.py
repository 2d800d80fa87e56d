"""Coupled van der Pol lattices on the 3-torus.

Two systems share the same phase space ``W = V + V`` with ``V = R^(N^3)``:

* ``VDP``  -- van der Pol nodes, bi-directional coupling through ``y``::

      x' = nu (a x - c x^3) - C y,      y' = b x

  where ``C = I + delta (2I - S1 - S1^-1) + zeta (...) + eps (...)``.

* ``VDPL`` -- van der Pol-like nodes, uni-directional coupling through ``x``::

      x' = -y - x^3 - x^2 + a x - C x,  y' = b x

  where ``(C x)_i = delta (x_i - x_{i+e1}) + zeta (...) + eps (...)``.

Node ``(alpha, beta, gamma)`` lives at flat index ``alpha*N^2 + beta*N + gamma``
and a full state vector is ``z = [x, y]`` of length ``2 N^3``.

The coupling stencils are evaluated with ``np.roll`` rather than a matrix
product so that the right-hand sides commute with lattice permutations
bit-for-bit.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import NamedTuple, Union

import numpy as np


class Variant(str, enum.Enum):
    VDP = "vdp"
    VDPL = "vdpl"

    @classmethod
    def parse(cls, value) -> "Variant":
        if isinstance(value, Variant):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown variant {value!r}; expected 'vdp' or 'vdpl'") from None

    @property
    def dihedral(self) -> bool:
        return self is Variant.VDP


@dataclass(frozen=True)
class LatticeParams:
    """All model constants for one lattice.

    ``cubic`` scales the ``x^3`` term of the vdP nodes; ``1.0`` is the plain
    oscillator, ``1/3`` the Lienard-normalized form used by the prescribed
    period search.
    """

    N: int
    delta: float = 0.0
    zeta: float = 0.0
    epsilon: float = 0.0
    nu: float = 1.0
    a: float = 0.0
    b: float = 1.0
    variant: Variant = Variant.VDP
    cubic: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant.parse(self.variant))
        if int(self.N) != self.N or self.N < 3 or self.N % 2 == 0:
            raise ValueError(f"N must be an odd integer >= 3, got {self.N!r}")
        object.__setattr__(self, "N", int(self.N))
        if not self.nu > 0:
            raise ValueError(f"nu must be positive, got {self.nu!r}")
        if not self.b > 0:
            raise ValueError(f"b must be positive, got {self.b!r}")
        if not self.cubic > 0:
            raise ValueError(f"cubic must be positive, got {self.cubic!r}")

    @property
    def n_nodes(self) -> int:
        return self.N**3

    @property
    def dim(self) -> int:
        return 2 * self.N**3

    @property
    def couplings(self) -> tuple[float, float, float]:
        return (self.delta, self.zeta, self.epsilon)

    def with_(self, **changes) -> "LatticeParams":
        return replace(self, **changes)


class LatticeState(NamedTuple):
    x: np.ndarray
    y: np.ndarray

    def to_vector(self) -> np.ndarray:
        return np.concatenate([np.asarray(self.x, float), np.asarray(self.y, float)])

    @classmethod
    def from_vector(cls, z: np.ndarray) -> "LatticeState":
        z = np.asarray(z, float)
        n = z.shape[-1] // 2
        return cls(z[..., :n], z[..., n:])


StateLike = Union[np.ndarray, LatticeState]


def node_index(alpha: int, beta: int, gamma: int, N: int) -> int:
    return (alpha % N) * N * N + (beta % N) * N + (gamma % N)


def node_grid(N: int) -> np.ndarray:
    """Integer coordinates of every node, shape ``(N^3, 3)`` in flat order."""
    return np.indices((N, N, N)).reshape(3, -1).T


def _as_vector(params: LatticeParams, state: StateLike) -> np.ndarray:
    z = state.to_vector() if isinstance(state, LatticeState) else np.asarray(state, float)
    if z.shape != (params.dim,):
        raise ValueError(
            f"state has shape {z.shape}, expected ({params.dim},) for N={params.N}"
        )
    return z


def _coupling_apply(params: LatticeParams, u: np.ndarray) -> np.ndarray:
    """``C u`` computed stencil-wise on the ``(N, N, N)`` grid."""
    N = params.N
    g = u.reshape(N, N, N)
    if params.variant is Variant.VDP:
        diag = 1.0 + 2.0 * (params.delta + params.zeta + params.epsilon)
        out = diag * g
        for axis, c in enumerate(params.couplings):
            if c != 0.0:
                out = out - c * (np.roll(g, -1, axis) + np.roll(g, 1, axis))
    else:
        out = np.zeros_like(g)
        for axis, c in enumerate(params.couplings):
            if c != 0.0:
                out = out + c * (g - np.roll(g, -1, axis))
    return out.reshape(-1)


def rhs(params: LatticeParams, state: StateLike, t: float = 0.0):
    """Vector field of the lattice.

    Accepts either a flat ``2 N^3`` vector or a :class:`LatticeState` and
    returns the derivative in the same form.
    """
    z = _as_vector(params, state)
    n = params.n_nodes
    x, y = z[:n], z[n:]
    if params.variant is Variant.VDP:
        dx = params.nu * (params.a * x - params.cubic * x**3) - _coupling_apply(params, y)
    else:
        dx = -y - x**3 - x**2 + params.a * x - _coupling_apply(params, x)
    dy = params.b * x
    if isinstance(state, LatticeState):
        return LatticeState(dx, dy)
    return np.concatenate([dx, dy])


def coupling_matrix(params: LatticeParams) -> np.ndarray:
    """Dense ``N^3 x N^3`` coupling matrix ``C`` (at most 7 nonzeros per row)."""
    return _coupling_matrix(params.N, params.delta, params.zeta, params.epsilon,
                            params.variant).copy()


@lru_cache(maxsize=64)
def _coupling_matrix(N, delta, zeta, epsilon, variant) -> np.ndarray:
    p = LatticeParams(N, delta, zeta, epsilon, variant=variant)
    C = np.column_stack([_coupling_apply(p, e) for e in np.eye(p.n_nodes)])
    C.setflags(write=False)
    return C


def jacobian(params: LatticeParams, state: StateLike | None = None) -> np.ndarray:
    """Analytic Jacobian of :func:`rhs`, shape ``(2N^3, 2N^3)``.

    ``state=None`` means the origin.
    """
    n = params.n_nodes
    z = np.zeros(params.dim) if state is None else _as_vector(params, state)
    x = z[:n]
    C = _coupling_matrix(params.N, params.delta, params.zeta, params.epsilon, params.variant)
    J = np.zeros((2 * n, 2 * n))
    if params.variant is Variant.VDP:
        J[:n, :n] = np.diag(params.nu * (params.a - 3.0 * params.cubic * x**2))
        J[:n, n:] = -C
    else:
        J[:n, :n] = np.diag(params.a - 3.0 * x**2 - 2.0 * x) - C
        J[:n, n:] = -np.eye(n)
    J[n:, :n] = params.b * np.eye(n)
    return J


def param_derivative(params: LatticeParams, state: StateLike, name: str) -> np.ndarray:
    """Partial derivative of :func:`rhs` with respect to ``nu`` or ``a``."""
    z = _as_vector(params, state)
    n = params.n_nodes
    x = z[:n]
    out = np.zeros(params.dim)
    if name == "nu":
        if params.variant is not Variant.VDP:
            raise ValueError("nu only enters the vdp variant")
        out[:n] = params.a * x - params.cubic * x**3
    elif name == "a":
        out[:n] = params.nu * x if params.variant is Variant.VDP else x
    else:
        raise ValueError(f"no derivative for parameter {name!r}")
    return out
