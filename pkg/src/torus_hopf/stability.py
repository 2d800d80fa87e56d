"""Stability of the origin and of computed periodic orbits."""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .model import LatticeParams, Variant
from .spectral import Mode, all_modes, closed_form_spectrum, critical_a_vdpl, k_of_mode


class Verdict(str, enum.Enum):
    EQUILIBRIUM_STABLE = "EquilibriumStable"
    EQUILIBRIUM_UNSTABLE = "EquilibriumUnstable"
    ORBIT_STABLE = "OrbitStable"
    ORBIT_UNSTABLE = "OrbitUnstable"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class StabilityVerdict:
    kind: Verdict
    witnesses: tuple = field(default_factory=tuple)  # ((label, value), ...)

    def __post_init__(self):
        if not self.witnesses:
            raise ValueError("a verdict needs at least one numeric witness")

    def to_dict(self) -> dict:
        return {"kind": self.kind.value,
                "witnesses": [[_jsonable(k), _jsonable(v)] for k, v in self.witnesses]}


def _jsonable(v):
    if isinstance(v, tuple):
        return list(v)
    if isinstance(v, complex):
        return [v.real, v.imag]
    return v


def theta_N(N: int) -> float:
    return (N - 1) * math.pi / N


def instability_threshold(N: int) -> float:
    return 1.0 / (2.0 * (math.cos(theta_N(N)) - 1.0))


def vdp_instability_criterion(params: LatticeParams) -> StabilityVerdict:
    """Scan ``k in {0,1}^3`` for ``k . (delta, zeta, eps) < 1 / (2 (cos theta_N - 1))``.

    Each hit names the mode ``k (N-1)/2`` whose ``K_t`` is negative; the most
    negative ``K_t`` comes first, ties broken by fewest active axes.
    """
    if params.variant is not Variant.VDP:
        raise ValueError("the instability criterion applies to the vdp variant")
    N = params.N
    thr = instability_threshold(N)
    hits = []
    for k in itertools.product((0, 1), repeat=3):
        if np.dot(k, params.couplings) < thr:
            t = tuple(ki * (N - 1) // 2 for ki in k)
            hits.append((k_of_mode(params, t), sum(k), t))
    if not hits:
        best = min(float(np.dot(k, params.couplings))
                   for k in itertools.product((0, 1), repeat=3))
        return StabilityVerdict(Verdict.INCONCLUSIVE, (("min k.coupling", best), ("threshold", thr)))
    hits.sort()
    return StabilityVerdict(Verdict.EQUILIBRIUM_UNSTABLE, tuple((t, K) for K, _, t in hits))


def vdpl_threshold(params: LatticeParams) -> tuple[float, Mode]:
    """Largest vdpl critical value and the mode attaining it.

    Positive couplings contribute ``c (1 - cos theta_N)`` at wavenumber
    ``(N-1)/2`` on their axis; the other axes stay at zero.
    """
    N = params.N
    drop = 1.0 - math.cos(theta_N(N))
    positive = [c for c in params.couplings if c > 0]
    mode = tuple((N - 1) // 2 if c > 0 else 0 for c in params.couplings)
    return (sum(positive) * drop if positive else 0.0), mode


def vdpl_stability_boundary(params: LatticeParams) -> tuple[float, Mode]:
    """Smallest vdpl critical value: the origin is stable exactly for ``a`` below it."""
    crit = {t: critical_a_vdpl(params, t) for t in all_modes(params.N)}
    t = min(crit, key=lambda s: (crit[s], s))
    return crit[t], t


def equilibrium_verdict(params: LatticeParams, a: float | None = None,
                        tol: float = 1e-12) -> StabilityVerdict:
    """Linear stability of the origin from the closed-form spectrum."""
    lam = closed_form_spectrum(params, a)
    i = int(np.argmax(lam.real))
    lead = complex(lam[i])
    if lead.real < -tol:
        kind = Verdict.EQUILIBRIUM_STABLE
    elif lead.real > tol:
        kind = Verdict.EQUILIBRIUM_UNSTABLE
    else:
        kind = Verdict.INCONCLUSIVE
    return StabilityVerdict(kind, (("leading eigenvalue", lead),))


# -- first Lyapunov coefficient -------------------------------------------------


def _vdpl_single(z: np.ndarray, a: float) -> np.ndarray:
    x, y = z
    return np.array([-y - x**3 - x**2 + a * x, 0.0 * x])


def _normal_form_frame(a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
    """Change of variables ``(x, y) -> (u, v)`` that puts the linear part in rotation form."""
    w = math.sqrt(4.0 * b - a * a)
    T = np.array([[a / w, -2.0 / w], [1.0, 0.0]])
    return T, np.linalg.inv(T)


def _transformed_field(a: float, b: float):
    T, Tinv = _normal_form_frame(a, b)

    def field(u: float, v: float) -> np.ndarray:
        z = Tinv @ np.array([u, v])
        x, y = z
        return T @ np.array([-y - x**3 - x**2 + a * x, b * x])

    return field


def lyapunov_coefficient_vdpl_single(b: float = 1.0, h: float = 1e-2) -> float:
    """First Lyapunov coefficient of one vdpl node at ``a = 0``.

    The field is moved to coordinates where the linear part is
    ``[[0, -w], [w, 0]]`` and the planar Hopf formula::

        l1 = (f_uuu + f_uvv + g_uuv + g_vvv) / 16
             + (f_uv (f_uu + f_vv) - g_uv (g_uu + g_vv) - f_uu g_uu + f_vv g_vv) / (16 w)

    is evaluated with central finite differences of step ``h``.
    """
    if not b > 0:
        raise ValueError("b must be positive")
    F = _transformed_field(0.0, b)
    w = math.sqrt(b)
    d = _derivatives(F, h)
    f, g = d[0], d[1]
    l1 = (f["uuu"] + f["uvv"] + g["uuv"] + g["vvv"]) / 16.0
    l1 += (f["uv"] * (f["uu"] + f["vv"]) - g["uv"] * (g["uu"] + g["vv"])
           - f["uu"] * g["uu"] + f["vv"] * g["vv"]) / (16.0 * w)
    return float(l1)


def _derivatives(F, h: float) -> list[dict[str, float]]:
    def at(i, j):
        return F(i * h, j * h)

    f00 = at(0, 0)
    uu = (at(1, 0) - 2 * f00 + at(-1, 0)) / h**2
    vv = (at(0, 1) - 2 * f00 + at(0, -1)) / h**2
    uv = (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1)) / (4 * h**2)
    uuu = (at(2, 0) - 2 * at(1, 0) + 2 * at(-1, 0) - at(-2, 0)) / (2 * h**3)
    vvv = (at(0, 2) - 2 * at(0, 1) + 2 * at(0, -1) - at(0, -2)) / (2 * h**3)
    # mixed third derivatives from second differences of first differences
    uvv = ((at(1, 1) - 2 * at(1, 0) + at(1, -1)) - (at(-1, 1) - 2 * at(-1, 0) + at(-1, -1))) / (2 * h**3)
    uuv = ((at(1, 1) - 2 * at(0, 1) + at(-1, 1)) - (at(1, -1) - 2 * at(0, -1) + at(-1, -1))) / (2 * h**3)
    return [{"uu": uu[k], "vv": vv[k], "uv": uv[k], "uuu": uuu[k], "vvv": vvv[k],
             "uvv": uvv[k], "uuv": uuv[k]} for k in range(2)]


# -- Floquet --------------------------------------------------------------------


def floquet_multipliers(orbit, params: LatticeParams | None = None,
                        rtol: float = 1e-12, atol: float = 1e-14) -> np.ndarray:
    """Eigenvalues of the monodromy matrix, sorted by decreasing modulus.

    The variational equation is integrated along the orbit with tolerances
    ten times tighter than the shooting ones.
    """
    from .orbits import IntegrationError, flow_with_sensitivities

    params = orbit.params if params is None else params
    if not orbit.converged:
        raise IntegrationError(f"orbit not converged (residual {orbit.residual:.3g})")
    _, Phi, _ = flow_with_sensitivities(params, orbit.initial, orbit.period, rtol=rtol, atol=atol)
    mu = np.linalg.eigvals(Phi)
    return mu[np.argsort(-np.abs(mu))]


def split_trivial(multipliers: np.ndarray) -> tuple[complex, np.ndarray]:
    """Separate the multiplier closest to 1 from the rest."""
    mu = np.asarray(multipliers)
    i = int(np.argmin(np.abs(mu - 1.0)))
    return complex(mu[i]), np.delete(mu, i)


def orbit_verdict(multipliers: np.ndarray, margin: float = 1e-3) -> StabilityVerdict:
    trivial, rest = split_trivial(multipliers)
    lead = float(np.abs(rest).max()) if rest.size else 0.0
    if lead <= 1.0 - margin:
        kind = Verdict.ORBIT_STABLE
    elif lead >= 1.0 + margin:
        kind = Verdict.ORBIT_UNSTABLE
    else:
        kind = Verdict.INCONCLUSIVE
    return StabilityVerdict(kind, (("trivial multiplier", trivial), ("max |mu| nontrivial", lead)))
