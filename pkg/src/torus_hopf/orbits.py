"""Time integration, periodic-orbit shooting, branch tracing and the
prescribed-period search for the vdp lattice.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .model import LatticeParams, Variant, jacobian, param_derivative, rhs
from .spectral import (BifurcationRecord, Mode, as_mode, canonical_modes, k_of_mode,
                       mode_basis)
from .symmetry import (CONVERGED_RESIDUAL, SymmetryReport, TwistedSubgroup, branch_count,
                       fixed_subspace, parse_subgroup, spatial_fixed_basis, symmetry_classes,
                       verify_orbit_symmetry)

log = logging.getLogger(__name__)

RTOL = 1e-8
ATOL = 1e-10
SHOOT_RTOL = 1e-11
SHOOT_ATOL = 1e-13
METHOD = "RK45"


class IntegrationError(RuntimeError):
    pass


class NoOrbitFound(RuntimeError):
    def __init__(self, message: str, residual: float = math.nan):
        super().__init__(message)
        self.residual = residual


class PreconditionError(ValueError):
    """A hypothesis of the existence statement does not hold."""


class RejectedResonantPeriod(PreconditionError):
    def __init__(self, p: float, hits: list[tuple[int, float]]):
        self.p = p
        self.hits = hits
        super().__init__(f"period p={p!r} is resonant: (k, K_t) = {hits}")


# -- integration ----------------------------------------------------------------


@dataclass(frozen=True)
class Trajectory:
    t: np.ndarray
    states: np.ndarray  # (M, 2N^3)
    nfev: int = 0


def integrate(params: LatticeParams, initial, t_span: tuple[float, float],
              rtol: float = RTOL, atol: float = ATOL, t_eval: Sequence[float] | None = None,
              method: str = METHOD) -> Trajectory:
    """Adaptive Runge-Kutta integration of the lattice (Dormand-Prince 5(4) by default)."""
    if not (rtol > 0 and atol > 0):
        raise ValueError("tolerances must be positive")
    z0 = np.asarray(initial.to_vector() if hasattr(initial, "to_vector") else initial, float)
    if z0.shape != (params.dim,):
        raise ValueError(f"initial state has shape {z0.shape}, expected ({params.dim},)")
    sol = solve_ivp(lambda t, z: rhs(params, z), t_span, z0, method=method, rtol=rtol,
                    atol=atol, t_eval=t_eval)
    if sol.status < 0:
        raise IntegrationError(sol.message)
    return Trajectory(sol.t, sol.y.T, sol.nfev)


def flow_with_sensitivities(params: LatticeParams, z0: np.ndarray, T: float,
                            param: str | None = None, rtol: float = SHOOT_RTOL,
                            atol: float = SHOOT_ATOL, method: str = METHOD):
    """Integrate ``z``, the monodromy ``Phi`` and optionally ``dz/d(param)`` to time ``T``."""
    n = params.dim
    z0 = np.asarray(z0, float)

    def f(t, w):
        z = w[:n]
        Phi = w[n:n + n * n].reshape(n, n)
        J = jacobian(params, z)
        out = [rhs(params, z), (J @ Phi).ravel()]
        if param is not None:
            out.append(J @ w[n + n * n:] + param_derivative(params, z, param))
        return np.concatenate(out)

    w0 = [z0, np.eye(n).ravel()]
    if param is not None:
        w0.append(np.zeros(n))
    sol = solve_ivp(f, (0.0, T), np.concatenate(w0), method=method, rtol=rtol, atol=atol)
    if sol.status < 0:
        raise IntegrationError(sol.message)
    w = sol.y[:, -1]
    zT = w[:n]
    Phi = w[n:n + n * n].reshape(n, n)
    sens = w[n + n * n:] if param is not None else None
    return zT, Phi, sens


# -- periodic orbits ------------------------------------------------------------


@dataclass
class PeriodicOrbit:
    samples: np.ndarray  # (M, 2N^3) on t_k = k T / M
    period: float
    residual: float
    params: LatticeParams
    iterations: int = 0
    mode_hint: Mode | None = None
    mode_fraction: float | None = None

    @property
    def converged(self) -> bool:
        return self.residual <= CONVERGED_RESIDUAL

    @property
    def initial(self) -> np.ndarray:
        return self.samples[0]

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self.samples)) * self.period / len(self.samples)

    @property
    def amplitude(self) -> float:
        return float((self.samples.max(axis=0) - self.samples.min(axis=0)).max())

    def to_dict(self, include_samples: bool = True) -> dict:
        p = self.params
        out = {
            "period": self.period,
            "residual": self.residual,
            "converged": self.converged,
            "amplitude": self.amplitude,
            "iterations": self.iterations,
            "mode_hint": list(self.mode_hint) if self.mode_hint is not None else None,
            "mode_fraction": self.mode_fraction,
            "params": {"N": p.N, "delta": p.delta, "zeta": p.zeta, "epsilon": p.epsilon,
                       "nu": p.nu, "a": p.a, "b": p.b, "variant": p.variant.value,
                       "cubic": p.cubic},
        }
        if include_samples:
            out["samples"] = self.samples.tolist()
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "PeriodicOrbit":
        hint = d.get("mode_hint")
        return cls(np.asarray(d["samples"], float), float(d["period"]), float(d["residual"]),
                   LatticeParams(**d["params"]), int(d.get("iterations", 0)),
                   tuple(hint) if hint is not None else None, d.get("mode_fraction"))


def sample_orbit(params: LatticeParams, z0: np.ndarray, T: float, samples: int = 256) -> np.ndarray:
    grid = np.arange(samples) * T / samples
    traj = integrate(params, z0, (0.0, T), rtol=SHOOT_RTOL, atol=SHOOT_ATOL, t_eval=grid)
    return traj.states


def find_orbit_shooting(params: LatticeParams, guess, T_guess: float,
                        mode_hint: Sequence[int] | None = None, free: str = "period",
                        tol: float = 1e-10, max_iter: int = 40, samples: int = 256,
                        min_amplitude: float = 1e-6,
                        subspace: np.ndarray | None = None) -> PeriodicOrbit:
    """Newton shooting for a periodic orbit.

    Unknowns are the initial state and either the period (``free="period"``)
    or ``nu`` at fixed period ``T_guess`` (``free="nu"``). The phase is pinned
    by requiring each update to be orthogonal to the flow at the current
    iterate.

    ``subspace`` is an optional orthonormal basis (columns) of a flow-invariant
    subspace; the iterate is projected onto it and Newton runs in its
    coordinates, which removes the neutral directions of decoupled copies.
    """
    if not T_guess > 0:
        raise ValueError("T_guess must be positive")
    if free not in ("period", "nu"):
        raise ValueError(f"free must be 'period' or 'nu', got {free!r}")
    z = np.asarray(guess.to_vector() if hasattr(guess, "to_vector") else guess, float).copy()
    if z.shape != (params.dim,):
        raise ValueError(f"guess has shape {z.shape}, expected ({params.dim},)")
    P = np.eye(params.dim) if subspace is None else np.asarray(subspace, float)
    if P.shape[0] != params.dim:
        raise ValueError(f"subspace has {P.shape[0]} rows, expected {params.dim}")
    z = P @ (P.T @ z)
    if np.linalg.norm(rhs(params, z)) < min_amplitude:
        raise NoOrbitFound("initial guess is (numerically) an equilibrium", 0.0)

    T = float(T_guess)
    p = params
    m = P.shape[1]
    res = math.inf
    for it in range(1, max_iter + 1):
        zT, Phi, sens = flow_with_sensitivities(p, z, T, param="nu" if free == "nu" else None)
        F = zT - z
        res = float(np.abs(F).max())
        log.debug("shooting iter %d residual %.3e T=%.8f nu=%.6f", it, res, T, p.nu)
        if res <= tol:
            break
        f0 = rhs(p, z)
        A = np.zeros((m + 1, m + 1))
        A[:m, :m] = P.T @ (Phi @ P) - np.eye(m)
        A[:m, m] = P.T @ (rhs(p, zT) if free == "period" else sens)
        A[m, :m] = (f0 @ P) / np.linalg.norm(f0)
        step = np.linalg.lstsq(A, -np.append(P.T @ F, 0.0), rcond=1e-13)[0]
        dz = P @ step[:m]
        # damp steps that would jump across the basin
        scale = max(1.0, np.abs(dz).max() / max(0.5 * np.abs(z).max(), 1e-3))
        step /= scale
        z = z + dz / scale
        if free == "period":
            T = T + step[m]
            if T <= 0:
                raise NoOrbitFound("period became non-positive", res)
        else:
            nu = p.nu + step[m]
            if nu <= 0:
                raise NoOrbitFound("nu became non-positive", res)
            p = p.with_(nu=nu)
    else:
        raise NoOrbitFound(f"Newton did not converge in {max_iter} iterations "
                           f"(residual {res:.3e})", res)

    states = sample_orbit(p, z, T, samples)
    orbit = PeriodicOrbit(states, T, res, p, it)
    if orbit.amplitude <= min_amplitude:
        raise NoOrbitFound("shooting converged to an equilibrium", res)
    if mode_hint is not None:
        t = as_mode(mode_hint, p.N)
        B = mode_basis(p, t).vectors
        x = states[:, :p.n_nodes]
        orbit.mode_hint = t
        orbit.mode_fraction = float(np.linalg.norm(x @ B.T) ** 2 / np.linalg.norm(x) ** 2)
    return orbit


# -- seeding --------------------------------------------------------------------


def _fixed_vector(params: LatticeParams, t: Mode, symmetry: TwistedSubgroup) -> np.ndarray:
    basis = mode_basis(params, t).vectors
    fix = fixed_subspace(symmetry, basis)
    if fix.shape[0] == 0:
        raise ValueError(f"{symmetry.name} fixes no vector in the mode space of {t}")
    v = fix[0] @ basis
    psi = -0.5 * np.angle(np.sum(v * v))
    v = v * np.exp(1j * psi)
    return v / np.abs(v).max()


def linear_frequency(params: LatticeParams, v: np.ndarray) -> float:
    """Frequency at criticality of the linear wave ``Re(e^{i w s} v)``."""
    from .model import coupling_matrix

    C = coupling_matrix(params)
    c = np.vdot(v, C @ v) / np.vdot(v, v)
    if params.variant is Variant.VDP:
        if c.real <= 0:
            raise ValueError("mode has non-positive K and no Hopf frequency")
        return math.sqrt(params.b * c.real)
    return 0.5 * (-c.imag + math.sqrt(c.imag**2 + 4.0 * params.b))


def predicted_amplitude(params: LatticeParams, critical_a: float) -> float:
    """Per-node amplitude of a small cycle from the cubic averaging balance."""
    da = params.a - critical_a
    if da <= 0:
        raise ValueError(f"a={params.a} is not past the critical value {critical_a}")
    cubic = params.cubic if params.variant is Variant.VDP else 1.0
    return math.sqrt(4.0 * da / (3.0 * cubic))


def seed_state(params: LatticeParams, t: Sequence[int], symmetry: TwistedSubgroup | str,
               amplitude: float) -> tuple[np.ndarray, float]:
    """Linear wave in ``Fix(symmetry)`` with per-node peak ``amplitude``.

    Returns the initial state and the linear period.
    """
    t = as_mode(t, params.N)
    if isinstance(symmetry, str):
        symmetry = parse_subgroup(symmetry, params.N)
    v = _fixed_vector(params, t, symmetry)
    omega = linear_frequency(params, v)
    z0 = amplitude * np.concatenate([v.real, (params.b / omega) * v.imag])
    return z0, 2.0 * math.pi / omega


# -- branches -------------------------------------------------------------------


@dataclass
class BranchPoint:
    a: float
    orbit: PeriodicOrbit
    amplitude: float
    symmetry_report: SymmetryReport | None


@dataclass
class Branch:
    record: BifurcationRecord
    symmetry: TwistedSubgroup
    points: list[BranchPoint] = field(default_factory=list)
    truncated: str | None = None
    fit_slope: float | None = None
    fit_r2: float | None = None

    def to_rows(self) -> list[dict]:
        return [{"a": p.a, "period": p.orbit.period, "amplitude": p.amplitude,
                 "residual": p.orbit.residual,
                 "symmetry_defect": p.symmetry_report.max_defect if p.symmetry_report else None,
                 "symmetry_holds": p.symmetry_report.holds if p.symmetry_report else None}
                for p in self.points]


def sqrt_law_fit(a_values: Sequence[float], amplitudes: Sequence[float],
                 critical_a: float) -> tuple[float, float]:
    """Least-squares ``amplitude^2 = C (a - a_c)`` through the origin; returns ``(C, R^2)``."""
    x = np.asarray(a_values, float) - critical_a
    y = np.asarray(amplitudes, float) ** 2
    C = float(np.dot(x, y) / np.dot(x, x))
    ss_res = float(np.sum((y - C * x) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    return C, (1.0 - ss_res / ss_tot) if ss_tot > 0 else 1.0


def trace_branch(params: LatticeParams, record: BifurcationRecord,
                 symmetry: TwistedSubgroup | str, a_values: Sequence[float] | None = None,
                 a_range: tuple[float, float] | None = None, step: float | None = None,
                 sym_tol: float = 1e-4, samples: int = 256, fit_points: int = 5) -> Branch:
    """Natural-parameter continuation of one branch in ``a``.

    The first orbit is seeded in the fixed-point space of ``symmetry``;
    later ones start from the previous orbit rescaled by the square-root law.
    Symmetry is checked at every point and the branch is cut when it fails.
    """
    if isinstance(symmetry, str):
        symmetry = parse_subgroup(symmetry, params.N)
    if a_values is None:
        if a_range is None or step is None:
            raise ValueError("give either a_values or a_range and step")
        lo, hi = a_range
        count = int(math.floor((hi - lo) / step + 1e-9)) + 1
        a_values = [lo + k * step for k in range(count)]
    ac = record.critical_a
    if a_values[0] <= ac:
        raise ValueError(f"branch must start past the critical value a_c={ac}")
    branch = Branch(record, symmetry)
    P = spatial_fixed_basis(symmetry, params.variant)
    z = None
    T = None
    prev_a = None
    for a in a_values:
        p = params.with_(a=float(a))
        if z is None:
            z, T = seed_state(p, record.mode, symmetry, predicted_amplitude(p, ac))
        else:
            z = z * math.sqrt((a - ac) / (prev_a - ac))
        try:
            orbit = find_orbit_shooting(p, z, T, mode_hint=record.mode, samples=samples,
                                        subspace=P)
        except (NoOrbitFound, IntegrationError) as exc:
            branch.truncated = f"a={a}: {exc}"
            break
        report = verify_orbit_symmetry(orbit, symmetry, tol=sym_tol, variant=p.variant,
                                       check_minimal=False)
        branch.points.append(BranchPoint(float(a), orbit, orbit.amplitude, report))
        if not report.holds:
            branch.truncated = f"a={a}: symmetry defect {report.max_defect:.3g} >= {sym_tol}"
            break
        z, T, prev_a = orbit.initial, orbit.period, a
    pts = branch.points[:fit_points]
    if len(pts) >= 2:
        branch.fit_slope, branch.fit_r2 = sqrt_law_fit([q.a for q in pts],
                                                       [q.amplitude for q in pts], ac)
    return branch


# -- prescribed period ----------------------------------------------------------


@dataclass(frozen=True)
class AdmissibleMode:
    mode: Mode
    K: float
    symmetries: tuple[TwistedSubgroup, ...]
    counts: tuple[int, ...]

    def to_dict(self) -> dict:
        return {"mode": list(self.mode), "K": self.K,
                "symmetries": [h.name for h in self.symmetries], "counts": list(self.counts)}


def resonant_hits(params: LatticeParams, p: float, tol: float = 1e-9) -> list[tuple[int, float]]:
    """``(k, K_t)`` with ``p = 2 pi (2k - 1) / sqrt(b K_t)`` within ``tol``."""
    hits = []
    for K in sorted({round(k_of_mode(params, t), 14) for t in canonical_modes(params.N)}):
        if K <= 0:
            continue
        q = p * math.sqrt(params.b * K) / (2.0 * math.pi)
        k = round((q + 1.0) / 2.0)
        if k >= 1 and abs(p - 2.0 * math.pi * (2 * k - 1) / math.sqrt(params.b * K)) <= tol * max(1.0, p):
            hits.append((k, K))
    return hits


def admissible_period_catalog(params: LatticeParams, p: float) -> list[AdmissibleMode]:
    """Modes with ``K_t > (2 pi / p)^2`` for which ``p``-periodic solutions are predicted."""
    if params.variant is not Variant.VDP:
        raise ValueError("the prescribed-period catalog applies to the vdp variant")
    if not p > 0:
        raise ValueError("p must be positive")
    modes = canonical_modes(params.N)
    Ks = {t: k_of_mode(params, t) for t in modes}
    zero = [t for t, K in Ks.items() if abs(K) <= 1e-12]
    if zero:
        raise PreconditionError(f"K_t vanishes for modes {zero}")
    hits = resonant_hits(params, p)
    if hits:
        raise RejectedResonantPeriod(p, hits)
    bound = (2.0 * math.pi / p) ** 2
    out = []
    for t in modes:
        if Ks[t] > bound:
            classes = tuple(symmetry_classes(t, params.variant, params.N))
            out.append(AdmissibleMode(t, Ks[t], classes,
                                      tuple(branch_count(h, params.N) for h in classes)))
    return out


def default_nu_grid(count: int = 30, lo: float = 0.05, hi: float = 5.0) -> np.ndarray:
    return np.geomspace(lo, hi, count)


@dataclass
class ExistenceResult:
    found: bool
    p: float
    mode: Mode
    symmetry: str
    orbit: PeriodicOrbit | None = None
    nu: float | None = None
    symmetry_report: SymmetryReport | None = None
    sweep: list[dict] = field(default_factory=list)
    message: str = ""

    def to_dict(self) -> dict:
        return {"found": self.found, "p": self.p, "mode": list(self.mode),
                "symmetry": self.symmetry, "nu": self.nu,
                "period": self.orbit.period if self.orbit else None,
                "residual": self.orbit.residual if self.orbit else None,
                "symmetry_report": self.symmetry_report.to_dict() if self.symmetry_report else None,
                "sweep": self.sweep, "message": self.message}


def existence_search(params: LatticeParams, p: float, t: Sequence[int],
                     symmetry: TwistedSubgroup | str, nu_grid: Sequence[float] | None = None,
                     normalized_cubic: bool = False, sym_tol: float = 1e-4,
                     samples: int = 256) -> ExistenceResult:
    """Search ``nu`` for a ``p``-periodic orbit with the requested symmetry.

    ``params.nu`` is ignored. The orbit is continued along ``nu_grid`` with
    free period; a sign change of ``T(nu) - p`` is then refined by Newton
    with ``nu`` free and the period fixed to ``p``. Failure on a finite grid
    is reported, not treated as non-existence.
    """
    N = params.N
    t = as_mode(t, N)
    if isinstance(symmetry, str):
        symmetry = parse_subgroup(symmetry, N)
    if normalized_cubic:
        params = params.with_(cubic=1.0 / 3.0)
    catalog = admissible_period_catalog(params, p)
    entry = next((m for m in catalog if m.mode == t or m.mode == as_mode([-v for v in t], N)), None)
    if entry is None:
        raise PreconditionError(f"mode {t} is not admissible for p={p}")
    if symmetry.name not in {h.name for h in symmetry_classes(t, params.variant, N)}:
        raise PreconditionError(f"{symmetry.name} is not a symmetry class of mode {t}")
    if not params.a > 0:
        raise PreconditionError("a must be positive for a nonconstant branch")
    grid = list(default_nu_grid() if nu_grid is None else nu_grid)
    result = ExistenceResult(False, float(p), t, symmetry.name)

    P = spatial_fixed_basis(symmetry, params.variant)
    z = T = None
    prev = None
    for nu in grid:
        q = params.with_(nu=float(nu))
        if z is None:
            z, T = seed_state(q, t, symmetry, predicted_amplitude(q, 0.0))
        try:
            orbit = find_orbit_shooting(q, z, T, samples=samples, subspace=P)
        except (NoOrbitFound, IntegrationError) as exc:
            result.sweep.append({"nu": float(nu), "period": None, "error": str(exc)})
            z = T = None
            prev = None
            continue
        result.sweep.append({"nu": float(nu), "period": orbit.period, "error": None})
        if prev is not None and (prev[1].period - p) * (orbit.period - p) <= 0:
            found = _refine_fixed_period(q, prev, (float(nu), orbit), p, samples, P)
            if found is not None:
                report = verify_orbit_symmetry(found, symmetry, tol=sym_tol, variant=q.variant)
                if report.holds and report.minimal:
                    result.found = True
                    result.orbit = found
                    result.nu = found.params.nu
                    result.symmetry_report = report
                    result.message = "orbit found"
                    return result
        prev = (float(nu), orbit)
        z, T = orbit.initial, orbit.period
    result.message = ("no p-periodic orbit with the requested symmetry on this nu grid; "
                      "this does not rule out existence for other nu")
    return result


def _refine_fixed_period(params, lo, hi, p, samples, subspace=None) -> PeriodicOrbit | None:
    (nu0, o0), (nu1, o1) = lo, hi
    w = (p - o0.period) / (o1.period - o0.period) if o1.period != o0.period else 0.5
    nu = nu0 + w * (nu1 - nu0)
    guess = o0 if abs(w) < 0.5 else o1
    try:
        return find_orbit_shooting(params.with_(nu=nu), guess.initial, p, free="nu",
                                   samples=samples, subspace=subspace)
    except (NoOrbitFound, IntegrationError) as exc:
        log.info("fixed-period refinement failed: %s", exc)
        return None
