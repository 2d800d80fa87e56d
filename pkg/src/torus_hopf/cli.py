"""Command-line front end.

Every subcommand builds a :class:`Report` (rows plus scalar metadata) and
writes it as CSV or JSON. Parameters come from flags and, optionally, a flat
``key=value`` config file; flags win over the file.

Exit codes: 0 success, 2 configuration error, 3 numerical non-convergence,
4 violated precondition (resonant period, vanishing ``K_t``, empty catalog).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .model import LatticeParams, Variant
from .orbits import (IntegrationError, NoOrbitFound, PeriodicOrbit, PreconditionError,
                     RejectedResonantPeriod, admissible_period_catalog, existence_search,
                     find_orbit_shooting, integrate, predicted_amplitude, seed_state,
                     trace_branch)
from .spectral import (as_mode, bifurcation_catalog, bifurcation_record, canonical_modes,
                       critical_a_vdpl, eigenvalues_vdp, eigenvalues_vdpl, g_of_mode, k_of_mode,
                       mode_vectors)
from .stability import (equilibrium_verdict, floquet_multipliers, orbit_verdict,
                        vdp_instability_criterion, vdpl_stability_boundary, vdpl_threshold)
from .symmetry import NotConvergedError, parse_subgroup, symmetry_classes, verify_orbit_symmetry

SCHEMA = "torus-hopf schema v1"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NOT_CONVERGED = 3
EXIT_PRECONDITION = 4


class ConfigError(ValueError):
    pass


@dataclass
class Report:
    command: str
    columns: list[str]
    rows: list[dict] = field(default_factory=list)
    meta: dict = field(default_factory=dict)
    exit_code: int = EXIT_OK

    def to_dict(self) -> dict:
        return {"schema": SCHEMA, "command": self.command, "meta": self.meta,
                "columns": self.columns, "rows": self.rows}


# -- serialization --------------------------------------------------------------


def _plain(v: Any) -> Any:
    """Convert numpy scalars, tuples and complex values to JSON-native types."""
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, np.ndarray):
        return _plain(v.tolist())
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (complex, np.complexfloating)):
        return [float(v.real), float(v.imag)]
    if isinstance(v, (float, np.floating)):
        return float(v)
    if isinstance(v, Variant):
        return v.value
    return v


def _cell(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def render_csv(report: Report) -> str:
    buf = io.StringIO()
    buf.write(f"# {SCHEMA}\n")
    for k in sorted(report.meta):
        v = report.meta[k]
        if not isinstance(v, (dict, list, tuple)):
            buf.write(f"# {k}={_cell(v)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(report.columns)
    for row in report.rows:
        w.writerow([_cell(row.get(c)) for c in report.columns])
    return buf.getvalue()


def render_json(report: Report) -> str:
    return json.dumps(_plain(report.to_dict()), indent=2, sort_keys=True, allow_nan=True) + "\n"


# -- configuration --------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _mode_arg(text: str) -> tuple[int, int, int]:
    parts = [p for p in text.strip().strip("()[]").replace(" ", ",").split(",") if p]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"mode needs three integers, got {text!r}")
    return tuple(int(p) for p in parts)  # type: ignore[return-value]


def _float_list(text: str) -> list[float]:
    return [float(p) for p in text.replace(" ", ",").split(",") if p]


def _common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("lattice")
    g.add_argument("--variant", default="vdp", choices=["vdp", "vdpl"])
    g.add_argument("-N", "--N", dest="N", type=int, default=3)
    g.add_argument("--delta", type=float, default=0.0)
    g.add_argument("--zeta", type=float, default=0.0)
    g.add_argument("--epsilon", type=float, default=0.0)
    g.add_argument("--nu", type=float, default=1.0)
    g.add_argument("-a", "--a", dest="a", type=float, default=0.0)
    g.add_argument("-b", "--b", dest="b", type=float, default=1.0)
    o = p.add_argument_group("output")
    o.add_argument("--config", help="flat key=value file; flags override it")
    o.add_argument("--format", default="csv", choices=["csv", "json"])
    o.add_argument("--output", "-o", help="write the report here instead of stdout")
    o.add_argument("--workers", type=int, default=os.cpu_count() or 1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="torus-hopf", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("spectrum", help="closed-form spectral scalars per canonical mode")
    _common(p)

    p = sub.add_parser("catalog", help="Hopf bifurcation catalog with symmetry classes")
    _common(p)

    p = sub.add_parser("stability", help="equilibrium stability, threshold table, instability scan")
    _common(p)
    p.add_argument("--table", action="store_true",
                   help="tabulate the threshold for all eight coupling sign patterns")

    p = sub.add_parser("simulate", help="integrate the lattice and dump the trajectory")
    _common(p)
    p.add_argument("--t-end", type=float, default=10.0)
    p.add_argument("--samples", type=int, default=101)
    p.add_argument("--init", default="random", choices=["zero", "sync", "random", "mode"])
    p.add_argument("--mode", type=_mode_arg, default=(0, 0, 0))
    p.add_argument("--amplitude", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rtol", type=float, default=1e-8)
    p.add_argument("--atol", type=float, default=1e-10)

    p = sub.add_parser("orbit", help="shoot a periodic orbit seeded in one mode")
    _common(p)
    _orbit_options(p)
    p.add_argument("--save", help="write the orbit (with samples) as JSON for 'verify'")

    p = sub.add_parser("trace", help="continue a branch in a")
    _common(p)
    _orbit_options(p)
    p.add_argument("--a-values", type=_float_list)
    p.add_argument("--a-start", type=float)
    p.add_argument("--a-stop", type=float)
    p.add_argument("--a-step", type=float)

    p = sub.add_parser("verify", help="check a saved orbit against a twisted subgroup")
    _common(p)
    p.add_argument("--orbit", required=True, help="orbit JSON written by 'orbit --save'")
    p.add_argument("--symmetry", required=True)
    p.add_argument("--tol", type=float, default=1e-4)

    p = sub.add_parser("existence", help="prescribed-period catalog and search over nu")
    _common(p)
    p.add_argument("-p", "--p", dest="p", type=float, required=True)
    p.add_argument("--mode", type=_mode_arg)
    p.add_argument("--symmetry")
    p.add_argument("--nu-grid", type=_float_list)
    p.add_argument("--normalized-cubic", action="store_true",
                   help="use x^3/3 in place of x^3")
    p.add_argument("--samples", type=int, default=256)
    p.add_argument("--tol", type=float, default=1e-4)
    return parser


def _orbit_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mode", type=_mode_arg, default=(0, 0, 0))
    p.add_argument("--symmetry", help="twisted subgroup; default is the first class of the mode")
    p.add_argument("--amplitude", type=float,
                   help="per-node seed amplitude; default from the square-root law")
    p.add_argument("--samples", type=int, default=256)
    p.add_argument("--tol", type=float, default=1e-4, help="symmetry tolerance")


def read_config(path: str) -> dict[str, str]:
    out = {}
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from None
    for n, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected key=value, got {line!r}")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k.replace("-", "_")] = v
    return out


def _config_argv(sub: argparse.ArgumentParser, cfg: dict[str, str]) -> list[str]:
    """Translate config entries into option tokens understood by ``sub``."""
    actions = {a.dest: a for a in sub._actions if a.option_strings}
    argv = []
    for key, value in cfg.items():
        if key in ("config", "help") or key not in actions:
            raise ConfigError(f"unknown config key {key!r}")
        act = actions[key]
        opt = next((s for s in act.option_strings if s.startswith("--")), act.option_strings[0])
        if act.nargs == 0:
            if value.lower() in ("1", "true", "yes", "on"):
                argv.append(opt)
            elif value.lower() not in ("0", "false", "no", "off"):
                raise ConfigError(f"config key {key!r} expects a boolean, got {value!r}")
        else:
            argv.append(f"{opt}={value}")
    return argv


def parse_args(argv: Sequence[str]) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        cfg = read_config(args.config)
        sub = parser._subparsers._group_actions[0].choices[args.command]  # type: ignore[union-attr]
        rest = list(argv)
        i = rest.index(args.command)
        args = parser.parse_args(rest[:i + 1] + _config_argv(sub, cfg) + rest[i + 1:])
    return args


def params_from_args(args: argparse.Namespace) -> LatticeParams:
    try:
        return LatticeParams(args.N, args.delta, args.zeta, args.epsilon, nu=args.nu, a=args.a,
                             b=args.b, variant=args.variant)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _params_meta(p: LatticeParams) -> dict:
    return {"variant": p.variant.value, "N": p.N, "delta": p.delta, "zeta": p.zeta,
            "epsilon": p.epsilon, "nu": p.nu, "a": p.a, "b": p.b}


def _mode_cols(t) -> dict:
    return {"t1": t[0], "t2": t[1], "t3": t[2]}


# -- commands -------------------------------------------------------------------


def cmd_spectrum(args, params: LatticeParams) -> Report:
    cols = ["t1", "t2", "t3", "K", "G", "critical_a", "lambda1_re", "lambda1_im",
            "lambda2_re", "lambda2_im"]
    rep = Report("spectrum", cols, meta=_params_meta(params))
    for t in canonical_modes(params.N):
        if params.variant is Variant.VDP:
            lam = eigenvalues_vdp(params, t)
            crit = 0.0
        else:
            lam = eigenvalues_vdpl(params, t)
            crit = critical_a_vdpl(params, t)
        rep.rows.append({**_mode_cols(t), "K": k_of_mode(params, t), "G": g_of_mode(params, t),
                         "critical_a": crit,
                         "lambda1_re": lam[0].real, "lambda1_im": lam[0].imag,
                         "lambda2_re": lam[1].real, "lambda2_im": lam[1].imag})
    return rep


def cmd_catalog(args, params: LatticeParams) -> Report:
    cols = ["t1", "t2", "t3", "critical_a", "K", "G", "limit_frequency", "P1", "P2",
            "resonant", "symmetry", "branches"]
    records = bifurcation_catalog(params, workers=max(1, args.workers))
    rep = Report("catalog", cols, meta={**_params_meta(params), "records": len(records)})
    for r in records:
        periods = list(r.limit_periods) + [None]
        for h, count in zip(r.symmetries, r.branches_per_symmetry):
            rep.rows.append({**_mode_cols(r.mode), "critical_a": r.critical_a, "K": r.K,
                             "G": r.G, "limit_frequency": r.limit_frequency,
                             "P1": periods[0], "P2": periods[1], "resonant": r.resonant,
                             "symmetry": h.name, "branches": count})
    return rep


_SIGN_ROWS = [(-1, -1, -1), (1, -1, -1), (-1, 1, -1), (-1, -1, 1),
              (1, 1, -1), (1, -1, 1), (-1, 1, 1), (1, 1, 1)]


def cmd_stability(args, params: LatticeParams) -> Report:
    if args.table:
        cols = ["sign_delta", "sign_zeta", "sign_epsilon", "delta", "zeta", "epsilon",
                "a_star", "t1", "t2", "t3", "max_critical_a"]
        rep = Report("stability", cols, meta={"N": params.N, "variant": "vdpl"})
        mags = [abs(c) or 1.0 for c in params.couplings]
        for signs in _SIGN_ROWS:
            q = LatticeParams(params.N, *(s * m for s, m in zip(signs, mags)), b=params.b,
                              variant=Variant.VDPL)
            a_star, t = vdpl_threshold(q)
            brute = max(critical_a_vdpl(q, s) for s in canonical_modes(q.N))
            rep.rows.append({"sign_delta": "+" if signs[0] > 0 else "-",
                             "sign_zeta": "+" if signs[1] > 0 else "-",
                             "sign_epsilon": "+" if signs[2] > 0 else "-",
                             "delta": q.delta, "zeta": q.zeta, "epsilon": q.epsilon,
                             "a_star": a_star, **_mode_cols(t), "max_critical_a": brute})
        return rep

    cols = ["check", "verdict", "witness", "value"]
    rep = Report("stability", cols, meta=_params_meta(params))

    def add(check, verdict):
        for label, value in verdict.witnesses:
            rep.rows.append({"check": check, "verdict": verdict.kind.value,
                             "witness": _witness_label(label), "value": _witness_value(value)})

    add("equilibrium", equilibrium_verdict(params))
    if params.variant is Variant.VDP:
        add("instability_scan", vdp_instability_criterion(params))
    else:
        a_star, t = vdpl_threshold(params)
        bound, s = vdpl_stability_boundary(params)
        rep.meta.update({"a_star": a_star, "a_star_mode": list(t),
                         "stability_boundary": bound, "stability_boundary_mode": list(s)})
        rep.rows.append({"check": "threshold", "verdict": "", "witness": _witness_label(t),
                         "value": a_star})
        rep.rows.append({"check": "boundary", "verdict": "", "witness": _witness_label(s),
                         "value": bound})
    return rep


def _witness_label(label) -> str:
    if isinstance(label, tuple):
        return "(" + ",".join(str(int(v)) for v in label) + ")"
    return str(label)


def _witness_value(value):
    if isinstance(value, complex):
        return f"{value.real:.17g}{value.imag:+.17g}j"
    return value


def _initial_state(args, params: LatticeParams) -> np.ndarray:
    n = params.n_nodes
    if args.init == "zero":
        return np.zeros(params.dim)
    if args.init == "sync":
        return np.concatenate([np.full(n, args.amplitude), np.zeros(n)])
    if args.init == "mode":
        c, _ = mode_vectors(as_mode(args.mode, params.N), params.N)
        return np.concatenate([args.amplitude * c, np.zeros(n)])
    rng = np.random.default_rng(args.seed)
    return args.amplitude * rng.standard_normal(params.dim)


def _node_labels(N: int) -> list[str]:
    return [f"{i}{j}{k}" for i in range(N) for j in range(N) for k in range(N)]


def cmd_simulate(args, params: LatticeParams) -> Report:
    if args.samples < 2 or not args.t_end > 0:
        raise ConfigError("simulate needs --t-end > 0 and --samples >= 2")
    labels = _node_labels(params.N)
    cols = ["t"] + [f"x_{s}" for s in labels] + [f"y_{s}" for s in labels]
    grid = np.linspace(0.0, args.t_end, args.samples)
    traj = integrate(params, _initial_state(args, params), (0.0, args.t_end),
                     rtol=args.rtol, atol=args.atol, t_eval=grid)
    rep = Report("simulate", cols, meta={**_params_meta(params), "nfev": traj.nfev,
                                         "init": args.init})
    for t, z in zip(traj.t, traj.states):
        rep.rows.append(dict(zip(cols, [t, *z])))
    return rep


def _seeded_orbit(args, params: LatticeParams):
    t = as_mode(args.mode, params.N)
    record = bifurcation_record(params, t)
    if record is None:
        raise PreconditionError(f"mode {t} has K_t <= 0 and no Hopf branch")
    H = parse_subgroup(args.symmetry, params.N) if args.symmetry else record.symmetries[0]
    if H.name not in {h.name for h in record.symmetries}:
        raise ConfigError(f"{H.name} is not a symmetry class of mode {t}")
    return t, record, H


def cmd_orbit(args, params: LatticeParams) -> Report:
    from .symmetry import spatial_fixed_basis

    t, record, H = _seeded_orbit(args, params)
    amp = args.amplitude
    if amp is None:
        if params.a <= record.critical_a:
            raise PreconditionError(f"a={params.a} is not past the critical value "
                                    f"{record.critical_a} of mode {t}")
        amp = predicted_amplitude(params, record.critical_a)
    z0, T = seed_state(params, t, H, amp)
    orbit = find_orbit_shooting(params, z0, T, mode_hint=t, samples=args.samples,
                                subspace=spatial_fixed_basis(H, params.variant))
    mu = floquet_multipliers(orbit)
    verdict = orbit_verdict(mu)
    report = verify_orbit_symmetry(orbit, H, tol=args.tol, variant=params.variant)
    if args.save:
        with open(args.save, "w") as fh:
            json.dump(_plain(orbit.to_dict()), fh)
    cols = ["field", "index", "value"]
    rep = Report("orbit", cols, meta={**_params_meta(params), "mode": list(t),
                                      "symmetry": H.name})
    scalars = [("period", orbit.period), ("residual", orbit.residual),
               ("iterations", orbit.iterations), ("amplitude", orbit.amplitude),
               ("mode_fraction", orbit.mode_fraction),
               ("linear_period", T), ("limit_period", record.limit_periods[0]),
               ("stability", verdict.kind.value),
               ("symmetry", H.name), ("symmetry_max_defect", report.max_defect),
               ("symmetry_holds", report.holds), ("symmetry_minimal", report.minimal)]
    rep.rows.extend({"field": k, "index": None, "value": v} for k, v in scalars)
    for i, m in enumerate(mu):
        rep.rows.append({"field": "floquet_re", "index": i, "value": float(m.real)})
        rep.rows.append({"field": "floquet_im", "index": i, "value": float(m.imag)})
    return rep


def cmd_trace(args, params: LatticeParams) -> Report:
    t, record, H = _seeded_orbit(args, params)
    if args.a_values is None and None in (args.a_start, args.a_stop, args.a_step):
        raise ConfigError("trace needs --a-values or --a-start/--a-stop/--a-step")
    try:
        branch = trace_branch(params, record, H, a_values=args.a_values,
                              a_range=(args.a_start, args.a_stop) if args.a_values is None else None,
                              step=args.a_step, sym_tol=args.tol, samples=args.samples)
    except ValueError as exc:
        raise PreconditionError(str(exc)) from None
    cols = ["a", "period", "amplitude", "residual", "symmetry_defect", "symmetry_holds"]
    rep = Report("trace", cols, rows=branch.to_rows(),
                 meta={**_params_meta(params), "mode": list(t), "symmetry": H.name,
                       "critical_a": record.critical_a, "limit_period": record.limit_periods[0],
                       "fit_slope": branch.fit_slope, "fit_r2": branch.fit_r2,
                       "truncated": branch.truncated})
    if not branch.points:
        rep.exit_code = EXIT_NOT_CONVERGED
    return rep


def cmd_verify(args, params: LatticeParams) -> Report:
    try:
        with open(args.orbit) as fh:
            orbit = PeriodicOrbit.from_dict(json.load(fh))
    except (OSError, KeyError, TypeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot load orbit {args.orbit!r}: {exc}") from None
    H = parse_subgroup(args.symmetry, orbit.params.N)
    report = verify_orbit_symmetry(orbit, H, tol=args.tol, variant=orbit.params.variant)
    cols = ["symmetry", "max_defect", "holds", "minimal", "larger_holding"]
    row = {"symmetry": report.subgroup, "max_defect": report.max_defect, "holds": report.holds,
           "minimal": report.minimal, "larger_holding": ";".join(report.larger_holding)}
    return Report("verify", cols, rows=[row],
                  meta={**_params_meta(orbit.params), "period": orbit.period,
                        "residual": orbit.residual, "tol": args.tol})


def cmd_existence(args, params: LatticeParams) -> Report:
    if params.variant is not Variant.VDP:
        raise ConfigError("existence applies to the vdp variant")
    q = params.with_(cubic=1.0 / 3.0) if args.normalized_cubic else params
    catalog = admissible_period_catalog(q, args.p)
    if not catalog:
        raise PreconditionError("no admissible modes: every K_t <= (2 pi / p)^2")
    meta = {**_params_meta(q), "p": args.p, "admissible_modes": len(catalog)}
    if args.mode is None:
        cols = ["t1", "t2", "t3", "K", "symmetry", "branches"]
        rep = Report("existence", cols, meta=meta)
        for m in catalog:
            for h, c in zip(m.symmetries, m.counts):
                rep.rows.append({**_mode_cols(m.mode), "K": m.K, "symmetry": h.name,
                                 "branches": c})
        return rep
    t = as_mode(args.mode, q.N)
    H = args.symmetry or symmetry_classes(t, q.variant, q.N)[0].name
    res = existence_search(q, args.p, t, H, nu_grid=args.nu_grid, sym_tol=args.tol,
                           samples=args.samples)
    cols = ["nu", "period", "error"]
    rep = Report("existence", cols, rows=res.sweep,
                 meta={**meta, "mode": list(t), "symmetry": res.symmetry, "found": res.found,
                       "found_nu": res.nu, "message": res.message,
                       "found_period": res.orbit.period if res.orbit else None,
                       "found_residual": res.orbit.residual if res.orbit else None,
                       "symmetry_max_defect": (res.symmetry_report.max_defect
                                               if res.symmetry_report else None)})
    if not res.found:
        rep.exit_code = EXIT_NOT_CONVERGED
    return rep


COMMANDS = {"spectrum": cmd_spectrum, "catalog": cmd_catalog, "stability": cmd_stability,
            "simulate": cmd_simulate, "orbit": cmd_orbit, "trace": cmd_trace,
            "verify": cmd_verify, "existence": cmd_existence}


# -- entry point ----------------------------------------------------------------


def _error(kind: str, exc: BaseException, code: int, **extra) -> int:
    payload = {"error": kind, "message": str(exc), "exit_code": code, **extra}
    sys.stderr.write(json.dumps(_plain(payload), sort_keys=True) + "\n")
    return code


def run(argv: Sequence[str] | None = None) -> tuple[int, Report | None]:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse_args(argv)
        params = params_from_args(args)
        report = COMMANDS[args.command](args, params)
    except RejectedResonantPeriod as exc:
        return _error("RejectedResonantPeriod", exc, EXIT_PRECONDITION, p=exc.p,
                      hits=[list(h) for h in exc.hits]), None
    except PreconditionError as exc:
        return _error("PreconditionError", exc, EXIT_PRECONDITION), None
    except NotConvergedError as exc:
        return _error("NotConverged", exc, EXIT_NOT_CONVERGED), None
    except NoOrbitFound as exc:
        return _error("NoOrbitFound", exc, EXIT_NOT_CONVERGED,
                      residual=None if math.isnan(exc.residual) else exc.residual), None
    except IntegrationError as exc:
        return _error("IntegrationError", exc, EXIT_NOT_CONVERGED), None
    except (ConfigError, ValueError) as exc:
        return _error("ConfigError", exc, EXIT_CONFIG), None
    text = render_json(report) if args.format == "json" else render_csv(report)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return report.exit_code, report


def main(argv: Sequence[str] | None = None) -> int:
    code, _ = run(argv)
    return code


if __name__ == "__main__":
    sys.exit(main())
