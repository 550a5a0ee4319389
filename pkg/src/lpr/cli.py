"""``lpr`` command line: run scenarios, compare routes, run the acceptance suite."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .acceptance import format_table, run_acceptance, tol_scale_from_env
from .dynamics import ReducedState, energy, integrate_reduced, momentum
from .errors import ConfigError, IntegrationError, LPRError
from .reconstruction import MECH, PRINCIPAL, direct_integrate, reconstruct_route, route_distance
from .scenarios import REGISTRY, get_scenario

MODES = ("reduced", "mech", "principal", "direct", "compare")
ROUTES = ("direct", "mech", "principal")

EXIT_CONFIG = 1
EXIT_NUMERICAL = 2
EXIT_VERIFY_FAILED = 3


@dataclass
class RunConfig:
    scenario: str
    params: dict = field(default_factory=dict)
    ics: dict = field(default_factory=dict)
    t_end: float = 1.0
    dt: float = 1e-3
    mode: str = "reduced"
    output: str | None = None

    def validate(self):
        if self.scenario not in REGISTRY:
            raise ConfigError(f"unknown scenario {self.scenario!r}; registered: {', '.join(sorted(REGISTRY))}")
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; expected one of {', '.join(MODES)}")
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise ConfigError("dt must be positive")
        if not (np.isfinite(self.t_end) and self.t_end > 0):
            raise ConfigError("t-end must be positive")
        if self.mode == "compare" and not self.output:
            raise ConfigError("compare mode needs an output directory (-o)")


def _parse_pairs(items, what):
    out = {}
    for item in items or []:
        key, sep, val = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"{what} must look like key=value, got {item!r}")
        try:
            out[key.strip()] = float(val)
        except ValueError:
            raise ConfigError(f"{what} {key!r}: {val!r} is not a number") from None
    return out


def build_config(args) -> RunConfig:
    base = {}
    if args.config:
        try:
            base = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(base, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = set(base) - {"scenario", "params", "ics", "t_end", "dt", "mode", "output"}
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")

    params = {k: float(v) for k, v in dict(base.get("params", {})).items()}
    params.update(_parse_pairs(args.param, "--param"))
    ics = {k: float(v) for k, v in dict(base.get("ics", {})).items()}
    ics.update(_parse_pairs(args.ic, "--ic"))

    def pick(flag, key, default):
        return flag if flag is not None else base.get(key, default)

    scenario = pick(args.scenario, "scenario", None)
    if scenario is None:
        raise ConfigError(f"no scenario given; registered: {', '.join(sorted(REGISTRY))}")
    cfg = RunConfig(
        scenario=scenario,
        params=params,
        ics=ics,
        t_end=float(pick(args.t_end, "t_end", 1.0)),
        dt=float(pick(args.dt, "dt", 1e-3)),
        mode=pick(args.mode, "mode", "reduced"),
        output=pick(args.output, "output", None),
    )
    cfg.validate()
    return cfg


# --- CSV / JSON emission -------------------------------------------------------

def _fmt(x) -> str:
    return format(float(x), ".17g")


def csv_header(m, k, n=None):
    cols = ["t"]
    cols += [f"x_{i + 1}" for i in range(m)]
    cols += [f"v_{i + 1}" for i in range(m)]
    cols += [f"w_{a + 1}" for a in range(k)]
    if n is not None:
        cols += [f"g_{i + 1}{j + 1}" for i in range(n) for j in range(n)]
    cols += ["energy"] + [f"momentum_{a + 1}" for a in range(k)]
    return cols


def trajectory_rows(system, times, states, group=None):
    m = system.lag.base_dim
    for n, t in enumerate(times):
        s = ReducedState.from_vector(states[n], m)
        row = [t, *states[n]]
        if group is not None:
            row += list(group[n].reshape(-1))
        row += [energy(system, s), *momentum(system, s)]
        yield [_fmt(v) for v in row]


def write_csv(path_or_stream, system, times, states, group=None):
    n = None if group is None else group.shape[1]
    header = csv_header(system.lag.base_dim, system.lag.fiber_dim, n)

    def emit(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(trajectory_rows(system, times, states, group))

    if hasattr(path_or_stream, "write"):
        emit(path_or_stream)
    else:
        with open(path_or_stream, "w", newline="") as fh:
            emit(fh)


def _drifts(system, tr):
    m = system.lag.base_dim
    E = []
    P = []
    for y in tr.states:
        s = ReducedState.from_vector(y, m)
        E.append(energy(system, s))
        P.append(momentum(system, s))
    E, P = np.array(E), np.array(P)
    out = {"energy": float(np.max(np.abs(E - E[0])))}
    if system.alg.is_abelian:
        out["momentum"] = float(np.max(np.abs(P - P[0]), initial=0.0))
    if system.id == "rigid-body":
        pn = np.linalg.norm(P, axis=1)
        out["momentum_norm"] = float(np.max(np.abs(pn - pn[0])))
    return out


# --- commands ------------------------------------------------------------------

def _route(system, s0, cfg, mode):
    if mode == "direct":
        return direct_integrate(system, s0, cfg.t_end, cfg.dt)
    rt = integrate_reduced(system, s0.reduced(), cfg.t_end, cfg.dt)
    return reconstruct_route(system, rt, s0.g, MECH if mode == "mech" else PRINCIPAL)


def _output_path(cfg, suffix):
    out = Path(cfg.output)
    if out.suffix.lower() == ".csv":
        out.parent.mkdir(parents=True, exist_ok=True)
        return out
    out.mkdir(parents=True, exist_ok=True)
    return out / f"{cfg.scenario}_{suffix}.csv"


def run(cfg: RunConfig, stdout=None) -> int:
    stdout = stdout or sys.stdout
    system = get_scenario(cfg.scenario, **cfg.params)
    s0 = system.initial_state(cfg.ics)

    if cfg.mode == "reduced":
        rt = integrate_reduced(system, s0.reduced(), cfg.t_end, cfg.dt)
        target = _output_path(cfg, "reduced") if cfg.output else stdout
        write_csv(target, system, rt.times, rt.states)
        return 0

    if cfg.mode != "compare":
        tr = _route(system, s0, cfg, cfg.mode)
        target = _output_path(cfg, cfg.mode) if cfg.output else stdout
        write_csv(target, system, tr.times, tr.states, tr.group)
        return 0

    outdir = Path(cfg.output)
    outdir.mkdir(parents=True, exist_ok=True)
    trajs = {mode: _route(system, s0, cfg, mode) for mode in ROUTES}
    for mode, tr in trajs.items():
        write_csv(outdir / f"{cfg.scenario}_{mode}.csv", system, tr.times, tr.states, tr.group)
    pairs = {}
    worst = 0.0
    for i, a in enumerate(ROUTES):
        for b in ROUTES[i + 1:]:
            d = route_distance(trajs[a], trajs[b])
            pairs[f"{a}-{b}"] = d
            worst = max(worst, d["reduced"], d["group"])
    report = {
        "scenario": cfg.scenario,
        "params": system.params,
        "ics": system.ics(cfg.ics),
        "t_end": cfg.t_end,
        "dt": cfg.dt,
        "steps": int(trajs["direct"].times.size - 1),
        "pairwise_max_error": pairs,
        "max_route_error": worst,
        "drift": {mode: _drifts(system, tr) for mode, tr in trajs.items()},
    }
    (outdir / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    print(f"max route disagreement {worst:.3e}; wrote {outdir}", file=stdout)
    return 0


def verify(criteria=None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    try:
        scale = tol_scale_from_env()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    results = run_acceptance(scale, criteria)
    print(format_table(results), file=stdout)
    return 0 if all(r.passed for r in results) else EXIT_VERIFY_FAILED


def list_scenarios(stdout=None) -> int:
    stdout = stdout or sys.stdout
    for name in sorted(REGISTRY):
        system = get_scenario(name)
        params = ", ".join(f"{k}={v:g}" for k, v in system.params.items()) or "-"
        ics = ", ".join(f"{k}={v:g}" for k, v in system.default_ics.items())
        print(f"{name}: {system.description}", file=stdout)
        print(f"    group dim {system.alg.dim}, base dim {system.lag.base_dim}", file=stdout)
        print(f"    params: {params}", file=stdout)
        print(f"    initial values: {ics}", file=stdout)
    return 0


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lpr", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="integrate a scenario and write a trajectory CSV")
    p.add_argument("--scenario", help=f"one of: {', '.join(sorted(REGISTRY))}")
    p.add_argument("--param", action="append", metavar="K=V", help="scenario parameter (repeatable)")
    p.add_argument("--ic", action="append", metavar="K=V", help="initial value override (repeatable)")
    p.add_argument("--t-end", type=float, dest="t_end")
    p.add_argument("--dt", type=float)
    p.add_argument("--mode", choices=MODES)
    p.add_argument("-o", "--output", help="CSV file or directory (stdout if omitted)")
    p.add_argument("--config", help="JSON config file; flags override its values")

    v = sub.add_parser("verify", help="run the acceptance suite")
    v.add_argument("--criteria", help="comma-separated subset, e.g. 1,3")

    sub.add_parser("list-scenarios", help="show registered scenarios")
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        if args.command == "run":
            return run(build_config(args))
        if args.command == "verify":
            crit = None if not args.criteria else {c.strip() for c in args.criteria.split(",")}
            return verify(crit)
        return list_scenarios()
    except ConfigError as exc:
        print(f"lpr: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except IntegrationError as exc:
        print(f"lpr: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except LPRError as exc:
        print(f"lpr: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
