"""Command line front end.

Every subcommand reads its parameters from an optional INI-style config
(section named after the subcommand, ``key = value``) and from flags, flags
winning.  Output is CSV with ``#`` metadata lines echoing the resolved
config, or JSON.  Exit codes: 0 ok, 1 validation failure, 2 config error.
"""
from __future__ import annotations

import argparse
import configparser
import io
import json
import math
import sys
from dataclasses import dataclass, field

import numpy as np

from . import resident as res
from . import values as val
from .model import LN2, ModelError, ModelParams, ReducedState, validate
from .multiseason import NoConvergence, find_resident_equilibrium, simulate_invasion
from .mutant import MimicPolicy, MutantPolicy, SurfaceId
from .trajectory import CSV_COLUMNS, integrate_season
from .validation import run_suite

# name -> (type, default)
SCHEMAS: dict[str, dict[str, tuple[type, object]]] = {
    "resident-pattern": {"c": (float, 1.5), "T": (float, 2.0), "nx": (int, 41), "ntau": (int, 41),
                         "x_max": (float, 1.0)},
    "mutant-pattern": {"c": (float, 3.0), "eps": (float, 0.0), "T": (float, 4.0), "ntau": (int, 201)},
    "value-sweep": {"c": (float, 3.0), "T_min": (float, 0.1), "T_max": (float, 4.0), "n": (int, 40)},
    "season": {"c": (float, 3.0), "eps": (float, 0.0), "T": (float, 4.0), "n0": (float, 1.0),
               "policy": (str, "best")},
    "invasion": {"alpha": (float, 2.0), "beta": (float, 0.5), "T": (float, 4.0),
                 "c_m0": (float, 0.001), "seasons": (int, 50)},
    "equilibrium": {"alpha": (float, 2.0), "beta": (float, 0.5), "T": (float, 4.0)},
    "validate": {"suite": (str, "quick")},
}

SUITES = ("quick", "values", "oracle", "all")


class ConfigError(ModelError):
    pass


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


@dataclass
class RunConfig:
    command: str
    values: dict[str, object] = field(default_factory=dict)

    def to_ini(self) -> str:
        cp = configparser.ConfigParser()
        cp.optionxform = str
        cp[self.command] = {k: fmt(v) for k, v in self.values.items()}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    @classmethod
    def from_ini(cls, text: str, command: str) -> "RunConfig":
        cp = configparser.ConfigParser()
        cp.optionxform = str
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"malformed config: {exc}") from exc
        raw = dict(cp[command]) if cp.has_section(command) else {}
        return cls(command, _coerce(command, raw))


def _coerce(command: str, raw: dict[str, str]) -> dict[str, object]:
    schema = SCHEMAS[command]
    out = {}
    for k, v in raw.items():
        if k not in schema:
            raise ConfigError(f"unknown key {k!r} for {command}")
        typ = schema[k][0]
        try:
            out[k] = typ(v)
        except ValueError as exc:
            raise ConfigError(f"bad value for {k}: {v!r}") from exc
    return out


def resolve(command: str, args: argparse.Namespace) -> RunConfig:
    values = {k: d for k, (_, d) in SCHEMAS[command].items()}
    if args.config:
        try:
            with open(args.config) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(str(exc)) from exc
        values.update(RunConfig.from_ini(text, command).values)
    for k in SCHEMAS[command]:
        v = getattr(args, k, None)
        if v is not None:
            values[k] = v
    return RunConfig(command, values)


# -- emitters -------------------------------------------------------------------

@dataclass
class Table:
    columns: tuple[str, ...]
    rows: list[tuple]
    meta: dict[str, object] = field(default_factory=dict)
    footer: list[str] = field(default_factory=list)


def render(table: Table, cfg: RunConfig, form: str) -> str:
    if form == "json":
        doc = {
            "command": cfg.command,
            "config": {k: cfg.values[k] for k in cfg.values},
            "meta": {k: _jsonable(v) for k, v in table.meta.items()},
            "columns": list(table.columns),
            "rows": [[_jsonable(x) for x in r] for r in table.rows],
            "footer": table.footer,
        }
        return json.dumps(doc, indent=1, sort_keys=False) + "\n"
    lines = [f"# command: {cfg.command}"]
    lines += [f"# config.{k} = {fmt(v)}" for k, v in cfg.values.items()]
    lines += [f"# {k} = {fmt(v)}" for k, v in table.meta.items()]
    lines.append(",".join(table.columns))
    lines += [",".join(fmt(x) for x in r) for r in table.rows]
    lines += [f"# {f}" for f in table.footer]
    return "\n".join(lines) + "\n"


def _jsonable(v):
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


# -- commands -------------------------------------------------------------------

def cmd_resident_pattern(v) -> Table:
    c, T = v["c"], v["T"]
    validate(ModelParams(T=T, c=c))
    taus = np.linspace(0.0, T, v["ntau"])
    xs = np.linspace(0.0, v["x_max"], v["nx"])
    rows = []
    for tau in taus:
        for x in xs:
            rows.append(("field", tau, x, res.resident_control(_rs(x, tau), c)))
    fine = np.linspace(0.0, T, 4 * v["ntau"] + 1)
    for tau in fine[fine <= LN2]:
        rows.append(("S", tau, -math.expm1(-tau), ""))
    T1 = res.season_threshold_T1(c)
    arc = fine[fine > LN2]
    if T > T1:
        for tau, x in zip(arc, res.singular_arc_x_array(arc, c)):
            rows.append(("S_sigma", tau, x, res.singular_control(x, c)))
    return Table(("kind", "tau", "x", "u_r"), rows, {"T1": T1, "singular_phase": T > T1})


def _rs(x, tau):
    return ReducedState(float(x), float(x), float(tau))


def cmd_mutant_pattern(v) -> Table:
    p = ModelParams(T=v["T"], c=v["c"], eps=v["eps"])
    pol = MutantPolicy(p)
    taus = np.linspace(0.0, p.T, v["ntau"])
    surf = pol.surfaces(taus)
    rows = []
    for sid in SurfaceId:
        for tau, x in surf.get(sid, np.empty((0, 2))):
            rows.append((sid.value, tau, x))
    meta = {f"exists.{sid.value}": sid in surf for sid in SurfaceId}
    meta["S2_sigma_structural"] = pol.s2 is not None
    if pol.s2 is not None:
        meta["S2_tangency_x"] = pol.s2.x_star
        meta["S2_tangency_tau"] = pol.s2.tau_star
    meta["tau_B"] = pol.arc.tau_B
    return Table(("surface", "tau", "x"), rows, meta)


def cmd_value_sweep(v) -> Table:
    c = v["c"]
    Ts = np.linspace(v["T_min"], v["T_max"], v["n"])
    rows = [(T, U_r, U_m, tag.value) for T, U_r, U_m, tag in val.sweep(c, Ts)]
    reg = val.regions(c)
    return Table(("T", "U_r", "U_m", "region"), rows, {"T1": reg.T1, "T2": reg.T2})


def cmd_season(v) -> Table:
    p = ModelParams(T=v["T"], c=v["c"], eps=v["eps"])
    if v["policy"] not in ("best", "mimic"):
        raise ConfigError(f"policy must be best or mimic, got {v['policy']!r}")
    pol = MutantPolicy(p) if v["policy"] == "best" else MimicPolicy(p)
    o = integrate_season(p, pol, v["n0"])
    rows = []
    for t, st, u in o.samples:
        rows.append((t, st.p_r, st.p_m, st.n, st.p_r / st.n, st.p_m / st.n, u.u_r, u.u_m))
    meta = {"J_r": o.J_r, "J_m": o.J_m, "J_n": o.J_n, "U_r": o.U_r, "U_m": o.U_m, "V": o.V,
            "events": ";".join(f"{fmt(t)}:{s.value}" for t, s in o.events)}
    return Table(CSV_COLUMNS, rows, meta)


def cmd_invasion(v) -> Table:
    eq = find_resident_equilibrium(v["alpha"], v["beta"], v["T"])
    p = ModelParams(T=v["T"], c=eq.c, alpha=v["alpha"], beta=v["beta"])
    s = simulate_invasion(eq, v["c_m0"], v["seasons"], p)
    rows = []
    for k, g in enumerate(s.generations):
        rec = s.seasons[k] if k < len(s.seasons) else None
        extra = ("", "", "") if rec is None else (rec.U_r, rec.U_m, rec.V)
        rows.append((g.i, g.c_r, g.c_m, g.eps, g.n0, *extra))
    footer = [f"truncated: {s.reason}"] if s.truncated else []
    return Table(("season", "c_r", "c_m", "eps", "n0", "U_r", "U_m", "V"), rows,
                 {"c_star": eq.c, "n_star": eq.n, "truncated": s.truncated}, footer)


def cmd_equilibrium(v) -> Table:
    try:
        eq = find_resident_equilibrium(v["alpha"], v["beta"], v["T"])
    except NoConvergence as exc:
        return Table(("c", "n", "regime", "abs_eig"), [("", "", exc.regime.value, "")])
    return Table(("c", "n", "regime", "abs_eig"),
                 [(eq.c, eq.n, eq.regime.value, max(abs(z) for z in eq.eigenvalues))],
                 {"eig_re": eq.eigenvalues[0].real, "eig_im": abs(eq.eigenvalues[0].imag)})


def cmd_validate(v) -> tuple[Table, bool]:
    suite = v["suite"]
    if suite not in SUITES:
        raise ConfigError(f"unknown suite {suite!r}; choose from {', '.join(SUITES)}")
    results = run_suite(suite)
    rows = [(r.name, r.value, r.reference, r.error, r.tol, "pass" if r.passed else "FAIL") for r in results]
    ok = all(r.passed for r in results)
    return Table(("check", "value", "reference", "error", "tol", "status"), rows, {"passed": ok}), ok


COMMANDS = {
    "resident-pattern": cmd_resident_pattern,
    "mutant-pattern": cmd_mutant_pattern,
    "value-sweep": cmd_value_sweep,
    "season": cmd_season,
    "invasion": cmd_invasion,
    "equilibrium": cmd_equilibrium,
    "validate": cmd_validate,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="freerider", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name, schema in SCHEMAS.items():
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="INI file with a [%s] section" % name)
        sp.add_argument("--out", help="output path (default stdout)")
        sp.add_argument("--format", choices=("csv", "json"), default="csv")
        for k, (typ, default) in schema.items():
            flag = "--" + k.replace("_", "-")
            kw = dict(type=typ, default=None, dest=k, help=f"default {default}")
            if name == "validate" and k == "suite":
                kw["choices"] = SUITES
            sp.add_argument(flag, **kw)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        cfg = resolve(args.command, args)
        out = COMMANDS[args.command](cfg.values)
        ok = True
        if isinstance(out, tuple):
            out, ok = out
        text = render(out, cfg, args.format)
    except ModelError as exc:
        print(f"freerider {args.command}: {exc}", file=sys.stderr)
        return 2
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
