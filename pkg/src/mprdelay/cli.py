"""Command-line front end.

Every output starts with the fully resolved configuration (as ``#`` comment
lines in CSV, as a ``config`` object in JSON), and that output can be fed
back through ``--config`` to reproduce the run.

Exit codes: 0 all rows succeeded, 1 configuration error, 2 some row failed
to converge (the row carries an ``error`` column).
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor

from .capacity import PoissonSum, Target, capacity_report, optimal_backoff_factor
from .config import ConfigError, RunConfig, load_config
from .errors import MprDelayError
from .saturation import solve_saturation
from .sim import SimConfig, replicate, write_trace_csv
from .throughput import offered_load_roots
from .vacation import analyze_delay

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2


def _base_columns(rc: RunConfig) -> dict:
    net = rc.net
    return {
        "N": net.n_stations,
        "M": net.mpr_capability,
        "r": net.backoff_factor,
        "W0": net.min_window,
        "mode": net.access_mode.value,
        "PL": net.payload_bits,
        "lam": net.arrival_rate,
    }


def _guard(fn):
    """Turn solver failures into an ``error`` column on the row."""

    def wrapped(rc, *args, **kwargs):
        try:
            return fn(rc, *args, **kwargs)
        except MprDelayError as exc:
            return [{**_base_columns(rc), "error": f"{type(exc).__name__}: {exc}"}]

    return wrapped


@_guard
def rows_saturate(rc: RunConfig) -> list[dict]:
    sat = solve_saturation(rc.net, rc.st)
    return [{
        **_base_columns(rc),
        "tau_s": sat.tau_s,
        "p_c": sat.p_c,
        "S_s_bits_per_s": sat.s_s,
        "S_s_pkts_per_s": sat.s_s_pkts,
        "residual": sat.residual,
    }]


@_guard
def rows_roots(rc: RunConfig) -> list[dict]:
    pts = offered_load_roots(rc.net, rc.st)
    return [{
        **_base_columns(rc),
        "offered_bps": rc.net.offered_load_bps,
        "tau_l": pts.tau_l,
        "tau_r": pts.tau_r,
        "tau_s": pts.tau_s,
        "tau_star": pts.tau_star,
        "S_star": pts.s_star,
        "case": pts.relationship.value if pts.relationship else None,
    }]


@_guard
def rows_delay(rc: RunConfig) -> list[dict]:
    d = analyze_delay(rc.net, rc.st)
    ex = d.service.m1 if d.service is not None else math.inf
    return [{
        **_base_columns(rc),
        "offered_bps": rc.net.offered_load_bps,
        "offered_pps": rc.net.offered_load_bps / rc.net.payload_bits,
        "tau_l": d.tau,
        "p_c": d.p_c,
        "rho_tilde": d.rho_tilde,
        "rho": d.rho,
        "E_X": ex,
        "E_Y": d.ey,
        "E_D": d.mean_delay,
        "sigma_D": d.delay_std,
        "stable": d.verdict.stable,
        "bounded_mean": d.verdict.bounded_mean,
        "bounded_jitter": d.verdict.bounded_jitter,
        "scope": d.verdict.scope,
    }]


@_guard
def rows_capacity(rc: RunConfig) -> list[dict]:
    rep = capacity_report(rc.net, rc.st)
    return [{
        **_base_columns(rc),
        "tau_bbmd": rep.tau_bbmd,
        "tau_bbdj": rep.tau_bbdj,
        "tau_s": rep.tau_s,
        "tau_star": rep.tau_star,
        "S_bbmd": rep.s_bbmd,
        "S_bbdj": rep.s_bbdj,
        "S_s": rep.s_s,
        "S_star": rep.s_star,
        "S_sbmd": rep.s_sbmd,
        "S_sbdj": rep.s_sbdj,
        "scenario": rep.scenario.value,
        "no_eb_regime": rep.no_eb_regime,
    }]


def rows_optimize(rc: RunConfig, m_values=None, target="SBMD", variant="exact", finite_n=False) -> list[dict]:
    rows = []
    for m in m_values or [rc.net.mpr_capability]:
        sub = rc.with_values({"M": m})
        base = {**_base_columns(sub), "target": Target.parse(target).value}
        try:
            opt = optimal_backoff_factor(
                m, sub.st, sub.net.payload_bits, target, large_n=not finite_n, variant=variant,
                n_stations=sub.net.n_stations, min_window=sub.net.min_window,
            )
            rows.append({**base, "r_star": opt.r_star, "S_star": opt.s_star, "S_star_per_M": opt.normalized})
        except MprDelayError as exc:
            rows.append({**base, "error": f"{type(exc).__name__}: {exc}"})
    return rows


def rows_simulate(rc: RunConfig, trace_path=None) -> list[dict]:
    if rc.sim.duration_s is None:
        raise ConfigError("sim.duration_s is required for simulate")
    try:
        cfg = SimConfig(rc.net, rc.st, rc.sim.duration_s, rc.sim.warmup_s, rc.sim.seed,
                        rc.sim.queue_capacity, rc.sim.saturated, trace=trace_path is not None)
    except MprDelayError as exc:
        raise ConfigError(str(exc)) from None
    rep = replicate(cfg, rc.sim.runs, workers=1 if rc.sim.runs == 1 else None)
    if trace_path is not None:
        write_trace_csv(rep.runs[0], trace_path)
    rows = []
    for i, s in enumerate(rep.runs):
        row = {**_base_columns(rc), "run": i}
        row.update(s.summary())
        rows.append(row)
    if rc.sim.runs > 1:
        agg = {**_base_columns(rc), "run": "mean"}
        for k, v in rep.means.items():
            agg[k] = v
            agg[k + "_ci95"] = rep.ci95[k]
        agg["delay_spread_s"] = rep.delay_spread_s
        agg["non_converged"] = rep.non_converged
        rows.append(agg)
    return rows


ROW_FUNCS = {
    "saturate": rows_saturate,
    "roots": rows_roots,
    "delay": rows_delay,
    "capacity": rows_capacity,
}


def _parse_values(text: str) -> list[str]:
    out = []
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            lo, hi = part.split("..", 1)
            out.extend(str(v) for v in range(int(lo), int(hi) + 1))
        elif part:
            out.append(part)
    return out


def _parse_m_values(text: str | None):
    return [int(v) for v in _parse_values(text)] if text else None


def _cell(v) -> str:
    if hasattr(v, "item"):
        v = v.item()
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _json_value(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None if math.isnan(v) else ("inf" if v > 0 else "-inf")
    if hasattr(v, "item"):
        return _json_value(v.item())
    return v


def render(rows: list[dict], rc: RunConfig, fmt: str) -> str:
    if fmt == "json":
        doc = {"config": rc.sections, "rows": [{k: _json_value(v) for k, v in row.items()} for row in rows]}
        return json.dumps(doc, indent=2) + "\n"
    columns: list[str] = []
    for row in rows:
        columns.extend(k for k in row if k not in columns)
    if any("error" in row for row in rows) and "error" in columns:
        columns.remove("error")
        columns.append("error")
    buf = io.StringIO()
    buf.write(rc.header())
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_cell(row.get(c)) for c in columns])
    return buf.getvalue()


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI config, or an earlier CSV/JSON output")
    common.add_argument("--preset", help="preset name (table1, unit or a file in $MPRDELAY_PRESET_DIR)")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config value, e.g. net.n_stations=50 or N=50")
    common.add_argument("--out", help="output file (default stdout)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")

    p = argparse.ArgumentParser(prog="mprdelay", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("saturate", parents=[common], help="saturated attempt probability and throughput")
    sub.add_parser("roots", parents=[common], help="attempt probabilities matching the offered load")
    sub.add_parser("delay", parents=[common], help="mean delay, jitter and stability at the offered load")
    sub.add_parser("capacity", parents=[common], help="bounded-delay boundaries, safe throughputs, scenario")

    opt = sub.add_parser("optimize", parents=[common], help="backoff factor maximizing safe throughput")
    opt.add_argument("--target", choices=("SBMD", "SBDJ"), default="SBMD")
    opt.add_argument("--m-values", help="MPR capabilities, e.g. 1..8 or 1,2,4 (default net.mpr_capability)")
    opt.add_argument("--variant", choices=[v.value for v in PoissonSum], default=PoissonSum.EXACT.value)
    opt.add_argument("--finite-n", action="store_true", help="exact binomials with net.n_stations stations")

    sim = sub.add_parser("simulate", parents=[common], help="slot-level simulation ([sim] section)")
    sim.add_argument("--trace", help="write per-packet trace CSV of the first run")

    sw = sub.add_parser("sweep", parents=[common], help="cross product over config axes")
    sw.add_argument("--axis", action="append", default=[], metavar="KEY=V1,V2,...",
                    help="axis such as N=10,50 or M=1..6 (aliases N M r W0 lam PL mode)")
    sw.add_argument("--what", choices=sorted(ROW_FUNCS) + ["optimize"], default="saturate")
    sw.add_argument("--target", choices=("SBMD", "SBDJ"), default="SBMD")
    sw.add_argument("--variant", choices=[v.value for v in PoissonSum], default=PoissonSum.EXACT.value)
    return p


def _sweep(rc: RunConfig, args) -> list[dict]:
    axes = []
    for spec in args.axis:
        if "=" not in spec:
            raise ConfigError(f"axis {spec!r} must look like key=v1,v2")
        key, values = spec.split("=", 1)
        axes.append((key.strip(), _parse_values(values)))
    if not axes:
        raise ConfigError("sweep needs at least one --axis")
    combos = [dict(zip([k for k, _ in axes], vals)) for vals in itertools.product(*[v for _, v in axes])]
    configs = [rc.with_values(c) for c in combos]

    if args.what == "optimize":
        def work(c):
            return rows_optimize(c, None, args.target, args.variant)
    else:
        work = ROW_FUNCS[args.what]
    with ThreadPoolExecutor() as pool:
        results = list(pool.map(work, configs))
    return [row for rows in results for row in rows]


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        rc = load_config(args.config, args.overrides, args.preset)
        if args.command in ROW_FUNCS:
            rows = ROW_FUNCS[args.command](rc)
        elif args.command == "optimize":
            rows = rows_optimize(rc, _parse_m_values(args.m_values), args.target, args.variant, args.finite_n)
        elif args.command == "simulate":
            rows = rows_simulate(rc, args.trace)
        else:
            rows = _sweep(rc, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    text = render(rows, rc, args.format)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    failed = [row["error"] for row in rows if row.get("error")]
    for msg in failed:
        print(f"row failed: {msg}", file=sys.stderr)
    return EXIT_SOLVER if failed else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
