"""Command-line harness: construct designs, run simulations, emit CSVs + figures.

Subcommands: construct | simulate | analyze-graph | spectral.  Every CSV is
written next to a JSON manifest sufficient to regenerate it byte-for-byte,
and (unless --no-plot) a rendered PNG figure.

Exit codes: 0 success, 1 usage, 2 validation, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import configparser
import json
import os
import sys

import numpy as np

from . import __version__, analysis, plots
from .channel import MODES, ScenarioConfig, build_link
from .euler import (BudgetExceededError, ParameterError, build_mapping_matrix,
                    check_partial_geometry, connectivity, construct_euler_square,
                    count_cycles, extract_protograph, girth, verify_properties,
                    write_dense, write_triplets)

EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


# ---------------------------------------------------------------------------
# Config files (INI sections mirroring ScenarioConfig; unknown keys are errors)

_CONFIG_SCHEMA = {
    "design": {"gamma": int, "rho": int},
    "fec": {"ell": int, "wc": int, "wr": int, "bp_iters": int},
    "channel": {"q": int, "phase_mode": str, "noiseless": bool},
    "access": {"mode": str, "ka": int, "active_set": str},
    "sim": {"task": str, "ebn0_grid": str, "ka_list": str, "target_pe": float,
            "lo_db": float, "hi_db": float, "resolution": float,
            "target_errors": int, "min_trials": int, "max_trials": int,
            "seed": int, "inner_iters": int, "outer_iters": int,
            "max_check_degree": int, "pe_events": str},
}


def parse_config_file(path) -> dict:
    cp = configparser.ConfigParser()
    read = cp.read(path)
    if not read:
        raise ParameterError(f"config file not found: {path}")
    values: dict = {}
    for section in cp.sections():
        if section not in _CONFIG_SCHEMA:
            raise ParameterError(f"unknown config section [{section}]")
        schema = _CONFIG_SCHEMA[section]
        for key, raw in cp.items(section):
            if key not in schema:
                raise ParameterError(f"unknown key {key!r} in section [{section}]")
            typ = schema[key]
            if typ is bool:
                values[key] = cp.getboolean(section, key)
            else:
                values[key] = typ(raw)
    return values


def parse_grid(text: str) -> list[float]:
    """Either 'start:stop:step' (inclusive) or a comma list of dB values."""
    text = text.strip()
    if ":" in text:
        parts = [float(tok) for tok in text.split(":")]
        if len(parts) != 3 or parts[2] <= 0:
            raise ParameterError(f"bad grid spec {text!r} (want start:stop:step)")
        start, stop, step = parts
        count = int(round((stop - start) / step))
        return [start + i * step for i in range(count + 1)]
    return [float(tok) for tok in text.split(",") if tok.strip()]


def parse_int_list(text: str) -> list[int]:
    return [int(tok) for tok in text.split(",") if tok.strip()]


def scenario_from(values: dict) -> ScenarioConfig:
    missing = [key for key in ("gamma", "rho", "ell") if values.get(key) is None]
    if missing:
        raise ParameterError(f"missing required config values: {', '.join(missing)}")
    kw = dict(
        gamma=values["gamma"], rho=values["rho"], ell=values["ell"],
        mode=values.get("mode", "scheduled"),
        q=values.get("q", 1),
        w_c=values.get("wc", 3), w_r=values.get("wr", 6),
        phase_mode=values.get("phase_mode", "uniform"),
        master_seed=values.get("seed", 0),
        inner_iters=values.get("inner_iters", 4),
        outer_iters=values.get("outer_iters", 3),
        bp_iters=values.get("bp_iters", 40),
        max_check_degree=values.get("max_check_degree", 12),
        noiseless=values.get("noiseless", False),
    )
    if kw["mode"] != "scheduled":
        if "active_set" in values:
            kw["active_set"] = tuple(parse_int_list(values["active_set"]))
        elif "ka" in values:
            kw["ka"] = values["ka"]
    return ScenarioConfig(**kw)


def _ensure_outdir(path) -> str:
    os.makedirs(path, exist_ok=True)
    return path


# ---------------------------------------------------------------------------
# construct


def cmd_construct(args) -> int:
    out = _ensure_outdir(args.out)
    es = construct_euler_square(args.gamma, args.rho)
    fm = build_mapping_matrix(es)
    with open(os.path.join(out, "euler_square.txt"), "w", encoding="utf-8") as fh:
        fh.write(f"{es.gamma} {es.rho}\n")
        for i in range(es.gamma):
            fh.write("  ".join(",".join(str(s) for s in es.cells[i, j])
                               for j in range(es.gamma)) + "\n")
    write_triplets(fm, os.path.join(out, "mapping_triplets.txt"))
    if fm.n_users <= 2500:
        write_dense(fm, os.path.join(out, "mapping_dense.txt"))
    proto = extract_protograph(fm)
    np.savetxt(os.path.join(out, "protograph_generators.txt"),
               proto.generators, fmt="%d", header="circulant offsets, gamma x rho")

    rep = verify_properties(fm)
    lines = [
        f"design E({args.gamma},{args.rho})",
        f"n_s {fm.n_s}",
        f"users {fm.n_users}",
        f"biregular {rep.biregular}",
        f"rc_constrained {rep.rc_constrained}",
        f"cpm_array {rep.cpm_array}",
        f"partial_geometry {check_partial_geometry(fm)}",
        f"connectivity {connectivity(fm)}",
    ]
    if args.gamma <= args.girth_limit:
        g = girth(fm)
        lines.append(f"girth {g if g is not None else 'acyclic'}")
    else:
        lines.append("girth skipped (order above --girth-limit)")
    if args.gamma <= 7:
        target = 8 if args.rho == 2 else 6
        try:
            lines.append(f"cycles_len{target} {count_cycles(fm, target)}")
        except BudgetExceededError:
            lines.append(f"cycles_len{target} budget-exceeded")
    report = "\n".join(lines) + "\n"
    with open(os.path.join(out, "properties.txt"), "w", encoding="utf-8") as fh:
        fh.write(report)
    sys.stdout.write(report)
    if not args.no_plot:
        plots.render_mapping(fm.matrix, os.path.join(out, "mapping.png"))
    return 0


# ---------------------------------------------------------------------------
# simulate


def cmd_simulate(args) -> int:
    out = _ensure_outdir(args.out)
    if args.manifest:
        with open(args.manifest, encoding="utf-8") as fh:
            manifest = json.load(fh)
        config = analysis.config_from_manifest(manifest)
        task = manifest["task"]
        params = manifest["params"]
    else:
        values = parse_config_file(args.config) if args.config else {}
        for key, flag in (("gamma", args.gamma), ("rho", args.rho), ("ell", args.ell),
                          ("ka", args.ka), ("mode", args.mode), ("seed", args.seed),
                          ("max_trials", args.trials)):
            if flag is not None:
                values[key] = flag
        if args.ebn0_grid is not None:
            values["ebn0_grid"] = args.ebn0_grid
        config = scenario_from(values)
        task = values.get("task", "sweep")
        params = {
            "target_errors": values.get("target_errors", 50),
            "min_trials": values.get("min_trials", 16),
            "max_trials": values.get("max_trials", 10_000),
            "pe_events": values.get("pe_events", "all"),
        }
        if task == "sweep":
            params["grid"] = parse_grid(values.get("ebn0_grid", "0:10:1"))
        elif task == "threshold":
            params.update({
                "ka_list": parse_int_list(values.get("ka_list", str(config.ka))),
                "target_pe": values.get("target_pe", 0.05),
                "lo_db": values.get("lo_db", 3.0),
                "hi_db": values.get("hi_db", 12.0),
                "resolution": values.get("resolution", 0.25),
            })
        else:
            raise ParameterError(f"unknown task {task!r} (want sweep or threshold)")

    if task == "sweep":
        sweep = analysis.pe_sweep(config, params["grid"], params["target_errors"],
                                  params["min_trials"], params["max_trials"],
                                  jobs=args.jobs, pe_events=params.get("pe_events", "all"))
    else:
        sweep = analysis.required_ebn0_sweep(
            config, params["ka_list"], params["target_pe"], params["lo_db"],
            params["hi_db"], params["resolution"], params["target_errors"],
            params["min_trials"], params["max_trials"], jobs=args.jobs,
            pe_events=params.get("pe_events", "all"))

    csv_path = os.path.join(out, "results.csv")
    sweep.write_csv(csv_path)
    outputs = {"csv": os.path.basename(csv_path)}

    if args.trace:
        trace_path = os.path.join(out, "trace.txt")
        link = build_link(config)
        grid = params["grid"] if task == "sweep" else [params["hi_db"]]
        with open(trace_path, "w", encoding="utf-8") as fh:
            for point in grid:
                truth, outcome = analysis.simulate_trial(link, config, float(point), 0)
                fh.write(analysis.format_trace(link, config, float(point), 0, truth, outcome))
        outputs["trace"] = os.path.basename(trace_path)

    if not args.no_plot:
        fig_path = os.path.join(out, "results.png")
        if task == "sweep":
            plots.render_pe_curve(sweep.rows, fig_path)
        else:
            plots.render_threshold_curve(sweep.rows, fig_path, params["target_pe"])
        outputs["figure"] = os.path.basename(fig_path)

    manifest = analysis.make_manifest(config, task, params, outputs)
    analysis.write_manifest(manifest, os.path.join(out, "manifest.json"))
    print(f"wrote {csv_path}")
    return 0


# ---------------------------------------------------------------------------
# analyze-graph


def cmd_analyze_graph(args) -> int:
    out = _ensure_outdir(args.out)
    ka_list = parse_int_list(args.ka)
    rows = analysis.degree_histogram_experiment(args.gamma, args.rho, ka_list,
                                                n_seeds=args.seeds, master_seed=args.seed or 0)
    csv_path = os.path.join(out, "degree_histograms.csv")
    with open(csv_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(analysis.degree_histogram_csv(rows))
    if not args.no_plot:
        plots.render_degree_histograms(rows, os.path.join(out, "degree_histograms.png"))
    print(f"wrote {csv_path}")
    return 0


# ---------------------------------------------------------------------------
# spectral


def cmd_spectral(args) -> int:
    out = _ensure_outdir(args.out)
    constructions = []
    for tok in args.constructions.split(","):
        g, _, r = tok.strip().partition("x")
        constructions.append((int(g), int(r)))
    rows = analysis.spectral_efficiency_curve(constructions, ebn0_db=args.ebn0,
                                              phase_mode=args.phase_mode)
    csv_path = os.path.join(out, "spectral_efficiency.csv")
    with open(csv_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(analysis.spectral_csv(rows))
    if not args.no_plot:
        plots.render_spectral_curve(rows, os.path.join(out, "spectral_efficiency.png"))
    print(f"wrote {csv_path}")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> _Parser:
    p = _Parser(prog="sparsig",
                description="Euler-square sparse signature designs and link simulations")
    p.add_argument("--version", action="version", version=f"sparsig {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("construct", help="build a design and report its properties")
    c.add_argument("--gamma", type=int, required=True)
    c.add_argument("--rho", type=int, required=True)
    c.add_argument("--out", default="out-construct")
    c.add_argument("--girth-limit", type=int, default=50,
                   help="skip girth computation above this order (BFS cost grows ~gamma^4)")
    c.add_argument("--no-plot", action="store_true")
    c.set_defaults(func=cmd_construct)

    s = sub.add_parser("simulate", help="run a Pe sweep or threshold search")
    s.add_argument("--config", help="INI scenario file")
    s.add_argument("--manifest", help="rerun a previous run from its manifest")
    s.add_argument("--out", default="out-simulate")
    s.add_argument("--seed", type=int)
    s.add_argument("--trials", type=int, help="max trials per grid point")
    s.add_argument("--ebn0-grid", help="dB grid, 'start:stop:step' or comma list")
    s.add_argument("--mode", choices=MODES)
    s.add_argument("--gamma", type=int)
    s.add_argument("--rho", type=int)
    s.add_argument("--ell", type=int)
    s.add_argument("--ka", type=int)
    s.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    s.add_argument("--trace", action="store_true", help="dump a per-point trial trace")
    s.add_argument("--no-plot", action="store_true")
    s.set_defaults(func=cmd_simulate)

    g = sub.add_parser("analyze-graph", help="degree histograms before/after peeling")
    g.add_argument("--gamma", type=int, required=True)
    g.add_argument("--rho", type=int, required=True)
    g.add_argument("--ka", required=True, help="comma list of K_a values")
    g.add_argument("--seeds", type=int, default=200)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", default="out-graph")
    g.add_argument("--no-plot", action="store_true")
    g.set_defaults(func=cmd_analyze_graph)

    e = sub.add_parser("spectral", help="spectral-efficiency curve over constructions")
    e.add_argument("--constructions", default="3x2,5x2,7x2,11x2",
                   help="comma list like 5x2,7x2")
    e.add_argument("--ebn0", type=float, default=10.0)
    e.add_argument("--phase-mode", default="none")
    e.add_argument("--out", default="out-spectral")
    e.add_argument("--no-plot", action="store_true")
    e.set_defaults(func=cmd_spectral)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ParameterError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (BudgetExceededError, RuntimeError, OSError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
