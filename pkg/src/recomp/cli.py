"""Command-line front end.

Every subcommand takes a program (a ``.tp`` path or a shipped workload name)
and writes its artifacts under ``--out``.  Failures exit non-zero with a
single JSON error record on stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path
from typing import Optional

from . import workloads
from .cache import simulate, write_labels
from .config import DEFAULTS_TOML, ConfigError, ToolkitConfig, load_config
from .dependence import write_slices
from .energy import write_class_totals
from .evaluate import GainReport, evaluate, write_report_json, write_reports_csv
from .locality import NON_ROOT, ROOT, histogram, profile, tag_roles, write_histograms
from .program import ExecutionError, ProgramError, execute, parse_program, read_trace, write_trace
from .transforms import (
    COMBINED,
    NONE,
    POLICIES,
    PREDICTION,
    RECALCULATION,
    Plan,
    PlanMismatch,
    analyze,
    make_plan,
    pruning_histograms,
    site_slices,
)

EXIT_CONFIG, EXIT_PARSE, EXIT_MISMATCH, EXIT_EXEC = 2, 3, 4, 5


class CliError(Exception):
    def __init__(self, kind: str, message: str, code: int, **extra):
        super().__init__(message)
        self.kind = kind
        self.code = code
        self.extra = extra


def _parse_input(s: str) -> tuple[str, int]:
    name, sep, val = s.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected name=value, got {s!r}")
    try:
        return name.strip(), int(val, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"input {name!r} is not an integer") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML config file (defaults apply to missing keys)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--format", choices=("csv", "json"), help="report format")
    common.add_argument("--seed", type=int, help="seed for generated workloads")
    common.add_argument("--window", type=int, help="retention window R in dynamic instructions")
    common.add_argument("--input", action="append", type=_parse_input, default=[],
                        metavar="NAME=VALUE", help="program input (repeatable)")
    common.add_argument("--no-plot", action="store_true", help="skip PNG figures")

    planning = argparse.ArgumentParser(add_help=False)
    planning.add_argument("--policy", choices=POLICIES + (NONE,))
    planning.add_argument("--theta", type=float, help="locality threshold in [0, 1]")

    p = argparse.ArgumentParser(prog="recomp", description=__doc__.splitlines()[0])
    p.add_argument("--defaults", action="store_true", help="print the default config and exit")
    sub = p.add_subparsers(dest="command")

    def program_arg(sp, traces: bool = False):
        sp.add_argument("program", nargs="?",
                        help="program file or shipped workload name"
                             + (" (or a .jsonl trace)" if traces else ""))

    program_arg(sub.add_parser("exec", parents=[common], help="run a program, write its trace"))
    program_arg(sub.add_parser("cachesim", parents=[common], help="cache statistics and labels"),
                traces=True)
    program_arg(sub.add_parser("profile", parents=[common], help="value locality per instruction"),
                traces=True)
    program_arg(sub.add_parser("plan", parents=[common, planning], help="write a recomputation plan"))
    ev = sub.add_parser("eval", parents=[common, planning], help="evaluate a plan")
    program_arg(ev)
    ev.add_argument("--plan", dest="plan_file", help="plan JSON from `recomp plan`")
    program_arg(sub.add_parser("sweep", parents=[common], help="all policies over the threshold grid"))
    hs = sub.add_parser("histo", parents=[common, planning], help="locality histograms")
    program_arg(hs)
    hs.add_argument("--role", choices=(ROOT, NON_ROOT, "all"), default="all")
    hs.add_argument("--weight", choices=("static", "dynamic", "both"), default="both")
    sub.add_parser("defaults", help="print the default config")
    sub.add_parser("workloads", help="list shipped workloads")
    return p


def _config(args) -> ToolkitConfig:
    cfg = load_config(args.config)
    for attr, flag in (("out", "out"), ("format", "format"), ("seed", "seed"),
                       ("window", "window"), ("policy", "policy"), ("theta", "theta")):
        v = getattr(args, flag, None)
        if v is not None:
            setattr(cfg, attr, v)
    if getattr(args, "program", None):
        cfg.program = args.program
    cfg.inputs = {**cfg.inputs, **dict(args.input)}
    if args.no_plot:
        cfg.plots = False
    return cfg.validate()


def _program_source(cfg: ToolkitConfig) -> tuple[str, str]:
    """(workload label, program text)."""
    ref = cfg.program
    if not ref:
        raise CliError("config", "no program given (positional argument or [program] path)",
                       EXIT_CONFIG)
    path = Path(ref)
    if not path.is_absolute() and cfg.base_dir is not None and not path.exists():
        path = cfg.base_dir / ref
    if path.is_file():
        return path.stem, path.read_text()
    if ref == "histmix" and cfg.seed:
        from .synth import histogram_mix

        return f"histmix-{cfg.seed}", histogram_mix(cfg.seed)
    try:
        return ref, workloads.text(ref)
    except KeyError:
        raise CliError("config", f"program not found: {ref}", EXIT_CONFIG) from None


def _is_trace(cfg: ToolkitConfig) -> bool:
    return cfg.program.endswith(".jsonl")


def _load(cfg: ToolkitConfig):
    label, text = _program_source(cfg)
    try:
        program = parse_program(text)
    except ProgramError as e:
        raise CliError("parse", e.message, EXIT_PARSE, line=e.line) from None
    return label, text, program


def _analysis(cfg: ToolkitConfig):
    label, text, program = _load(cfg)
    try:
        a = analyze(program, cfg.inputs, cfg.cache, cfg.max_steps)
    except ExecutionError as e:
        raise CliError("execution", e.message, EXIT_EXEC, seq=e.seq, sid=e.sid) from None
    except ValueError as e:
        raise CliError("execution", str(e), EXIT_EXEC) from None
    return label, text, a


def _outdir(cfg: ToolkitConfig) -> Path:
    d = Path(cfg.out)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _write_rows(path: Path, rows: list[dict], fields: Optional[list[str]] = None) -> None:
    if fields is None:
        fields = list(rows[0]) if rows else []
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)


def _dump(path: Path, payload) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _say(payload) -> None:
    print(json.dumps(payload, sort_keys=True))


def cmd_exec(cfg: ToolkitConfig) -> None:
    label, text, program = _load(cfg)
    try:
        trace = execute(program, cfg.inputs, cfg.max_steps)
    except ExecutionError as e:
        raise CliError("execution", e.message, EXIT_EXEC, seq=e.seq, sid=e.sid) from None
    except ValueError as e:
        raise CliError("execution", str(e), EXIT_EXEC) from None
    out = _outdir(cfg)
    write_trace(trace, out / "trace.jsonl")
    _say({"workload": label, "config_hash": cfg.hash(text), "records": len(trace),
          "truncated": trace.truncated, "outputs": dict(trace.outputs)})


def _trace_or_analysis(cfg: ToolkitConfig):
    if _is_trace(cfg):
        path = Path(cfg.program)
        if not path.is_file():
            raise CliError("config", f"trace not found: {cfg.program}", EXIT_CONFIG)
        try:
            trace = read_trace(path)
        except (ValueError, KeyError) as e:
            raise CliError("parse", f"bad trace: {e}", EXIT_PARSE) from None
        return path.stem, path.read_text(), trace
    label, text, a = _analysis(cfg)
    return label, text, a.trace


def cmd_cachesim(cfg: ToolkitConfig) -> None:
    label, text, trace = _trace_or_analysis(cfg)
    try:
        stats, labels = simulate(trace.records, cfg.cache)
    except ValueError as e:
        raise CliError("execution", str(e), EXIT_EXEC) from None
    out = _outdir(cfg)
    h = cfg.hash(text)
    if cfg.format == "csv":
        _write_rows(out / "cache_levels.csv", [{"config_hash": h, **r} for r in stats.level_rows()])
    payload = {"config_hash": h, "levels": stats.level_rows(), "loads": stats.load_table()}
    _dump(out / "cache_stats.json", payload)
    write_labels(trace.records, labels, cfg.cache, out / "labels.jsonl")
    _say({"workload": label, "config_hash": h, "accesses": len(labels)})


def _profile_rows(stats, program=None) -> list[dict]:
    rows = []
    for sid in sorted(stats.count):
        ins = stats.inputs.get(sid, ())
        rows.append({
            "sid": sid,
            "instr": program[sid].text() if program is not None else "",
            "count": stats.count[sid],
            "eligible": int(stats.eligible(sid)),
            "loc_out": repr(stats.loc_out(sid)) if sid in stats.out else "",
            "loc_in": " ".join(repr(x) for x in ins),
            "roles": " ".join(sorted(stats.roles.get(sid, ()))),
        })
    return rows


def _root_slices(a, cfg: ToolkitConfig) -> list:
    """Unbudgeted representative slice of every load site that has one."""
    out = []
    for sid in sorted(a.cache.load_counts):
        _, raw, _, _ = site_slices(a.graph, a.cache, cfg.epi, cfg.window, sid, None)
        if raw is not None:
            out.append(raw)
    return out


def cmd_profile(cfg: ToolkitConfig) -> None:
    if _is_trace(cfg):
        label, text, trace = _trace_or_analysis(cfg)
        stats, program = profile(trace), None
    else:
        label, text, a = _analysis(cfg)
        stats, program = tag_roles(a.locality, _root_slices(a, cfg)), a.program
    out = _outdir(cfg)
    h = cfg.hash(text)
    rows = [{"config_hash": h, **r} for r in _profile_rows(stats, program)]
    if cfg.format == "csv":
        _write_rows(out / "locality.csv", rows)
    else:
        _dump(out / "locality.json", rows)
    _say({"workload": label, "config_hash": h, "instructions": len(rows)})


def cmd_plan(cfg: ToolkitConfig) -> None:
    label, text, a = _analysis(cfg)
    plan = make_plan(cfg.policy, a, cfg.epi, cfg.theta, cfg.window)
    out = _outdir(cfg)
    plan.write(out / "plan.json")
    write_slices([plan.swaps[s] for s in sorted(plan.swaps)], out / "slices.json")
    _say({"workload": label, "config_hash": cfg.hash(text), "policy": plan.policy,
          "swaps": sorted(plan.swaps), "predictions": sorted([s, k] for s, k in plan.predictions),
          "anomalies": plan.anomalies})


def _report_row(label: str, h: str, r: GainReport) -> dict:
    return {"config_hash": h, "workload": label, **r.row()}


def _figures_ok(cfg: ToolkitConfig) -> bool:
    if not cfg.plots:
        return False
    try:
        import matplotlib  # noqa: F401
    except ImportError:
        return False
    return True


def cmd_eval(cfg: ToolkitConfig, plan_file: Optional[str]) -> None:
    label, text, a = _analysis(cfg)
    if plan_file:
        try:
            plan = Plan.from_json(json.loads(Path(plan_file).read_text()))
        except FileNotFoundError:
            raise CliError("config", f"plan not found: {plan_file}", EXIT_CONFIG) from None
        except (ValueError, KeyError, TypeError) as e:
            raise CliError("parse", f"bad plan file: {e}", EXIT_PARSE) from None
    else:
        plan = make_plan(cfg.policy, a, cfg.epi, cfg.theta, cfg.window)
    try:
        report = evaluate(plan, a.program, cfg.inputs, cfg.cache, cfg.epi, cfg.latency, a,
                          cfg.max_steps)
    except PlanMismatch as e:
        raise CliError("plan-mismatch", str(e), EXIT_MISMATCH) from None
    out = _outdir(cfg)
    h = cfg.hash(text)
    if cfg.format == "csv":
        write_reports_csv(out / "report.csv", [_report_row(label, h, report)])
        write_class_totals(out / "class_totals.csv", report.class_totals)
    else:
        write_report_json(out / "report.json", {"config_hash": h, "workload": label,
                                                **report.to_json()})
    _say({"workload": label, "config_hash": h, "policy": report.policy,
          "energy_gain_pct": report.energy_gain, "edp_gain_pct": report.edp_gain,
          "semantics_preserved": report.semantics_preserved})


def sweep_reports(a, cfg: ToolkitConfig) -> list[tuple[str, float, GainReport]]:
    """One report per (policy, threshold) in grid order; recalculation is
    threshold-independent and evaluated once."""
    out = []
    cache: dict = {}
    for policy in (RECALCULATION, PREDICTION, COMBINED):
        for th in cfg.thetas:
            key = (policy, None if policy == RECALCULATION else th)
            if key not in cache:
                plan = make_plan(policy, a, cfg.epi, th, cfg.window)
                cache[key] = evaluate(plan, a.program, cfg.inputs, cfg.cache, cfg.epi,
                                      cfg.latency, a, cfg.max_steps)
            out.append((policy, th, cache[key]))
    return out


def cmd_sweep(cfg: ToolkitConfig) -> None:
    label, text, a = _analysis(cfg)
    h = cfg.hash(text)
    reports = sweep_reports(a, cfg)
    rows = []
    for policy, th, r in reports:
        row = _report_row(label, h, r)
        row["theta"] = repr(float(th))
        rows.append(row)
    out = _outdir(cfg)
    hists = pruning_histograms(a, cfg.epi, cfg.thetas, cfg.window)
    node_rows = [{"config_hash": h, "workload": label, "theta": th, "node_count": n, "slices": c}
                 for th, hist in hists.items() for n, c in hist.items()]
    if cfg.format == "csv":
        write_reports_csv(out / "sweep.csv", rows)
        _write_rows(out / "node_counts.csv", node_rows,
                    ["config_hash", "workload", "theta", "node_count", "slices"])
    else:
        _dump(out / "sweep.json", {"config_hash": h, "workload": label,
                                   "reports": [{**r.to_json(), "theta": th}
                                               for _, th, r in reports],
                                   "node_counts": hists})
    if _figures_ok(cfg):
        from .plotting import plot_node_counts, plot_sweep

        plot_sweep(rows, out / "sweep.png")
        plot_node_counts(hists, out / "node_counts.png")
    _say({"workload": label, "config_hash": h, "rows": len(rows)})


def cmd_histo(cfg: ToolkitConfig, role: str, weight: str) -> None:
    label, text, a = _analysis(cfg)
    stats = tag_roles(a.locality, _root_slices(a, cfg))
    roles = (ROOT, NON_ROOT) if role == "all" else (role,)
    pairs = [(histogram(stats, weighting="static", role=r), histogram(stats, weighting="dynamic", role=r))
             for r in roles]
    out = _outdir(cfg)
    h = cfg.hash(text)
    if cfg.format == "csv":
        write_histograms(out / "histogram.csv", pairs, {"config_hash": h})
        if weight != "both":
            # a single-weighting view: one share column
            col = f"share_{weight}_pct"
            with open(out / "histogram.csv") as fh:
                rows = list(csv.DictReader(fh))
            keep = ["bin_low", "bin_high", col, "role", "config_hash"]
            _write_rows(out / "histogram.csv", [{k: r[k] for k in keep} for r in rows], keep)
    else:
        _dump(out / "histogram.json", {
            "config_hash": h, "workload": label,
            "histograms": [{"role": s.role, "bins": [list(b) for b in s.bins],
                            **({"static": list(s.shares)} if weight != "dynamic" else {}),
                            **({"dynamic": list(d.shares)} if weight != "static" else {})}
                           for s, d in pairs]})
    if _figures_ok(cfg):
        from .plotting import plot_locality

        for s, d in pairs:
            plot_locality(s, d, out / f"locality_{s.role}.png")
    _say({"workload": label, "config_hash": h, "roles": list(roles)})


def run(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.defaults or args.command == "defaults":
        sys.stdout.write(DEFAULTS_TOML)
        return 0
    if args.command == "workloads":
        for n in workloads.names():
            print(n)
        return 0
    if args.command is None:
        parser.print_help(sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = _config(args)
        if args.command == "exec":
            cmd_exec(cfg)
        elif args.command == "cachesim":
            cmd_cachesim(cfg)
        elif args.command == "profile":
            cmd_profile(cfg)
        elif args.command == "plan":
            cmd_plan(cfg)
        elif args.command == "eval":
            cmd_eval(cfg, args.plan_file)
        elif args.command == "sweep":
            cmd_sweep(cfg)
        elif args.command == "histo":
            cmd_histo(cfg, args.role, args.weight)
    except ConfigError as e:
        return _fail(CliError("config", str(e), EXIT_CONFIG))
    except CliError as e:
        return _fail(e)
    return 0


def _fail(e: CliError) -> int:
    record = {"error": e.kind, "message": str(e), **e.extra}
    sys.stderr.write(json.dumps(record, sort_keys=True) + "\n")
    return e.code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
