"""``bsn-assure``: simulate, verify, mine, refine, report and selftest.

Exit codes: 0 success, 1 a property was found Violated, 2 usage or I/O error.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
from pathlib import Path

from .cgm import CgmError, default_cgm, load_cgm
from .config import ConfigError, ScenarioConfig, load_config
from .mining import mine_cgm
from .refine import RefineError, battery_csv, comparison_json, refine_and_compare
from .report import ReportError, write_report
from .simulator import run_simulation
from .trace import TraceError, read_csv, write_csv
from .verifier import PROPERTY_IDS, Verdict, report_json, verdicts_from_report, verify_report

EXIT_OK, EXIT_VIOLATED, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def parse_props(text: str) -> list[str]:
    """``all``, a comma list ``P1,P4``, or a range ``P1..P10``."""
    text = text.strip()
    if text.lower() == "all":
        return list(PROPERTY_IDS)
    out = []
    for part in text.split(","):
        part = part.strip().upper()
        m = re.fullmatch(r"P(\d+)\.\.P(\d+)", part)
        ids = [f"P{i}" for i in range(int(m[1]), int(m[2]) + 1)] if m else [part]
        for pid in ids:
            if pid not in PROPERTY_IDS:
                raise UsageError(f"unknown property {pid!r}; expected P1..P10 or 'all'")
            if pid not in out:
                out.append(pid)
    return sorted(out, key=lambda p: int(p[1:]))


def parse_seeds(text: str) -> list[int]:
    try:
        seeds = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise UsageError(f"--seeds must be comma-separated integers, got {text!r}") from None
    if not seeds:
        raise UsageError("--seeds is empty")
    return seeds


def _config(path) -> ScenarioConfig:
    return ScenarioConfig().validate() if path is None else load_config(path)


def cmd_simulate(args) -> int:
    cfg = _config(args.config)
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed).validate()
    trace = run_simulation(cfg)
    write_csv(trace, args.out)
    print(f"config_digest={trace.config_digest} snapshots={len(trace)} cycles={trace.num_cycles}")
    return EXIT_OK


def cmd_verify(args) -> int:
    ids = parse_props(args.props)
    trace = read_csv(args.trace)
    report = verify_report(trace, ids)
    Path(args.out).write_text(report_json(report))
    violated = False
    for p in report["properties"]:
        line = f"{p['id']}: {p['verdict']}"
        if p["witness"]:
            line += f" at snapshot {p['witness']['index']} ({p['witness']['explanation']})"
        print(line)
        violated |= p["verdict"] == Verdict.VIOLATED.value
    return EXIT_VIOLATED if violated else EXIT_OK


def cmd_mine(args) -> int:
    cgm = default_cgm() if args.cgm is None else load_cgm(Path(args.cgm).read_text())
    trace = read_csv(args.trace)
    try:
        report = json.loads(Path(args.verdicts).read_text())
        verdicts = verdicts_from_report(report)
        digest = report["config_digest"]
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"{args.verdicts}: not a verdict report ({exc})") from None
    if digest != trace.config_digest:
        raise UsageError(f"config digest mismatch: trace {trace.config_digest!r}, "
                         f"verdicts {digest!r}")
    knowledge = mine_cgm(cgm, trace, verdicts)
    out = Path(args.out)
    out.write_text(knowledge.dumps())
    out.with_suffix(".txt").write_text(knowledge.render())
    print(f"{len(knowledge.dissonances)} dissonance(s)")
    for d in knowledge.dissonances:
        print(f"  {d.node_id} {d.property_id} [{d.kind}] {d.region}")
    return EXIT_OK


def cmd_refine(args) -> int:
    cfg = _config(args.config)
    report = refine_and_compare(cfg, parse_seeds(args.seeds))
    out = Path(args.out)
    out.write_text(comparison_json(report))
    out.with_name(out.stem + "_battery.csv").write_text(battery_csv(report))
    print(f"ratio={report['ratio']:.4f} oracle_ratio={report['oracle_ratio']:.4f} "
          f"reverification={report['reverification']['status']}")
    return EXIT_OK if report["reverification"]["status"] == "VALID" else EXIT_VIOLATED


def cmd_report(args) -> int:
    for path in write_report(args.inputs, Path(args.out)):
        print(path)
    return EXIT_OK


def cmd_selftest(args) -> int:
    from .selftest import run_all
    results = run_all()
    failed = [r.number for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    return EXIT_VIOLATED if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bsn-assure", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run the simulator and write a trace CSV")
    p.add_argument("--config", help="scenario JSON (defaults when omitted)")
    p.add_argument("--seed", type=int, help="override the scenario seed")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="check properties on a trace")
    p.add_argument("--trace", required=True)
    p.add_argument("--props", default="all", help="all, P1,P4 or P1..P10")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("mine", help="mine the goal model against a trace and its verdicts")
    p.add_argument("--trace", required=True)
    p.add_argument("--cgm", help="goal model JSON (bundled BSN model when omitted)")
    p.add_argument("--verdicts", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_mine)

    p = sub.add_parser("refine", help="derive the dynamic policy and compare the three arms")
    p.add_argument("--config")
    p.add_argument("--seeds", default="1,2,3,4,5")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_refine)

    p = sub.add_parser("report", help="render markdown tables and plot CSVs")
    p.add_argument("--in", dest="inputs", nargs="*", default=[])
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("selftest", help="run the bundled acceptance suite")
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (UsageError, ConfigError, CgmError, TraceError, ReportError, RefineError) as exc:
        print(f"error: {exc}", file=sys.stderr)
    except OSError as exc:
        print(f"error: {exc.filename or ''}: {exc.strerror or exc}", file=sys.stderr)
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
