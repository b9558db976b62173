"""Batch command-line front end.

Verbs:

* ``analyze``: run a path config (JSON) through the analyzer.
* ``metrics``: RTO / RBO / delay / jitter of a trace CSV.
* ``simulate``: run a trace CSV through the re-sequencing buffer.
* ``scenario``: emit an adversarial trace CSV for one of the generators.
* ``case-study``: the bundled automotive example, with ``--check``.

Exit codes: 0 success, 1 input or schema error, 2 analysis completed with an
unsafe-configuration warning, 3 the simulation discarded a packet.  Output
is deterministic for identical inputs.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from fractions import Fraction
from typing import Optional, Sequence

from .bounds import LOSSLESS, LOSSY
from .case_study import render_case_study, run_case_study
from .curves import curve_from_json, leaky_bucket
from .metrics import delay_jitter, rbo, rto, trace_from_csv, trace_to_csv
from .path_analysis import (
    analyze_path,
    load_path,
    render_report_table,
    report_to_json,
)
from .rational import INF, fmt_rat, parse_rat, parse_time, seconds_to_us_display
from .resequencer import ResequencerConfig, simulate
from . import scenarios

OK, INPUT_ERROR, UNSAFE_WARNING, DISCARD = 0, 1, 2, 3


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return INPUT_ERROR


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="reseqkit",
        description="Worst-case reordering metrics and re-sequencing buffer "
        "dimensioning for time-sensitive networks",
    )
    sub = parser.add_subparsers(required=True)

    p = sub.add_parser("analyze", help="analyze a flow path config")
    p.add_argument("--config", required=True, help="path config JSON file")
    p.add_argument("--loss", choices=[LOSSLESS, LOSSY, "both"], default=None,
                   help="override the config's loss mode")
    p.add_argument("--format", choices=["table", "json", "csv"], default="table")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("metrics", help="reordering metrics of a trace CSV")
    p.add_argument("trace", help="trace CSV file")
    p.add_argument("--verbose", action="store_true", help="per-packet offsets")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("simulate", help="run a trace through the buffer")
    p.add_argument("trace", help="trace CSV file")
    p.add_argument("--timeout", default="inf",
                   help="timeout (rational seconds, unit suffixes ok, or inf)")
    p.add_argument("--buffer", default="inf", help="capacity in bytes, or inf")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("scenario", help="generate an adversarial trace")
    p.add_argument(
        "kind",
        choices=[
            "two-packet-swap", "lossless-backlog", "lossy-backlog",
            "rto-tight", "rbo-tight", "rto-chain",
        ],
    )
    p.add_argument("--rto", help="target reordering offset (time)")
    p.add_argument("--t0", default="0", help="time origin")
    p.add_argument("--jitter", help="jitter bound (time)")
    p.add_argument("--timeout", help="re-sequencer timeout (time)")
    p.add_argument("--eps", help="tightness epsilon (time)")
    p.add_argument("--rate", help="leaky-bucket rate, bytes/s")
    p.add_argument("--burst", help="leaky-bucket burst, bytes")
    p.add_argument("--curve-json", help="curve JSON file (overrides rate/burst)")
    p.add_argument("--l-min", default="64", help="minimum packet size, bytes")
    p.add_argument("--l-max", default="64", help="maximum packet size, bytes")
    p.add_argument("--sizes", help="comma-separated early-burst sizes (bytes)")
    p.add_argument("--first-size", default="64", help="late packet size (bytes)")
    p.add_argument("--stages", help="comma-separated jitter:rto pairs (times)")
    p.add_argument("--head", type=int, default=1, help="reordering stage, 1-based")
    p.add_argument("-o", "--output", help="output CSV (default stdout)")
    p.set_defaults(func=cmd_scenario)

    p = sub.add_parser("case-study", help="bundled automotive example")
    p.add_argument("name", choices=["automotive"])
    p.add_argument("--check", action="store_true",
                   help="compare against the embedded reference values")
    p.add_argument("--format", choices=["table", "json"], default="table")
    p.set_defaults(func=cmd_case_study)
    return parser


def cmd_analyze(args) -> int:
    path_spec = load_path(args.config)
    modes = [path_spec.loss_mode]
    if args.loss == "both":
        modes = [LOSSLESS, LOSSY]
    elif args.loss:
        modes = [args.loss]
    code = OK
    outputs = []
    for mode in modes:
        rep = analyze_path(replace(path_spec, loss_mode=mode))
        if rep.warnings:
            code = UNSAFE_WARNING
        outputs.append(rep)
    if args.format == "json":
        print(json.dumps([report_to_json(r) for r in outputs], indent=2))
    elif args.format == "csv":
        print("loss_mode,e2e_delay_us,e2e_jitter_us,delta_delay_us,delta_jitter_us")
        for r in outputs:
            print(
                f"{r.loss_mode},{seconds_to_us_display(r.e2e_delay)},"
                f"{seconds_to_us_display(r.e2e_jitter)},"
                f"{seconds_to_us_display(r.delta_delay)},"
                f"{seconds_to_us_display(r.delta_jitter)}"
            )
    else:
        print("\n\n".join(render_report_table(r) for r in outputs))
    return code


def cmd_metrics(args) -> int:
    with open(args.trace, "r", encoding="utf-8") as fh:
        trace = trace_from_csv(fh.read())
    r_time = rto(trace)
    r_byte = rbo(trace)
    print(f"rto_s={fmt_rat(r_time.value)} ({seconds_to_us_display(r_time.value)} us)")
    print(f"rbo_bytes={fmt_rat(r_byte.value)}")
    if trace.has_emit_times:
        dj = delay_jitter(trace)
        print(f"d_max_s={fmt_rat(dj.d_max)} ({seconds_to_us_display(dj.d_max)} us)")
        print(f"d_min_s={fmt_rat(dj.d_min)} ({seconds_to_us_display(dj.d_min)} us)")
        print(f"jitter_s={fmt_rat(dj.jitter)} ({seconds_to_us_display(dj.jitter)} us)")
    else:
        print("d_max_s=- d_min_s=- jitter_s=-  (no emission times)")
    if args.verbose:
        for idx in sorted(r_time.per_packet):
            print(
                f"packet {idx}: lambda_s={fmt_rat(r_time.per_packet[idx])} "
                f"pi_bytes={fmt_rat(r_byte.per_packet[idx])}"
            )
    return OK


def cmd_simulate(args) -> int:
    with open(args.trace, "r", encoding="utf-8") as fh:
        trace = trace_from_csv(fh.read())
    cfg = ResequencerConfig(parse_time(args.timeout), parse_rat(args.buffer))
    arrivals = {
        p.index: (p.observe_time, p.size) for p in trace.packets if not p.lost
    }
    lost = [p.index for p in trace.packets if p.lost]
    for idx in lost:
        arrivals[idx] = (INF, trace.packets[idx - 1].size)
    outcome = simulate(arrivals, cfg)
    print(
        json.dumps(
            {
                "departures": {
                    str(i): fmt_rat(t) for i, t in sorted(outcome.departures.items())
                },
                "discards": {
                    str(i): reason for i, reason in sorted(outcome.discards.items())
                },
                "max_occupancy_bytes": fmt_rat(outcome.max_occupancy),
                "max_residence_s": fmt_rat(outcome.max_residence),
            },
            indent=2,
        )
    )
    return DISCARD if outcome.discards else OK


def _scenario_curve(args):
    if args.curve_json:
        with open(args.curve_json, "r", encoding="utf-8") as fh:
            return curve_from_json(json.load(fh))
    if args.rate and args.burst:
        return leaky_bucket(parse_rat(args.rate), parse_rat(args.burst))
    raise ValueError("scenario needs --curve-json or --rate/--burst")


def _scenario_flow(args, curve):
    from .curves import FlowSpec

    return FlowSpec(curve, Fraction(parse_rat(args.l_min)),
                    Fraction(parse_rat(args.l_max)))


def cmd_scenario(args) -> int:
    kind = args.kind
    eps = parse_time(args.eps) if args.eps else None
    if kind == "two-packet-swap":
        trace = scenarios.gen_two_packet_swap(
            _required(args.rto, "--rto"), parse_time(args.t0)
        )
    elif kind == "lossless-backlog":
        if not args.sizes:
            raise ValueError("lossless-backlog needs --sizes")
        sizes = [parse_rat(s) for s in args.sizes.split(",")]
        trace = scenarios.gen_lossless_backlog_burst(
            _required(args.rto, "--rto"), sizes, parse_rat(args.first_size)
        )
    elif kind == "lossy-backlog":
        curve = _scenario_curve(args)
        trace = scenarios.gen_lossy_backlog_burst(
            curve, _required(args.jitter, "--jitter"),
            _required(args.timeout, "--timeout"),
            _scenario_flow(args, curve), eps,
        )
    elif kind == "rto-tight":
        curve = _scenario_curve(args)
        trace = scenarios.gen_rto_tight_pair(
            _required(args.jitter, "--jitter"), curve, parse_rat(args.l_min)
        )
    elif kind == "rbo-tight":
        curve = _scenario_curve(args)
        trace = scenarios.gen_rbo_tight_burst(
            _required(args.jitter, "--jitter"), curve,
            _scenario_flow(args, curve), eps,
        )
    else:  # rto-chain
        if not args.stages:
            raise ValueError("rto-chain needs --stages jitter:rto,jitter:rto,...")
        stages = []
        for part in args.stages.split(","):
            v, lam = part.split(":")
            stages.append((parse_time(v), parse_time(lam)))
        chain = scenarios.gen_amplified_rto_chain(stages, args.head, eps)
        trace = chain.end_to_end
    text = trace_to_csv(trace)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return OK


def _required(value: Optional[str], flag: str):
    if value is None:
        raise ValueError(f"missing {flag}")
    return parse_time(value)


def cmd_case_study(args) -> int:
    result = run_case_study(check=args.check)
    if args.format == "json":
        payload = {
            name: {mode: report_to_json(rep) for mode, rep in by_mode.items()}
            for name, by_mode in result.reports.items()
        }
        if args.check:
            payload["check"] = {"ok": result.ok, "mismatches": list(result.mismatches)}
        print(json.dumps(payload, indent=2))
    else:
        print(render_case_study(result, check=args.check))
    return OK if result.ok else INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
