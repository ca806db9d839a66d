"""Command-line front end.

Subcommands: truth-table, rber, sweep, cycle, bake, calibrate, timeline,
workload, demo. Parameters come from the config file (see defaults.yaml);
flags override file values. Outputs are CSV (default) or JSON with a
reproducibility header: tool version, config hash, seed, unit convention.
Exit codes: 0 success, 1 assertion/acceptance failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import __version__
from .config import config_hash, load_config, save_config
from .engine import BitwiseEngine, OpCode, OpKind, host_op
from .nand_device import NandDevice
from .reliability import calibrate, measure_rber, sweep_offset
from .ssd_model import (
    BaselineParams,
    EnergyModel,
    OP_PHASES,
    Paradigm,
    SsdConfig,
    baseline_timeline,
    energy_per_kb,
    read_latency,
    timeline,
)
from .workloads import (
    WorkloadSpec,
    average_speedups,
    default_scales,
    run_workload,
)

_UNITS_NOTE = "binary units: KiB=1024B, GiB=2**30B"


@dataclass(frozen=True)
class RunManifest:
    """Everything that determines a run's outputs. Two runs with equal
    manifests produce bit-identical files; the seed and config hash go
    into every output header."""

    config_path: str | None
    subcommand: str
    seed: int
    outdir: str
    fmt: str

    def meta_lines(self, cfg: dict, extra: dict | None = None) -> list[str]:
        lines = [
            f"tool=flashbitops {__version__}",
            f"config_sha256={config_hash(cfg)}",
            f"seed={self.seed}",
            f"units={_UNITS_NOTE}",
        ]
        for k, v in (extra or {}).items():
            lines.append(f"{k}={v}")
        return lines


def _write_rows(path: str, fieldnames: list[str], rows: list[dict], cfg: dict,
                manifest: RunManifest, extra_meta: dict | None = None) -> None:
    meta = manifest.meta_lines(cfg, extra_meta)
    fmt = manifest.fmt
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    if fmt == "json":
        payload = {"meta": meta, "rows": rows}
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(payload, fh, indent=2, sort_keys=False)
            fh.write("\n")
        return
    buf = io.StringIO()
    for line in meta:
        buf.write(f"# {line}\n")
    writer = csv.DictWriter(buf, fieldnames=fieldnames, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(buf.getvalue())


def _parse_ops(text: str, parser: argparse.ArgumentParser, inverse: bool | None = None) -> list[OpCode]:
    ops = []
    for name in text.split(","):
        if not name.strip():
            continue
        try:
            ops.append(OpCode.parse(name, inverse))
        except ValueError as exc:
            parser.error(str(exc))
    if not ops:
        parser.error("no opcodes given")
    return ops


def _parse_range(text: str, parser: argparse.ArgumentParser) -> list[int]:
    try:
        parts = [int(x) for x in text.split(":")]
    except ValueError:
        parser.error(f"bad range {text!r}; use lo:hi[:step]")
    if len(parts) == 2:
        lo, hi, step = parts[0], parts[1], 1
    elif len(parts) == 3:
        lo, hi, step = parts
    else:
        parser.error(f"bad range {text!r}; use lo:hi[:step]")
    if step <= 0 or hi < lo:
        parser.error(f"bad range {text!r}")
    return list(range(lo, hi + 1, step))


def _out_path(args, name: str) -> str:
    ext = "json" if args.format == "json" else "csv"
    return os.path.join(args.outdir, f"{name}.{ext}")


# ---------------------------------------------------------------------------


def cmd_truth_table(args, cfg: dict) -> int:
    ops = _parse_ops(args.ops, args.parser, None if not args.no_inverse_read else False)
    rng = np.random.default_rng(args.seed)
    small = dict(cfg)
    small["device"] = {"blocks": 4, "wordlines_per_block": 8, "page_size_bytes": 2048}
    device = NandDevice.from_config(small, rng=rng)
    engine = BitwiseEngine(device)
    n = device.geometry.cells_per_wordline
    print(engine.planner.plan_table([OpCode(op.kind, op.use_inverse_read) for op in ops]))
    print()
    failures = 0
    for op in ops:
        if op.kind is OpKind.NOT:
            operand = np.resize(np.array([False, True]), n)
            engine.write_operands(0, 0, operand, op=op)
            got, _, _ = engine.execute(0, 0, op)
            want = ~operand
            cells = [(None, 0), (None, 1)]
            decode = [int(got[np.flatnonzero(operand == bool(m))[0]]) for _, m in cells]
            row = f"(.,.,{decode[0]},{decode[1]})"  # over L2,L3 (operand 0,1)
        else:
            a = np.resize(np.array([True, True, False, False]), n)
            b = np.resize(np.array([True, False, False, True]), n)
            engine.write_operands(0, 1, a, b)
            got, _, _ = engine.execute(0, 1, op)
            want = host_op(op.kind, a, b)
            decode = [int(got[i]) for i in range(4)]  # cells 0..3 hold L0..L3
            row = "(" + ",".join(str(d) for d in decode) + ")"
        ok = bool((got == want).all())
        failures += 0 if ok else 1
        label = "PASS" if ok else "FAIL"
        inv = " inverse-read" if op.inverse else ""
        print(f"{op.kind.value:<5}{inv:<13} {row:<12} {label}")
        device.erase_block(0)
    return 0 if failures == 0 else 1


def cmd_rber(args, cfg: dict) -> int:
    ops = _parse_ops(args.ops, args.parser, None if not args.no_inverse_read else False)
    rows = []
    for op in ops:
        rng = np.random.default_rng(args.seed)
        device = NandDevice.from_config(cfg, rng=rng)
        if args.pe:
            for blk in range(device.geometry.blocks):
                device.advance_pe_cycles(blk, args.pe)
        report = measure_rber(device, op, args.pages, rng, bake_hours=args.bake)
        rows.append({
            "op": report.opcode,
            "inverse_read": op.inverse,
            "pe_cycles": report.wear.pe_cycles,
            "retention_hours": report.wear.retention_hours,
            "pages": report.pages_tested,
            "bits_compared": report.bits_compared,
            "mismatches": report.mismatches,
            "rber_percent": repr(report.rber_percent),
            "rber_upper95_percent": "" if report.rber_upper95_percent is None else repr(report.rber_upper95_percent),
            "degraded": report.degraded,
        })
    path = _out_path(args, "rber")
    _write_rows(path, list(rows[0].keys()), rows, cfg, args.manifest)
    print(f"wrote {path}")
    return 0


def cmd_sweep(args, cfg: dict) -> int:
    op = _parse_ops(args.op, args.parser, None if not args.no_inverse_read else False)[0]
    offsets = _parse_range(args.range, args.parser)
    rng = np.random.default_rng(args.seed)
    device = NandDevice.from_config(cfg, rng=rng)
    if args.pe:
        for blk in range(device.geometry.blocks):
            device.advance_pe_cycles(blk, args.pe)
    try:
        curve = sweep_offset(device, op, args.reference, offsets, args.pages_per_point, rng,
                             bake_hours=args.bake)
    except ValueError as exc:
        args.parser.error(str(exc))
    lo, hi = curve.zero_window if curve.zero_window else ("", "")
    rows = [{
        "op": curve.opcode,
        "reference": curve.reference,
        "offset_steps": off,
        "offset_volts": repr(off * device.dac_step_v),
        "rber_percent": repr(r),
        "zero_window_low": lo,
        "zero_window_high": hi,
    } for off, r in zip(curve.offset_steps, curve.rber_percent)]
    path = _out_path(args, "sweep")
    _write_rows(path, list(rows[0].keys()), rows, cfg, args.manifest,
                {"pe_cycles": args.pe, "bake_hours": args.bake})
    print(f"wrote {path}")
    return 0


def cmd_cycle(args, cfg: dict) -> int:
    rng = np.random.default_rng(args.seed)
    device = NandDevice.from_config(cfg, rng=rng)
    for blk in range(device.geometry.blocks):
        device.advance_pe_cycles(blk, args.count)
    rows = [{
        "block": blk,
        "pe_cycles": device.block_wear(blk).pe_cycles,
        "erase_count": device.blocks[blk].erase_count,
    } for blk in range(min(device.geometry.blocks, args.show_blocks))]
    path = _out_path(args, "cycle")
    _write_rows(path, list(rows[0].keys()), rows, cfg, args.manifest)
    print(f"wrote {path}")
    return 0


def cmd_bake(args, cfg: dict) -> int:
    ops = _parse_ops(args.ops, args.parser)
    rows = []
    for op in ops:
        rng = np.random.default_rng(args.seed)
        device = NandDevice.from_config(cfg, rng=rng)
        if args.pe:
            for blk in range(device.geometry.blocks):
                device.advance_pe_cycles(blk, args.pe)
        report = measure_rber(device, op, args.pages, rng, bake_hours=args.hours)
        rows.append({
            "op": report.opcode,
            "pe_cycles": report.wear.pe_cycles,
            "retention_hours": args.hours,
            "pages": report.pages_tested,
            "mismatches": report.mismatches,
            "rber_percent": repr(report.rber_percent),
        })
    path = _out_path(args, "bake")
    _write_rows(path, list(rows[0].keys()), rows, cfg, args.manifest)
    print(f"wrote {path}")
    return 0


def cmd_calibrate(args, cfg: dict) -> int:
    fitted, report = calibrate(cfg)
    print("fitted retention shifts (V per ln unit):")
    for i, v in enumerate(report["retention_shift_v"]):
        print(f"  L{i}: {v:.10f}")
    print("achieved at calibration point (percent):")
    for op, v in report["achieved_percent"].items():
        target = report["targets_percent"][op]
        print(f"  {op:<5} {v:.6g}  (target {target:.6g})")
    out_cfg = json.loads(json.dumps(cfg))  # deep copy
    out_cfg["cell_physics"]["wear"]["retention_shift_v"] = [float(x) for x in report["retention_shift_v"]]
    path = args.emit or os.path.join(args.outdir, "calibrated.yaml")
    save_config(out_cfg, path)
    print(f"wrote {path}")
    return 0


def cmd_timeline(args, cfg: dict) -> int:
    names = [p.strip().upper() for p in args.paradigms.split(",") if p.strip()]
    if not names:
        args.parser.error("no paradigms given")
    ssd = SsdConfig.from_config(cfg)
    op = None
    if args.op:
        op = _parse_ops(args.op, args.parser)[0]
    rows = []
    phase_names: list[str] = []
    for name in names:
        try:
            paradigm = Paradigm[name]
        except KeyError:
            args.parser.error(f"unknown paradigm {name!r}")
        if paradigm in (Paradigm.PARABIT, Paradigm.FLASHCOSMOS):
            if op is None:
                args.parser.error(f"{name} requires --op")
            tl = baseline_timeline(paradigm, ssd, op, BaselineParams.from_config(cfg))
        else:
            tl = timeline(paradigm, ssd, op)
        row = {"paradigm": tl.paradigm.value, "op": op.kind.value if op else "",
               "calibrated": tl.calibrated, "total_us": repr(tl.total_us)}
        for phase, dur in tl.breakdown:
            row[f"{phase}_us"] = repr(dur)
            if f"{phase}_us" not in phase_names:
                phase_names.append(f"{phase}_us")
        rows.append(row)
    fields = ["paradigm", "op", "calibrated", "total_us"] + phase_names
    for row in rows:
        for f in fields:
            row.setdefault(f, "")
    path = _out_path(args, "timeline")
    _write_rows(path, fields, rows, cfg, args.manifest,
                {"baselines": "calibrated, not derived"})
    for row in rows:
        print(f"{row['paradigm']:<16} total_us={row['total_us']}")
    print(f"wrote {path}")
    return 0


def cmd_workload(args, cfg: dict) -> int:
    kind = args.kind.upper()
    if kind not in ("SEGMENTATION", "ENCRYPTION", "BITMAP"):
        args.parser.error(f"unknown workload kind {args.kind!r}")
    scales = _parse_range(args.scales, args.parser) if args.scales else default_scales(kind, cfg)
    rng = np.random.default_rng(args.seed)
    results = []
    rows = []
    for scale in scales:
        try:
            res = run_workload(WorkloadSpec(kind, scale), cfg, rng=rng,
                               functional=not args.no_functional)
        except ValueError as exc:
            args.parser.error(str(exc))
        results.append(res)
        row = {"kind": res.kind, "scale": res.scale}
        for p, t in res.total_us.items():
            row[f"{p.lower()}_us"] = repr(t)
        for p, s in res.speedups.items():
            row[f"speedup_vs_{p.lower()}"] = repr(s)
        row["functional_mismatches"] = res.mismatches
        rows.append(row)
    avg = average_speedups(results)
    path = _out_path(args, "workload")
    _write_rows(path, list(rows[0].keys()), rows, cfg, args.manifest,
                {"baselines": "calibrated, not derived",
                 "avg_speedups": ";".join(f"{k}={v:.4f}" for k, v in avg.items())})
    print(f"{kind}: average speedups " + ", ".join(f"{k} {v:.2f}x" for k, v in avg.items()))
    print(f"wrote {path}")
    return 0


def cmd_demo(args, cfg: dict) -> int:
    print("== offset plans and truth tables ==")
    args.ops = "and,or,xnor,not,nand,nor,xor"
    args.no_inverse_read = False
    status = cmd_truth_table(args, cfg)
    print()
    print("== read latency and energy ==")
    em = EnergyModel.from_config(cfg)
    for kind in (OpKind.AND, OpKind.OR, OpKind.XNOR):
        t = read_latency(kind)
        e = energy_per_kb(kind, em)
        print(f"{kind.value:<5} phases={OP_PHASES[kind]} read={t:.0f}us energy={e:.3f}uJ/kB")
    ratio = energy_per_kb(OpKind.XNOR, em) / energy_per_kb(OpKind.AND, em)
    print(f"XNOR/AND energy ratio: {ratio:.3f}")
    print()
    print("== single-channel timelines (8 MiB operands) ==")
    ssd = SsdConfig.from_config(cfg)
    for p in (Paradigm.OSC, Paradigm.ISC, Paradigm.IFC_ALIGNED, Paradigm.IFC_NONALIGNED):
        tl = timeline(p, ssd)
        print(f"{p.value:<16} {tl.total_us:8.1f} us")
    print()
    print("== fresh error check (20 pages per op) ==")
    for name in ("AND", "OR", "XNOR", "NOT"):
        rng = np.random.default_rng(args.seed)
        device = NandDevice.from_config(cfg, rng=rng)
        report = measure_rber(device, OpCode(OpKind[name]), 20, rng)
        print(f"{name:<5} bits={report.bits_compared} mismatches={report.mismatches}")
    return status


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flashbitops",
        description="Behavioral MLC NAND simulator: in-place bulk bitwise ops, "
                    "reliability lab, and SSD-level timing/energy model.",
    )
    parser.add_argument("--config", help="YAML config overriding the built-in defaults")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--outdir", default=".")
    parser.add_argument("--format", choices=("csv", "json"), default="csv")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("truth-table", help="per-state decode for each op vs the Boolean oracle")
    p.add_argument("--ops", default="and,or,xnor,not,nand,nor,xor")
    p.add_argument("--no-inverse-read", action="store_true",
                   help="force the direct constructions for NAND/NOR/XOR")
    p.set_defaults(func=cmd_truth_table)

    p = sub.add_parser("rber", help="measure raw bit error rates against the host oracle")
    p.add_argument("--ops", default="and,or,xnor,not")
    p.add_argument("--pages", type=int, default=1000)
    p.add_argument("--pe", type=int, default=0, help="pre-cycle every block this many times")
    p.add_argument("--bake", type=float, default=0.0, help="retention hours after programming")
    p.add_argument("--no-inverse-read", action="store_true")
    p.set_defaults(func=cmd_rber)

    p = sub.add_parser("sweep", help="error rate vs one reference offset")
    p.add_argument("--op", default="or")
    p.add_argument("--reference", default="vref0", choices=("vref0", "vref1", "vref2"))
    p.add_argument("--range", default="0:100:2", help="offset steps lo:hi[:step]")
    p.add_argument("--pages-per-point", type=int, default=4)
    p.add_argument("--pe", type=int, default=0)
    p.add_argument("--bake", type=float, default=0.0)
    p.add_argument("--no-inverse-read", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("cycle", help="advance program/erase wear and report counters")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--show-blocks", type=int, default=4)
    p.set_defaults(func=cmd_cycle)

    p = sub.add_parser("bake", help="retention bake then error measurement")
    p.add_argument("--hours", type=float, required=True)
    p.add_argument("--ops", default="and,or,xnor,not")
    p.add_argument("--pages", type=int, default=200)
    p.add_argument("--pe", type=int, default=0)
    p.set_defaults(func=cmd_bake)

    p = sub.add_parser("calibrate", help="fit wear coefficients to the cycled-error targets")
    p.add_argument("--emit", help="path for the calibrated config (default outdir/calibrated.yaml)")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("timeline", help="single-channel execution timelines")
    p.add_argument("--paradigms", default="osc,isc,ifc_aligned,ifc_nonaligned")
    p.add_argument("--op", default="", help="opcode for the compute read (default: generic read)")
    p.set_defaults(func=cmd_timeline)

    p = sub.add_parser("workload", help="application case studies across a scale sweep")
    p.add_argument("--kind", required=True, help="segmentation | encryption | bitmap")
    p.add_argument("--scales", default="", help="scale range lo:hi[:step]; default: evaluated range")
    p.add_argument("--no-functional", action="store_true", help="skip the simulator cross-check")
    p.set_defaults(func=cmd_workload)

    p = sub.add_parser("demo", help="quick tour: plans, truth tables, latencies, timelines")
    p.set_defaults(func=cmd_demo)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    args.parser = parser
    args.manifest = RunManifest(args.config, args.command, args.seed, args.outdir, args.format)
    try:
        cfg = load_config(args.config)
    except (OSError, ValueError) as exc:
        parser.error(str(exc))
    try:
        return args.func(args, cfg)
    except (ValueError, RuntimeError, IndexError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
