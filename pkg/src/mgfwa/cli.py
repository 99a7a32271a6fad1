"""Command-line entry point: ``mgfwa run | compare | nets``.

Exit codes: 0 success, 2 invalid arguments, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from . import bench
from .nets import REGISTRY, param_count
from .plotting import plot_convergence

EXIT_OK, EXIT_USAGE, EXIT_IO = 0, 2, 3

log = logging.getLogger("mgfwa")


class UsageError(Exception):
    pass


def _add_experiment_args(p: argparse.ArgumentParser, with_mode: bool = True) -> None:
    obj = p.add_mutually_exclusive_group()
    obj.add_argument("--net", type=int, help="registry network id (1..12)")
    obj.add_argument("--sphere", type=int, metavar="D", help="sphere objective of dimension D")
    obj.add_argument("--net-file", help="network JSON document (spec fields + weight_seed)")
    p.add_argument("--weight-seed", type=int)
    if with_mode:
        p.add_argument("--mode", choices=["serial", "parallel"])
    p.add_argument("--workers", type=int)
    p.add_argument("--runs", type=int)
    p.add_argument("--seed", type=int, help="base seed; run i uses seed + i")
    p.add_argument("--budget-ms", type=float)
    p.add_argument("--budget-evals", type=int)
    p.add_argument("--batches", type=int)
    p.add_argument("--fireworks", type=int)
    p.add_argument("--sparks", type=int)
    p.add_argument("--guides", type=int, help="number of guiding sparks; boosts default to 1,2,4,...")
    p.add_argument("--beta", type=float, nargs="+", dest="boosts", help="boost coefficients")
    p.add_argument("--sigma", type=float)
    p.add_argument("--amp-amplify", type=float)
    p.add_argument("--amp-reduce", type=float)
    p.add_argument("--amp-init", type=float)
    p.add_argument("--bounds", type=float, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--out", help="output directory")
    p.add_argument("--config", help="JSON file; command-line flags override its values")


def _load_json(path: str) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise UsageError(f"config {path} must be a JSON object")
    return {k.replace("-", "_"): v for k, v in doc.items()}


_SKIP = {"command", "config", "verbose", "serial_config", "parallel_config", "thresholds", "func",
         "format"}
_OBJECTIVE_KEYS = ("net", "sphere", "net_file")


def _flag_values(args: argparse.Namespace) -> dict:
    return {k: v for k, v in vars(args).items() if k not in _SKIP and v is not None}


def _layer(*sources: dict) -> dict:
    """Merge dicts left to right; an objective set by a later source replaces earlier ones."""
    merged: dict = {}
    for src in sources:
        if any(src.get(k) is not None for k in _OBJECTIVE_KEYS):
            for k in _OBJECTIVE_KEYS:
                merged.pop(k, None)
        merged.update(src)
    guides = merged.pop("guides", None)
    if guides is not None:
        if "boosts" not in merged:
            merged["boosts"] = [2.0 ** m for m in range(int(guides))]
        elif len(merged["boosts"]) != guides:
            raise UsageError(f"guides={guides} disagrees with {len(merged['boosts'])} boost values")
    return merged


def build_config(values: dict) -> bench.ExperimentConfig:
    known = {f.name for f in dataclasses.fields(bench.ExperimentConfig)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(unknown)}")
    try:
        return bench.ExperimentConfig(**values)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from None


def _prepare_out(out: str | None, default: str) -> Path:
    path = Path(out or default)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {path}: {exc}") from exc
    return path


def _write_experiment(result: bench.ExperimentResult, out: Path, title: str) -> None:
    bench.write_trace_csv(out / "trace.csv", result.rows)
    bench.write_summary_csv(out / "summary.csv", result.summary)
    (out / "config.json").write_text(json.dumps(result.config.to_dict(), indent=2) + "\n")
    plot_convergence({result.config.mode: result.summary}, out / "convergence.png", title)


def cmd_run(args) -> int:
    values = _layer(_load_json(args.config) if args.config else {}, _flag_values(args))
    cfg = build_config(values)
    out = _prepare_out(cfg.out, f"results/{cfg.label}-{cfg.mode}")
    result = bench.execute(cfg)
    _write_experiment(result, out, f"{cfg.label} ({cfg.mode})")
    final = result.summary[-1]
    print(f"objective={cfg.label} mode={cfg.mode} workers={cfg.workers} batches={cfg.batches} "
          f"runs={cfg.runs}")
    print(f"final mean best={final[1]:.6g} std={final[2]:.3g} "
          f"evals/s={result.evals_per_second:.1f}")
    print(f"wrote {out / 'trace.csv'}, {out / 'summary.csv'}, {out / 'convergence.png'}")
    return EXIT_OK


def cmd_compare(args) -> int:
    flags = _flag_values(args)
    base = _load_json(args.config) if args.config else {}
    serial_file = _load_json(args.serial_config) if args.serial_config else {}
    parallel_file = _load_json(args.parallel_config) if args.parallel_config else {}
    ser_values = _layer(base, serial_file, flags, {"mode": "serial"})
    par_values = _layer(base, parallel_file, flags, {"mode": "parallel"})
    ser_cfg = build_config(ser_values)
    par_cfg = build_config(par_values)
    bad = bench.mismatched_fields(ser_cfg, par_cfg)
    if bad:
        raise UsageError(f"algorithm parameters differ between modes: {', '.join(bad)}")
    out = _prepare_out(par_cfg.out or ser_cfg.out, f"results/{ser_cfg.label}-compare")
    res = bench.compare(ser_cfg, par_cfg, thresholds=args.thresholds)
    for mode in ("serial", "parallel"):
        sub = out / mode
        sub.mkdir(exist_ok=True)
        _write_experiment(res[mode], sub, f"{ser_cfg.label} ({mode})")
        bench.write_curve(out / f"{mode}_curve.csv", res[mode].summary)
    report = res["report"]
    bench.write_report(out / "report.json", report)
    plot_convergence({m: res[m].summary for m in ("parallel", "serial")}, out / "compare.png",
                     f"{ser_cfg.label}: serial vs parallel")
    print(f"objective={report['objective']}")
    print(f"serial   evals/s={report['serial_evals_per_second']:.1f}")
    print(f"parallel evals/s={report['parallel_evals_per_second']:.1f} "
          f"(workers={report['parallel_workers']}, batches={report['parallel_batches']})")
    print(f"speedup={report['speedup']:.3f}")
    for item in report["thresholds"]:
        fmt = lambda v: "never" if v is None else f"{v:.1f} ms"  # noqa: E731
        print(f"threshold {item['threshold']:.6g}: serial {fmt(item['serial_ms'])}, "
              f"parallel {fmt(item['parallel_ms'])}")
    print(f"wrote {out / 'report.json'}, {out / 'compare.png'}")
    return EXIT_OK


NETS_COLUMNS = ["net_id", "scale", "activation", "input_dim", "hidden_dim", "hidden_layers",
                "output_dim", "params", "reported_params"]


def net_rows() -> list[list]:
    return [[s.net_id, s.scale, s.activation, s.input_dim, s.hidden_dim, s.hidden_layers,
             s.output_dim, param_count(s), s.reported_params] for s in REGISTRY.values()]


def cmd_nets(args) -> int:
    rows = net_rows()
    if args.format == "csv":
        print(",".join(NETS_COLUMNS))
        for r in rows:
            print(",".join(str(v) for v in r))
        return EXIT_OK
    widths = [max(len(str(c)), *(len(str(r[i])) for r in rows)) for i, c in enumerate(NETS_COLUMNS)]
    print("  ".join(c.rjust(w) for c, w in zip(NETS_COLUMNS, widths)))
    for r in rows:
        print("  ".join(str(v).rjust(w) for v, w in zip(r, widths)))
    return EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mgfwa", description="Batched multi-guiding spark "
                                     "fireworks optimizer and black-box benchmark harness.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="repeated runs; writes trace/summary CSV and a figure")
    _add_experiment_args(p_run)
    p_run.set_defaults(func=cmd_run)

    p_cmp = sub.add_parser("compare", help="serial vs parallel throughput and convergence")
    _add_experiment_args(p_cmp, with_mode=False)
    p_cmp.add_argument("--serial-config", help="JSON overrides for the serial side")
    p_cmp.add_argument("--parallel-config", help="JSON overrides for the parallel side")
    p_cmp.add_argument("--thresholds", type=float, nargs="+",
                       help="fitness levels for first-crossing times")
    p_cmp.set_defaults(func=cmd_compare)

    p_nets = sub.add_parser("nets", help="list the benchmark networks")
    p_nets.add_argument("--format", choices=["table", "csv"], default="table")
    p_nets.set_defaults(func=cmd_nets)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"mgfwa: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"mgfwa: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
