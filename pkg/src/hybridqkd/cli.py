"""Command-line entry point: ``hybridqkd {evaluate,sweep,threshold,preset}``."""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import replace
from pathlib import Path

from .config import ATTACKS, REGIMES, ConfigError, apply_override, load_config_text, merge, parse_config, preset
from .optimize import BOUNDARIES, find_tau_thresholds
from .sweep import COLUMNS, evaluate_point, run_sweep

WORKERS_ENV = "HYBRIDQKD_WORKERS"
THRESHOLD_COLUMNS = ("regime", "boundary", "tau", "bracket", "iterations", "feasible", "note")
DR_MESSAGE = (
    "direct reconciliation is out of scope: only reverse-reconciliation key rates are implemented"
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


def format_value(x) -> str:
    """12-significant-digit text form used by every output format."""
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, float)):
        return f"{float(x):.12g}"
    return str(x)


def json_value(x):
    if isinstance(x, bool) or x is None or isinstance(x, str):
        return x
    if isinstance(x, (int, float)):
        return float(f"{float(x):.12g}") if math.isfinite(x) else None
    if isinstance(x, dict):
        return {k: json_value(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [json_value(v) for v in x]
    return str(x)


def render(records: list[dict], columns, fmt: str) -> str:
    if fmt == "json":
        return json.dumps([json_value(r) for r in records], indent=2) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for r in records:
        writer.writerow([format_value(r.get(c)) for c in columns])
    return buf.getvalue()


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(WORKERS_ENV, f"expected an integer, got {raw!r}") from None


def _raw_config(args) -> dict:
    raw = preset(args.preset) if getattr(args, "preset", None) else {}
    if getattr(args, "config", None):
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise ConfigError("--config", str(exc)) from None
        raw = merge(raw, load_config_text(text))
    for assignment in getattr(args, "set", None) or []:
        raw = apply_override(raw, assignment)
    if args.regime:
        raw["regime"] = args.regime
    if args.attack:
        raw["attacks"] = args.attack
    if args.reconciliation:
        raw["reconciliation"] = args.reconciliation
    return raw


def _add_common(p: argparse.ArgumentParser, with_config=True):
    if with_config:
        p.add_argument("--config", help="JSON or YAML config file")
        p.add_argument("--preset", help="start from an embedded preset (fig2, fig3, figA1)")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config field, e.g. model.xi=0.02")
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"), default=None)
    p.add_argument("--workers", type=int, default=None, help=f"parallel workers (default: ${WORKERS_ENV} or 1)")
    p.add_argument("--regime", choices=REGIMES + ("both",))
    p.add_argument("--attack", choices=ATTACKS + ("all",))
    p.add_argument("--reconciliation", choices=("reverse", "direct"))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hybridqkd",
        description="Key rates of no-switching CV-QKD under individual, coherent and hybrid attacks. "
        "Excess noise xi is referred to the channel input.",
    )
    sub = parser.add_subparsers(dest="verb", required=True)
    _add_common(sub.add_parser("evaluate", help="verbose report at a single point"))
    _add_common(sub.add_parser("sweep", help="sweep tau, distance_km, xi or n"))
    th = sub.add_parser("threshold", help="memory transmissivities where the optimal attack changes")
    _add_common(th)
    th.add_argument("--boundary", choices=BOUNDARIES + ("both",), default="both")
    th.add_argument("--tol", type=float, default=5e-4)
    pr = sub.add_parser("preset", help="run an embedded figure sweep")
    pr.add_argument("name")
    _add_common(pr, with_config=False)
    return parser


def _run(args) -> int:
    if args.verb == "preset":
        args.preset = args.name
    raw = _raw_config(args)
    if raw.get("reconciliation") == "direct":
        print(f"error: {DR_MESSAGE}", file=sys.stderr)
        return EXIT_CONFIG
    cfg = parse_config(raw)
    workers = args.workers if args.workers is not None else _default_workers()
    if workers < 1:
        raise ConfigError("--workers", "must be >= 1")

    if args.verb == "threshold":
        boundaries = BOUNDARIES if args.boundary == "both" else (args.boundary,)
        records = []
        for regime in cfg.regimes:
            found = find_tau_thresholds(cfg.model(), regime, boundaries, args.tol, cfg.finite,
                                        beta=cfg.beta, bounds=cfg.v_bounds, fixed_V=cfg.V)
            for boundary in boundaries:
                r = found[boundary]
                records.append({"regime": regime, "boundary": boundary, "tau": r.x, "bracket": r.bracket,
                                "iterations": r.iterations, "feasible": r.feasible, "note": r.note})
        _emit(render(records, THRESHOLD_COLUMNS, args.format or "csv"), args.out)
        return EXIT_OK

    if args.verb == "evaluate" and (args.format or "json") == "json":
        if cfg.sweep is not None:
            print("note: evaluate ignores the sweep section", file=sys.stderr)
        records = evaluate_point(replace(cfg, sweep=None))
        _emit(render(records, None, "json"), args.out)
        failures = sum(1 for r in records if r.get("error"))
        return EXIT_NUMERICAL if failures == len(records) else EXIT_OK

    if args.verb == "evaluate":
        cfg = replace(cfg, sweep=None)
    rows = run_sweep(cfg, workers)
    failures = sum(1 for r in rows if r.error and not math.isfinite(r.rate))
    records = [dict(zip(COLUMNS, r.as_tuple())) for r in rows]
    _emit(render(records, COLUMNS, args.format or "csv"), args.out)
    if failures:
        print(f"warning: {failures} of {len(rows)} rows flagged with numerical errors", file=sys.stderr)
    return EXIT_NUMERICAL if rows and failures == len(rows) else EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _run(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
