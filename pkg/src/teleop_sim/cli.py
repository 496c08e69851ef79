"""Command-line entry point: ``teleop-sim {run,metrics,stats,plotdata,all}``.

Output tree under ``--out``::

    manifest.json                  spec echo, per-run seeds and status, file hashes
    traces/<run_id>_states.csv     one pair per run
    traces/<run_id>_packets.csv
    metrics.csv                    one row per successful run
    timing/<condition>_t_send.csv  timing tables, lead and follow columns
    timing/<condition>_t_recv.csv
    stats/report.csv, stats/report.txt
    plotdata/boxplot_epsilon.csv, plotdata/boxplot_epsilon_dot.csv
    plotdata/delay_hist_t_send.csv, plotdata/delay_hist_t_recv.csv
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .core import US_PER_MS, Direction
from .errors import ConfigError, ShapeError, TeleopError
from .metrics import METRIC_COLUMNS, five_number, metrics_row, timing_stats, timing_table_rows
from .simulator import RunFailure, run_batch
from .specfile import ExperimentSpec, load_spec
from .stats import REPORT_COLUMNS, PairedData, compare_conditions, report_csv_rows, report_text
from .trace_io import read_trace, rows_to_csv, write_trace

log = logging.getLogger("teleop_sim")

EXIT_OK, EXIT_USAGE, EXIT_PARTIAL, EXIT_ANALYSIS = 0, 1, 2, 3
MANIFEST = "manifest.json"
MANIFEST_FORMAT = "teleop-sim-manifest/1"

# metric label -> metrics.csv column
STATS_METRICS = {
    "epsilon": "epsilon",
    "epsilon_dot": "epsilon_dot",
    "t_send": "t_send_lead_ms",
    "t_recv": "t_recv_lead_ms",
}

# delay histogram: 10 log-spaced bins per decade from 0.01 ms to 10 s,
# plus an underflow and an overflow bin
HIST_EDGES_MS = np.array([10.0 ** (k / 10) for k in range(-20, 41)])


class AnalysisError(TeleopError):
    pass


# ------------------------------------------------------------------ helpers

def _write_text(out: Path, rel: str, text: str) -> str:
    path = out / rel
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8", newline="\n")
    return rel


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def load_manifest(out: Path) -> dict:
    path = out / MANIFEST
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise AnalysisError(f"{path}: manifest not found (run the 'run' stage first)") from None
    except (OSError, ValueError) as exc:
        raise AnalysisError(f"{path}: unreadable manifest: {exc}") from None


def save_manifest(out: Path, manifest: dict, stage: str, files: list[str]) -> None:
    """Record ``files`` for ``stage`` and refresh every listed hash."""
    stages = manifest.setdefault("outputs", {})
    stages[stage] = sorted(files)
    hashes = {}
    for rels in stages.values():
        for rel in rels:
            p = out / rel
            if p.exists():
                hashes[rel] = _sha256(p)
    manifest["files"] = hashes
    text = json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    (out / MANIFEST).write_text(text, encoding="utf-8", newline="\n")


def _read_csv(path: Path) -> tuple[list[str], list[dict]]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        return list(reader.fieldnames or []), list(reader)


def run_id(condition: str, expert: int, rep: int) -> str:
    return f"{condition}-e{expert}-r{rep}"


# ------------------------------------------------------------------ stages

def cmd_run(spec_path, out_dir, jobs: int = 1, seed: int | None = None) -> int:
    spec = load_spec(spec_path)
    if seed is not None:
        spec.seed = int(seed)
    out = Path(out_dir)
    (out / "traces").mkdir(parents=True, exist_ok=True)

    plan = list(spec.runs())
    results = run_batch([cfg for _, _, cfg in plan], repetitions=spec.repetitions, jobs=jobs)

    runs, files, failures = [], [], []
    i = 0
    for cond, expert, cfg in plan:
        for rep in range(spec.repetitions):
            res = results[i]
            i += 1
            rid = run_id(cond, expert, rep)
            entry = {"run_id": rid, "condition": cond, "expert": expert, "repetition": rep,
                     "block": f"e{expert}-r{rep}", "transport": cfg.transport,
                     "expert_seed": cfg.seed}
            if isinstance(res, RunFailure):
                entry.update(seed=res.seed, status="failed", error=res.error)
                failures.append(f"{rid}: {res.error}")
            else:
                states, packets = f"traces/{rid}_states.csv", f"traces/{rid}_packets.csv"
                write_trace(res, out / states, out / packets)
                files += [states, packets]
                entry.update(seed=res.config.seed, status="ok", states=states, packets=packets)
                resolved = {k: v for k, v in res.metadata.items() if k.startswith("resolved.")}
                if resolved:
                    entry["resolved"] = resolved
            runs.append(entry)

    manifest = {
        "format": MANIFEST_FORMAT,
        "version": __version__,
        "spec": {"name": spec.name, "seed": spec.seed, "repetitions": spec.repetitions,
                 "experts": spec.experts, "entries": [[k, v] for k, v in spec.entries]},
        "conditions": spec.condition_names,
        "runs": runs,
    }
    save_manifest(out, manifest, "run", files)
    print(f"run: {len(runs) - len(failures)}/{len(runs)} runs ok -> {out}")
    for f in failures:
        print(f"  failed {f}", file=sys.stderr)
    return EXIT_PARTIAL if failures else EXIT_OK


def cmd_metrics(traces_dir) -> int:
    out = Path(traces_dir)
    manifest = load_manifest(out)
    rows, errors = [], []
    samples: dict[tuple, list] = {}
    for run in manifest["runs"]:
        if run.get("status") != "ok":
            errors.append(f"{run['run_id']}: run failed, no trace")
            continue
        try:
            trace = read_trace(out / run["states"], out / run["packets"])
        except (OSError, ValueError) as exc:
            errors.append(f"{run['run_id']}: {exc}")
            continue
        cond = run["condition"]
        try:
            rows.append(metrics_row(run["run_id"], run["transport"], run["seed"], trace, cond, run["block"]))
        except (TeleopError, ValueError) as exc:
            errors.append(f"{run['run_id']}: {exc}")
            continue
        for d, side in ((Direction.LEADER_TO_FOLLOWER, "lead"), (Direction.FOLLOWER_TO_LEADER, "follow")):
            sel = trace.packets.select(d)
            for which in ("t_send", "t_recv"):
                samples.setdefault((cond, which, side), []).append(sel[which])

    files = [_write_text(out, "metrics.csv", rows_to_csv(METRIC_COLUMNS, rows))]
    for cond in manifest["conditions"]:
        for which in ("t_send", "t_recv"):
            cols = []
            for side in ("lead", "follow"):
                parts = samples.get((cond, which, side))
                if parts and sum(len(p) for p in parts):
                    cols.append((side, timing_stats(np.concatenate(parts))))
            if not cols:
                log.warning("no %s samples for condition %s; timing table skipped", which, cond)
                continue
            header = [which] + [f"{cond} {side}" for side, _ in cols]
            files.append(_write_text(out, f"timing/{cond}_{which}.csv", rows_to_csv(header, timing_table_rows(cols))))
    save_manifest(out, manifest, "metrics", files)
    print(f"metrics: {len(rows)} rows -> {out / 'metrics.csv'}")
    for e in errors:
        print(f"  error {e}", file=sys.stderr)
    return EXIT_ANALYSIS if errors else EXIT_OK


def paired_from_metrics(records: list[dict], column: str, order: list[str] | None = None) -> PairedData:
    """Blocks x conditions matrix of ``column``; missing cells raise ShapeError."""
    conds = list(order or [])
    for r in records:
        if r["condition"] not in conds:
            conds.append(r["condition"])
    blocks = []
    cells = {}
    for r in records:
        if r["block"] not in blocks:
            blocks.append(r["block"])
        key = (r["block"], r["condition"])
        if key in cells:
            raise ShapeError(f"duplicate metrics row for block {r['block']!r}, condition {r['condition']!r}")
        try:
            cells[key] = float(r[column])
        except (TypeError, ValueError):
            raise AnalysisError(f"non-numeric {column} for block {r['block']!r}, "
                                f"condition {r['condition']!r}: {r[column]!r}") from None
    missing = [f"{b}/{c}" for b in blocks for c in conds if (b, c) not in cells]
    if missing:
        raise ShapeError(f"non-rectangular metrics: missing cells {', '.join(missing)}")
    values = np.array([[cells[(b, c)] for c in conds] for b in blocks])
    return PairedData(conds, values)


def cmd_stats(metrics_path, alpha: float = 0.05, out_dir=None) -> int:
    metrics_path = Path(metrics_path)
    out = Path(out_dir) if out_dir else metrics_path.parent
    try:
        header, records = _read_csv(metrics_path)
    except OSError as exc:
        raise AnalysisError(f"{metrics_path}: {exc.strerror}") from None
    missing = [c for c in ("condition", "block", *STATS_METRICS.values()) if c not in header]
    if missing:
        raise AnalysisError(f"{metrics_path}: missing columns {', '.join(missing)}")
    manifest = _maybe_manifest(out)
    order = manifest.get("conditions") if manifest else None

    reports = {}
    for label, column in STATS_METRICS.items():
        data = paired_from_metrics(records, column, order)
        if data.k < 2:
            raise ShapeError(f"stats need at least 2 conditions, found {data.k}")
        reports[label] = compare_conditions(data, alpha, label)

    rows = [row for rep in reports.values() for row in report_csv_rows(rep)]
    files = [
        _write_text(out, "stats/report.csv", rows_to_csv(REPORT_COLUMNS, rows)),
        _write_text(out, "stats/report.txt", report_text(reports)),
    ]
    if manifest is not None:
        save_manifest(out, manifest, "stats", files)
    print(f"stats: {len(rows)} test rows -> {out / 'stats'}")
    return EXIT_OK


def _maybe_manifest(out: Path) -> dict | None:
    return load_manifest(out) if (out / MANIFEST).exists() else None


def histogram_rows(values_ms, edges=HIST_EDGES_MS) -> list[tuple[float, float, int]]:
    """(lo, hi, count) with ``lo <= x < hi``; first and last bins are open-ended."""
    v = np.asarray(values_ms, dtype=float)
    idx = np.searchsorted(edges, v, side="right")
    counts = np.bincount(idx, minlength=len(edges) + 1)
    bounds = [0.0, *edges.tolist(), float("inf")]
    return [(bounds[i], bounds[i + 1], int(counts[i])) for i in range(len(edges) + 1)]


def cmd_plotdata(metrics_path, out_dir=None) -> int:
    metrics_path = Path(metrics_path)
    out = Path(out_dir) if out_dir else metrics_path.parent
    try:
        _, records = _read_csv(metrics_path)
    except OSError as exc:
        raise AnalysisError(f"{metrics_path}: {exc.strerror}") from None
    manifest = _maybe_manifest(out)
    conds = list(manifest["conditions"]) if manifest else []
    for r in records:
        if r["condition"] not in conds:
            conds.append(r["condition"])

    files = []
    for metric in ("epsilon", "epsilon_dot"):
        rows = []
        for c in conds:
            vals = [float(r[metric]) for r in records if r["condition"] == c]
            if not vals:
                log.warning("boxplot_%s: condition %s has no runs, skipped", metric, c)
                continue
            rows.append([c, str(len(vals))] + [repr(x) for x in five_number(vals)])
        files.append(_write_text(out, f"plotdata/boxplot_{metric}.csv",
                                 rows_to_csv(["condition", "n", "min", "q1", "median", "q3", "max"], rows)))

    if manifest is None:
        log.warning("no manifest next to %s; delay histograms skipped", metrics_path)
    else:
        delays: dict[tuple, list] = {}
        for run in manifest["runs"]:
            if run.get("status") != "ok":
                continue
            try:
                trace = read_trace(out / run["states"], out / run["packets"])
            except (OSError, ValueError) as exc:
                log.warning("delay histograms: %s unreadable (%s), skipped", run["run_id"], exc)
                continue
            for d, side in ((Direction.LEADER_TO_FOLLOWER, "lead"), (Direction.FOLLOWER_TO_LEADER, "follow")):
                sel = trace.packets.select(d)
                for which in ("t_send", "t_recv"):
                    delays.setdefault((run["condition"], side, which), []).append(sel[which])
        for which in ("t_send", "t_recv"):
            rows = []
            for c in conds:
                for side in ("lead", "follow"):
                    parts = delays.get((c, side, which))
                    if not parts or not sum(len(p) for p in parts):
                        log.warning("delay_hist_%s: condition %s (%s) has no samples, skipped", which, c, side)
                        continue
                    ms = np.concatenate(parts) / US_PER_MS
                    rows += [[c, side, repr(lo), repr(hi), str(n)] for lo, hi, n in histogram_rows(ms)]
            files.append(_write_text(out, f"plotdata/delay_hist_{which}.csv",
                                     rows_to_csv(["condition", "side", "bin_lo_ms", "bin_hi_ms", "count"], rows)))
        save_manifest(out, manifest, "plotdata", files)
    print(f"plotdata: {len(files)} files -> {out / 'plotdata'}")
    return EXIT_OK


def cmd_all(spec_path, out_dir, alpha: float = 0.05, jobs: int = 1, seed: int | None = None) -> int:
    code = cmd_run(spec_path, out_dir, jobs, seed)
    out = Path(out_dir)
    worst = code
    for stage in (lambda: cmd_metrics(out), lambda: cmd_stats(out / "metrics.csv", alpha, out),
                  lambda: cmd_plotdata(out / "metrics.csv", out)):
        try:
            rc = stage()
        except (AnalysisError, ShapeError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_ANALYSIS
        worst = max(worst, rc)
    return worst


# ------------------------------------------------------------------ argparse

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _alpha(text: str) -> float:
    try:
        a = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid alpha {text!r}") from None
    if not 0 < a < 1:
        raise argparse.ArgumentTypeError(f"alpha must be in (0, 1), got {a}")
    return a


def _positive_int(text: str) -> int:
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid integer {text!r}") from None
    if n < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {n}")
    return n


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="teleop-sim", description="Leader-follower teleoperation over simulated transports.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, help_, spec=False, out_required=True, alpha=False, jobs=False, metrics=False):
        sp = sub.add_parser(name, help=help_)
        if spec:
            sp.add_argument("--spec", required=True,
                            help="experiment spec file, or the name of a bundled spec (paper-replica)")
        sp.add_argument("--out", required=out_required, help="output directory")
        if metrics:
            sp.add_argument("--metrics", help="metrics CSV (default: <out>/metrics.csv)")
        if alpha:
            sp.add_argument("--alpha", type=_alpha, default=0.05, help="family-wise significance level")
        if jobs:
            sp.add_argument("--jobs", type=_positive_int, default=1, help="parallel worker processes")
            sp.add_argument("--seed", type=int, help="override the spec's master seed")
        return sp

    add("run", "simulate every run of a spec and write traces", spec=True, out_required=False, jobs=True)
    add("metrics", "compute error indices and timing tables from traces")
    add("stats", "normality, Friedman and pairwise Wilcoxon tests", alpha=True, metrics=True)
    add("plotdata", "boxplot summaries and delay histograms", metrics=True)
    add("all", "run, metrics, stats and plotdata in sequence", spec=True, out_required=False,
        alpha=True, jobs=True)
    return p


def _resolve_out(args) -> Path:
    if args.out:
        return Path(args.out)
    spec: ExperimentSpec = load_spec(args.spec)
    if spec.output:
        return Path(spec.output)
    raise ConfigError("no output directory: pass --out or set experiment.output in the spec")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command in ("run", "all"):
            out = _resolve_out(args)
            if args.command == "run":
                return cmd_run(args.spec, out, args.jobs, args.seed)
            return cmd_all(args.spec, out, args.alpha, args.jobs, args.seed)
        out = Path(args.out)
        metrics = Path(args.metrics) if getattr(args, "metrics", None) else out / "metrics.csv"
        if args.command == "metrics":
            return cmd_metrics(out)
        if args.command == "stats":
            return cmd_stats(metrics, args.alpha, out)
        return cmd_plotdata(metrics, out)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (AnalysisError, ShapeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ANALYSIS


if __name__ == "__main__":
    sys.exit(main())
