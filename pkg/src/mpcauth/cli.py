"""Command-line front end: ``mpcauth {simulate,replay,compare,sweep}``.

Exit codes: 0 success, 1 configuration or schema error, 2 I/O error,
3 internal invariant violation (or, for ``sweep``, every cell failed).
"""

import argparse
from concurrent.futures import ProcessPoolExecutor
import csv
import json
import logging
import math
import os
from pathlib import Path
import sys

import numpy as np

from .config import RunConfig, format_value, load_config
from .estimators import ThresholdAuthenticator
from .exceptions import ConfigError, InvariantViolation, MPCError, SchemaError
from .metrics import evaluate, write_report_csv, write_report_json
from .session import Actor, generate_session, replay, write_events, write_trace

logger = logging.getLogger("mpcauth")

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_INTERNAL = 0, 1, 2, 3
_METRICS = ("acc", "prec", "tar", "trr", "far", "frr", "delay_windows", "delay_minutes")


# --------------------------------------------------------------------------
# per-seed work (runs in worker processes; must stay picklable)

def _check_trace(trace, n_events, engine=None):
    if len(trace) != n_events:
        raise InvariantViolation("trace length differs from event count")
    for i, rec in enumerate(trace):
        if rec.window != i:
            raise InvariantViolation(f"trace window {rec.window} at position {i}")
        if engine is not None:
            if not 0.0 <= rec.position <= engine.ladder_.bottom:
                raise InvariantViolation(f"position {rec.position} off the ladder")
            if rec.alpha + engine.theta > rec.beta + 1e-9:
                raise InvariantViolation(f"domains crossed at window {i}")


def _load_training(path):
    scores, labels = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader, [])]
        if header != ["score", "actor"]:
            raise SchemaError("training file header must be 'score,actor'", line=1)
        for row in reader:
            if not row:
                continue
            try:
                scores.append(float(row[0]))
                labels.append(int(Actor.parse(row[1]) is Actor.ILLEGITIMATE))
            except (ValueError, IndexError, MPCError):
                raise SchemaError(f"bad training row {row!r}", line=reader.line_num) from None
    return np.array(scores), np.array(labels)


def run_seed(config, seed, events=None):
    """Fit both engines for one seed and run them over one session.

    ``events`` replaces the generated stream (replay); training data still
    comes from the scenario unless ``run.train_path`` is set.
    """
    scenario = config.scenario(seed)
    session = generate_session(scenario)
    if config["run.train_path"]:
        X, y = _load_training(config["run.train_path"])
    else:
        X, y = session.train_scores, session.train_labels
    stream = session.events if events is None else events
    engine = config.engine(seed).fit(X, y)
    mpc = engine.run(stream, window_seconds=scenario.window_seconds)
    _check_trace(mpc, len(stream), engine)
    if config["run.reference"] == "mpc":
        reference = config.engine(seed).fit(X, y).run(stream, window_seconds=scenario.window_seconds)
        ref_name = "mpc"
    else:
        reference = ThresholdAuthenticator(scenario.baseline_threshold).fit().run(
            stream, window_seconds=scenario.window_seconds)
        ref_name = "baseline"
    _check_trace(reference, len(stream))
    k = config["run.k_stable"]
    return {
        "seed": seed,
        "events": stream,
        "mpc": mpc,
        "reference": reference,
        "reference_name": ref_name,
        "mpc_report": evaluate(mpc, k_stable=k) if len(mpc) else None,
        "reference_report": evaluate(reference, k_stable=k) if len(reference) else None,
        "n_levels": engine.ladder_.n,
        "overlap": session.realized_overlap if events is None else None,
    }


def _run_all(config, seeds, events=None):
    seeds = sorted(set(seeds))
    jobs = max(1, config["run.jobs"])
    if jobs == 1 or len(seeds) == 1:
        results = [run_seed(config, s, events) for s in seeds]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run_seed, [config] * len(seeds), seeds,
                                    [events] * len(seeds)))
    return sorted(results, key=lambda r: r["seed"])


# --------------------------------------------------------------------------
# output helpers

def _mean(values):
    vals = [v for v in values if v is not None]
    return math.fsum(vals) / len(vals) if vals else None


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_seed_outputs(out, result, config, with_events=True):
    out.mkdir(parents=True, exist_ok=True)
    n = result["n_levels"]
    extra = {"seed": result["seed"], **config.flat()}
    if with_events:
        write_events(result["events"], out / "events.csv")
    write_trace(result["mpc"], out / "mpc_trace.csv")
    name = result["reference_name"]
    write_trace(result["reference"], out / f"{name}_trace.csv" if name == "baseline"
                else out / "reference_trace.csv")
    if result["mpc_report"] is not None:
        write_report_json(result["mpc_report"], out / "mpc_report.json", n,
                          {"engine": "mpc", **extra})
        write_report_csv(result["mpc_report"], out / "mpc_report.csv", n)
    ref_report = result["reference_report"]
    if ref_report is not None:
        ref_n = n if name == "mpc" else None
        stem = "baseline_report" if name == "baseline" else "reference_report"
        write_report_json(ref_report, out / f"{stem}.json", ref_n, {"engine": name, **extra})
        write_report_csv(ref_report, out / f"{stem}.csv", ref_n)


def _aggregate(results, which):
    reports = [r[which] for r in results if r[which] is not None]
    agg = {m: _mean([getattr(rep, m) for rep in reports]) for m in _METRICS}
    agg["delay_never_stable"] = sum(rep.delay_windows is None for rep in reports)
    return agg


def _write_json(path, data):
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2)
        fh.write("\n")


def _comparison_rows(results):
    rows = []
    for r in results:
        m, b = r["mpc_report"], r["reference_report"]
        acc_delta = None if m.acc is None or b.acc is None else m.acc - b.acc
        delay_delta = (None if m.delay_minutes is None or b.delay_minutes is None
                       else m.delay_minutes - b.delay_minutes)
        rows.append({"seed": r["seed"], "mpc_acc": m.acc, "reference_acc": b.acc,
                     "acc_delta": acc_delta, "mpc_delay_minutes": m.delay_minutes,
                     "reference_delay_minutes": b.delay_minutes, "delay_delta": delay_delta,
                     "overlap": r["overlap"]})
    return rows


def _summary_row(rows):
    summary = {"seed": "mean"}
    for key in rows[0]:
        if key != "seed":
            summary[key] = _mean([row[key] for row in rows])
    return summary


def _write_rows(path, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(rows[0]))
        for row in rows:
            writer.writerow([_fmt(v) for v in row.values()])


# --------------------------------------------------------------------------
# subcommands

def cmd_simulate(config):
    seeds = config["run.seeds"]
    if not seeds:
        raise ConfigError("run.seeds is empty")
    out = Path(config["run.out"])
    results = _run_all(config, seeds)
    for r in results:
        _write_seed_outputs(out / f"seed_{r['seed']}", r, config)
    _write_json(out / "summary.json", {
        "seeds": [r["seed"] for r in results],
        "mpc": _aggregate(results, "mpc_report"),
        results[0]["reference_name"]: _aggregate(results, "reference_report"),
        **config.flat(),
    })
    return EXIT_OK


def cmd_replay(config, path):
    events = replay(path)
    seeds = config["run.seeds"] or [0]
    result = run_seed(config, seeds[0], events)
    _write_seed_outputs(Path(config["run.out"]), result, config, with_events=False)
    return EXIT_OK


def cmd_compare(config):
    seeds = config["run.seeds"]
    if not seeds:
        raise ConfigError("run.seeds is empty; compare needs at least one seed")
    results = _run_all(config, seeds)
    rows = _comparison_rows(results)
    summary = _summary_row(rows)
    out = Path(config["run.out"])
    out.mkdir(parents=True, exist_ok=True)
    _write_rows(out / "compare.csv", rows + [summary])
    _write_json(out / "compare.json", {"rows": rows, "summary": summary, **config.flat()})
    return EXIT_OK


def cmd_sweep(config):
    seeds = config["run.seeds"]
    if not seeds:
        raise ConfigError("run.seeds is empty")
    cells = list(config.cells())
    rows = []
    failures = 0
    for cell in cells:
        cell_config = config.with_overrides(cell)
        row = {k: format_value(v) for k, v in cell.items()}
        try:
            summary = _summary_row(_comparison_rows(_run_all(cell_config, seeds)))
            row["status"] = "ok"
            row.update({k: v for k, v in summary.items() if k != "seed"})
        except (MPCError, ValueError) as exc:
            failures += 1
            logger.warning("sweep cell %s failed: %s", cell, exc)
            row["status"] = "failed"
        rows.append(row)
    out = Path(config["run.out"])
    out.mkdir(parents=True, exist_ok=True)
    header = sorted(config.grid) + ["status", "mpc_acc", "reference_acc", "acc_delta",
                                    "mpc_delay_minutes", "reference_delay_minutes",
                                    "delay_delta", "overlap"]
    with open(out / "sweep.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(row.get(h)) for h in header])
    if cells and failures == len(cells):
        return EXIT_INTERNAL
    return EXIT_OK


# --------------------------------------------------------------------------
# argument handling

def build_parser():
    parser = argparse.ArgumentParser(prog="mpcauth", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="flat key = value config file")
    common.add_argument("--seed", type=int, action="append", metavar="N",
                        help="seed to run (repeatable; overrides run.seeds)")
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("--jobs", type=int, metavar="N", help="worker processes")
    common.add_argument("--mode", choices=("jump", "gradual"))
    common.add_argument("--expansion", choices=("on", "off", "paper-literal"))
    common.add_argument("--second-factor", choices=("on", "off"), dest="second_factor")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override any config key")
    common.add_argument("--print-config", action="store_true",
                        help="print the resolved configuration and exit")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="generate sessions and run both engines")
    rp = sub.add_parser("replay", parents=[common], help="run both engines over an event CSV")
    rp.add_argument("path", help="event CSV (window,score,actor,password_entered,password_correct)")
    sub.add_parser("compare", parents=[common], help="per-seed MPC vs reference comparison")
    sub.add_parser("sweep", parents=[common], help="comparison over a parameter grid")
    return parser


def resolve_config(args):
    config = RunConfig()
    if args.config:
        load_config(args.config, config)
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        config.set(key.strip(), value.strip())
    if args.seed:
        config.values["run.seeds"] = list(args.seed)
    if args.out:
        config.values["run.out"] = args.out
    if args.jobs is not None:
        config.set("run.jobs", str(args.jobs))
    if args.mode:
        config.set("engine.mode", args.mode)
    if args.expansion:
        config.set("engine.expansion", args.expansion)
    if args.second_factor:
        config.set("engine.second_factor", args.second_factor)
    return config


def _configure_logging():
    level = os.environ.get("MPC_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv=None):
    _configure_logging()
    args = build_parser().parse_args(argv)
    try:
        config = resolve_config(args)
        if args.print_config:
            sys.stdout.write(config.dump())
            return EXIT_OK
        if args.command == "simulate":
            return cmd_simulate(config)
        if args.command == "replay":
            return cmd_replay(config, args.path)
        if args.command == "compare":
            return cmd_compare(config)
        return cmd_sweep(config)
    except (ConfigError, SchemaError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except InvariantViolation as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except MPCError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
