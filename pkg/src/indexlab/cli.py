"""Command line runner: ``indexlab run`` and ``indexlab suite``.

Exit codes: 0 all checks passed, 1 a check failed, 2 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import tolerances as tol
from .experiments import EXPERIMENTS, Outcome, merged_parameters, run_property_suite

SCHEMA = "indexlab/1"
CONFIG_KEYS = {"experiment", "parameters", "output", "seed", "tolerances"}


class ConfigError(ValueError):
    pass


def _plain(v):
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return float(v)
    return v


def load_config(source) -> dict:
    """Parse and validate a run configuration (path, JSON text or dict)."""
    if isinstance(source, dict):
        cfg = source
    else:
        try:
            text = Path(source).read_text(encoding="utf-8")
        except OSError as e:
            raise ConfigError(f"cannot read config: {e}") from e
        try:
            cfg = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"malformed JSON: {e}") from e
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    name = cfg.get("experiment")
    if name not in EXPERIMENTS:
        raise ConfigError(f"experiment must be one of {sorted(EXPERIMENTS)}, got {name!r}")
    params = cfg.get("parameters", {})
    if not isinstance(params, dict):
        raise ConfigError("parameters must be a JSON object")
    # experiment parameters may also be given at the top level
    flat = {k: v for k, v in cfg.items() if k not in CONFIG_KEYS}
    unknown = set(flat) - set(EXPERIMENTS[name].defaults)
    if unknown:
        raise ConfigError(f"unknown config key(s): {sorted(unknown)}")
    params = {**flat, **params}
    try:
        params = merged_parameters(name, params)
    except KeyError as e:
        raise ConfigError(str(e.args[0])) from e
    seed = cfg.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ConfigError("seed must be an integer")
    tols = cfg.get("tolerances", {})
    if not isinstance(tols, dict) or any(k not in tol.DEFAULTS for k in tols):
        raise ConfigError(f"tolerances must map known keys {sorted(tol.DEFAULTS)} to numbers")
    return {"experiment": name, "parameters": params, "output": cfg.get("output", "results"), "seed": seed, "tolerances": tols}


def write_csv(path: Path, rows: list) -> None:
    if not rows:
        return
    header = list(rows[0])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)  # RFC 4180: CRLF line endings, minimal quoting
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else _plain(v) for v in (r[k] for k in header)])


def execute(cfg: dict, out_dir: Path | None = None, anchor: str | None = None) -> dict:
    """Run one validated config, write its files and return the result record."""
    name = cfg["experiment"]
    exp = EXPERIMENTS[name]
    out_dir = Path(cfg["output"]) if out_dir is None else out_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(cfg["seed"])
    start = time.perf_counter()
    with tol.overridden(**cfg["tolerances"]):
        outcome = exp.runner(cfg["parameters"], rng)
    return _record(name, cfg, outcome, anchor or exp.anchor, start, out_dir)


def _record(name, cfg, outcome: Outcome, anchor, start, out_dir: Path) -> dict:
    wall = int(round(1000 * (time.perf_counter() - start)))
    out_dir.mkdir(parents=True, exist_ok=True)
    for table, rows in outcome.tables.items():
        write_csv(out_dir / f"{table}.csv", rows)
    rec = {
        "schema": SCHEMA,
        "experiment": name,
        "parameters": _plain(cfg["parameters"]),
        "seed": cfg["seed"],
        "tolerances": _plain(cfg["tolerances"]),
        "metrics": _plain(outcome.metrics),
        "pass": bool(outcome.passed),
        "paper_anchor": anchor,
        "wall_time_ms": wall,
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    (out_dir / "result.json").write_text(json.dumps(rec, indent=2) + "\n", encoding="utf-8")
    return rec


# --- acceptance suite ------------------------------------------------------------------

# (criterion, experiment, parameter overrides)
ACCEPTANCE = [
    ("1", "bott-spectrum", {}),
    ("2a", "bott-index", {"n": 1}),
    ("2b", "bott-index", {"n": 2}),
    ("3", "bott-index", {"n": 1, "t": 1.0}),
    ("4", "alpha-isometry", {}),
    ("5", "b20-homotopy", {}),
    ("6", "commutator-decay", {}),
    ("7", "quantization-convergence", {"torus_flux": 1}),
    ("8", "index-check", {}),
    ("9", "cayley-index", {}),
    ("10", "glue-independence", {}),
    ("11", "properties", {}),
]

SUITES = {"paper-acceptance": ACCEPTANCE}


def _suite_item(args) -> dict:
    label, name, params, seed, overrides, out = args
    tol.reset()
    try:
        if name == "properties":
            start = time.perf_counter()
            with tol.overridden(**overrides):
                outcome = run_property_suite(seed)
            cfg = {"parameters": {}, "seed": seed, "tolerances": overrides}
            rec = _record(name, cfg, outcome, "randomized invariants", start, Path(out))
        else:
            cfg = load_config({"experiment": name, "parameters": params, "seed": seed, "tolerances": overrides})
            rec = execute(cfg, Path(out))
    except Exception as e:  # a failing item marks the suite failed but the suite continues
        rec = {"schema": SCHEMA, "experiment": name, "pass": False, "error": f"{type(e).__name__}: {e}", "metrics": {}, "paper_anchor": EXPERIMENTS[name].anchor if name in EXPERIMENTS else "randomized invariants", "wall_time_ms": 0}
    rec["criterion"] = label
    return rec


def run_suite(name: str, out: Path, jobs: int = 1, overrides: dict | None = None, seed: int = 0, only=None) -> dict:
    if name not in SUITES:
        raise ConfigError(f"unknown suite {name!r}; available: {sorted(SUITES)}")
    overrides = overrides or {}
    items = [it for it in SUITES[name] if only is None or it[0] in only]
    tasks = [(label, exp, params, seed, overrides, str(out / f"{label}-{exp}")) for label, exp, params in items]
    start = time.perf_counter()
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            records = list(ex.map(_suite_item, tasks))
    else:
        records = [_suite_item(t) for t in tasks]
    report = {
        "schema": SCHEMA,
        "suite": name,
        "pass": all(r["pass"] for r in records),
        "wall_time_ms": int(round(1000 * (time.perf_counter() - start))),
        "records": records,
    }
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(json.dumps(_plain(report), indent=2) + "\n", encoding="utf-8")
    lines = ["| criterion | experiment | anchor | result | time (s) |", "|---|---|---|---|---|"]
    for r in records:
        lines.append(f"| {r['criterion']} | {r['experiment']} | {r['paper_anchor']} | {'pass' if r['pass'] else 'FAIL'} | {r['wall_time_ms'] / 1000:.1f} |")
    (out / "report.md").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return report


def _parse_tols(pairs) -> dict:
    out = {}
    for p in pairs or []:
        try:
            k, v = tol.parse_override(p)
        except (KeyError, ValueError) as e:
            raise ConfigError(f"bad --tol {p!r}: {e}") from e
        out[k] = v
    return out


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="indexlab", description="Index theory experiments on finite grids.")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run one experiment from a JSON config")
    r.add_argument("config")
    r.add_argument("--out", help="output directory (overrides the config)")
    s = sub.add_parser("suite", help="run a named suite of experiments")
    s.add_argument("name")
    s.add_argument("--out", default="results")
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--tol", action="append", metavar="KEY=VAL")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--only", nargs="+", metavar="CRITERION")
    sub.add_parser("list", help="list experiments and their default parameters")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return 2 if e.code else 0
    try:
        if args.command == "list":
            for name, exp in EXPERIMENTS.items():
                print(f"{name}: {exp.anchor}\n    {json.dumps(exp.defaults)}")
            return 0
        if args.command == "run":
            cfg = load_config(args.config)
            try:
                rec = execute(cfg, Path(args.out) if args.out else None)
            except (ValueError, KeyError) as e:
                raise ConfigError(f"{cfg['experiment']}: {e}") from e
            status = "PASS" if rec["pass"] else "FAIL"
            print(f"{status} {rec['experiment']} [{rec['paper_anchor']}] {json.dumps(rec['metrics'])}")
            return 0 if rec["pass"] else 1
        if not args.name:
            raise ConfigError("suite name must not be empty")
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        report = run_suite(args.name, Path(args.out), args.jobs, _parse_tols(args.tol), args.seed, args.only)
        for r in report["records"]:
            extra = f" ({r['error']})" if "error" in r else ""
            print(f"criterion {r['criterion']:>3} {'PASS' if r['pass'] else 'FAIL'} {r['experiment']} [{r['paper_anchor']}] {r['wall_time_ms'] / 1000:.1f}s{extra}")
        print(f"suite {args.name}: {'PASS' if report['pass'] else 'FAIL'} in {report['wall_time_ms'] / 1000:.1f}s")
        return 0 if report["pass"] else 1
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
