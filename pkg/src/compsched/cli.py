"""Command-line runner.

    compsched run SCENARIO.yaml [--out DIR] [--jobs N] [--seed S]
    compsched verify SUITE [--out DIR] [--jobs N] [--seed S]
    compsched report RUN_DIR

Exit codes: 0 success, 1 runtime failure (or a failed verification),
2 unreadable scenario or unknown suite, 3 invalid scenario.  Only the path
of the written summary goes to stdout; diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, ConfigParseError, ScenarioConfig, load_config
from .engine import FIFO, ComparisonSP, StaticPriority, UnstableSystemError, class_stream, generate_input, run_class_in_isolation, simulate
from .inputs import INFINITE, Pareto, RngStream, is_continuous, mean, mean_interarrival
from .metrics import TailAccumulator, TailCurve, compare, log_grid, theory_classic_tail, theory_conditional_tail, theory_workload_tail, usable_range
from .oracle import ClassLaw
from .splitter import classify_stream

EXIT_OK, EXIT_RUNTIME, EXIT_PARSE, EXIT_INVALID = 0, 1, 2, 3

JOBS_HEADER = ("id", "arrival", "size", "class", "sojourn")
REPORT_HEADER = ("x", "empirical", "ci", "theoretical", "ratio")


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_csv(path: Path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _write_columns(path: Path, header, columns, formats):
    """Fast fixed-format CSV for long per-job tables (``%.17g`` round-trips floats)."""
    data = np.column_stack(columns)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        np.savetxt(fh, data, fmt=formats, delimiter=",")


# ---------------------------------------------------------------------------
# run


def _simulate_replication(cfg: ScenarioConfig, rep: int, rep_dir: str):
    """One replication: simulate, write its CSVs, return what the reports need."""
    t0 = time.perf_counter()
    rep_dir = Path(rep_dir)
    rep_dir.mkdir(parents=True, exist_ok=True)
    n = cfg.n_jobs
    warm = int(cfg.warmup_fraction * n)
    disc = cfg.discipline
    info = {"replication": rep, "seed": [cfg.seed, rep], "dir": rep_dir.name}
    out = None
    if disc is None:
        arrival, size, stream = generate_input(cfg, rep)
        classes = classify_stream(size, cfg.splitter.m, cfg.splitter.l, cfg.splitter.init, cfg.service, stream.substream(2))
        sojourn = np.full(n, np.nan)
        valid = np.ones(n, dtype=bool)
        valid[:warm] = False
    else:
        out = simulate(cfg, rep)
        arrival, size, classes, sojourn = out.arrival, out.size, out.classes, out.sojourn
        valid = out.valid()
        info.update(busy_time=out.busy_time, n_events=out.n_events, n_truncated=int(out.truncated.sum()))
    if cfg.write_jobs:
        _write_columns(
            rep_dir / "jobs.csv",
            JOBS_HEADER,
            [np.arange(n), arrival, size, classes, sojourn],
            ["%d", "%.17g", "%.17g", "%d", "%.17g"],
        )
        if out is not None:
            nk = out.workload.shape[1]
            _write_columns(
                rep_dir / "workload.csv",
                ("arrival_index",) + tuple(f"class_{k}" for k in range(nk)) + ("total",),
                [np.arange(n), out.workload, out.total_workload],
                ["%d"] + ["%.17g"] * (nk + 1),
            )
    data = {
        "size": size[valid],
        "classes": classes[valid],
        "sojourn": sojourn[valid],
        "workload": out.workload[warm:] if out is not None else None,
    }
    if isinstance(disc, FIFO) and cfg.class_capacities is not None:
        m = cfg.splitter.m
        iso = {}
        for k in range(m + 1):
            law_mean = _class_mean(cfg.service, m, k)
            r = run_class_in_isolation(
                arrival,
                class_stream(size, classes, k),
                cfg.class_capacities[k],
                mean_size=law_mean,
                mean_interarrival=mean_interarrival(cfg.arrivals),
            )
            iso[k] = r.workload[warm:, 0]
        data["isolation"] = iso
    info["n_valid"] = int(valid.sum())
    info["runtime_s"] = time.perf_counter() - t0
    return info, data


def _class_mean(dist, m, k):
    if not is_continuous(dist):
        return None
    v = ClassLaw(dist, m, k).mean
    return None if v is INFINITE else v


def _expected_slope(dist, kind, k):
    if not isinstance(dist, Pareto):
        return None
    a = dist.alpha
    return -a * (k + 1) if kind == "sojourn" else -(a * (k + 1) - 1)


def _grid(cfg, values):
    g = cfg.x_grid
    v = np.asarray(values, dtype=float)
    v = v[np.isfinite(v) & (v > 0)]
    if v.size == 0 and (g.get("lo") is None or g.get("hi") is None):
        return None
    return log_grid(v, g["per_decade"], g.get("lo"), g.get("hi"))


def _curve(grid, samples, masks=None, label=""):
    acc = TailAccumulator(grid)
    for i, s in enumerate(samples):
        acc.add(s, None if masks is None else masks[i])
    return acc.curve(label)


def _build_report(cfg, name, emp: TailCurve, theo_fn, slope):
    tol = cfg.tolerances
    if theo_fn is None:
        theo = TailCurve(emp.x, np.full(emp.x.shape, np.nan))
        rep = compare(emp, theo, tuple(tol["ratio"]), None, None, None, tol["floor"], theorem=name)
        rep.outcome = "inconclusive"
        rep.notes.append("no closed-form theory for this law")
        return rep
    theo = TailCurve(emp.x, np.asarray(theo_fn(emp.x), dtype=float), label="theory")
    rng_ = usable_range(emp, tol.get("decades", 1.0), tol["floor"], tol.get("max_rel_stderr"))
    if rng_ is None:
        rng_ = (float(emp.x.min()), float(emp.x.max()))
    return compare(emp, theo, tuple(tol["ratio"]), rng_, slope, tol["slope"] if slope is not None else None, tol["floor"], theorem=name)


def _reports(cfg: ScenarioConfig, datas):
    """Empirical-versus-asymptote reports pooled over replications."""
    disc, dist = cfg.discipline, cfg.service
    m = disc.m if isinstance(disc, ComparisonSP) else cfg.splitter.m
    reports = {}
    curves = {}
    ks = list(cfg.k_list)
    if disc is None:
        sizes = [d["size"] for d in datas]
        grid = _grid(cfg, sizes[0])
        if grid is None:
            return reports, curves
        curves["size"] = _curve(grid, sizes, label="size")
        for k in ks:
            emp = _curve(grid, sizes, [d["classes"] == k for d in datas], f"size_k{k}")
            fn = (lambda x, k=k: ClassLaw(dist, m, k).tail(x)) if is_continuous(dist) else None
            reports[f"class_size_k{k}"] = _build_report(cfg, f"class_size_k{k}", emp, fn, None)
        return reports, curves
    rho = cfg.rho
    ET = mean_interarrival(cfg.arrivals)
    name = getattr(disc, "name", "")
    if name in ("ps", "fbps", "srpt"):
        soj = [d["sojourn"] for d in datas]
        grid = _grid(cfg, soj[0])
        if grid is None:
            return reports, curves
        emp = _curve(grid, soj, label="sojourn")
        reports["classic"] = _build_report(cfg, "classic", emp, lambda x: theory_classic_tail(dist, rho, x), _expected_slope(dist, "sojourn", 0))
        for k in ks:
            emp = _curve(grid, soj, [d["classes"] == k for d in datas], f"sojourn_k{k}")
            reports[f"thm1_k{k}"] = _build_report(
                cfg, f"thm1_k{k}", emp, lambda x, k=k: theory_conditional_tail(dist, rho, m, k, x, name), _expected_slope(dist, "sojourn", k)
            )
        return reports, curves
    means = [_class_mean(dist, m, k) for k in range(m + 1)]
    have_means = all(v is not None for v in means)
    if isinstance(disc, FIFO):
        tot = [d["workload"].sum(axis=1) for d in datas]
        grid = _grid(cfg, tot[0])
        if grid is not None:
            emp = _curve(grid, tot, label="workload")
            mb = mean(dist)
            fn = None
            if have_means and mb is not INFINITE:
                fn = lambda x: theory_workload_tail(dist, 0, 0, cfg.capacity, ET, "isolation", [mb], x)  # noqa: E731
            reports["workload"] = _build_report(cfg, "workload", emp, fn, _expected_slope(dist, "workload", 0))
        if cfg.class_capacities is not None:
            for k in ks:
                samples = [d["isolation"][k] for d in datas]
                grid = _grid(cfg, samples[0])
                if grid is None:
                    continue
                emp = _curve(grid, samples, label=f"isolation_k{k}")
                fn = None
                if have_means:
                    fn = lambda x, k=k: theory_workload_tail(dist, m, k, cfg.class_capacities[k], ET, "isolation", means, x)  # noqa: E731
                reports[f"thm3_k{k}"] = _build_report(cfg, f"thm3_k{k}", emp, fn, _expected_slope(dist, "workload", k))
        return reports, curves
    if isinstance(disc, (StaticPriority, ComparisonSP)):
        for k in ks:
            samples = [d["workload"][:, k] for d in datas]
            grid = _grid(cfg, samples[0])
            if grid is None:
                continue
            emp = _curve(grid, samples, label=f"workload_k{k}")
            fn = None
            if have_means:
                fn = lambda x, k=k: theory_workload_tail(dist, m, k, cfg.capacity, ET, "static_priority", means, x)  # noqa: E731
            reports[f"thm4_k{k}"] = _build_report(cfg, f"thm4_k{k}", emp, fn, _expected_slope(dist, "workload", k))
    return reports, curves


def _pmap(fn, args, jobs):
    if jobs <= 1 or len(args) <= 1:
        return [fn(*a) for a in args]
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futs = [pool.submit(fn, *a) for a in args]
        return [f.result() for f in futs]


def execute(cfg: ScenarioConfig, out_dir, jobs: int = 1) -> Path:
    """Run every replication of ``cfg`` into ``out_dir``; returns the summary path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    if cfg.replications == 1:
        dirs = [out_dir]
    else:
        dirs = [out_dir / f"rep_{r:03d}" for r in range(cfg.replications)]
    results = _pmap(_simulate_replication, [(cfg, r, str(d)) for r, d in enumerate(dirs)], jobs)
    infos = [r[0] for r in results]
    reports, curves = _reports(cfg, [r[1] for r in results])
    for name, rep in reports.items():
        write_csv(out_dir / f"report_{name}.csv", REPORT_HEADER, rep.rows())
    summary = {
        "kind": "run",
        "version": __version__,
        "rng": RngStream.algorithm,
        "config": cfg.to_dict(),
        "rho": cfg.rho if cfg.discipline is not None else None,
        "replications": infos,
        "reports": {name: rep.summary() for name, rep in reports.items()},
        "runtime_s": time.perf_counter() - t0,
    }
    path = out_dir / "summary.json"
    path.write_text(json.dumps(summary, indent=2, default=_json_default) + "\n", encoding="utf-8")
    return path


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


# ---------------------------------------------------------------------------
# verify


def verify(suite: str, out_dir, seed=None, jobs: int = 1) -> tuple:
    from .suites import run_suite

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    checks = run_suite(suite, seed=seed, jobs=jobs)
    lines = [c.line() for c in checks]
    (out_dir / "checks.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    for c in checks:
        for name, rep in c.reports.items():
            if isinstance(rep, TailCurve):
                ci = rep.ci_half_width
                write_csv(out_dir / f"report_{name}.csv", ("x", "empirical", "ci", "count"), zip(rep.x, rep.survival, ci, rep.count))
            else:
                write_csv(out_dir / f"report_{name}.csv", REPORT_HEADER, rep.rows())
        if c.table:
            keys = list(c.table[0])
            write_csv(out_dir / f"table_{c.id}.csv", keys, ([row[k] for k in keys] for row in c.table))
    summary = {
        "kind": "verify",
        "suite": suite,
        "version": __version__,
        "rng": RngStream.algorithm,
        "seed_override": seed,
        "checks": [
            {
                "id": c.id,
                "title": c.title,
                "status": c.status,
                "detail": c.detail,
                "seconds": c.seconds,
                "reports": {n: r.summary() for n, r in c.reports.items() if not isinstance(r, TailCurve)},
            }
            for c in checks
        ],
    }
    path = out_dir / "summary.json"
    path.write_text(json.dumps(summary, indent=2, default=_json_default) + "\n", encoding="utf-8")
    return path, all(c.passed for c in checks), lines


# ---------------------------------------------------------------------------
# report


PLOT_STUB = '''"""Plot every survival curve in this directory on log-log axes.

Needs matplotlib, which the package itself does not depend on.
"""
import csv
import glob
import os

import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))
fig, ax = plt.subplots()
for path in sorted(glob.glob(os.path.join(here, "*.csv"))):
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    xs = [float(r["x"]) for r in rows if float(r["empirical"]) > 0]
    ys = [float(r["empirical"]) for r in rows if float(r["empirical"]) > 0]
    ax.loglog(xs, ys, label=os.path.basename(path)[:-4])
    if rows and "theoretical" in rows[0]:
        th = [(float(r["x"]), float(r["theoretical"])) for r in rows if r["theoretical"] not in ("nan", "") and float(r["theoretical"]) > 0]
        if th:
            ax.loglog(*zip(*th), "--", label=os.path.basename(path)[:-4] + " theory")
ax.set_xlabel("x")
ax.set_ylabel("P[. > x]")
ax.legend(fontsize="small")
fig.savefig(os.path.join(here, "curves.png"), dpi=150)
'''


def _read_jobs(paths):
    cols = {h: [] for h in JOBS_HEADER}
    for p in paths:
        arr = np.loadtxt(p, delimiter=",", skiprows=1, ndmin=2)
        for i, h in enumerate(JOBS_HEADER):
            cols[h].append(arr[:, i])
    return {h: np.concatenate(v) for h, v in cols.items()}


def report(run_dir) -> Path:
    """Plot-ready curves for a finished run or verify directory."""
    run_dir = Path(run_dir)
    summary_path = run_dir / "summary.json"
    if not summary_path.is_file():
        raise FileNotFoundError(f"{summary_path} not found; is this a finished run directory?")
    summary = json.loads(summary_path.read_text(encoding="utf-8"))
    out = run_dir / "report"
    out.mkdir(exist_ok=True)
    written = []
    if summary.get("kind") == "verify":
        checks = run_dir / "checks.txt"
        if not checks.is_file():
            raise FileNotFoundError(f"{checks} not found")
        (out / "pass_fail.txt").write_text(checks.read_text(encoding="utf-8"), encoding="utf-8")
        written.append("pass_fail.txt")
    else:
        cfg = ScenarioConfig.from_dict(summary["config"])
        jobs_files = sorted(run_dir.glob("rep_*/jobs.csv")) or sorted(run_dir.glob("jobs.csv"))
        if not jobs_files:
            raise FileNotFoundError(f"no jobs.csv under {run_dir}")
        jobs = _read_jobs(jobs_files)
        warm = int(cfg.warmup_fraction * cfg.n_jobs)
        keep = np.concatenate([np.arange(int(cfg.n_jobs)) >= warm for _ in jobs_files])
        have_soj = np.isfinite(jobs["sojourn"]).any()
        for what in ("size", "sojourn") if have_soj else ("size",):
            vals = jobs[what][keep]
            finite = np.isfinite(vals)
            grid = _grid(cfg, vals[finite])
            if grid is None:
                continue
            base = np.where(finite, vals, -np.inf)
            curves = {"all": TailAccumulator(grid).add(base).curve()}
            for k in cfg.k_list:
                curves[f"k{k}"] = TailAccumulator(grid).add(base, jobs["class"][keep] == k).curve()
            for tag, c in curves.items():
                name = f"survival_{what}_{tag}.csv"
                write_csv(out / name, ("x", "empirical", "ci", "count"), zip(c.x, c.survival, c.ci_half_width, c.count))
                written.append(name)
    for p in sorted(run_dir.glob("report_*.csv")):
        (out / ("overlay_" + p.name[len("report_") :])).write_text(p.read_text(encoding="utf-8"), encoding="utf-8")
        written.append("overlay_" + p.name[len("report_") :])
    (out / "plot_curves.py").write_text(PLOT_STUB, encoding="utf-8")
    index = out / "index.json"
    index.write_text(json.dumps({"source": str(run_dir), "files": written + ["plot_curves.py"]}, indent=2) + "\n", encoding="utf-8")
    return index


# ---------------------------------------------------------------------------


def _parser():
    from .suites import suite_names

    p = argparse.ArgumentParser(prog="compsched", description="Comparison-splitting scheduler laboratory.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (("run", "run a YAML scenario"), ("verify", "run a named verification suite")):
        sp = sub.add_parser(name, help=help_)
        if name == "run":
            sp.add_argument("config")
        else:
            sp.add_argument("suite", help="one of: " + ", ".join(suite_names()))
        sp.add_argument("--out", default=None, help="output directory")
        sp.add_argument("--jobs", type=int, default=os.cpu_count() or 1, help="worker processes")
        sp.add_argument("--seed", type=int, default=None, help="override the master seed")
    rp = sub.add_parser("report", help="emit plot-ready curves for a finished directory")
    rp.add_argument("dir")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "run":
            cfg = load_config(args.config)
            if args.seed is not None:
                if not 0 <= args.seed < 2**64:
                    raise ConfigError(f"--seed must lie in [0, 2**64), got {args.seed}")
                cfg = replace(cfg, seed=args.seed)
            out = args.out or os.path.join("runs", Path(args.config).stem)
            path = execute(cfg, out, max(args.jobs, 1))
        elif args.command == "verify":
            from .suites import suite_names

            if args.suite not in suite_names():
                print(f"compsched: unknown suite {args.suite!r}; choose from {', '.join(suite_names())}", file=sys.stderr)
                return EXIT_PARSE
            out = args.out or os.path.join("runs", f"verify_{args.suite}")
            path, ok, lines = verify(args.suite, out, args.seed, max(args.jobs, 1))
            for line in lines:
                print(line, file=sys.stderr)
            print(path)
            return EXIT_OK if ok else EXIT_RUNTIME
        else:
            path = report(args.dir)
    except ConfigParseError as exc:
        print(f"compsched: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (ConfigError, UnstableSystemError) as exc:
        problems = getattr(exc, "problems", [str(exc)])
        for msg in problems:
            print(f"compsched: invalid scenario: {msg}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001 - every other failure is a runtime failure
        print(f"compsched: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
