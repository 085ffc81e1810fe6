"""Pinned verification experiments.

Each check runs one calibrated experiment with fixed seeds and reports a
pass/fail verdict plus a table of the numbers behind it.  Suites group the
checks by name for the command line.

Asymptotic tail checks fit slopes and ratios over the top usable part of the
empirical curve: grid points with at least ``FLOOR`` exceedances whose
batch-means relative standard error is at most ``MAX_REL_STDERR``.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np

from .engine import (
    FBPS,
    FIFO,
    PS,
    SRPT,
    ComparisonSP,
    class_stream,
    departure_dominance_gap,
    run_class_in_isolation,
    simulate_trace,
    workload_path_gap,
)
from .inputs import DiscreteFinite, Geometric, Pareto, Poisson, RngStream, interarrivals, mean, sample_sizes, tail
from .metrics import (
    TailAccumulator,
    TailCurve,
    compare,
    log_grid,
    loglog_slope,
    theory_classic_tail,
    theory_conditional_tail,
    theory_workload_tail,
    usable_range,
)
from .oracle import (
    ClassLaw,
    geometric_joint_tail_exact,
    order_stat_mc_table,
    order_stat_prob_exact,
    order_stat_prob_mc,
    srpt_dominance_trial,
)
from .splitter import classify_stream, error_rate

__all__ = ["Check", "SUITES", "SEEDS", "run_suite", "suite_names"]

FLOOR = 30
MAX_REL_STDERR = 0.2
WARMUP = 0.2

SEEDS = {
    "lemma1": 101,
    "geometric": 102,
    "splitter": 103,
    "dominance": 104,
    "invariance": 105,
    "classic": 11,
    "thm1": 11,
    "thm3": 21,
    "thm4": 21,
    "refined": 107,
}


@dataclass
class Check:
    id: str
    title: str
    passed: Optional[bool]
    detail: str
    table: list = field(default_factory=list)
    reports: dict = field(default_factory=dict)
    seconds: float = 0.0

    @property
    def status(self) -> str:
        return {True: "PASS", False: "FAIL", None: "INCONCLUSIVE"}[self.passed]

    def line(self) -> str:
        return f"{self.id} {self.status}: {self.title} -- {self.detail}"


def _timed(fn):
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        out = fn(*args, **kwargs)
        for chk in out if isinstance(out, list) else [out]:
            chk.seconds = time.perf_counter() - t0
        return out

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def _pmap(fn, args, jobs: int):
    """Ordered map, in a process pool when ``jobs > 1``."""
    if jobs <= 1 or len(args) <= 1:
        return [fn(*a) for a in args]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futs = [pool.submit(fn, *a) for a in args]
        return [f.result() for f in futs]


def _traffic(seed: int, rep: int, n: int, rate: float, dist):
    s = RngStream(seed, rep)
    arrival = np.cumsum(interarrivals(Poisson(rate), s.substream(0), n))
    arrival -= arrival[0]
    return arrival, sample_sizes(dist, s.substream(1), n)


def _pooled_grid(values, per_decade: int = 40):
    """Grid from one sample, ``[median, 10 * max]`` so later replications fit."""
    v = np.asarray(values, dtype=float)
    v = v[v > 0]
    return log_grid(lo=float(np.median(v)), hi=10.0 * float(v.max()), per_decade=per_decade)


def _fit_range(curve: TailCurve, decades: float):
    return usable_range(curve, decades, FLOOR, MAX_REL_STDERR)


# ---------------------------------------------------------------------------
# order statistics


@_timed
def check_lemma1(seed: int = SEEDS["lemma1"], n_samples: int = 10**7) -> Check:
    """One-sided order-statistic event against ``C(m,k) p^(k+1)/(k+1)`` at 3 stderr."""
    dist = Pareto(1.44)
    rows = order_stat_mc_table(
        dist, 3, [2.0, 5.0, 10.0], n_samples, RngStream(seed, 0), events=("one_sided", "two_sided", "subset_count")
    )
    bad = []
    for r in rows:
        r["z"] = (r["estimate"] - r["exact"]) / r["stderr"] if r["stderr"] > 0 else math.inf
        if r["event"] == "one_sided" and abs(r["z"]) > 3:
            bad.append(f"k={r['k']} x={r['x']:g} z={r['z']:.1f}")
    return Check(
        "A1",
        "one-sided order-statistic identity, Pareto 1.44, m=3",
        not bad,
        "all cells within 3 stderr" if not bad else "outside 3 stderr: " + ", ".join(bad),
        table=rows,
    )


@_timed
def check_geometric(seed: int = SEEDS["geometric"], n_samples: int = 10**8) -> Check:
    """Geometric law: the continuous-case formula fails, the lattice one holds."""
    p, x = 0.5, 5
    est, se = order_stat_prob_mc(Geometric(p), 1, 1, x, n_samples, RngStream(seed, 0), event="two_sided")
    exact = geometric_joint_tail_exact(p, x)
    cont = order_stat_prob_exact(1, 1, float(tail(Geometric(p), x)))
    z_exact = (est - exact) / se
    z_cont = (cont - est) / se
    ok = abs(z_exact) <= 3 and z_cont > 5
    return Check(
        "A2",
        "geometric counterexample, p=0.5, m=k=1, x=5",
        ok,
        f"estimate {est:.4e} +/- {se:.1e}; lattice formula z={z_exact:.2f}, continuous formula {z_cont:.1f} stderr above",
        table=[{"estimate": est, "stderr": se, "lattice_exact": exact, "continuous": cont, "z_lattice": z_exact, "z_continuous": z_cont}],
    )


# ---------------------------------------------------------------------------
# splitter


@_timed
def check_splitter(seed: int = SEEDS["splitter"], n: int = 10**7) -> list:
    """Class size curves (ordering, exact law) and class masses for m=3."""
    m = 3
    dist = Pareto(1.44)
    sizes = sample_sizes(dist, RngStream(seed, 0).substream(1), n)
    classes = classify_stream(sizes, m)
    grid = log_grid(lo=10**0.1, hi=float(sizes.max()))
    curves = [TailAccumulator(grid).add(sizes, classes == k).curve(f"k={k}") for k in range(m + 1)]

    order_bad = 0
    n_compared = 0
    for k in range(m):
        a, b = curves[k], curves[k + 1]
        both = (a.count >= 100) & (b.count >= 100)
        n_compared += int(both.sum())
        order_bad += int((a.survival[both] < b.survival[both]).sum())
    law_rows = []
    law_bad = 0
    for k, c in enumerate(curves):
        law = ClassLaw(dist, m, k)
        idx = np.flatnonzero(c.count >= 100)
        pick = idx[np.unique(np.linspace(0, idx.size - 1, 10).round().astype(int))]
        for i in pick:
            exact = law.tail(c.x[i])
            z = (c.survival[i] - exact) / c.stderr[i]
            law_bad += abs(z) > 4
            law_rows.append({"k": k, "x": float(c.x[i]), "empirical": float(c.survival[i]), "stderr": float(c.stderr[i]), "exact": exact, "z": float(z)})
    a3 = Check(
        "A3",
        "class size curves, Pareto 1.44, m=3",
        order_bad == 0 and law_bad == 0,
        f"{order_bad} ordering violations over {n_compared} comparisons; {law_bad} of {len(law_rows)} law points beyond 4 stderr",
        table=law_rows,
        reports={f"class_{k}": c for k, c in enumerate(curves)},
    )
    frac = np.bincount(classes, minlength=m + 1) / n
    a4 = Check(
        "A4",
        "class masses, m=3",
        bool(np.all(np.abs(frac - 0.25) <= 0.002)),
        "fractions " + ", ".join(f"{f:.5f}" for f in frac),
        table=[{"k": k, "fraction": float(f)} for k, f in enumerate(frac)],
    )
    return [a3, a4]


@_timed
def check_refined(seed: int = SEEDS["refined"], n: int = 10**5, reps: int = 20) -> Check:
    """Median error rate of the refined splitter falls with l."""
    dist = DiscreteFinite((4.0, 3.0, 2.0, 1.0), (0.25, 0.25, 0.25, 0.25))
    m = 5
    ls = (1, 4, 16, 64)
    eta = np.empty((reps, len(ls)))
    for r in range(reps):
        s = RngStream(seed, r)
        sizes = sample_sizes(dist, s.substream(1), n)
        for j, l in enumerate(ls):
            cls = classify_stream(sizes, m, l, init="prefill", dist=dist, rng=s.substream(2))
            eta[r, j] = error_rate(sizes, cls, m, l)
    med = np.median(eta, axis=0)
    ok = bool(np.all(np.diff(med) < 0) and med[-1] < 0.01)
    return Check(
        "A11",
        "refined splitter error rate, 4 equiprobable sizes, m=5",
        ok,
        "median eta " + ", ".join(f"l={l}: {v:.4f}" for l, v in zip(ls, med)),
        table=[{"l": l, "median_eta": float(v), "min": float(eta[:, j].min()), "max": float(eta[:, j].max())} for j, (l, v) in enumerate(zip(ls, med))],
    )


# ---------------------------------------------------------------------------
# sample-path properties


@_timed
def check_dominance(seed: int = SEEDS["dominance"], trials: int = 1000) -> Check:
    """Thinning the arrivals never slows the labeled SRPT job."""
    fails = [i for i in range(trials) if not srpt_dominance_trial(RngStream(seed, i), 200, 0.5)]
    return Check(
        "A5",
        "SRPT thinning dominance, 200 jobs, mask density 0.5",
        not fails,
        f"{len(fails)} violations in {trials} trials",
        table=[{"trial": i} for i in fails],
    )


def _invariance_instance(seed: int, i: int, n: int):
    arrival, size = _traffic(seed, i, n, 0.35, Pareto(2.0))
    discs = [FIFO(), PS(), FBPS(), SRPT(), ComparisonSP(3)]
    outs = [simulate_trace(arrival, size, d, record_events=True) for d in discs]
    gap = workload_path_gap(outs)
    srpt = outs[3]
    horizon = float(np.nanmax(srpt.departure))
    dom = max(departure_dominance_gap(srpt, o) for j, o in enumerate(outs) if j != 3) / (1.0 + horizon)
    return gap, dom


@_timed
def check_invariance(seed: int = SEEDS["invariance"], instances: int = 100, n: int = 10**4, jobs: int = 1) -> Check:
    """Workload paths agree across disciplines; SRPT holds the fewest jobs."""
    res = _pmap(_invariance_instance, [(seed, i, n) for i in range(instances)], jobs)
    gaps = np.array([r[0] for r in res])
    doms = np.array([r[1] for r in res])
    ok = bool(np.all(gaps <= 1e-9) and np.all(doms <= 1e-9))
    return Check(
        "A6",
        "workload invariance and SRPT count optimality, Pareto 2, rho=0.7",
        ok,
        f"max relative workload gap {gaps.max():.2e}; max relative SRPT departure lag {max(doms.max(), 0.0):.2e}",
        table=[{"instance": i, "workload_gap": float(g), "srpt_lag": float(d)} for i, (g, d) in enumerate(zip(gaps, doms))],
    )


# ---------------------------------------------------------------------------
# sojourn-time tails


THM1_ALPHA = 2.2
THM1_RHO = 0.5


def _thm1_replication(seed: int, rep: int, n: int):
    """PS and SRPT on shared traffic; valid sojourns and comparison classes (m=1)."""
    dist = Pareto(THM1_ALPHA)
    arrival, size = _traffic(seed, rep, n, THM1_RHO / mean(dist), dist)
    classes = classify_stream(size, 1)
    warm = int(WARMUP * n)
    res = {}
    for d in (PS(), SRPT()):
        out = simulate_trace(arrival, size, d, classes=classes, n_classes=2, warmup=warm)
        ok = out.valid()
        res[d.name] = (out.sojourn[ok], out.classes[ok].astype(np.int8))
    return res


_thm1_first = lru_cache(maxsize=1)(_thm1_replication)


def _thm1_accumulate(run, grid):
    acc = {key: TailAccumulator(grid) for key in ("ps", "srpt", "ps_k1", "srpt_k1")}
    for d in ("ps", "srpt"):
        v, c = run[d]
        acc[d].add(v)
        acc[d + "_k1"].add(v, c == 1)
    return acc


def _thm1_counts(seed, rep, n, grid):
    return _thm1_accumulate(_thm1_replication(seed, rep, n), grid)


def _merge(target: dict, more: dict):
    for key, acc in more.items():
        target[key].merge(acc)


def _thm1_curves(seed: int, reps: int, n: int, jobs: int):
    """Pooled curves; replication 0 fixes the grid, later ones only return counts."""
    first = _thm1_first(seed, 0, n)
    grid = _pooled_grid(first["ps"][0])
    acc = _thm1_accumulate(first, grid)
    for more in _pmap(_thm1_counts, [(seed, r, n, grid) for r in range(1, reps)], jobs):
        _merge(acc, more)
    return {k: a.curve(k) for k, a in acc.items()}


@_timed
def check_classic(seed: int = SEEDS["classic"], n: int = 10**7) -> Check:
    """PS sojourn tail against ``P[B > (1-rho) x]`` over the top two usable decades."""
    dist = Pareto(THM1_ALPHA)
    emp = _thm1_curves(seed, 1, n, 1)["ps"]
    theo = TailCurve(emp.x, theory_classic_tail(dist, THM1_RHO, emp.x), label="theory")
    rng_ = _fit_range(emp, 2.0)
    rep = compare(emp, theo, (0.5, 2.0), rng_, -THM1_ALPHA, 0.15, FLOOR, theorem="classic")
    return Check(
        "A7",
        "PS sojourn tail, Pareto 2.2, rho=0.5",
        rep.outcome == "pass" if rep.outcome != "inconclusive" else None,
        _report_detail(rep),
        table=list(rep.rows()),
        reports={"classic": rep},
    )


def _report_detail(rep) -> str:
    s = rep.summary()
    parts = [f"range [{s['x_range'][0]:.3g}, {s['x_range'][1]:.3g}]" if s["x_range"] else "no range"]
    if s["ratio_min"] is not None:
        parts.append(f"ratio {s['ratio_min']:.3f}..{s['ratio_max']:.3f}")
    if s["slope"] is not None:
        parts.append(f"slope {s['slope']:.3f} (target {s['expected_slope']:g} +/- {100 * s['slope_tolerance']:.0f}%)")
    parts.extend(s["notes"])
    return "; ".join(parts)


def _interp_loglog(curve: TailCurve, x):
    """Log-log interpolation of an empirical curve; NaN where a neighbour is under the floor."""
    ok = (curve.count >= FLOOR) & (curve.survival > 0)
    lx = np.log(curve.x)
    out = np.full(np.shape(x), np.nan)
    for i, xv in enumerate(np.atleast_1d(x)):
        j = np.searchsorted(curve.x, xv, side="right") - 1
        if j < 0 or j + 1 >= curve.x.size or not (ok[j] and ok[j + 1]):
            continue
        w = (math.log(xv) - lx[j]) / (lx[j + 1] - lx[j])
        out[i] = math.exp((1 - w) * math.log(curve.survival[j]) + w * math.log(curve.survival[j + 1]))
    return out


@_timed
def check_thm1(seed: int = SEEDS["thm1"], reps: int = 10, n: int = 10**7, jobs: int = 1) -> Check:
    """Joint tails on the smaller-than-predecessor event under PS and SRPT (m=1, k=1)."""
    dist = Pareto(THM1_ALPHA)
    curves = _thm1_curves(seed, reps, n, jobs)
    target = -THM1_ALPHA * 2
    reports = {}
    notes = []
    ok = True
    for d in ("ps", "srpt"):
        emp = curves[d + "_k1"]
        theo = TailCurve(emp.x, theory_conditional_tail(dist, THM1_RHO, 1, 1, emp.x, d), label="theory")
        rep = compare(emp, theo, (0.0, math.inf), _fit_range(emp, 1.0), target, 0.2, FLOOR, theorem=f"thm1_{d}")
        reports[f"thm1_{d}"] = rep
        ok &= rep.outcome == "pass"
        notes.append(f"{d} slope {rep.slope:.3f} over [{rep.x_range[0]:.3g}, {rep.x_range[1]:.3g}]" if rep.slope is not None else f"{d}: {rep.outcome}")
    ps, sr = curves["ps_k1"], curves["srpt_k1"]
    both = (ps.count >= FLOOR) & (sr.count >= FLOOR)
    above = int((sr.survival[both] > ps.survival[both]).sum())
    ok &= above == 0
    notes.append(f"SRPT above PS at {above} of {int(both.sum())} points")
    ps2 = _interp_loglog(ps, 2.0 * sr.x)
    sel = (sr.count >= FLOOR) & np.isfinite(ps2)
    shift = ps2[sel] / sr.survival[sel]
    shift_ok = bool(shift.size and np.all((shift >= 0.5) & (shift <= 2.0)))
    ok &= shift_ok
    notes.append(f"shift ratio PS(2x)/SRPT(x) {shift.min():.3f}..{shift.max():.3f} over {int(sel.sum())} points" if shift.size else "no shift overlap")
    table = [
        {"x": float(x), "ps": float(ps.survival[i]), "srpt": float(sr.survival[i]), "ps_at_2x": float(ps2[i]), "ps_count": int(ps.count[i]), "srpt_count": int(sr.count[i])}
        for i, x in enumerate(sr.x)
        if ps.count[i] >= FLOOR or sr.count[i] >= FLOOR
    ]
    return Check("A8", "joint sojourn tails, m=1, k=1, PS vs SRPT", bool(ok), "; ".join(notes), table=table, reports=reports)


# ---------------------------------------------------------------------------
# workload tails


WL_ALPHA = 2.0
WL_MEAN_T = 4.0


def _workload_replication(seed: int, rep: int, n: int):
    """Per-class workloads at arrivals: each class alone (capacity 1) and under the comparison scheduler."""
    dist = Pareto(WL_ALPHA)
    arrival, size = _traffic(seed, rep, n, 1.0 / WL_MEAN_T, dist)
    classes = classify_stream(size, 1)
    warm = int(WARMUP * n)
    sp = simulate_trace(arrival, size, ComparisonSP(1), classes=classes)
    res = {}
    for k in (0, 1):
        law = ClassLaw(dist, 1, k)
        iso = run_class_in_isolation(arrival, class_stream(size, classes, k), 1.0, mean_size=law.mean, mean_interarrival=WL_MEAN_T)
        res[f"iso_{k}"] = iso.workload[warm:, 0].copy()
        res[f"sp_{k}"] = sp.workload[warm:, k].copy()
    return res


_workload_first = lru_cache(maxsize=1)(_workload_replication)


def _workload_accumulate(run, grids):
    return {key: TailAccumulator(grids[key[-1]]).add(vals) for key, vals in run.items()}


def _workload_counts(seed, rep, n, grids):
    return _workload_accumulate(_workload_replication(seed, rep, n), grids)


def _workload_curves(seed: int, reps: int, n: int, jobs: int):
    first = _workload_first(seed, 0, n)
    grids = {str(k): _pooled_grid(first[f"iso_{k}"]) for k in (0, 1)}
    acc = _workload_accumulate(first, grids)
    for more in _pmap(_workload_counts, [(seed, r, n, grids) for r in range(1, reps)], jobs):
        _merge(acc, more)
    return {k: a.curve(k) for k, a in acc.items()}


def _class_means(dist, m):
    return [ClassLaw(dist, m, k).mean for k in range(m + 1)]


@_timed
def check_thm3(seed: int = SEEDS["thm3"], reps: int = 2, n: int = 10**7, jobs: int = 1) -> Check:
    """Class workloads in isolation against the integrated class tail."""
    dist = Pareto(WL_ALPHA)
    curves = _workload_curves(seed, reps, n, jobs)
    means = _class_means(dist, 1)
    reports, notes, ok = {}, [], True
    for k in (0, 1):
        emp = curves[f"iso_{k}"]
        theo = TailCurve(emp.x, theory_workload_tail(dist, 1, k, 1.0, WL_MEAN_T, "isolation", means, emp.x), label="theory")
        rep = compare(emp, theo, (0.5, 2.0), _fit_range(emp, 1.0), -(WL_ALPHA * (k + 1) - 1), 0.2, FLOOR, theorem=f"thm3_k{k}")
        reports[f"thm3_k{k}"] = rep
        ok &= rep.outcome == "pass"
        notes.append(f"k={k}: {rep.outcome}, {_report_detail(rep)}")
    return Check("A9", "isolation class workloads, Pareto 2, m=1", bool(ok), " | ".join(notes), reports=reports)


@_timed
def check_thm4(seed: int = SEEDS["thm4"], reps: int = 2, n: int = 10**7, jobs: int = 1) -> Check:
    """Comparison scheduler class workloads: class 0 formula, class 1 bounded by isolation."""
    dist = Pareto(WL_ALPHA)
    curves = _workload_curves(seed, reps, n, jobs)
    means = _class_means(dist, 1)
    emp = curves["sp_0"]
    theo = TailCurve(emp.x, theory_workload_tail(dist, 1, 0, 1.0, WL_MEAN_T, "static_priority", means, emp.x), label="theory")
    rep = compare(emp, theo, (0.5, 2.0), _fit_range(emp, 1.0), -(WL_ALPHA - 1), 0.2, FLOOR, theorem="thm4_k0")
    sp1, iso1 = curves["sp_1"], curves["iso_1"]
    both = (sp1.count >= FLOOR) | (iso1.count >= FLOOR)
    over = int((sp1.survival[both] > iso1.survival[both]).sum())
    ok = rep.outcome == "pass" and over == 0
    detail = f"class 0: {rep.outcome}, {_report_detail(rep)} | class 1 above isolation at {over} of {int(both.sum())} points"
    return Check("A10", "static-priority class workloads, Pareto 2, m=1", bool(ok), detail, reports={"thm4_k0": rep})


# ---------------------------------------------------------------------------


SUITES = {
    "lemma1": (check_lemma1,),
    "geometric": (check_geometric,),
    "splitter": (check_splitter,),
    "dominance": (check_dominance,),
    "invariance": (check_invariance,),
    "classic": (check_classic,),
    "thm1": (check_thm1,),
    "thm3": (check_thm3,),
    "thm4": (check_thm4,),
    "refined": (check_refined,),
}
_PARALLEL = {check_invariance, check_thm1, check_thm3, check_thm4}


def suite_names():
    return list(SUITES)


def run_suite(name: str, seed: Optional[int] = None, jobs: int = 1) -> list:
    """Run every check of a suite; ``seed`` overrides the pinned one."""
    if name not in SUITES:
        raise KeyError(name)
    checks = []
    for fn in SUITES[name]:
        kwargs = {}
        if seed is not None:
            kwargs["seed"] = seed
        if fn in _PARALLEL:
            kwargs["jobs"] = jobs
        out = fn(**kwargs)
        checks.extend(out if isinstance(out, list) else [out])
    return checks
