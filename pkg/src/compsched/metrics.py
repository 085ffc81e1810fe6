"""Empirical tails, closed-form asymptotic tails, and their comparison.

Empirical survival estimates are joint probabilities ``P[V > x, class k]``
over all post-warm-up jobs, mirroring the form of the asymptotic results.
Confidence intervals use batch means over contiguous batches so that the
dependence between neighbouring jobs is absorbed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .inputs import tail

__all__ = [
    "TailCurve",
    "TailAccumulator",
    "TheoremReport",
    "log_grid",
    "empirical_tail",
    "empirical_conditional_tail",
    "theory_classic_tail",
    "theory_conditional_tail",
    "theory_workload_tail",
    "workload_asymptote",
    "loglog_slope",
    "usable_range",
    "compare",
    "Z95",
]

Z95 = 1.959963984540054
SOJOURN_DISCIPLINES = ("ps", "fbps", "srpt")


@dataclass
class TailCurve:
    """Survival estimates on a grid.

    ``count`` is ``None`` for analytic curves.  ``stderr`` is the batch-means
    standard error of ``survival``; ``ci_half_width`` its 95% normal
    half-width.
    """

    x: np.ndarray
    survival: np.ndarray
    count: Optional[np.ndarray] = None
    stderr: Optional[np.ndarray] = None
    n: Optional[int] = None
    label: str = ""

    @property
    def ci_half_width(self) -> Optional[np.ndarray]:
        return None if self.stderr is None else Z95 * self.stderr

    @classmethod
    def analytic(cls, x, fn, label: str = "") -> "TailCurve":
        x = np.asarray(x, dtype=float)
        return cls(x=x, survival=np.array([fn(v) for v in x], dtype=float), label=label)

    def usable(self, floor: int = 30, max_rel_stderr: Optional[float] = None) -> np.ndarray:
        """Grid points with enough exceedances (and, optionally, a tight enough CI)."""
        if self.count is None:
            return self.survival > 0
        ok = self.count >= floor
        if max_rel_stderr is not None and self.stderr is not None:
            with np.errstate(divide="ignore", invalid="ignore"):
                rel = np.where(self.survival > 0, self.stderr / self.survival, np.inf)
            ok &= rel <= max_rel_stderr
        return ok


class TailAccumulator:
    """Pools exceedance counts over replications and contiguous batches.

    Every call to :meth:`add` splits its sample (in arrival order) into
    ``batches`` nearly equal batches; the pooled survival is total count over
    total size, and the standard error comes from the spread of the batch
    fractions.
    """

    def __init__(self, x, batches: int = 20):
        self.x = np.asarray(x, dtype=float)
        self.batches = int(batches)
        self._counts = []  # per batch, counts at every grid point
        self._sizes = []

    def add(self, values, mask=None, n_total: Optional[int] = None):
        """Add one sample; ``mask`` selects the values that count (e.g. class k).

        The denominator of each batch is its full length, so masked-out
        entries still count as non-exceedances (joint probabilities).
        """
        values = np.asarray(values, dtype=float)
        if mask is None:
            mask = np.ones(values.shape, dtype=bool)
        bounds = np.linspace(0, values.size, self.batches + 1).astype(int)
        for lo, hi in zip(bounds[:-1], bounds[1:]):
            v = values[lo:hi][mask[lo:hi]]
            v = np.sort(v[~np.isnan(v)])
            self._counts.append(v.size - np.searchsorted(v, self.x, side="right"))
            self._sizes.append(hi - lo)
        return self

    def merge(self, other: "TailAccumulator") -> "TailAccumulator":
        """Append the batches of another accumulator on the same grid."""
        if not np.array_equal(self.x, other.x):
            raise ValueError("accumulators must share one grid")
        self._counts.extend(other._counts)
        self._sizes.extend(other._sizes)
        return self

    def curve(self, label: str = "") -> TailCurve:
        counts = np.asarray(self._counts, dtype=float).reshape(-1, self.x.size)
        sizes = np.asarray(self._sizes, dtype=float)
        # samples shorter than the batch count leave empty batches behind
        keep = sizes > 0
        counts, sizes = counts[keep], sizes[keep]
        n = sizes.sum()
        total = counts.sum(axis=0)
        surv = total / n if n > 0 else np.zeros(self.x.shape)
        nb = counts.shape[0]
        if nb > 1:
            frac = counts / sizes[:, None]
            # size-weighted batch-means variance of the pooled ratio estimator
            w = sizes / n
            resid = frac - surv[None, :]
            var = (w[:, None] ** 2 * resid**2).sum(axis=0) * nb / (nb - 1)
            se = np.sqrt(var)
        else:
            se = np.sqrt(surv * (1 - surv) / max(n, 1))
        return TailCurve(x=self.x.copy(), survival=surv, count=total.astype(np.int64), stderr=se, n=int(n), label=label)


def log_grid(values=None, per_decade: int = 40, lo: Optional[float] = None, hi: Optional[float] = None) -> np.ndarray:
    """Log-spaced grid, by default spanning ``[median(values), max(values)]``."""
    if lo is None or hi is None:
        v = np.asarray(values, dtype=float)
        v = v[np.isfinite(v) & (v > 0)]
        if v.size == 0:
            raise ValueError("no positive values to build a grid from")
        lo = float(np.median(v)) if lo is None else lo
        hi = float(v.max()) if hi is None else hi
    if not 0 < lo <= hi:
        raise ValueError(f"bad grid range [{lo}, {hi}]")
    decades = math.log10(hi / lo)
    n = max(int(math.ceil(decades * per_decade)) + 1, 2)
    return np.logspace(math.log10(lo), math.log10(hi), n)


def empirical_tail(values, x_grid, batches: int = 20, mask=None, label: str = "") -> TailCurve:
    return TailAccumulator(x_grid, batches).add(values, mask).curve(label)


def empirical_conditional_tail(out, m: int, k: int, x_grid, batches: int = 20) -> TailCurve:
    """``P^[V > x, A_k^(m)]`` from a simulated run whose jobs carry their comparison class.

    The denominator is the number of valid (post-warm-up, completed) jobs, so
    summing over ``k`` gives the unconditional tail exactly.
    """
    if not 0 <= k <= m:
        raise ValueError(f"class index {k} outside 0..{m}")
    valid = out.valid()
    soj = out.sojourn[valid]
    if m == 0:
        mask = None
    else:
        mask = out.classes[valid] == k
    return empirical_tail(soj, x_grid, batches, mask=mask, label=f"A_{k}^({m})")


def _binom(m, k):
    return math.comb(m, k)


def theory_classic_tail(dist, rho: float, x):
    """``P[B > (1 - rho) x]``: the common sojourn asymptote of PS, FBPS and SRPT."""
    if not rho < 1:
        raise ValueError(f"traffic intensity must be < 1, got {rho}")
    return tail(dist, (1.0 - rho) * np.asarray(x, dtype=float))


def theory_conditional_tail(dist, rho: float, m: int, k: int, x, discipline: str):
    """Asymptotic ``P[V > x, A_k^(m)]`` under PS/FBPS or SRPT.

    PS and FBPS: ``C(m,k)/(k+1) * P[B > (1-rho) x / (k+1)]**(k+1)``.
    SRPT:        ``C(m,k)/(k+1) * P[B > (1-rho) x]**(k+1)``.
    """
    if not rho < 1:
        raise ValueError(f"traffic intensity must be < 1, got {rho}")
    if not 0 <= k <= m:
        raise ValueError(f"class index {k} outside 0..{m}")
    name = getattr(discipline, "name", discipline)
    if name not in SOJOURN_DISCIPLINES:
        raise ValueError(f"conditional sojourn asymptotics cover ps/fbps/srpt, not {name!r}")
    x = np.asarray(x, dtype=float)
    scale = (1.0 - rho) * x
    if name != "srpt":
        scale = scale / (k + 1)
    out = _binom(m, k) / (k + 1) * tail(dist, scale) ** (k + 1)
    return float(out) if np.ndim(out) == 0 else out


def theory_workload_tail(
    dist,
    m: int,
    k: int,
    capacity: float,
    mean_interarrival: float,
    mode: str,
    class_means: Sequence[float],
    x,
    class_law=None,
):
    """Asymptotic workload tail of class ``k``.

    ``isolation``: integrated class tail over ``c_k E[T] - E[B^(k)]``.
    ``static_priority``: same numerator over ``c E[T] - mu^(k)`` with
    ``mu^(k) = sum_{i >= k} E[B^(i)]``.
    """
    from .oracle import ClassLaw

    if len(class_means) != m + 1:
        raise ValueError(f"need {m + 1} class means, got {len(class_means)}")
    if mode == "isolation":
        load = class_means[k]
    elif mode == "static_priority":
        load = math.fsum(class_means[k:])
    else:
        raise ValueError(f"unknown mode {mode!r}")
    denom = capacity * mean_interarrival - load
    if not denom > 0:
        raise ValueError(f"unstable: c*E[T] - load = {denom:.6g} <= 0")
    law = class_law if class_law is not None else ClassLaw(dist, m, k)
    x = np.asarray(x, dtype=float)
    vals = np.array([law.integrated_tail(v) for v in x.ravel()]).reshape(x.shape) / denom
    return float(vals) if vals.ndim == 0 else vals


def workload_asymptote(alpha: float, slowly_varying: float, m: int, k: int, denom: float, x, as_printed: bool = False):
    """Power-law form of the class workload tail for ``P[B > x] = l / x**alpha``.

    ``C(m,k) l**(k+1) / ((k+1) * (alpha (k+1) - 1) * denom * x**(alpha k + alpha - 1))``,
    which is what integrating the class tail gives.  ``as_printed=True``
    drops the ``alpha (k+1) - 1`` factor from the denominator, reproducing
    the commonly quoted form; that version overstates the tail by exactly
    this constant.
    """
    x = np.asarray(x, dtype=float)
    expo = alpha * (k + 1) - 1
    const = 1.0 if as_printed else expo
    return _binom(m, k) * slowly_varying ** (k + 1) / ((k + 1) * const * denom * x**expo)


def loglog_slope(curve: TailCurve, x_lo: float, x_hi: float, floor: int = 30, min_points: int = 5):
    """Least-squares slope of ``log survival`` against ``log x`` on ``[x_lo, x_hi]``.

    Returns ``(slope, stderr)``.  Only points with at least ``floor``
    exceedances (empirical curves) and positive survival are used.
    """
    sel = (curve.x >= x_lo) & (curve.x <= x_hi) & (curve.survival > 0)
    if curve.count is not None:
        sel &= curve.count >= floor
    if sel.sum() < min_points:
        raise ValueError(f"only {int(sel.sum())} usable points in [{x_lo}, {x_hi}], need {min_points}")
    lx = np.log(curve.x[sel])
    ly = np.log(curve.survival[sel])
    A = np.vstack([lx, np.ones_like(lx)]).T
    coef, res, _, _ = np.linalg.lstsq(A, ly, rcond=None)
    npts = lx.size
    if npts > 2:
        resid = ly - A @ coef
        s2 = float(resid @ resid) / (npts - 2)
        se = math.sqrt(s2 / float(((lx - lx.mean()) ** 2).sum()))
    else:
        se = 0.0
    return float(coef[0]), se


def usable_range(curve: TailCurve, decades: float, floor: int = 30, max_rel_stderr: Optional[float] = None):
    """``[x_hi / 10**decades, x_hi]`` where ``x_hi`` is the largest usable grid point."""
    ok = curve.usable(floor, max_rel_stderr)
    if not ok.any():
        return None
    x_hi = float(curve.x[ok].max())
    return x_hi / 10.0**decades, x_hi


@dataclass
class TheoremReport:
    theorem: str
    empirical: TailCurve
    theoretical: TailCurve
    ratio: np.ndarray
    x_range: Optional[tuple]
    ratio_bounds: tuple
    slope: Optional[float] = None
    slope_stderr: Optional[float] = None
    expected_slope: Optional[float] = None
    slope_tolerance: Optional[float] = None
    outcome: str = "inconclusive"
    notes: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.outcome == "pass"

    def rows(self):
        """CSV rows: x, empirical, ci, theoretical, ratio."""
        ci = self.empirical.ci_half_width
        for i, x in enumerate(self.empirical.x):
            yield (
                float(x),
                float(self.empirical.survival[i]),
                float(ci[i]) if ci is not None else float("nan"),
                float(self.theoretical.survival[i]),
                float(self.ratio[i]),
            )

    def summary(self) -> dict:
        return {
            "theorem": self.theorem,
            "outcome": self.outcome,
            "x_range": list(self.x_range) if self.x_range else None,
            "ratio_bounds": list(self.ratio_bounds),
            "ratio_min": _finite_or_none(np.nanmin(self._in_range_ratio())) if self._in_range_ratio().size else None,
            "ratio_max": _finite_or_none(np.nanmax(self._in_range_ratio())) if self._in_range_ratio().size else None,
            "slope": self.slope,
            "slope_stderr": self.slope_stderr,
            "expected_slope": self.expected_slope,
            "slope_tolerance": self.slope_tolerance,
            "notes": list(self.notes),
        }

    def _in_range_ratio(self):
        if self.x_range is None:
            return np.array([])
        sel = _range_mask(self.empirical, self.x_range, 0)
        return self.ratio[sel & np.isfinite(self.ratio)]


def _finite_or_none(v):
    return float(v) if np.isfinite(v) else None


def _range_mask(curve, x_range, floor):
    sel = (curve.x >= x_range[0] * (1 - 1e-12)) & (curve.x <= x_range[1] * (1 + 1e-12))
    if curve.count is not None:
        sel &= curve.count >= floor
    return sel


def compare(
    empirical: TailCurve,
    theoretical: TailCurve,
    ratio_bounds=(0.5, 2.0),
    x_range=None,
    expected_slope: Optional[float] = None,
    slope_tolerance: Optional[float] = None,
    floor: int = 30,
    min_points: int = 5,
    theorem: str = "",
) -> TheoremReport:
    """Pointwise ratio and slope check of an empirical curve against theory.

    The ratio bounds are a closed interval.  ``slope_tolerance`` is relative
    (``0.2`` means within 20% of ``expected_slope``).  The outcome is
    ``"inconclusive"`` when too few grid points in ``x_range`` carry at least
    ``floor`` exceedances.
    """
    if not np.array_equal(empirical.x, theoretical.x):
        raise ValueError("curves must share one grid")
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(theoretical.survival > 0, empirical.survival / theoretical.survival, np.nan)
    if empirical.count is not None:
        ratio = np.where(empirical.count >= floor, ratio, np.nan)
    if x_range is None:
        x_range = (float(empirical.x.min()), float(empirical.x.max()))
    sel = _range_mask(empirical, x_range, floor) & np.isfinite(ratio)
    report = TheoremReport(
        theorem=theorem,
        empirical=empirical,
        theoretical=theoretical,
        ratio=ratio,
        x_range=tuple(x_range),
        ratio_bounds=tuple(ratio_bounds),
        expected_slope=expected_slope,
        slope_tolerance=slope_tolerance,
    )
    if sel.sum() == 0 or (expected_slope is not None and sel.sum() < min_points):
        report.outcome = "inconclusive"
        report.notes.append(f"only {int(sel.sum())} grid points with >= {floor} exceedances in range")
        return report
    lo, hi = ratio_bounds
    ok = bool(np.all((ratio[sel] >= lo) & (ratio[sel] <= hi)))
    if not ok:
        report.notes.append(f"ratio outside [{lo}, {hi}] at {int((~((ratio[sel] >= lo) & (ratio[sel] <= hi))).sum())} points")
    if expected_slope is not None:
        slope, se = loglog_slope(empirical, x_range[0] * (1 - 1e-12), x_range[1] * (1 + 1e-12), floor, min_points)
        report.slope, report.slope_stderr = slope, se
        if slope_tolerance is not None and abs(slope - expected_slope) > slope_tolerance * abs(expected_slope):
            ok = False
            report.notes.append(f"slope {slope:.3f} outside {expected_slope} +/- {100 * slope_tolerance:.0f}%")
    report.outcome = "pass" if ok else "fail"
    return report

