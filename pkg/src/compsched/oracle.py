"""Independent checks: closed-form order-statistic probabilities, Monte Carlo
estimators of the same events, the exact law of a comparison class, and a
harness that compares two SRPT sample paths.

Nothing here calls into the splitter; class laws are computed from the base
distribution alone so they can be used to validate it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import integrate, special

from .inputs import (
    INFINITE,
    BoundedPareto,
    Exponential,
    Pareto,
    RngStream,
    inverse_survival,
    is_continuous,
    mean,
    sample_sizes,
    tail,
)

__all__ = [
    "order_stat_prob_exact",
    "order_stat_prob_mc",
    "order_stat_mc_table",
    "geometric_joint_tail_exact",
    "continuous_one_sided_prob",
    "ClassLaw",
    "class_tail_quadrature",
    "class_mean_quadrature",
    "class_integrated_tail",
    "dominance_sojourns",
    "srpt_dominance_trial",
]

QUAD_RTOL = 1e-11
MC_CHUNK = 1 << 20
EVENTS = ("two_sided", "one_sided", "subset_count")


def order_stat_prob_exact(m: int, k: int, p):
    """``C(m, k) p**(k+1) / (k+1)``."""
    if not 0 <= k <= m:
        raise ValueError(f"need 0 <= k <= m, got k={k}, m={m}")
    p = np.asarray(p, dtype=float)
    if ((p < 0) | (p > 1)).any():
        raise ValueError("p must lie in [0, 1]")
    out = math.comb(m, k) * p ** (k + 1) / (k + 1)
    return float(out) if out.ndim == 0 else out


def continuous_one_sided_prob(m: int, k: int, p: float) -> float:
    """Exact ``P[X_0 > x, X_0 < X~_k]`` for a continuous law with ``P[X_0 > x] = p``.

    At least ``k`` of the ``m`` others exceed ``X_0``; with ``s = P[X > X_0]``
    this is ``sum_{j >= k} C(m, j) int_0^p s^j (1-s)^(m-j) ds``.  It agrees
    with :func:`order_stat_prob_exact` only for ``k = 0`` and ``k = m`` and is
    asymptotically equivalent otherwise.
    """
    if not 0 <= k <= m:
        raise ValueError(f"need 0 <= k <= m, got k={k}, m={m}")
    # each j-term is B(j+1, m-j+1) * C(m,j) * I_p(j+1, m-j+1) = I_p(...)/(m+1)
    return math.fsum(float(special.betainc(j + 1, m - j + 1, p)) for j in range(k, m + 1)) / (m + 1)


def _greater_counts(x0, others):
    return (others > x0[:, None]).sum(axis=1)


def order_stat_prob_mc(dist, m: int, k: int, x: float, n_samples: int, rng: RngStream, event: str = "two_sided"):
    """Monte Carlo estimate of an order-statistic event on ``m + 1`` i.i.d. draws.

    ``event``:

    * ``"two_sided"``: ``X_0 > x`` and ``X~_(k+1) <= X_0 < X~_k``, i.e. exactly
      ``k`` of ``X_1..X_m`` strictly exceed ``X_0``;
    * ``"one_sided"``: ``X_0 > x`` and ``X_0 < X~_k`` (at least ``k`` exceed);
    * ``"subset_count"``: averages ``C(G, k) 1{X_0 > x}`` where ``G`` is the
      number exceeding ``X_0``; for continuous laws its mean is exactly
      ``C(m,k) p**(k+1) / (k+1)``.

    Returns ``(estimate, stderr)``.
    """
    if not 0 <= k <= m:
        raise ValueError(f"need 0 <= k <= m, got k={k}, m={m}")
    if n_samples < 1:
        raise ValueError("n_samples must be positive")
    if event not in EVENTS:
        raise ValueError(f"unknown event {event!r}; choose from {EVENTS}")
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < n_samples:
        n = min(MC_CHUNK, n_samples - done)
        draws = sample_sizes(dist, rng, n * (m + 1)).reshape(n, m + 1)
        x0 = draws[:, 0]
        g = _greater_counts(x0, draws[:, 1:])
        hit = x0 > x
        if event == "two_sided":
            val = (hit & (g == k)).astype(float)
        elif event == "one_sided":
            val = (hit & (g >= k)).astype(float)
        else:
            val = np.where(hit, special.comb(g, k), 0.0)
        total += val.sum()
        total_sq += (val * val).sum()
        done += n
    est = total / n_samples
    var = max(total_sq / n_samples - est * est, 0.0)
    return est, math.sqrt(var / n_samples)


def order_stat_mc_table(dist, m: int, x_values, n_samples: int, rng: RngStream, events=("one_sided",)):
    """One pass of draws, every ``(k, x, event)`` cell estimated from it.

    Returns a list of dicts with keys ``m, k, x, event, estimate, stderr,
    exact`` where ``exact`` is ``order_stat_prob_exact(m, k, tail(x))``.
    """
    for ev in events:
        if ev not in EVENTS:
            raise ValueError(f"unknown event {ev!r}")
    xs = np.asarray(x_values, dtype=float)
    keys = [(k, j, ev) for k in range(m + 1) for j in range(xs.size) for ev in events]
    s1 = dict.fromkeys(keys, 0.0)
    s2 = dict.fromkeys(keys, 0.0)
    done = 0
    while done < n_samples:
        n = min(MC_CHUNK, n_samples - done)
        draws = sample_sizes(dist, rng, n * (m + 1)).reshape(n, m + 1)
        x0 = draws[:, 0]
        g = _greater_counts(x0, draws[:, 1:])
        for j, xv in enumerate(xs):
            hit = x0 > xv
            for k in range(m + 1):
                for ev in events:
                    if ev == "two_sided":
                        val = (hit & (g == k)).astype(float)
                    elif ev == "one_sided":
                        val = (hit & (g >= k)).astype(float)
                    else:
                        val = np.where(hit, special.comb(g, k), 0.0)
                    s1[(k, j, ev)] += val.sum()
                    s2[(k, j, ev)] += (val * val).sum()
        done += n
    rows = []
    for k, j, ev in keys:
        est = s1[(k, j, ev)] / n_samples
        var = max(s2[(k, j, ev)] / n_samples - est * est, 0.0)
        rows.append(
            {
                "m": m,
                "k": k,
                "x": float(xs[j]),
                "event": ev,
                "estimate": est,
                "stderr": math.sqrt(var / n_samples),
                "exact": order_stat_prob_exact(m, k, float(tail(dist, xs[j]))),
            }
        )
    return rows


def geometric_joint_tail_exact(p: float, x) -> float:
    """``P[X_1 > X_0 > x]`` for i.i.d. ``P[X = j] = p**j (1 - p)``: ``p/(1+p) * p**(2(x+1))``."""
    if not 0 < p < 1:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    if isinstance(x, (bool, np.bool_)) or float(x) != math.floor(float(x)) or float(x) < 0:
        raise ValueError(f"x must be a nonnegative integer, got {x!r}")
    x = int(x)
    return p / (1.0 + p) * p ** (2 * (x + 1))


# ---------------------------------------------------------------------------
# exact class laws


class ClassLaw:
    """Law of ``B^(k) = B 1{exactly k of m i.i.d. copies exceed B}``.

    With ``s`` the survival level of ``B``, the class density in probability
    space is ``C(m,k) s^k (1-s)^(m-k)``, so::

        P[B^(k) > x]      = C(m,k) int_0^{F(x)} s^k (1-s)^(m-k) ds
        E[(B^(k) - x)^+]  = C(m,k) int_0^{F(x)} (Q(s) - x) s^k (1-s)^(m-k) ds

    where ``F(x)`` here is the base tail and ``Q`` its inverse.  The second
    integral is evaluated after substituting ``s = F(x) t**q`` with ``q``
    chosen to cancel the singularity of ``Q`` at ``s = 0``.
    """

    def __init__(self, dist, m: int, k: int):
        if not is_continuous(dist):
            raise TypeError(f"class laws need a continuous base law, got {dist!r}")
        if not 0 <= k <= m:
            raise ValueError(f"need 0 <= k <= m, got k={k}, m={m}")
        self.dist = dist
        self.m = int(m)
        self.k = int(k)
        self._c = math.comb(self.m, self.k)
        if isinstance(dist, (Pareto, BoundedPareto)) and dist.alpha > 1:
            self._q = dist.alpha / (dist.alpha - 1.0)
        else:
            self._q = 2.0

    def __repr__(self):
        return f"ClassLaw({self.dist!r}, m={self.m}, k={self.k})"

    def tail(self, x):
        """``P[B^(k) > x]`` for ``x >= 0`` (regularized incomplete beta)."""
        p = tail(self.dist, x)
        out = special.betainc(self.k + 1, self.m - self.k + 1, p) / (self.m + 1)
        return float(out) if np.ndim(out) == 0 else out

    def tail_by_quadrature(self, x: float) -> float:
        """Same as :meth:`tail`, by direct numerical integration."""
        p = float(tail(self.dist, x))
        if p == 0.0:
            return 0.0
        val, _ = integrate.quad(
            lambda s: s**self.k * (1.0 - s) ** (self.m - self.k), 0.0, p, epsabs=0.0, epsrel=QUAD_RTOL, limit=200
        )
        return self._c * val

    def integrated_tail(self, x: float) -> float:
        """``int_x^inf P[B^(k) > u] du`` for ``x >= 0``."""
        x = float(x)
        if x < 0:
            raise ValueError("integrated class tail is defined for x >= 0")
        if isinstance(self.dist, Pareto) and self.dist.alpha <= 1 and self.k == 0:
            raise ValueError("class 0 inherits the infinite mean of the base law")
        p = float(tail(self.dist, x))
        if p == 0.0:
            return 0.0
        q, k, m = self._q, self.k, self.m

        def integrand(t):
            if t == 0.0:
                # the substitution leaves a finite limit; the endpoint is never sampled by quad
                return 0.0
            s = p * t**q
            return (float(inverse_survival(self.dist, s)) - x) * s**k * (1.0 - s) ** (m - k) * p * q * t ** (q - 1.0)

        val, _ = integrate.quad(integrand, 0.0, 1.0, epsabs=0.0, epsrel=QUAD_RTOL, limit=400)
        return self._c * val

    @cached_property
    def mean(self) -> float:
        """``E[B^(k)]``; the class means sum to the base mean."""
        if mean(self.dist) is INFINITE and self.k == 0:
            return INFINITE
        return self.integrated_tail(0.0)


def class_tail_quadrature(dist, m: int, k: int, x):
    return ClassLaw(dist, m, k).tail(x)


def class_mean_quadrature(dist, m: int, k: int):
    return ClassLaw(dist, m, k).mean


def class_integrated_tail(dist, m: int, k: int, x: float) -> float:
    return ClassLaw(dist, m, k).integrated_tail(x)


# ---------------------------------------------------------------------------
# SRPT dominance harness


def dominance_sojourns(
    rng: RngStream,
    n_jobs: int,
    mask_density: float,
    dist=Pareto(2.0),
    load: float = 0.7,
    capacity: float = 1.0,
    n_history: int = 0,
):
    """Sojourn of a labeled job under SRPT in a thinned and a full sample path.

    The full path has ``n_history`` jobs before the labeled job and
    ``n_jobs - 1`` after it.  The thinned path keeps the labeled job, zeroes
    all history jobs, and zeroes each later job independently with
    probability ``mask_density``.  Zero-size jobs stay as arrival markers.
    Returns ``(v_thinned, v_full)``.
    """
    from .engine import SRPT, simulate_trace

    if not 0.0 <= mask_density <= 1.0:
        raise ValueError("mask_density must lie in [0, 1]")
    if n_jobs < 1:
        raise ValueError("n_jobs must be >= 1")
    mb = mean(dist)
    if mb is INFINITE:
        raise ValueError("the harness needs a finite-mean size law")
    rate = load * capacity / mb
    total = n_history + n_jobs
    gaps = sample_sizes(Exponential(rate), rng.substream(0), total)
    arrival = np.cumsum(gaps)
    arrival -= arrival[0]
    full = sample_sizes(dist, rng.substream(1), total)
    keep = rng.substream(2).random(n_jobs - 1) >= mask_density
    thin = full.copy()
    thin[:n_history] = 0.0
    thin[n_history + 1 :] = np.where(keep, full[n_history + 1 :], 0.0)
    label = n_history
    v_full = simulate_trace(arrival, full, SRPT(), capacity=capacity).sojourn[label]
    v_thin = simulate_trace(arrival, thin, SRPT(), capacity=capacity).sojourn[label]
    return float(v_thin), float(v_full)


def srpt_dominance_trial(
    rng: RngStream,
    n_jobs: int = 200,
    mask_density: float = 0.5,
    dist=Pareto(2.0),
    load: float = 0.7,
    capacity: float = 1.0,
    n_history: int = 0,
) -> bool:
    """True when the labeled job is no slower in the thinned path (up to float slack)."""
    v1, v2 = dominance_sojourns(rng, n_jobs, mask_density, dist, load, capacity, n_history)
    return v1 <= v2 + 1e-9 * (1.0 + v2)
