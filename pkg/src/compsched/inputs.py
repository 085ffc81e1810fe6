"""Job-size laws, arrival processes and reproducible random streams.

All continuous laws are sampled by inverse transform from a single uniform
so that one draw consumes exactly one step of the underlying stream.  Tails
use the strict convention ``P[B > x]`` everywhere; this matters for the
lattice laws (``Geometric``, ``DiscreteFinite``).

Random streams are numpy ``PCG64`` generators keyed by
``SeedSequence(entropy=master_seed, spawn_key=(stream_id, *path))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy import integrate

__all__ = [
    "INFINITE",
    "Infinite",
    "DivergentIntegralError",
    "Pareto",
    "BoundedPareto",
    "Exponential",
    "Geometric",
    "DiscreteFinite",
    "Deterministic",
    "DistributionSpec",
    "Poisson",
    "Renewal",
    "ArrivalProcess",
    "RngStream",
    "sample_size",
    "sample_sizes",
    "inverse_survival",
    "tail",
    "mean",
    "moment",
    "integrated_tail",
    "support_min",
    "is_continuous",
    "next_interarrival",
    "interarrivals",
    "mean_interarrival",
    "traffic_intensity",
]

QUAD_RTOL = 1e-10


class Infinite:
    """Marker for a divergent moment.

    Deliberately supports no arithmetic, so a divergent moment cannot leak
    into a numeric expression unnoticed.
    """

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "INFINITE"

    def __bool__(self):
        return True


INFINITE = Infinite()


class DivergentIntegralError(ValueError):
    """Raised when a quantity requires a finite mean that does not exist."""


# ---------------------------------------------------------------------------
# distributions


@dataclass(frozen=True)
class Pareto:
    """Pure power law ``P[B > x] = (x_min / x) ** alpha`` for ``x >= x_min``.

    Regularly varying with index ``alpha`` and constant slowly varying part
    ``l(x) = x_min ** alpha``.
    """

    alpha: float
    x_min: float = 1.0

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"Pareto alpha must be > 0, got {self.alpha}")
        if not self.x_min > 0:
            raise ValueError(f"Pareto x_min must be > 0, got {self.x_min}")


@dataclass(frozen=True)
class BoundedPareto:
    alpha: float
    x_min: float
    x_max: float

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"BoundedPareto alpha must be > 0, got {self.alpha}")
        if not 0 < self.x_min < self.x_max:
            raise ValueError("BoundedPareto needs 0 < x_min < x_max")


@dataclass(frozen=True)
class Exponential:
    rate: float

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError(f"Exponential rate must be > 0, got {self.rate}")


@dataclass(frozen=True)
class Geometric:
    """Mass ``p**j * (1 - p)`` on ``j = 0, 1, 2, ...``."""

    p: float

    def __post_init__(self):
        if not 0 < self.p < 1:
            raise ValueError(f"Geometric p must lie in (0, 1), got {self.p}")


@dataclass(frozen=True)
class DiscreteFinite:
    """Finitely many atoms ``values[0] > values[1] > ... > 0``.

    ``cumulative[k]`` is ``probs[0] + ... + probs[k]``, i.e. the probability
    of drawing one of the ``k + 1`` largest values.
    """

    values: tuple
    probs: tuple
    cumulative: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        values = tuple(float(v) for v in self.values)
        probs = tuple(float(p) for p in self.probs)
        if len(values) == 0 or len(values) != len(probs):
            raise ValueError("DiscreteFinite needs equally many values and probs")
        if any(p < 0 for p in probs):
            raise ValueError("DiscreteFinite probs must be nonnegative")
        if abs(math.fsum(probs) - 1.0) > 1e-12:
            raise ValueError(f"DiscreteFinite probs sum to {math.fsum(probs)!r}, not 1")
        if any(v <= 0 for v in values):
            raise ValueError("DiscreteFinite values must be positive")
        if any(a <= b for a, b in zip(values, values[1:])):
            raise ValueError("DiscreteFinite values must be strictly decreasing")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "cumulative", tuple(np.cumsum(probs).tolist()))


@dataclass(frozen=True)
class Deterministic:
    value: float

    def __post_init__(self):
        if not self.value > 0:
            raise ValueError(f"Deterministic value must be > 0, got {self.value}")


DistributionSpec = Union[Pareto, BoundedPareto, Exponential, Geometric, DiscreteFinite, Deterministic]

_CONTINUOUS = (Pareto, BoundedPareto, Exponential)


def is_continuous(dist) -> bool:
    return isinstance(dist, _CONTINUOUS)


def support_min(dist) -> float:
    if isinstance(dist, (Pareto, BoundedPareto)):
        return dist.x_min
    if isinstance(dist, (Exponential, Geometric)):
        return 0.0
    if isinstance(dist, DiscreteFinite):
        return dist.values[-1]
    if isinstance(dist, Deterministic):
        return dist.value
    raise TypeError(f"unknown distribution {dist!r}")


# ---------------------------------------------------------------------------
# random streams


class RngStream:
    """A reproducible PCG64 stream addressed by ``(master_seed, stream_id)``.

    Substreams (``stream.substream(i)``) are independent children keyed by an
    extended spawn key; use them to keep e.g. arrivals and sizes decoupled.
    A stream is owned by one replication at a time.
    """

    algorithm = "PCG64/SeedSequence"

    def __init__(self, master_seed: int, stream_id: int = 0, path: tuple = ()):
        if not 0 <= int(master_seed) < 2**64:
            raise ValueError("master_seed must be a 64-bit nonnegative integer")
        self.master_seed = int(master_seed)
        self.stream_id = int(stream_id)
        self.path = tuple(int(p) for p in path)
        seq = np.random.SeedSequence(entropy=self.master_seed, spawn_key=(self.stream_id, *self.path))
        self.generator = np.random.Generator(np.random.PCG64(seq))

    def substream(self, index: int) -> "RngStream":
        return RngStream(self.master_seed, self.stream_id, self.path + (int(index),))

    def random(self, size=None):
        """Uniforms on ``[0, 1)``."""
        return self.generator.random(size)

    def survival_uniform(self, size=None):
        """Uniforms on ``(0, 1]``, the argument of :func:`inverse_survival`."""
        return 1.0 - self.generator.random(size)

    def __repr__(self):
        return f"RngStream(master_seed={self.master_seed}, stream_id={self.stream_id}, path={self.path})"


# ---------------------------------------------------------------------------
# sampling


def inverse_survival(dist, s):
    """Smallest ``x`` with ``P[B > x] < s`` style quantile, ``s`` in ``(0, 1]``.

    Feeding uniforms on ``(0, 1]`` yields draws from ``dist``.
    """
    s = np.asarray(s, dtype=float)
    if isinstance(dist, Pareto):
        return dist.x_min * s ** (-1.0 / dist.alpha)
    if isinstance(dist, BoundedPareto):
        h = (dist.x_min / dist.x_max) ** dist.alpha
        return dist.x_min * (h + s * (1.0 - h)) ** (-1.0 / dist.alpha)
    if isinstance(dist, Exponential):
        return -np.log(s) / dist.rate
    if isinstance(dist, Geometric):
        # P[X >= j] = p**j  <=>  X = floor(log(s) / log(p))
        return np.floor(np.log(s) / math.log(dist.p))
    if isinstance(dist, DiscreteFinite):
        # cumulative runs from the largest atom down, so q_k = P[B >= b_k]; take the first q_k >= s
        cum = np.array(dist.cumulative)
        cum[-1] = 1.0
        idx = np.searchsorted(cum, s, side="left")
        return np.asarray(dist.values)[np.minimum(idx, len(cum) - 1)]
    if isinstance(dist, Deterministic):
        return np.full(s.shape, dist.value)
    raise TypeError(f"unknown distribution {dist!r}")


def sample_size(dist, rng: RngStream) -> float:
    """One draw from ``dist``; consumes one uniform of ``rng``."""
    return float(inverse_survival(dist, rng.survival_uniform()))


def sample_sizes(dist, rng: RngStream, n: int) -> np.ndarray:
    return np.asarray(inverse_survival(dist, rng.survival_uniform(int(n))), dtype=float)


# ---------------------------------------------------------------------------
# tails and moments


def tail(dist, x):
    """Exact ``P[B > x]`` (vectorised in ``x``)."""
    x = np.asarray(x, dtype=float)
    if isinstance(dist, Pareto):
        out = np.where(x < dist.x_min, 1.0, (dist.x_min / np.maximum(x, dist.x_min)) ** dist.alpha)
    elif isinstance(dist, BoundedPareto):
        h = (dist.x_min / dist.x_max) ** dist.alpha
        xc = np.clip(x, dist.x_min, dist.x_max)
        out = ((dist.x_min / xc) ** dist.alpha - h) / (1.0 - h)
        out = np.where(x < dist.x_min, 1.0, np.where(x >= dist.x_max, 0.0, out))
    elif isinstance(dist, Exponential):
        out = np.where(x < 0, 1.0, np.exp(-dist.rate * np.maximum(x, 0.0)))
    elif isinstance(dist, Geometric):
        out = np.where(x < 0, 1.0, dist.p ** (np.floor(np.maximum(x, 0.0)) + 1.0))
    elif isinstance(dist, DiscreteFinite):
        vals = np.asarray(dist.values)
        probs = np.asarray(dist.probs)
        out = (probs[None, :] * (vals[None, :] > x.reshape(-1, 1))).sum(axis=1).reshape(x.shape)
        out = np.minimum(out, 1.0)
    elif isinstance(dist, Deterministic):
        out = np.where(x < dist.value, 1.0, 0.0)
    else:
        raise TypeError(f"unknown distribution {dist!r}")
    return float(out) if out.ndim == 0 else out


def moment(dist, order: float):
    """``E[B**order]`` or :data:`INFINITE` when it diverges."""
    r = float(order)
    if r == 0:
        return 1.0
    if isinstance(dist, Pareto):
        if r >= dist.alpha:
            return INFINITE
        return dist.alpha * dist.x_min**r / (dist.alpha - r)
    if isinstance(dist, BoundedPareto):
        a, lo, hi = dist.alpha, dist.x_min, dist.x_max
        norm = 1.0 - (lo / hi) ** a
        if r == a:
            return a * lo**a * math.log(hi / lo) / norm
        return a * lo**a * (hi ** (r - a) - lo ** (r - a)) / ((r - a) * norm)
    if isinstance(dist, Exponential):
        return math.gamma(r + 1.0) / dist.rate**r
    if isinstance(dist, Geometric):
        if r == 1:
            return dist.p / (1.0 - dist.p)
        return _geometric_moment(dist.p, r)
    if isinstance(dist, DiscreteFinite):
        return math.fsum(p * v**r for v, p in zip(dist.values, dist.probs))
    if isinstance(dist, Deterministic):
        return dist.value**r
    raise TypeError(f"unknown distribution {dist!r}")


def _geometric_moment(p: float, r: float) -> float:
    total = 0.0
    j = 1
    while True:
        term = j**r * p**j * (1.0 - p)
        total += term
        # terms decrease geometrically once j*log(p) dominates r*log(j)
        if j > r / max(-math.log(p), 1e-300) + 10 and term <= 1e-12 * total:
            return total
        j += 1


def mean(dist):
    return moment(dist, 1)


def integrated_tail(dist, x: float) -> float:
    """``int_x^inf P[B > u] du``, i.e. ``E[(B - x)^+]`` for ``x >= 0``."""
    x = float(x)
    m = mean(dist)
    if m is INFINITE:
        raise DivergentIntegralError(f"{dist!r} has infinite mean; integrated tail diverges")
    lo = support_min(dist)
    if x < lo:
        # tail is 1 on [x, lo)
        return (lo - x) + integrated_tail(dist, lo)
    if isinstance(dist, Pareto):
        return dist.x_min**dist.alpha * x ** (1.0 - dist.alpha) / (dist.alpha - 1.0)
    if isinstance(dist, Exponential):
        return math.exp(-dist.rate * x) / dist.rate
    if isinstance(dist, Deterministic):
        return max(dist.value - x, 0.0)
    if isinstance(dist, DiscreteFinite):
        return math.fsum(p * max(v - x, 0.0) for v, p in zip(dist.values, dist.probs))
    if isinstance(dist, Geometric):
        j = math.floor(x)
        p = dist.p
        return (j + 1 - x) * p ** (j + 1) + p ** (j + 2) / (1.0 - p)
    if isinstance(dist, BoundedPareto):
        if x >= dist.x_max:
            return 0.0
        val, _ = integrate.quad(lambda u: tail(dist, u), x, dist.x_max, epsabs=0.0, epsrel=QUAD_RTOL, limit=200)
        return val
    raise TypeError(f"unknown distribution {dist!r}")


# ---------------------------------------------------------------------------
# arrivals


@dataclass(frozen=True)
class Poisson:
    rate: float

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError(f"Poisson rate must be > 0, got {self.rate}")


@dataclass(frozen=True)
class Renewal:
    interarrival: DistributionSpec

    def __post_init__(self):
        m = mean(self.interarrival)
        if m is INFINITE or not m > 0:
            raise ValueError("renewal interarrival law needs a finite positive mean")


ArrivalProcess = Union[Poisson, Renewal]


def mean_interarrival(proc) -> float:
    if isinstance(proc, Poisson):
        return 1.0 / proc.rate
    if isinstance(proc, Renewal):
        return mean(proc.interarrival)
    raise TypeError(f"unknown arrival process {proc!r}")


def next_interarrival(proc, rng: RngStream) -> float:
    if isinstance(proc, Poisson):
        return sample_size(Exponential(proc.rate), rng)
    return sample_size(proc.interarrival, rng)


def interarrivals(proc, rng: RngStream, n: int) -> np.ndarray:
    if isinstance(proc, Poisson):
        return sample_sizes(Exponential(proc.rate), rng, n)
    return sample_sizes(proc.interarrival, rng, n)


def traffic_intensity(proc, service, capacity: float = 1.0) -> float:
    """``rho = E[B] / (c * E[T])``."""
    if not capacity > 0:
        raise ValueError(f"capacity must be > 0, got {capacity}")
    mb = mean(service)
    if mb is INFINITE:
        raise DivergentIntegralError("service law has infinite mean; traffic intensity undefined")
    return mb / (capacity * mean_interarrival(proc))
