"""Discrete-event simulation of a single-server queue.

Supported disciplines: FIFO, PS, FBPS (least attained service), SRPT,
preemptive static priority across classes (higher class index served first,
FIFO inside a class) and the comparison scheduler, which classifies each
arrival with the splitter and then applies static priority.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from . import _kernel
from .inputs import RngStream, interarrivals, sample_sizes, traffic_intensity
from .splitter import classify_stream

__all__ = [
    "FIFO",
    "PS",
    "FBPS",
    "SRPT",
    "StaticPriority",
    "ComparisonSP",
    "Discipline",
    "Job",
    "SimOutput",
    "UnstableSystemError",
    "simulate_trace",
    "simulate",
    "generate_input",
    "total_workload",
    "per_class_workload",
    "class_stream",
    "run_class_in_isolation",
    "workload_path_deviation",
    "workload_path_gap",
    "workload_at",
    "departure_dominance_gap",
]


class UnstableSystemError(ValueError):
    pass


@dataclass(frozen=True)
class FIFO:
    name = "fifo"


@dataclass(frozen=True)
class PS:
    name = "ps"


@dataclass(frozen=True)
class FBPS:
    name = "fbps"


@dataclass(frozen=True)
class SRPT:
    name = "srpt"


@dataclass(frozen=True)
class StaticPriority:
    """Preemptive-resume priority over ``num_classes`` classes.

    Class ``k`` is served only when classes ``k+1 .. num_classes-1`` are
    empty.  ``intra`` is ``"fifo"`` or ``"lifo"``.
    """

    num_classes: int
    intra: str = "fifo"
    name = "static_priority"

    def __post_init__(self):
        if self.num_classes < 1:
            raise ValueError("num_classes must be >= 1")
        if self.intra not in ("fifo", "lifo"):
            raise ValueError(f"intra-class order must be fifo or lifo, got {self.intra!r}")


@dataclass(frozen=True)
class ComparisonSP:
    """Comparison splitting with parameters ``(m, l)`` followed by static priority."""

    m: int
    l: int = 1
    init: str = "zeros"
    name = "comparison_sp"


Discipline = Union[FIFO, PS, FBPS, SRPT, StaticPriority, ComparisonSP]


def _code(disc) -> int:
    if isinstance(disc, FIFO):
        return _kernel.FIFO
    if isinstance(disc, PS):
        return _kernel.PS
    if isinstance(disc, FBPS):
        return _kernel.FBPS
    if isinstance(disc, SRPT):
        return _kernel.SRPT
    if isinstance(disc, StaticPriority):
        return _kernel.SP if disc.intra == "fifo" else _kernel.SP_LIFO
    if isinstance(disc, ComparisonSP):
        return _kernel.SP
    raise TypeError(f"unknown discipline {disc!r}")


@dataclass
class Job:
    id: int
    arrival_time: float
    size: float
    remaining: float
    class_index: Optional[int] = None
    departure_time: Optional[float] = None

    @property
    def attained(self) -> float:
        return self.size - self.remaining

    @property
    def sojourn(self) -> Optional[float]:
        if self.departure_time is None:
            return None
        return self.departure_time - self.arrival_time


@dataclass
class SimOutput:
    """Result of one simulated sample path.

    ``workload[i, k]`` is the class-``k`` unfinished work seen just before
    arrival ``i``.  ``truncated`` marks jobs still in the system at the last
    arrival epoch (or never finished); they are excluded from sojourn
    statistics.  The event log (``event_time``, ``event_workload``,
    ``event_count``) holds the state right after every event and is only
    filled when recording was requested.
    """

    discipline: object
    capacity: float
    arrival: np.ndarray
    size: np.ndarray
    classes: np.ndarray
    departure: np.ndarray
    workload: np.ndarray
    busy_time: float
    n_events: int
    event_time: np.ndarray
    event_workload: np.ndarray
    event_count: np.ndarray
    warmup: int = 0

    @property
    def n_jobs(self) -> int:
        return self.arrival.shape[0]

    @property
    def sojourn(self) -> np.ndarray:
        return self.departure - self.arrival

    @property
    def truncated(self) -> np.ndarray:
        last = self.arrival[-1]
        return np.isnan(self.departure) | ((self.departure > last) & (self.size > 0))

    @property
    def total_workload(self) -> np.ndarray:
        return self.workload.sum(axis=1)

    def valid(self) -> np.ndarray:
        """Jobs that count for sojourn statistics: past warm-up and not truncated."""
        mask = ~self.truncated
        mask[: self.warmup] = False
        return mask

    def job(self, i: int) -> Job:
        dep = self.departure[i]
        return Job(
            id=int(i),
            arrival_time=float(self.arrival[i]),
            size=float(self.size[i]),
            remaining=0.0 if not math.isnan(dep) else float(self.size[i]),
            class_index=int(self.classes[i]),
            departure_time=None if math.isnan(dep) else float(dep),
        )

    def served_work(self) -> float:
        done = ~np.isnan(self.departure)
        return float(self.size[done].sum())


def simulate_trace(
    arrival,
    size,
    discipline,
    capacity: float = 1.0,
    classes=None,
    n_classes: Optional[int] = None,
    drain: bool = True,
    record_events: bool = False,
    warmup: int = 0,
) -> SimOutput:
    """Run an explicit arrival/size sequence through the queue.

    ``classes`` are needed for the priority disciplines; for the comparison
    scheduler they are computed here from ``size`` when not given.
    """
    if not capacity > 0:
        raise ValueError(f"capacity must be > 0, got {capacity}")
    arrival = np.ascontiguousarray(arrival, dtype=float)
    size = np.ascontiguousarray(size, dtype=float)
    if arrival.ndim != 1 or arrival.shape != size.shape or arrival.size == 0:
        raise ValueError("arrival and size must be equal-length nonempty 1-d sequences")
    if np.isnan(size).any() or np.isnan(arrival).any():
        raise ValueError("NaN in arrival times or sizes")
    if (size < 0).any():
        raise ValueError("negative job size")
    if arrival[0] < 0 or (np.diff(arrival) < 0).any():
        raise ValueError("arrival times must be nonnegative and nondecreasing")
    if classes is None:
        if isinstance(discipline, ComparisonSP):
            if discipline.init != "zeros":
                raise ValueError("explicit traces support only zero initialisation; pass classes")
            classes = classify_stream(size, discipline.m, discipline.l)
        else:
            classes = np.zeros(arrival.shape, dtype=np.int64)
    classes = np.ascontiguousarray(classes, dtype=np.int64)
    if classes.shape != arrival.shape:
        raise ValueError("classes must match the number of jobs")
    if n_classes is None:
        if isinstance(discipline, StaticPriority):
            n_classes = discipline.num_classes
        elif isinstance(discipline, ComparisonSP):
            n_classes = discipline.m + 1
        else:
            n_classes = int(classes.max()) + 1
    if classes.min() < 0 or classes.max() >= n_classes:
        raise ValueError(f"class indices must lie in 0..{n_classes - 1}")
    dep, wpre, busy, nev, lt, lw, ln = _kernel.run_queue(
        arrival, size, classes, int(n_classes), float(capacity), _code(discipline), bool(drain), bool(record_events)
    )
    return SimOutput(
        discipline=discipline,
        capacity=float(capacity),
        arrival=arrival,
        size=size,
        classes=classes,
        departure=dep,
        workload=wpre,
        busy_time=float(busy),
        n_events=int(nev),
        event_time=lt,
        event_workload=lw,
        event_count=ln,
        warmup=int(warmup),
    )


def generate_input(scenario, replication: int = 0):
    """Arrival times and sizes for one replication; identical for every discipline."""
    stream = RngStream(scenario.seed, replication)
    gaps = interarrivals(scenario.arrivals, stream.substream(0), scenario.n_jobs)
    arrival = np.cumsum(gaps)
    arrival -= arrival[0]
    size = sample_sizes(scenario.service, stream.substream(1), scenario.n_jobs)
    return arrival, size, stream


def simulate(scenario, replication: int = 0, record_events: bool = False) -> SimOutput:
    """Simulate one replication of a :class:`~compsched.config.ScenarioConfig`.

    Jobs always carry their comparison class (from ``scenario.splitter``,
    or from the discipline's own ``(m, l)`` for the comparison scheduler),
    computed over the raw arrival order regardless of the service order.
    """
    if scenario.n_jobs < 1:
        raise ValueError("n_jobs must be >= 1")
    if not scenario.capacity > 0:
        raise ValueError("capacity must be > 0")
    rho = traffic_intensity(scenario.arrivals, scenario.service, scenario.capacity)
    if rho >= 1 and not scenario.allow_unstable:
        raise UnstableSystemError(f"traffic intensity {rho:.4g} >= 1; set allow_unstable to run anyway")
    arrival, size, stream = generate_input(scenario, replication)
    disc = scenario.discipline
    if isinstance(disc, ComparisonSP):
        m, l, init = disc.m, disc.l, disc.init
    else:
        m, l, init = scenario.splitter.m, scenario.splitter.l, scenario.splitter.init
    classes = classify_stream(size, m, l, init=init, dist=scenario.service, rng=stream.substream(2))
    n_classes = disc.num_classes if isinstance(disc, StaticPriority) else m + 1
    return simulate_trace(
        arrival,
        size,
        disc,
        capacity=scenario.capacity,
        classes=classes,
        n_classes=n_classes,
        record_events=record_events,
        warmup=int(scenario.warmup_fraction * scenario.n_jobs),
    )


# ---------------------------------------------------------------------------
# workload queries


def _event_index(out: SimOutput, t: float) -> int:
    if out.event_time.size == 0:
        raise ValueError("no event log; rerun with record_events=True")
    return int(np.searchsorted(out.event_time, t + _kernel.TIME_TOL, side="right")) - 1


def total_workload(out: SimOutput, t: float) -> float:
    """Unfinished work at time ``t`` (right limit), from the event log."""
    i = _event_index(out, t)
    if i < 0:
        return 0.0
    w = out.event_workload[i].sum()
    return max(w - out.capacity * (t - out.event_time[i]), 0.0) if t > out.event_time[i] else float(w)


def per_class_workload(out: SimOutput, t: float) -> np.ndarray:
    """Per-class unfinished work right after the event at time ``t``."""
    i = _event_index(out, t)
    if i < 0:
        return np.zeros(out.event_workload.shape[1] if out.event_workload.ndim == 2 else 1)
    if abs(out.event_time[i] - t) > 1e-9 * (1.0 + abs(t)):
        raise ValueError(f"t={t} is not an event boundary")
    return out.event_workload[i].copy()


def reference_workload(arrival, size, capacity: float, t) -> np.ndarray:
    """Discipline-free unfinished work at times ``t`` (right limits), via Lindley."""
    arrival = np.asarray(arrival, dtype=float)
    size = np.asarray(size, dtype=float)
    pre = _kernel.lindley_workload(arrival, size, float(capacity))
    post = pre + size
    t = np.asarray(t, dtype=float)
    idx = np.searchsorted(arrival, t + _kernel.TIME_TOL, side="right") - 1
    out = np.zeros(t.shape)
    ok = idx >= 0
    out[ok] = np.maximum(post[idx[ok]] - capacity * (t[ok] - arrival[idx[ok]]), 0.0)
    return out


def workload_path_deviation(out: SimOutput) -> float:
    """Largest |W_sim - W_ref| over the event log, relative to 1 + max workload."""
    ref = reference_workload(out.arrival, out.size, out.capacity, out.event_time)
    sim = out.event_workload.sum(axis=1)
    return float(np.max(np.abs(sim - ref)) / (1.0 + np.max(ref)))


def workload_at(out: SimOutput, t) -> np.ndarray:
    """Total unfinished work at times ``t`` (right limits), vectorised over ``t``.

    Between logged events the work drains at rate ``capacity``.
    """
    if out.event_time.size == 0:
        raise ValueError("no event log; rerun with record_events=True")
    t = np.asarray(t, dtype=float)
    idx = np.searchsorted(out.event_time, t, side="right") - 1
    w = out.event_workload.sum(axis=1)
    res = np.zeros(t.shape)
    ok = idx >= 0
    res[ok] = np.maximum(w[idx[ok]] - out.capacity * (t[ok] - out.event_time[idx[ok]]), 0.0)
    return res


def workload_path_gap(outs) -> float:
    """Largest pairwise total-workload difference over the union of all event times.

    Relative to ``1 + max workload``.  All runs must share arrivals and sizes.
    """
    outs = list(outs)
    if len(outs) < 2:
        return 0.0
    for o in outs[1:]:
        if not (np.array_equal(o.arrival, outs[0].arrival) and np.array_equal(o.size, outs[0].size)):
            raise ValueError("runs do not share one input sequence")
    grid = np.unique(np.concatenate([o.event_time for o in outs]))
    paths = np.vstack([workload_at(o, grid) for o in outs])
    spread = paths.max(axis=0) - paths.min(axis=0)
    return float(spread.max() / (1.0 + paths.max()))


def departure_dominance_gap(better: SimOutput, other: SimOutput) -> float:
    """Largest amount by which the j-th departure of ``better`` lags that of ``other``.

    With common arrivals, ``N_better(t) <= N_other(t)`` for all ``t`` is the
    same as every order statistic of the departure times of ``better`` being
    no later than that of ``other``; a nonpositive result means dominance.
    """
    db = np.sort(better.departure)
    do = np.sort(other.departure)
    if np.isnan(db).any() or np.isnan(do).any():
        raise ValueError("both runs must be drained")
    return float(np.max(db - do))


def class_stream(size, classes, k: int) -> np.ndarray:
    """Class-``k`` sizes with zero-size padding at every other arrival."""
    size = np.asarray(size, dtype=float)
    return np.where(np.asarray(classes) == k, size, 0.0)


def run_class_in_isolation(
    arrival,
    sizes,
    capacity: float,
    *,
    mean_size: Optional[float] = None,
    mean_interarrival: Optional[float] = None,
    warmup: int = 0,
) -> SimOutput:
    """Serve one class stream alone, FIFO, at rate ``capacity``.

    Zero-size jobs stay in the stream as arrival markers.  When the class
    mean and the mean interarrival time are given, an unstable configuration
    (``mean_size >= capacity * mean_interarrival``) is flagged with a
    ``RuntimeWarning`` but still run.
    """
    if mean_size is not None and mean_interarrival is not None:
        if mean_size >= capacity * mean_interarrival:
            warnings.warn(
                f"class load {mean_size / (capacity * mean_interarrival):.4g} >= 1; isolation run is unstable",
                RuntimeWarning,
                stacklevel=2,
            )
    return simulate_trace(arrival, sizes, FIFO(), capacity=capacity, drain=True, warmup=warmup)
