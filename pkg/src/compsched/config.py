"""YAML scenario files.

A scenario names the traffic, the size law, the discipline, the splitter and
the run length.  Every field is validated before anything runs; problems are
collected and reported together.  Example::

    seed: 7
    replications: 2
    n_jobs: 100000
    warmup_fraction: 0.2
    capacity: 1.0
    arrivals: {type: poisson, rate: 0.25}
    service: {type: pareto, alpha: 2.2, x_min: 1.0}
    discipline: {type: srpt}
    splitter: {m: 1, l: 1, init: zeros}
    k_list: [0, 1]
    tolerances: {ratio: [0.5, 2.0], slope: 0.2, floor: 30, decades: 1.0}

See the README for the full schema.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Optional

import yaml

from .engine import FBPS, FIFO, PS, SRPT, ComparisonSP, StaticPriority
from .inputs import (
    INFINITE,
    BoundedPareto,
    Deterministic,
    DiscreteFinite,
    Exponential,
    Geometric,
    Pareto,
    Poisson,
    Renewal,
    mean,
    traffic_intensity,
)

__all__ = ["ConfigError", "ConfigParseError", "SplitterSpec", "ScenarioConfig", "load_config", "parse_distribution"]


class ConfigParseError(ValueError):
    """The file is not readable YAML of the expected shape."""


class ConfigError(ValueError):
    """The file parses but describes an invalid scenario."""

    def __init__(self, problems):
        self.problems = list(problems) if not isinstance(problems, str) else [problems]
        super().__init__("; ".join(self.problems))


@dataclass(frozen=True)
class SplitterSpec:
    m: int = 1
    l: int = 1
    init: str = "zeros"


_DIST_FIELDS = {
    "pareto": (Pareto, ("alpha", "x_min")),
    "bounded_pareto": (BoundedPareto, ("alpha", "x_min", "x_max")),
    "exponential": (Exponential, ("rate",)),
    "geometric": (Geometric, ("p",)),
    "discrete": (DiscreteFinite, ("values", "probs")),
    "deterministic": (Deterministic, ("value",)),
}
_DISCIPLINES = ("fifo", "ps", "fbps", "srpt", "static_priority", "comparison_sp", "none")


def parse_distribution(spec, where: str = "service"):
    if not isinstance(spec, dict) or "type" not in spec:
        raise ConfigError(f"{where}: expected a mapping with a 'type' key")
    kind = spec["type"]
    if kind not in _DIST_FIELDS:
        raise ConfigError(f"{where}.type: unknown distribution {kind!r} (one of {sorted(_DIST_FIELDS)})")
    cls, names = _DIST_FIELDS[kind]
    extra = set(spec) - set(names) - {"type"}
    if extra:
        raise ConfigError(f"{where}: unknown keys {sorted(extra)}")
    kwargs = {}
    for name in names:
        if name in spec:
            val = spec[name]
            kwargs[name] = tuple(float(v) for v in val) if isinstance(val, list) else val
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def distribution_to_dict(dist) -> dict:
    for kind, (cls, names) in _DIST_FIELDS.items():
        if type(dist) is cls:
            out = {"type": kind}
            for name in names:
                val = getattr(dist, name)
                out[name] = list(val) if isinstance(val, tuple) else val
            return out
    raise TypeError(f"unknown distribution {dist!r}")


def _parse_arrivals(spec):
    if not isinstance(spec, dict) or "type" not in spec:
        raise ConfigError("arrivals: expected a mapping with a 'type' key")
    if spec["type"] == "poisson":
        try:
            return Poisson(spec["rate"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"arrivals: {exc}") from None
    if spec["type"] == "renewal":
        try:
            return Renewal(parse_distribution(spec.get("interarrival"), "arrivals.interarrival"))
        except ValueError as exc:
            raise ConfigError(f"arrivals: {exc}") from None
    raise ConfigError(f"arrivals.type: unknown process {spec['type']!r} (poisson or renewal)")


def _arrivals_to_dict(proc):
    if isinstance(proc, Poisson):
        return {"type": "poisson", "rate": proc.rate}
    return {"type": "renewal", "interarrival": distribution_to_dict(proc.interarrival)}


def _parse_discipline(spec, splitter: SplitterSpec):
    if isinstance(spec, str):
        spec = {"type": spec}
    if not isinstance(spec, dict) or "type" not in spec:
        raise ConfigError("discipline: expected a name or a mapping with a 'type' key")
    kind = spec["type"]
    if kind not in _DISCIPLINES:
        raise ConfigError(f"discipline.type: unknown discipline {kind!r} (one of {list(_DISCIPLINES)})")
    try:
        if kind == "fifo":
            return FIFO()
        if kind == "ps":
            return PS()
        if kind == "fbps":
            return FBPS()
        if kind == "srpt":
            return SRPT()
        if kind == "static_priority":
            return StaticPriority(int(spec.get("num_classes", splitter.m + 1)), spec.get("intra", "fifo"))
        if kind == "comparison_sp":
            return ComparisonSP(int(spec.get("m", splitter.m)), int(spec.get("l", splitter.l)), spec.get("init", splitter.init))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"discipline: {exc}") from None
    return None


def _discipline_to_dict(disc):
    if disc is None:
        return {"type": "none"}
    if isinstance(disc, StaticPriority):
        return {"type": "static_priority", "num_classes": disc.num_classes, "intra": disc.intra}
    if isinstance(disc, ComparisonSP):
        return {"type": "comparison_sp", "m": disc.m, "l": disc.l, "init": disc.init}
    return {"type": disc.name}


@dataclass
class ScenarioConfig:
    """A complete, seedable experiment description.

    ``discipline`` is ``None`` for splitter-only runs (sizes and classes, no
    queue).  ``class_capacities`` turns a FIFO scenario into per-class
    isolation runs.
    """

    seed: int
    arrivals: object
    service: object
    discipline: object = field(default_factory=PS)
    n_jobs: int = 100_000
    replications: int = 1
    warmup_fraction: float = 0.2
    capacity: float = 1.0
    class_capacities: Optional[tuple] = None
    allow_unstable: bool = False
    splitter: SplitterSpec = field(default_factory=SplitterSpec)
    x_grid: dict = field(default_factory=lambda: {"per_decade": 40, "lo": None, "hi": None})
    k_list: tuple = ()
    tolerances: dict = field(
        default_factory=lambda: {"ratio": [0.5, 2.0], "slope": 0.2, "floor": 30, "decades": 1.0, "max_rel_stderr": 0.2}
    )
    write_jobs: bool = True

    @property
    def rho(self) -> float:
        return traffic_intensity(self.arrivals, self.service, self.capacity)

    @classmethod
    def from_dict(cls, raw: dict) -> "ScenarioConfig":
        if not isinstance(raw, dict):
            raise ConfigParseError("top level of a scenario file must be a mapping")
        raw = copy.deepcopy(raw)
        known = {
            "seed", "arrivals", "service", "discipline", "n_jobs", "replications", "warmup_fraction",
            "capacity", "class_capacities", "allow_unstable", "splitter", "x_grid", "k_list",
            "tolerances", "write_jobs",
        }  # fmt: skip
        problems = []
        unknown = set(raw) - known
        if unknown:
            problems.append(f"unknown keys {sorted(unknown)}")
        for key in ("seed", "arrivals", "service"):
            if key not in raw:
                problems.append(f"missing required key {key!r}")
        if problems:
            raise ConfigError(problems)

        def grab(fn, label):
            try:
                return fn()
            except ConfigError as exc:
                problems.extend(exc.problems)
            except (TypeError, ValueError, KeyError) as exc:
                problems.append(f"{label}: {exc}")
            return None

        seed = raw["seed"]
        if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
            problems.append(f"seed: expected an integer in [0, 2**64), got {seed!r}")
        service = grab(lambda: parse_distribution(raw["service"]), "service")
        arrivals = grab(lambda: _parse_arrivals(raw["arrivals"]), "arrivals")
        sp = raw.get("splitter", {}) or {}
        splitter = grab(lambda: _parse_splitter(sp), "splitter")
        disc = grab(lambda: _parse_discipline(raw.get("discipline", "ps"), splitter or SplitterSpec()), "discipline")

        n_jobs = raw.get("n_jobs", 100_000)
        if isinstance(n_jobs, bool) or not isinstance(n_jobs, int) or n_jobs < 1:
            problems.append(f"n_jobs: expected an integer >= 1, got {n_jobs!r}")
        reps = raw.get("replications", 1)
        if isinstance(reps, bool) or not isinstance(reps, int) or reps < 1:
            problems.append(f"replications: expected an integer >= 1, got {reps!r}")
        warm = raw.get("warmup_fraction", 0.2)
        if not isinstance(warm, (int, float)) or isinstance(warm, bool) or not 0 <= warm < 1:
            problems.append(f"warmup_fraction: expected a number in [0, 1), got {warm!r}")
        cap = raw.get("capacity", 1.0)
        if not isinstance(cap, (int, float)) or isinstance(cap, bool) or not cap > 0:
            problems.append(f"capacity: expected a positive number, got {cap!r}")
        ccaps = raw.get("class_capacities")
        if ccaps is not None:
            if not isinstance(ccaps, list) or not all(isinstance(c, (int, float)) and c > 0 for c in ccaps):
                problems.append("class_capacities: expected a list of positive numbers")
            elif splitter is not None and len(ccaps) != splitter.m + 1:
                problems.append(f"class_capacities: need m+1 = {splitter.m + 1} entries, got {len(ccaps)}")
        allow = raw.get("allow_unstable", False)
        if not isinstance(allow, bool):
            problems.append("allow_unstable: expected true or false")
        grid = {"per_decade": 40, "lo": None, "hi": None}
        grid.update(raw.get("x_grid", {}) or {})
        if set(grid) - {"per_decade", "lo", "hi"}:
            problems.append(f"x_grid: unknown keys {sorted(set(grid) - {'per_decade', 'lo', 'hi'})}")
        if not isinstance(grid["per_decade"], int) or grid["per_decade"] < 1:
            problems.append("x_grid.per_decade: expected a positive integer")
        for b in ("lo", "hi"):
            if grid.get(b) is not None and not (isinstance(grid[b], (int, float)) and grid[b] > 0):
                problems.append(f"x_grid.{b}: expected a positive number or null")
        if isinstance(disc, StaticPriority) and splitter is not None and disc.num_classes != splitter.m + 1:
            problems.append(f"discipline.num_classes: must equal splitter m+1 = {splitter.m + 1}")
        k_list = raw.get("k_list", []) or []
        m_eff = _effective_m(disc, splitter)
        if not isinstance(k_list, list) or not all(isinstance(k, int) and not isinstance(k, bool) for k in k_list):
            problems.append("k_list: expected a list of integers")
        elif m_eff is not None and any(not 0 <= k <= m_eff for k in k_list):
            problems.append(f"k_list: class indices must lie in 0..{m_eff}")
        tol = {"ratio": [0.5, 2.0], "slope": 0.2, "floor": 30, "decades": 1.0, "max_rel_stderr": 0.2}
        tol.update(raw.get("tolerances", {}) or {})
        if set(tol) - {"ratio", "slope", "floor", "decades", "max_rel_stderr"}:
            problems.append("tolerances: unknown keys")
        r = tol.get("ratio")
        if not (isinstance(r, list) and len(r) == 2 and 0 < r[0] <= r[1]):
            problems.append("tolerances.ratio: expected [lo, hi] with 0 < lo <= hi")
        if not (isinstance(tol.get("slope"), (int, float)) and tol["slope"] >= 0):
            problems.append("tolerances.slope: expected a nonnegative relative slack")
        if not (isinstance(tol.get("floor"), int) and tol["floor"] >= 1):
            problems.append("tolerances.floor: expected a positive integer")
        if not (isinstance(tol.get("decades"), (int, float)) and tol["decades"] > 0):
            problems.append("tolerances.decades: expected a positive number")
        mrs = tol.get("max_rel_stderr")
        if mrs is not None and not (isinstance(mrs, (int, float)) and mrs > 0):
            problems.append("tolerances.max_rel_stderr: expected a positive number or null")
        write_jobs = raw.get("write_jobs", True)
        if not isinstance(write_jobs, bool):
            problems.append("write_jobs: expected true or false")

        if service is not None and arrivals is not None and isinstance(cap, (int, float)) and cap > 0 and disc is not None:
            if mean(service) is INFINITE:
                problems.append("service: infinite mean, the queue cannot be stable")
            elif not allow:
                rho = traffic_intensity(arrivals, service, cap)
                if rho >= 1:
                    problems.append(f"stability: traffic intensity rho = {rho:.4g} >= 1 (set allow_unstable: true to run anyway)")
        if problems:
            raise ConfigError(problems)
        return cls(
            seed=seed,
            arrivals=arrivals,
            service=service,
            discipline=disc,
            n_jobs=n_jobs,
            replications=reps,
            warmup_fraction=float(warm),
            capacity=float(cap),
            class_capacities=tuple(float(c) for c in ccaps) if ccaps is not None else None,
            allow_unstable=allow,
            splitter=splitter,
            x_grid=grid,
            k_list=tuple(k_list),
            tolerances=tol,
            write_jobs=write_jobs,
        )

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "replications": self.replications,
            "n_jobs": self.n_jobs,
            "warmup_fraction": self.warmup_fraction,
            "capacity": self.capacity,
            "class_capacities": list(self.class_capacities) if self.class_capacities is not None else None,
            "allow_unstable": self.allow_unstable,
            "arrivals": _arrivals_to_dict(self.arrivals),
            "service": distribution_to_dict(self.service),
            "discipline": _discipline_to_dict(self.discipline),
            "splitter": {"m": self.splitter.m, "l": self.splitter.l, "init": self.splitter.init},
            "x_grid": dict(self.x_grid),
            "k_list": list(self.k_list),
            "tolerances": copy.deepcopy(self.tolerances),
            "write_jobs": self.write_jobs,
        }


def _parse_splitter(sp) -> SplitterSpec:
    if not isinstance(sp, dict):
        raise ConfigError("splitter: expected a mapping")
    extra = set(sp) - {"m", "l", "init"}
    if extra:
        raise ConfigError(f"splitter: unknown keys {sorted(extra)}")
    m, l, init = sp.get("m", 1), sp.get("l", 1), sp.get("init", "zeros")
    if not isinstance(m, int) or isinstance(m, bool) or m < 0:
        raise ConfigError(f"splitter.m: expected an integer >= 0, got {m!r}")
    if not isinstance(l, int) or isinstance(l, bool) or l < 1:
        raise ConfigError(f"splitter.l: expected an integer >= 1, got {l!r}")
    if init not in ("zeros", "prefill"):
        raise ConfigError(f"splitter.init: expected zeros or prefill, got {init!r}")
    return SplitterSpec(m, l, init)


def _effective_m(disc, splitter):
    if isinstance(disc, ComparisonSP):
        return disc.m
    if isinstance(disc, StaticPriority):
        return disc.num_classes - 1
    return splitter.m if splitter is not None else None


def load_config(path) -> ScenarioConfig:
    """Read and validate a YAML scenario file."""
    try:
        with open(path, encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigParseError(f"cannot read {path}: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigParseError(f"{path}: not valid YAML: {exc}") from None
    return ScenarioConfig.from_dict(raw)
