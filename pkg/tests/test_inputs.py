import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from compsched.inputs import (
    INFINITE,
    BoundedPareto,
    Deterministic,
    DiscreteFinite,
    DivergentIntegralError,
    Exponential,
    Geometric,
    Pareto,
    Poisson,
    Renewal,
    RngStream,
    integrated_tail,
    interarrivals,
    inverse_survival,
    mean,
    moment,
    next_interarrival,
    sample_size,
    sample_sizes,
    support_min,
    tail,
    traffic_intensity,
)

LAWS = [
    Pareto(1.44),
    Pareto(2.2, 0.5),
    BoundedPareto(1.2, 1.0, 1e4),
    Exponential(2.0),
    Geometric(0.5),
    DiscreteFinite((3.0, 1.0), (0.25, 0.75)),
    Deterministic(5.0),
]
FINITE_MEAN = [d for d in LAWS if mean(d) is not INFINITE]


class _FixedUniform:
    """Stands in for an RngStream whose next survival uniform is known."""

    def __init__(self, u):
        self.u = u

    def survival_uniform(self, size=None):
        return self.u if size is None else np.full(size, self.u)


# --- sampling ----------------------------------------------------------------


def test_deterministic_sample():
    assert sample_size(Deterministic(5.0), RngStream(1)) == 5.0


def test_pareto_inverse_cdf_at_half():
    assert sample_size(Pareto(1.44), _FixedUniform(0.5)) == pytest.approx(0.5 ** (-1 / 1.44))
    assert 0.5 ** (-1 / 1.44) == pytest.approx(1.6181, abs=5e-4)


def test_geometric_sample_mean():
    x = sample_sizes(Geometric(0.5), RngStream(3), 10**6)
    se = x.std() / math.sqrt(x.size)
    assert abs(x.mean() - 1.0) < 3 * se


def test_one_uniform_per_draw():
    a = RngStream(9)
    b = RngStream(9)
    sample_size(Pareto(2.0), a)
    b.survival_uniform()
    assert a.random() == b.random()


@pytest.mark.parametrize("dist", LAWS, ids=repr)
def test_empirical_survival_matches_tail(dist):
    x = sample_sizes(dist, RngStream(11), 10**6)
    lo = max(np.quantile(x, 0.05), 1e-3)
    hi = max(np.quantile(x, 0.999), lo * 1.01)
    grid = np.logspace(math.log10(lo), math.log10(hi), 20)
    emp = (x[None, :] > grid[:, None]).mean(axis=1)
    exact = tail(dist, grid)
    se = np.sqrt(np.maximum(exact * (1 - exact), 1e-12) / x.size)
    assert np.all(np.abs(emp - exact) <= 4 * se + 1e-12)


@pytest.mark.parametrize("dist", LAWS, ids=repr)
def test_samples_respect_support(dist):
    x = sample_sizes(dist, RngStream(4), 10**5)
    assert x.min() >= support_min(dist)


def test_streams_bit_reproducible():
    a = sample_sizes(Pareto(1.5), RngStream(123, 7), 1000)
    b = sample_sizes(Pareto(1.5), RngStream(123, 7), 1000)
    assert a.tobytes() == b.tobytes()
    c = sample_sizes(Pareto(1.5), RngStream(123, 8), 1000)
    assert not np.array_equal(a, c)


def test_substreams_are_distinct():
    s = RngStream(5, 1)
    assert s.substream(0).random() != s.substream(1).random()
    assert RngStream.algorithm == "PCG64/SeedSequence"


def test_seed_range_checked():
    with pytest.raises(ValueError):
        RngStream(-1)
    with pytest.raises(ValueError):
        RngStream(2**64)


# --- tails ---------------------------------------------------------------------


def test_tail_examples():
    assert tail(Pareto(1.44), 1.0) == 1.0
    assert tail(Pareto(1.44), 10.0) == pytest.approx(10**-1.44)
    assert tail(Pareto(1.44), 10.0) == pytest.approx(0.03631, abs=1e-5)
    assert tail(Geometric(0.5), 5) == pytest.approx(1 / 64)


def test_tail_strict_at_atoms():
    assert tail(Deterministic(5.0), 5.0) == 0.0
    assert tail(Deterministic(5.0), 4.999) == 1.0
    d = DiscreteFinite((3.0, 1.0), (0.25, 0.75))
    assert tail(d, 1.0) == 0.25
    assert tail(d, 0.5) == 1.0
    assert tail(Geometric(0.5), 0.0) == 0.5


@pytest.mark.parametrize("dist", LAWS, ids=repr)
def test_tail_is_one_below_support(dist):
    lo = support_min(dist)
    assert tail(dist, lo - 1.0) == 1.0


@given(st.lists(st.floats(0, 1e6, allow_nan=False), min_size=2, max_size=50), st.sampled_from(LAWS))
def test_tail_nonincreasing(xs, dist):
    xs = np.sort(np.asarray(xs))
    t = tail(dist, xs)
    assert np.all(np.diff(t) <= 0)
    assert np.all((t >= 0) & (t <= 1))


@given(st.floats(1e-12, 1.0), st.sampled_from(LAWS))
def test_inverse_survival_is_consistent_with_tail(s, dist):
    x = float(inverse_survival(dist, s))
    # at the returned point the strict tail has dropped below s (up to rounding)
    assert tail(dist, x) <= s * (1 + 1e-9) + 1e-12


# --- moments -------------------------------------------------------------------


def test_moment_examples():
    assert mean(Pareto(2.0)) == 2.0
    assert moment(Pareto(1.44), 2) is INFINITE
    assert mean(DiscreteFinite((3.0, 1.0), (0.25, 0.75))) == 1.5


def test_infinite_marker_refuses_arithmetic():
    with pytest.raises(TypeError):
        INFINITE + 1
    with pytest.raises(TypeError):
        float(INFINITE)


def test_geometric_moments_series():
    p = 0.3
    assert mean(Geometric(p)) == pytest.approx(p / (1 - p))
    assert moment(Geometric(p), 2) == pytest.approx(p * (1 + p) / (1 - p) ** 2, rel=1e-9)


def test_bounded_pareto_moment_by_quadrature():
    from scipy import integrate

    d = BoundedPareto(1.5, 1.0, 50.0)
    dens = lambda u: 1.5 * u**-2.5 / (1 - 50.0**-1.5)  # noqa: E731
    ref, _ = integrate.quad(lambda u: u**2 * dens(u), 1.0, 50.0, epsrel=1e-12)
    assert moment(d, 2) == pytest.approx(ref, rel=1e-9)


def test_integrated_tail_examples():
    assert integrated_tail(Pareto(2.0), 4.0) == pytest.approx(0.25)
    assert integrated_tail(Deterministic(5.0), 5.0) == 0.0
    assert integrated_tail(Exponential(2.0), 0.0) == pytest.approx(0.5)


@pytest.mark.parametrize("dist", FINITE_MEAN, ids=repr)
def test_integrated_tail_at_zero_is_mean(dist):
    assert integrated_tail(dist, 0.0) == pytest.approx(mean(dist), rel=1e-8)


def test_integrated_tail_geometric_against_sum():
    p = 0.6
    x = 2.3
    ref = sum(tail(Geometric(p), u) for u in np.arange(0, 400, 0.001) + 0.0005 if u > x) * 0.001
    assert integrated_tail(Geometric(p), x) == pytest.approx(ref, rel=1e-3)


def test_integrated_tail_infinite_mean():
    with pytest.raises(DivergentIntegralError):
        integrated_tail(Pareto(0.9), 1.0)


# --- validation ----------------------------------------------------------------


@pytest.mark.parametrize(
    "make",
    [
        lambda: Pareto(0.0),
        lambda: Pareto(1.5, -1.0),
        lambda: BoundedPareto(1.5, 2.0, 1.0),
        lambda: Exponential(0.0),
        lambda: Geometric(1.0),
        lambda: DiscreteFinite((1.0, 3.0), (0.5, 0.5)),
        lambda: DiscreteFinite((3.0, 1.0), (0.5, 0.6)),
        lambda: DiscreteFinite((3.0, 1.0), (1.2, -0.2)),
        lambda: Deterministic(0.0),
        lambda: Poisson(0.0),
        lambda: Renewal(Pareto(0.8)),
    ],
)
def test_invalid_parameters_rejected(make):
    with pytest.raises(ValueError):
        make()


def test_discrete_cumulative():
    d = DiscreteFinite((4.0, 3.0, 2.0, 1.0), (0.1, 0.2, 0.3, 0.4))
    assert d.cumulative == pytest.approx((0.1, 0.3, 0.6, 1.0))


# --- arrivals ------------------------------------------------------------------


def test_traffic_intensity_examples():
    assert traffic_intensity(Poisson(0.5), Deterministic(1.0), 1.0) == 0.5
    assert traffic_intensity(Poisson(0.25), Pareto(2.0), 1.0) == pytest.approx(0.5)
    assert traffic_intensity(Renewal(Exponential(1.0)), Exponential(4.0), 0.5) == pytest.approx(0.5)


def test_traffic_intensity_errors():
    with pytest.raises(ValueError):
        traffic_intensity(Poisson(1.0), Pareto(2.0), 0.0)
    with pytest.raises(DivergentIntegralError):
        traffic_intensity(Poisson(1.0), Pareto(1.0))


def test_interarrivals_match_single_draws():
    many = interarrivals(Poisson(2.0), RngStream(8), 5)
    s = RngStream(8)
    one = [next_interarrival(Poisson(2.0), s) for _ in range(5)]
    assert np.allclose(many, one)
    assert interarrivals(Renewal(Deterministic(2.0)), RngStream(1), 3).tolist() == [2.0, 2.0, 2.0]


@settings(max_examples=25)
@given(st.floats(0.1, 10.0))
def test_poisson_gap_mean(rate):
    gaps = interarrivals(Poisson(rate), RngStream(2), 20000)
    assert gaps.mean() == pytest.approx(1 / rate, rel=0.05)
