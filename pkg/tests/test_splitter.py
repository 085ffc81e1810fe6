import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from compsched.inputs import DiscreteFinite, Pareto, RngStream, sample_sizes
from compsched.splitter import (
    ComparisonWindow,
    class_labels,
    classify,
    classify_refined,
    classify_stream,
    concatenate_by_class,
    error_rate,
)

sizes_st = st.floats(0, 1e6, allow_nan=False, allow_infinity=False)


# --- window --------------------------------------------------------------------


def test_push_into_empty():
    w = ComparisonWindow(3).push(2)
    assert w.fifo_order == (2.0,)
    assert w.ordered_view == (2.0,)


def test_push_evicts_oldest():
    w = ComparisonWindow(3, [3, 1, 2]).push(5)
    assert w.fifo_order == (1.0, 2.0, 5.0)
    assert w.ordered_view == (5.0, 2.0, 1.0)


def test_duplicates_retained():
    w = ComparisonWindow(3)
    for _ in range(3):
        w.push(1)
    assert w.ordered_view == (1.0, 1.0, 1.0)


def test_negative_size_rejected():
    with pytest.raises(ValueError):
        ComparisonWindow(2).push(-1.0)


def test_order_statistic_sentinels():
    w = ComparisonWindow(3, [3, 1, 2])
    assert w.order_statistic(0) == np.inf
    assert [w.order_statistic(r) for r in (1, 2, 3)] == [3.0, 2.0, 1.0]
    assert w.order_statistic(4) == 0.0


@given(st.integers(0, 12), st.lists(sizes_st, max_size=60))
def test_window_invariants(cap, pushes):
    w = ComparisonWindow(cap)
    for i, b in enumerate(pushes):
        w.push(b)
        assert len(w) == min(i + 1, cap)
        assert sorted(w.fifo_order, reverse=True) == list(w.ordered_view)
    if cap:
        assert list(w.fifo_order) == [float(b) for b in pushes[-cap:]]


# --- classification ----------------------------------------------------------------


def test_classify_examples():
    assert classify(ComparisonWindow(3, [3, 1, 2]), 2.5) == 1
    assert class_labels(3)[1] == "L"
    assert classify(ComparisonWindow.zeros(3), 7) == 0
    assert classify(ComparisonWindow(3, [2, 2, 1]), 2) == 0
    assert classify(ComparisonWindow(0), 123.0) == 0


def test_class_labels():
    assert class_labels(3) == ["XL", "L", "M", "S"]
    assert class_labels(1) == ["C0", "C1"]


def test_half_open_interval_rule():
    # k is the class with B~_(k+1) <= size < B~_k, sentinels inf and 0
    rng = np.random.default_rng(0)
    for _ in range(2000):
        m = int(rng.integers(1, 6))
        w = ComparisonWindow(m, rng.integers(0, 5, m).astype(float))
        b = float(rng.integers(0, 6))
        k = classify(w, b)
        assert w.order_statistic(k + 1) <= b < w.order_statistic(k)


def test_classify_matches_brute_force_recount():
    rng = np.random.default_rng(1)
    for _ in range(10**5 // 10):
        m = int(rng.integers(0, 8))
        vals = rng.integers(0, 6, m).astype(float) if rng.random() < 0.5 else rng.random(m)
        w = ComparisonWindow(m, vals)
        for b in rng.choice(np.concatenate([vals, rng.random(3) * 6]), size=min(10, m + 3)):
            assert classify(w, b) == int((vals > b).sum())


def test_refined_examples():
    w = ComparisonWindow(4, [9, 7, 5, 3])
    assert classify_refined(w, 2, 2, 6) == 1
    assert classify_refined(w, 2, 2, 9) == 0
    with pytest.raises(ValueError):
        classify_refined(w, 2, 0, 1)


@given(st.lists(sizes_st, min_size=3, max_size=3), sizes_st)
def test_refined_with_l1_is_classify(window, size):
    w = ComparisonWindow(3, window)
    assert classify_refined(w, 3, 1, size) == classify(w, size)


@settings(max_examples=60)
@given(
    st.integers(0, 5),
    st.integers(1, 4),
    st.lists(st.integers(0, 5).map(float), min_size=1, max_size=80),
    st.sampled_from(["zeros", "explicit"]),
)
def test_stream_matches_window_reference(m, l, sizes, init):
    cap = m * l
    start = [0.0] * cap if init == "zeros" else [float((3 * i) % 5) for i in range(cap)]
    fast = classify_stream(np.array(sizes), m, l, init="zeros" if init == "zeros" else np.array(start))
    w = ComparisonWindow(cap, start)
    slow = []
    for b in sizes:
        slow.append(classify_refined(w, m, l, b))
        w.push(b)
    assert fast.tolist() == slow


def test_stream_prefill_needs_law():
    with pytest.raises(ValueError):
        classify_stream(np.ones(3), 2, 1, init="prefill")
    with pytest.raises(ValueError):
        classify_stream(np.ones(3), 2, 1, init=np.ones(3))
    with pytest.raises(ValueError):
        classify_stream(np.ones(3), 2, 1, init="bogus")


def test_prefill_is_reproducible():
    d = Pareto(1.5)
    x = sample_sizes(d, RngStream(2), 1000)
    a = classify_stream(x, 3, 2, "prefill", d, RngStream(2, 0, (2,)))
    b = classify_stream(x, 3, 2, "prefill", d, RngStream(2, 0, (2,)))
    assert np.array_equal(a, b)


def test_class_fractions_are_uniform():
    n = 10**6
    x = sample_sizes(Pareto(1.44), RngStream(5), n)
    frac = np.bincount(classify_stream(x, 3), minlength=4) / n
    assert np.all(np.abs(frac - 0.25) < 0.003)


# --- error rate ----------------------------------------------------------------------


def test_concatenate_keeps_arrival_order_within_class():
    out = concatenate_by_class([5, 1, 4, 2], [1, 0, 1, 0], 1)
    assert out.tolist() == [1, 2, 5, 4]


def test_error_rate_constant_input_is_zero():
    x = np.full(500, 2.0)
    assert error_rate(x, classify_stream(x, 3, 2), 3, 2) == 0.0


def test_error_rate_single_job():
    assert error_rate([3.0], [0], 1) == 0.0


def test_error_rate_perfect_split():
    x = np.array([6.0, 1.0, 5.0, 0.5])
    assert error_rate(x, [0, 1, 0, 1], 1) == 0.0
    assert error_rate(x, [1, 0, 1, 0], 1) == 1.0
    # right classes, but arrival order inside a class is not sorted
    assert error_rate(np.array([5.0, 1.0, 6.0, 0.5]), [0, 1, 0, 1], 1) == 0.5


def test_error_rate_errors():
    with pytest.raises(ValueError):
        error_rate([1.0, 2.0], [0], 1)
    with pytest.raises(ValueError):
        error_rate([], [], 1)
    with pytest.raises(ValueError):
        error_rate([1.0], [2], 1)


def test_error_rate_two_values_pin():
    d = DiscreteFinite((2.0, 1.0), (0.5, 0.5))
    s = RngStream(2024)
    x = sample_sizes(d, s.substream(1), 10**4)
    cls = classify_stream(x, 5, 64, "prefill", d, s.substream(2))
    eta = error_rate(x, cls, 5, 64)
    assert eta < 0.02
    assert eta == pytest.approx(0.0025, abs=0.0025)


def test_error_rate_falls_with_l():
    d = DiscreteFinite((4.0, 3.0, 2.0, 1.0), (0.25,) * 4)
    med = []
    for l in (1, 8, 64):
        etas = []
        for r in range(7):
            s = RngStream(77, r)
            x = sample_sizes(d, s.substream(1), 20000)
            etas.append(error_rate(x, classify_stream(x, 5, l, "prefill", d, s.substream(2)), 5, l))
        med.append(np.median(etas))
    assert med[0] > med[1] > med[2]
