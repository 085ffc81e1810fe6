"""
Class workloads under comparison-based priority
===============================================

Split each arrival into one of two classes with a window of m = 1 and serve
the small class (k = 1) first.  The big class sees a server slowed down by
everything above it; the small class sees an empty system.
"""

import numpy as np

from compsched import ComparisonSP, Pareto, RngStream, simulate_trace
from compsched.engine import class_stream, run_class_in_isolation
from compsched.inputs import Poisson, interarrivals, sample_sizes
from compsched.metrics import empirical_tail, theory_workload_tail
from compsched.oracle import class_mean_quadrature

dist, n, mean_t = Pareto(2.0), 1_000_000, 4.0  # load 0.5
s = RngStream(21)
arrival = np.cumsum(interarrivals(Poisson(1 / mean_t), s.substream(0), n))
size = sample_sizes(dist, s.substream(1), n)

sp = simulate_trace(arrival, size, ComparisonSP(1))
means = [class_mean_quadrature(dist, 1, k) for k in (0, 1)]
print("class means:", np.round(means, 4), " sum:", round(sum(means), 6))

warm = n // 5
grid = np.array([1.0, 3.0, 10.0, 30.0, 100.0])
wl0 = empirical_tail(sp.workload[warm:, 0], grid).survival
theo0 = theory_workload_tail(dist, 1, 0, 1.0, mean_t, "static_priority", means, grid)
print(f"\n{'x':>6} {'class 0':>10} {'formula':>10}")
for g, e, t in zip(grid, wl0, theo0):
    print(f"{g:6.0f} {e:10.3e} {t:10.3e}")

# the top class never waits for anyone, so its workload is the isolation one
iso = run_class_in_isolation(arrival, class_stream(size, sp.classes, 1), 1.0)
print("\nclass 1 path equals isolation:", np.allclose(sp.workload[:, 1], iso.workload[:, 0]))
